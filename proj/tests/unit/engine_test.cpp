#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "agriflow/engine/engine.hpp"
#include "agriflow/error.hpp"
#include "engine_harness.hpp"
#include "fixtures.hpp"
#include "random_definitions.hpp"

using namespace agriflow;
using namespace agriflow::engine;
using agriflow::testkit::EngineHarness;
using agriflow::testkit::process_xml;

namespace {

const char* kTaskOnly = R"(<bpmn:startEvent id="s"/><bpmn:userTask id="t" name="Do it" agri:candidateRole="FieldWorker">
  <bpmn:extensionElements><agri:formField name="notes" type="text" required="true"/>
  <agri:formField name="count" type="integer" required="false"/></bpmn:extensionElements></bpmn:userTask>
  <bpmn:endEvent id="e"/>
  <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="t"/><bpmn:sequenceFlow id="f2" sourceRef="t" targetRef="e"/>)";

// Heat gateway in isolation: start -> gw -> (heat | rain | quiet)
const char* kTriggers = R"(<bpmn:startEvent id="s"/>
  <bpmn:exclusiveGateway id="gw" default="f_quiet"/>
  <bpmn:endEvent id="e_heat"/><bpmn:endEvent id="e_rain"/><bpmn:endEvent id="e_quiet"/>
  <bpmn:sequenceFlow id="f0" sourceRef="s" targetRef="gw"/>
  <bpmn:sequenceFlow id="f_heat" sourceRef="gw" targetRef="e_heat"><bpmn:conditionExpression>t_max &gt; 35</bpmn:conditionExpression></bpmn:sequenceFlow>
  <bpmn:sequenceFlow id="f_rain" sourceRef="gw" targetRef="e_rain"><bpmn:conditionExpression>precipitation_total &gt; 6</bpmn:conditionExpression></bpmn:sequenceFlow>
  <bpmn:sequenceFlow id="f_quiet" sourceRef="gw" targetRef="e_quiet"/>)";

const char* kDiamond = R"(<bpmn:startEvent id="s"/><bpmn:parallelGateway id="fork"/>
  <bpmn:userTask id="a" agri:candidateRole="FieldWorker"><bpmn:extensionElements><agri:formField name="va" type="integer" required="true"/></bpmn:extensionElements></bpmn:userTask>
  <bpmn:userTask id="b" agri:candidateRole="FieldWorker"><bpmn:extensionElements><agri:formField name="vb" type="integer" required="true"/></bpmn:extensionElements></bpmn:userTask>
  <bpmn:parallelGateway id="join"/><bpmn:endEvent id="e"/>
  <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="fork"/>
  <bpmn:sequenceFlow id="f2" sourceRef="fork" targetRef="a"/><bpmn:sequenceFlow id="f3" sourceRef="fork" targetRef="b"/>
  <bpmn:sequenceFlow id="f4" sourceRef="a" targetRef="join"/><bpmn:sequenceFlow id="f5" sourceRef="b" targetRef="join"/>
  <bpmn:sequenceFlow id="f6" sourceRef="join" targetRef="e"/>)";

const char* kWeatherService = R"(<bpmn:startEvent id="s"/>
  <bpmn:serviceTask id="st_weather" agri:connector="weather.forecast"><bpmn:extensionElements>
    <agri:input name="location" value="orphanos-vineyard"/><agri:input name="date" variable="start_date"/>
    <agri:output name="t_max" variable="t_max"/><agri:output name="precipitation_total" variable="precipitation_total"/>
    <agri:output name="hail_expected" variable="hail_expected"/></bpmn:extensionElements></bpmn:serviceTask>
  <bpmn:endEvent id="e"/>
  <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="st_weather"/><bpmn:sequenceFlow id="f2" sourceRef="st_weather" targetRef="e"/>)";

Actor worker() { return Actor{"nikos", {Role::kFieldWorker}}; }
Actor viticulturist() { return Actor{"eleni", {Role::kAgronomist}}; }
Actor drone_operator() { return Actor{"petros", {Role::kDroneOperator}}; }

std::string chosen_flow(const EngineHarness& h, const std::string& instance, const std::string& gateway) {
  for (const auto& r : h.records) {
    if (r.kind == store::EventKind::kTokenMoved && r.instance_id == instance && r.payload.value("node", "") == gateway) {
      return r.payload.value("flow", "");
    }
  }
  return "";
}

std::multiset<std::string> positions(const Instance& inst) {
  std::multiset<std::string> out;
  for (const auto& [id, t] : inst.tokens) out.insert(t.node);
  return out;
}

void ingest(EngineHarness& h, const std::string& id, const VariableMap& vars = {}) {
  h.commit(store::EventKind::kFileIngested, std::nullopt,
           {{"document", id}, {"kind", "drone.report"}, {"content", "x"}, {"metadata", nlohmann::json::object()},
            {"variables", to_json(vars)}, {"uploaded_by", "petros"}});
}

}  // namespace

TEST(StartInstance, StartToEndCompletesImmediately) {
  EngineHarness h;
  h.deploy(process_xml(R"(<bpmn:startEvent id="s"/><bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f" sourceRef="s" targetRef="e"/>)"));
  const auto id = h.engine().start_instance("p", {}, "tester");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kCompleted);
  EXPECT_TRUE(h.state().tasks.empty());
  EXPECT_TRUE(h.instance(id).tokens.empty());
}

TEST(StartInstance, SingleUserTaskParks) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto id = h.engine().start_instance("p", {}, "tester");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kRunning);
  ASSERT_EQ(h.state().tasks.size(), 1u);
  const UserTask& t = h.state().tasks.begin()->second;
  EXPECT_EQ(t.state, TaskState::kCreated);
  EXPECT_EQ(t.node, "t");
  EXPECT_EQ(t.candidate_role, Role::kFieldWorker);
  EXPECT_EQ(t.form_fields.size(), 2u);
}

TEST(StartInstance, UnknownDefinitionIsNotFound) {
  EngineHarness h;
  try {
    h.engine().start_instance("nope", {}, "tester");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(StartInstance, ScenarioParksAtFourDailyEntryActivities) {
  EngineHarness h;
  h.deploy(testkit::daily_xml());
  const auto id = h.engine().start_instance("vineyard_daily", {}, "tester");
  const Instance& inst = h.instance(id);
  EXPECT_EQ(inst.status, InstanceStatus::kRunning);
  EXPECT_EQ(positions(inst),
            (std::multiset<std::string>{"ut_define_qc", "st_satellite", "ut_assessment", "st_weather"}));
  ASSERT_EQ(h.pending_tasks(id).size(), 2u);
  const auto jobs = h.pending_jobs(id);
  ASSERT_EQ(jobs.size(), 2u);
  std::set<std::string> connectors;
  for (const auto* j : jobs) connectors.insert(j->connector);
  EXPECT_EQ(connectors, (std::set<std::string>{"satellite.bands", "weather.forecast"}));
  EXPECT_EQ(std::get<std::string>(inst.variables.at("start_date")), "2025-05-01");
}

TEST(CompleteTask, AssessmentReachesJoinThenHeatGateway) {
  EngineHarness h;
  h.deploy(testkit::daily_xml());
  const auto id = h.engine().start_instance("vineyard_daily", {}, "tester");
  auto& eng = h.engine();

  eng.complete_task(h.pending_task_at(id, "ut_define_qc")->id, {{"qc_needed", false}}, viticulturist());
  for (const auto* job : h.pending_jobs(id)) {
    if (job->connector == "satellite.bands") {
      eng.complete_job(job->id, {{"ndvi_mean", 0.6}, {"ndmi_mean", 0.2}, {"osavi_mean", 0.5},
                                 {"scene", DocumentRef{"sha256:00"}}});
    }
  }
  // weather -> disease -> iot chain
  for (int i = 0; i < 3; ++i) {
    const auto jobs = h.pending_jobs(id);
    ASSERT_EQ(jobs.size(), 1u);
    const std::string c = jobs[0]->connector;
    VariableMap out;
    if (c == "weather.forecast") {
      out = {{"t_max", 36.2}, {"precipitation_total", 0.0}, {"hail_expected", false}, {"dew_point", 12.0},
             {"humidity", 40.0}, {"temperature", 28.0}};
    } else if (c == "disease.warning") {
      out = {{"warning", false}, {"pathogen", std::string("none")}};
    } else {
      out = {{"temperature", 27.0}, {"humidity", 45.0}, {"precipitation", 0.0}};
    }
    eng.complete_job(jobs[0]->id, out);
  }
  EXPECT_EQ(chosen_flow(h, id, "gw_heat"), "");  // still waiting on the assessment
  EXPECT_EQ(positions(h.instance(id)).count("join_daily"), 3u);

  eng.complete_task(h.pending_task_at(id, "ut_assessment")->id, {{"assessment_notes", std::string("ok")}},
                    viticulturist());
  EXPECT_EQ(chosen_flow(h, id, "gw_heat"), "flow_heat");
  EXPECT_EQ(std::get<std::string>(h.instance(id).variables.at("assessment_notes")), "ok");
}

TEST(CompleteTask, MissingRequiredFieldLeavesTaskPending) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const std::string task = h.pending_tasks(id)[0]->id;
  const auto before = canonical_text(h.state());
  try {
    h.engine().complete_task(task, {{"count", std::int64_t{3}}}, worker());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    ASSERT_EQ(e.details().size(), 1u);
    EXPECT_NE(e.details()[0].find("notes"), std::string::npos);
  }
  EXPECT_EQ(canonical_text(h.state()), before);
  EXPECT_TRUE(h.state().tasks.at(task).pending());
}

TEST(CompleteTask, WrongTypeAndUnknownFieldRejected) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const std::string task = h.pending_tasks(id)[0]->id;
  try {
    h.engine().complete_task(task, {{"notes", std::int64_t{1}}, {"extra", true}}, worker());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_EQ(e.details().size(), 2u);  // wrong type, unknown field
  }
}

TEST(CompleteTask, DoubleCompletionConflictsAndKeepsVariables) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const std::string task = h.pending_tasks(id)[0]->id;
  h.engine().complete_task(task, {{"notes", std::string("first")}}, worker());
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kCompleted);
  const VariableMap vars = h.instance(id).variables;
  try {
    h.engine().complete_task(task, {{"notes", std::string("second")}}, worker());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConflict);
  }
  EXPECT_EQ(h.instance(id).variables, vars);
}

TEST(CompleteTask, RoleMismatchForbidden) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto id = h.engine().start_instance("p", {}, "tester");
  try {
    h.engine().complete_task(h.pending_tasks(id)[0]->id, {{"notes", std::string("x")}}, viticulturist());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kForbidden);
  }
}

TEST(CompleteTask, ClaimRestrictsToAssignee) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const std::string task = h.pending_tasks(id)[0]->id;
  h.engine().claim_task(task, worker());
  EXPECT_EQ(h.state().tasks.at(task).state, TaskState::kAssigned);
  const Actor other{"maria", {Role::kFieldWorker}};
  EXPECT_THROW(h.engine().complete_task(task, {{"notes", std::string("x")}}, other), Error);
  h.engine().complete_task(task, {{"notes", std::string("x")}}, worker());
  EXPECT_EQ(h.state().tasks.at(task).completed_by, "nikos");
}

TEST(ExclusiveGateway, HeatAboveThresholdTakesHeatBranch) {
  EngineHarness h;
  h.deploy(process_xml(kTriggers));
  const auto id = h.engine().start_instance("p", {{"t_max", 36.2}, {"precipitation_total", 0.0}}, "tester");
  EXPECT_EQ(chosen_flow(h, id, "gw"), "f_heat");
}

TEST(ExclusiveGateway, BoundaryValuesTakeDefault) {
  EngineHarness h;
  h.deploy(process_xml(kTriggers));
  const auto id = h.engine().start_instance("p", {{"t_max", 35.0}, {"precipitation_total", 6.0}}, "tester");
  EXPECT_EQ(chosen_flow(h, id, "gw"), "f_quiet");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kCompleted);
}

TEST(ExclusiveGateway, FirstTrueConditionInDocumentOrderWins) {
  EngineHarness h;
  h.deploy(process_xml(kTriggers));
  const auto id = h.engine().start_instance("p", {{"t_max", 40.0}, {"precipitation_total", 20.0}}, "tester");
  EXPECT_EQ(chosen_flow(h, id, "gw"), "f_heat");
}

TEST(ExclusiveGateway, NoViableFlowFailsInstance) {
  EngineHarness h;
  h.deploy(process_xml(R"(<bpmn:startEvent id="s"/><bpmn:exclusiveGateway id="gw"/><bpmn:endEvent id="a"/><bpmn:endEvent id="b"/>
    <bpmn:sequenceFlow id="f0" sourceRef="s" targetRef="gw"/>
    <bpmn:sequenceFlow id="fa" sourceRef="gw" targetRef="a"><bpmn:conditionExpression>x &gt; 1</bpmn:conditionExpression></bpmn:sequenceFlow>
    <bpmn:sequenceFlow id="fb" sourceRef="gw" targetRef="b"><bpmn:conditionExpression>x &lt; 0</bpmn:conditionExpression></bpmn:sequenceFlow>)"));
  const auto id = h.engine().start_instance("p", {{"x", std::int64_t{0}}}, "tester");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kFailed);
  EXPECT_NE(h.instance(id).failure.find("no viable flow"), std::string::npos);
  EXPECT_EQ(h.records.back().kind, store::EventKind::kInstanceFailed);
}

TEST(ExclusiveGateway, UnboundVariableFailsInstance) {
  EngineHarness h;
  h.deploy(process_xml(kTriggers));
  const auto id = h.engine().start_instance("p", {}, "tester");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kFailed);
  EXPECT_NE(h.instance(id).failure.find("t_max"), std::string::npos);
}

TEST(ParallelGateway, ForkAddsTokenAndPartialJoinWaits) {
  EngineHarness h;
  h.deploy(process_xml(kDiamond));
  const auto id = h.engine().start_instance("p", {}, "tester");
  EXPECT_EQ(h.instance(id).tokens.size(), 2u);  // one token in, two out
  h.engine().complete_task(h.pending_task_at(id, "a")->id, {{"va", std::int64_t{1}}}, worker());
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kRunning);
  EXPECT_EQ(positions(h.instance(id)), (std::multiset<std::string>{"b", "join"}));
}

TEST(ParallelGateway, DiamondCompletionOrderDoesNotMatter) {
  std::string finals[2];
  for (int order = 0; order < 2; ++order) {
    EngineHarness h;
    h.deploy(process_xml(kDiamond));
    const auto id = h.engine().start_instance("p", {}, "tester");
    const std::string ta = h.pending_task_at(id, "a")->id;
    const std::string tb = h.pending_task_at(id, "b")->id;
    if (order == 0) {
      h.engine().complete_task(ta, {{"va", std::int64_t{1}}}, worker());
      h.engine().complete_task(tb, {{"vb", std::int64_t{2}}}, worker());
    } else {
      h.engine().complete_task(tb, {{"vb", std::int64_t{2}}}, worker());
      h.engine().complete_task(ta, {{"va", std::int64_t{1}}}, worker());
    }
    EXPECT_EQ(h.instance(id).status, InstanceStatus::kCompleted);
    finals[order] = canonical_text(h.state());
  }
  EXPECT_EQ(finals[0], finals[1]);
}

TEST(ParallelGateway, ConfluenceOverAllCompletionOrders) {
  // Four branches writing disjoint variables; every permutation ends with the
  // same variable map.
  std::string body = R"(<bpmn:startEvent id="s"/><bpmn:parallelGateway id="fork"/><bpmn:parallelGateway id="join"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f0" sourceRef="s" targetRef="fork"/><bpmn:sequenceFlow id="fe" sourceRef="join" targetRef="e"/>)";
  for (int i = 0; i < 4; ++i) {
    const std::string n = std::to_string(i);
    body += R"(<bpmn:userTask id="t)" + n + R"(" agri:candidateRole="FieldWorker"><bpmn:extensionElements><agri:formField name="v)" + n +
            R"(" type="integer" required="true"/></bpmn:extensionElements></bpmn:userTask>)";
    body += R"(<bpmn:sequenceFlow id="a)" + n + R"(" sourceRef="fork" targetRef="t)" + n + R"("/>)";
    body += R"(<bpmn:sequenceFlow id="b)" + n + R"(" sourceRef="t)" + n + R"(" targetRef="join"/>)";
  }
  std::vector<int> perm{0, 1, 2, 3};
  std::optional<VariableMap> reference;
  do {
    EngineHarness h;
    h.deploy(process_xml(body));
    const auto id = h.engine().start_instance("p", {}, "tester");
    for (int i : perm) {
      const std::string n = std::to_string(i);
      h.engine().complete_task(h.pending_task_at(id, "t" + n)->id, {{"v" + n, std::int64_t{i * 10}}}, worker());
    }
    ASSERT_EQ(h.instance(id).status, InstanceStatus::kCompleted);
    if (!reference) reference = h.instance(id).variables;
    EXPECT_EQ(h.instance(id).variables, *reference);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(SubProcess, EmptySubProcessPassesThrough) {
  EngineHarness h;
  h.deploy(process_xml(R"(<bpmn:startEvent id="s"/><bpmn:subProcess id="sp"><bpmn:startEvent id="ss"/><bpmn:endEvent id="se"/>
    <bpmn:sequenceFlow id="sf" sourceRef="ss" targetRef="se"/></bpmn:subProcess>
    <bpmn:userTask id="after" agri:candidateRole="FieldWorker"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="sp"/><bpmn:sequenceFlow id="f2" sourceRef="sp" targetRef="after"/>
    <bpmn:sequenceFlow id="f3" sourceRef="after" targetRef="e"/>)"));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const Instance& inst = h.instance(id);
  ASSERT_EQ(inst.tokens.size(), 1u);
  EXPECT_EQ(inst.tokens.begin()->second.node, "after");
  EXPECT_EQ(inst.tokens.begin()->second.scope, kRootScope);
  EXPECT_TRUE(inst.scopes.empty());
  ASSERT_EQ(inst.activities.size(), 2u);
  EXPECT_EQ(inst.activities[0].state, "completed");
}

TEST(SubProcess, DroneSensingStepsAndReportVisibleToViticulturist) {
  EngineHarness h;
  h.deploy(testkit::daily_xml());
  // Start directly with every daily input bound; drive to the drone decision.
  const auto id = h.engine().start_instance("vineyard_daily", {}, "tester");
  auto& eng = h.engine();
  eng.complete_task(h.pending_task_at(id, "ut_define_qc")->id, {{"qc_needed", false}}, viticulturist());
  eng.complete_task(h.pending_task_at(id, "ut_assessment")->id, {{"assessment_notes", std::string("ok")}},
                    viticulturist());
  while (!h.pending_jobs(id).empty()) {
    const Job* j = h.pending_jobs(id)[0];
    VariableMap out;
    if (j->connector == "weather.forecast") {
      out = {{"t_max", 25.0}, {"precipitation_total", 0.0}, {"hail_expected", false}, {"dew_point", 12.0},
             {"humidity", 40.0}, {"temperature", 20.0}};
    } else if (j->connector == "disease.warning") {
      out = {{"warning", true}, {"pathogen", std::string("downy mildew")}};
    } else if (j->connector == "satellite.bands") {
      out = {{"ndvi_mean", 0.6}, {"ndmi_mean", 0.2}, {"osavi_mean", 0.5}, {"scene", DocumentRef{"sha256:00"}}};
    } else if (j->connector == "iot.history") {
      out = {{"days", std::int64_t{5}}, {"temperature_mean", 20.0}, {"humidity_mean", 50.0},
             {"precipitation_total", 1.0}, {"records", std::string("")}};
    } else if (j->connector == "farm.history") {
      out = {{"last_irrigation", std::string("never")}, {"last_spraying", std::string("never")}};
    } else if (j->connector == "notify.alert") {
      out = {{"notification_id", std::string("ntf-x")}};
    } else {
      out = {{"temperature", 20.0}, {"humidity", 50.0}, {"precipitation", 0.0}};
    }
    eng.complete_job(j->id, out);
  }
  eng.complete_task(h.pending_task_at(id, "ut_review")->id, {{"drone_sensing", true}}, viticulturist());

  const char* steps[] = {"ut_drone_config", "ut_drone_mission", "ut_drone_debrief", "ut_drone_assess"};
  const char* fields[] = {"drone_configuration", "mission_plan", "debriefing_notes", "sensing_assessment"};
  for (int i = 0; i < 4; ++i) {
    const UserTask* t = h.pending_task_at(id, steps[i]);
    ASSERT_NE(t, nullptr) << steps[i];
    EXPECT_EQ(h.instance(id).tokens.at(t->token).scope.rfind("sp_drone#", 0), 0u);
    eng.complete_task(t->id, {{fields[i], std::string("done")}}, drone_operator());
  }
  ingest(h, "sha256:abc", {{"stressed_area_pct", 12.5}});
  eng.complete_task(h.pending_task_at(id, "ut_drone_report")->id, {{"drone_report", DocumentRef{"sha256:abc"}}},
                    drone_operator());

  const UserTask* read = h.pending_task_at(id, "ut_read_drone");
  ASSERT_NE(read, nullptr);
  EXPECT_EQ(h.instance(id).tokens.at(read->token).scope, kRootScope);
  EXPECT_EQ(std::get<DocumentRef>(h.instance(id).variables.at("drone_report")).id, "sha256:abc");
  EXPECT_EQ(std::get<double>(h.instance(id).variables.at("stressed_area_pct")), 12.5);
  EXPECT_EQ(std::count(read->display_variables.begin(), read->display_variables.end(), "drone_report"), 1);
}

TEST(ServiceTask, DispatchCarriesConnectorAndResolvedInputs) {
  EngineHarness h;
  h.deploy(process_xml(kWeatherService));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const auto jobs = h.pending_jobs(id);
  ASSERT_EQ(jobs.size(), 1u);
  EXPECT_EQ(jobs[0]->connector, "weather.forecast");
  EXPECT_EQ(std::get<std::string>(jobs[0]->inputs.at("date")), "2025-05-01");
  EXPECT_EQ(std::get<std::string>(jobs[0]->inputs.at("location")), "orphanos-vineyard");
  EXPECT_EQ(jobs[0]->due_at, h.now);
}

TEST(ServiceTask, ResultMergesAndAdvances) {
  EngineHarness h;
  h.deploy(process_xml(kWeatherService));
  const auto id = h.engine().start_instance("p", {}, "tester");
  h.engine().complete_job(h.pending_jobs(id)[0]->id,
                          {{"t_max", 36.2}, {"precipitation_total", 0.0}, {"hail_expected", false}});
  const Instance& inst = h.instance(id);
  EXPECT_EQ(inst.status, InstanceStatus::kCompleted);
  EXPECT_EQ(std::get<double>(inst.variables.at("t_max")), 36.2);
  EXPECT_EQ(std::get<bool>(inst.variables.at("hail_expected")), false);
  EXPECT_TRUE(h.state().jobs.empty());
}

TEST(ServiceTask, RetriesWithBackoffThenFailsNamingConnector) {
  EngineHarness h;
  h.deploy(process_xml(kWeatherService));
  const auto id = h.engine().start_instance("p", {}, "tester");
  const std::string job = h.pending_jobs(id)[0]->id;
  std::vector<Timestamp> due{h.state().jobs.at(job).due_at};
  h.engine().fail_job(job, "timeout");
  due.push_back(h.state().jobs.at(job).due_at);
  h.engine().fail_job(job, "timeout");
  due.push_back(h.state().jobs.at(job).due_at);
  EXPECT_EQ(due[1] - due[0], std::chrono::seconds(30));
  EXPECT_EQ(due[2] - due[1], std::chrono::seconds(60));
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kRunning);
  h.engine().fail_job(job, "timeout");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kFailed);
  EXPECT_NE(h.instance(id).failure.find("weather.forecast"), std::string::npos);
  EXPECT_TRUE(h.state().jobs.empty());
}

TEST(ServiceTask, UnresolvableInputFailsInstance) {
  EngineHarness h;
  h.deploy(process_xml(R"(<bpmn:startEvent id="s"/>
    <bpmn:serviceTask id="st" agri:connector="weather.forecast"><bpmn:extensionElements>
    <agri:input name="date" variable="no_such_var"/></bpmn:extensionElements></bpmn:serviceTask><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="st"/><bpmn:sequenceFlow id="f2" sourceRef="st" targetRef="e"/>)"));
  const auto id = h.engine().start_instance("p", {}, "tester");
  EXPECT_EQ(h.instance(id).status, InstanceStatus::kFailed);
  EXPECT_NE(h.instance(id).failure.find("no_such_var"), std::string::npos);
}

TEST(Deployment, RedeployIncrementsVersionAndRunningInstanceKeepsIt) {
  EngineHarness h;
  h.deploy(process_xml(kTaskOnly));
  const auto first = h.engine().start_instance("p", {}, "tester");
  h.deploy(process_xml(kTaskOnly));
  const auto second = h.engine().start_instance("p", {}, "tester");
  EXPECT_EQ(h.instance(first).version, 1);
  EXPECT_EQ(h.instance(second).version, 2);
  h.engine().complete_task(h.pending_tasks(first)[0]->id, {{"notes", std::string("x")}}, worker());
  EXPECT_EQ(h.instance(first).status, InstanceStatus::kCompleted);
}

TEST(Deployment, TimerArmedOnePeriodAfterDeploymentAndReplacedOnRedeploy) {
  EngineHarness h;
  h.deploy(testkit::annual_xml());
  ASSERT_EQ(h.state().jobs.size(), 1u);
  const Job& j = h.state().jobs.begin()->second;
  EXPECT_EQ(j.kind, JobKind::kTimerFire);
  EXPECT_EQ(format_timestamp(j.due_at), "2026-05-01T06:00:00Z");
  h.deploy(testkit::annual_xml());
  ASSERT_EQ(h.state().jobs.size(), 1u);
  EXPECT_EQ(h.state().jobs.begin()->second.version, 2);
}

TEST(EngineProperties, ReplayOfRecordsReproducesState) {
  EngineHarness h;
  h.deploy(process_xml(kDiamond));
  h.deploy(process_xml(kWeatherService, "w"));
  const auto a = h.engine().start_instance("p", {}, "tester");
  h.engine().start_instance("w", {}, "tester");
  h.engine().complete_task(h.pending_task_at(a, "b")->id, {{"vb", std::int64_t{2}}}, worker());
  RuntimeState replayed;
  for (const auto& r : h.records) apply(replayed, r);
  EXPECT_EQ(canonical_text(replayed), canonical_text(h.state()));
  // And the snapshot form restores to the same canonical text.
  EXPECT_EQ(canonical_text(state_from_canonical(canonical(h.state()))), canonical_text(h.state()));
}

TEST(EngineProperties, TokenConservationOnRandomDefinitions) {
  testkit::RandomDefinitionGenerator gen(4242, {3, 8, false, true, false});
  for (int i = 0; i < 60; ++i) {
    EngineHarness h;
    const std::string xml = gen.next_xml();
    const auto def = model::parse_definition(xml);
    h.deploy(xml);
    const auto id = h.engine().start_instance(def.id, {{"x", std::int64_t{i % 5}}, {"flag", i % 2 == 0}}, "tester");
    for (int guard = 0; guard < 50 && !h.pending_tasks(id).empty(); ++guard) {
      h.engine().complete_task(h.pending_tasks(id)[0]->id, {}, EngineHarness::superuser());
    }
    for (const auto& r : h.records) {
      if (r.kind != store::EventKind::kTokenMoved && r.kind != store::EventKind::kTaskCompleted) continue;
      const std::string node_id = r.payload.value("node", "");
      const model::FlowNode* node = node_id.empty() ? nullptr : def.find_node(node_id);
      if (node && (node->kind == model::NodeKind::kParallelGateway || node->kind == model::NodeKind::kEndEvent)) {
        continue;
      }
      const auto& move = r.payload.at("move");
      EXPECT_EQ(move.at("consume").size(), 1u) << r.payload.dump();
      EXPECT_EQ(move.at("produce").size(), 1u) << r.payload.dump();
    }
  }
}
