#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "agriflow/error.hpp"
#include "agriflow/model/process_definition.hpp"
#include "random_definitions.hpp"

using namespace agriflow;
using namespace agriflow::model;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scenario_xml() { return read_file(std::string(AGRIFLOW_SOURCE_DIR) + "/scenarios/vineyard_daily.bpmn"); }

const char* kMinimal = R"(<?xml version="1.0"?>
<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL"
                  xmlns:agri="http://agriflow.dev/schema/bpmn/1.0">
  <bpmn:process id="p" name="Minimal">
    <bpmn:startEvent id="s"/>
    <bpmn:userTask id="t" agri:candidateRole="FieldWorker"/>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="t"/>
    <bpmn:sequenceFlow id="f2" sourceRef="t" targetRef="e"/>
  </bpmn:process>
</bpmn:definitions>)";

std::string wrap(const std::string& body) {
  return std::string(R"(<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL" )") +
         R"(xmlns:agri="http://agriflow.dev/schema/bpmn/1.0"><bpmn:process id="p">)" + body +
         "</bpmn:process></bpmn:definitions>";
}

Error parse_error(const std::string& xml) {
  try {
    parse_definition(xml);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "definition unexpectedly parsed";
  return Error(ErrorCode::kInvalidArgument, "");
}

bool mentions(const Error& e, const std::string& needle) {
  for (const auto& d : e.details()) {
    if (d.find(needle) != std::string::npos) return true;
  }
  return false;
}

int count_subprocesses(const ProcessGraph& g) {
  int n = 0;
  for (const auto& node : g.nodes) {
    if (node.kind == NodeKind::kSubProcess) n += 1 + count_subprocesses(*node.child);
  }
  return n;
}

}  // namespace

TEST(ParseDefinition, MinimalStartTaskEnd) {
  const auto def = parse_definition(kMinimal);
  EXPECT_EQ(def.id, "p");
  EXPECT_EQ(def.graph.nodes.size(), 3u);
  EXPECT_EQ(def.graph.flows.size(), 2u);
  ASSERT_EQ(def.start_nodes.size(), 1u);
  EXPECT_EQ(def.start_nodes[0], "s");
  EXPECT_EQ(def.find_node("t")->candidate_role, Role::kFieldWorker);
}

TEST(ParseDefinition, DanglingFlowListsFlowId) {
  const auto e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/>
    <bpmn:sequenceFlow id="f_bad" sourceRef="s" targetRef="nowhere"/>)"));
  EXPECT_EQ(e.code(), ErrorCode::kValidation);
  EXPECT_TRUE(mentions(e, "f_bad"));
}

TEST(ParseDefinition, ScenarioHasThreeSubProcesses) {
  const auto def = parse_definition(scenario_xml());
  EXPECT_EQ(count_subprocesses(def.graph), 3);
}

TEST(ParseDefinition, MalformedXmlReportsLineAndColumn) {
  const auto e = parse_error("<bpmn:definitions xmlns:bpmn=\"x\">\n  <oops>\n</bpmn:definitions>");
  EXPECT_EQ(e.code(), ErrorCode::kSyntax);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
}

TEST(ParseDefinition, UnsupportedElementNamed) {
  const auto e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:boundaryEvent id="b"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/>)"));
  EXPECT_EQ(e.code(), ErrorCode::kUnsupported);
  EXPECT_TRUE(mentions(e, "boundaryEvent"));
}

TEST(ParseDefinition, ReportsEveryViolationNotJustFirst) {
  const auto e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:endEvent id="e"/><bpmn:userTask id="orphan" agri:candidateRole="FieldWorker"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/>
    <bpmn:sequenceFlow id="f2" sourceRef="ghost" targetRef="e"/>)"));
  EXPECT_TRUE(mentions(e, "ghost"));
  EXPECT_TRUE(mentions(e, "'orphan' is unreachable"));
  EXPECT_GE(e.details().size(), 3u);
}

TEST(ParseDefinition, LaneNameBecomesCandidateRole) {
  const auto def = parse_definition(wrap(R"(
    <bpmn:laneSet><bpmn:lane id="l1" name="Drone operator"><bpmn:flowNodeRef>t</bpmn:flowNodeRef></bpmn:lane></bpmn:laneSet>
    <bpmn:startEvent id="s"/><bpmn:userTask id="t"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="t"/><bpmn:sequenceFlow id="f2" sourceRef="t" targetRef="e"/>)"));
  EXPECT_EQ(def.find_node("t")->candidate_role, Role::kDroneOperator);
}

TEST(ParseDefinition, StructuralRules) {
  // end event with outgoing flow, start with incoming
  auto e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:endEvent id="e"/><bpmn:endEvent id="e2"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/><bpmn:sequenceFlow id="f2" sourceRef="e" targetRef="e2"/>
    <bpmn:sequenceFlow id="f3" sourceRef="e2" targetRef="s"/>)"));
  EXPECT_TRUE(mentions(e, "endEvent 'e' has outgoing"));
  EXPECT_TRUE(mentions(e, "startEvent 's' has incoming"));

  // no start event at all
  e = parse_error(wrap(R"(<bpmn:endEvent id="e"/>)"));
  EXPECT_TRUE(mentions(e, "no startEvent"));

  // duplicate ids across sub-process nesting
  e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:subProcess id="sp"><bpmn:startEvent id="s"/>
    <bpmn:endEvent id="se"/><bpmn:sequenceFlow id="sf" sourceRef="s" targetRef="se"/></bpmn:subProcess>
    <bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="sp"/>
    <bpmn:sequenceFlow id="f2" sourceRef="sp" targetRef="e"/>)"));
  EXPECT_TRUE(mentions(e, "duplicate node id 's'"));

  // sub-process needs one plain start and an end
  e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:subProcess id="sp"><bpmn:userTask id="x" agri:candidateRole="FieldWorker"/></bpmn:subProcess>
    <bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="sp"/>
    <bpmn:sequenceFlow id="f2" sourceRef="sp" targetRef="e"/>)"));
  EXPECT_TRUE(mentions(e, "exactly one plain startEvent"));
  EXPECT_TRUE(mentions(e, "at least one endEvent"));

  // timer shorter than a minute
  e = parse_error(wrap(R"(<bpmn:startEvent id="s"><bpmn:timerEventDefinition><bpmn:timeCycle>R/PT30S</bpmn:timeCycle>
    </bpmn:timerEventDefinition></bpmn:startEvent><bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/>)"));
  EXPECT_TRUE(mentions(e, "shorter than 1 minute"));

  // unknown role and bad condition
  e = parse_error(wrap(R"(<bpmn:startEvent id="s"/><bpmn:userTask id="t" agri:candidateRole="Astronaut"/>
    <bpmn:exclusiveGateway id="g"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="t"/><bpmn:sequenceFlow id="f2" sourceRef="t" targetRef="g"/>
    <bpmn:sequenceFlow id="f3" sourceRef="g" targetRef="e"><bpmn:conditionExpression>a &lt; b &lt; c</bpmn:conditionExpression></bpmn:sequenceFlow>)"));
  EXPECT_TRUE(mentions(e, "Astronaut"));
  EXPECT_TRUE(mentions(e, "chained comparison"));
}

TEST(ParseDefinition, ExclusiveGatewayFlowWithoutConditionOrDefaultRejected) {
  // Mutation of a valid fixture: strip each conditional flow's condition in turn.
  const std::string xml = scenario_xml();
  const std::string marker = "<bpmn:conditionExpression>";
  std::size_t pos = 0;
  int mutations = 0;
  while ((pos = xml.find(marker, pos)) != std::string::npos) {
    const std::size_t end = xml.find("</bpmn:conditionExpression>", pos);
    std::string mutated = xml;
    mutated.erase(pos, end + std::string("</bpmn:conditionExpression>").size() - pos);
    const auto e = parse_error(mutated);
    EXPECT_TRUE(mentions(e, "has neither condition nor default status")) << "mutation at " << pos;
    ++mutations;
    pos = end;
  }
  EXPECT_EQ(mutations, 7);
}

TEST(ParseDefinition, DeletingFlowOnUniquePathMakesNodeUnreachable) {
  // start -> a -> b -> end; deleting any flow strands everything downstream of it.
  const std::vector<std::string> flows = {
      R"(<bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="a"/>)",
      R"(<bpmn:sequenceFlow id="f2" sourceRef="a" targetRef="b"/>)",
      R"(<bpmn:sequenceFlow id="f3" sourceRef="b" targetRef="e"/>)"};
  const std::vector<std::string> stranded = {"a", "b", "e"};
  const std::string nodes = R"(<bpmn:startEvent id="s"/><bpmn:userTask id="a" agri:candidateRole="FieldWorker"/>
    <bpmn:userTask id="b" agri:candidateRole="FieldWorker"/><bpmn:endEvent id="e"/>)";
  for (std::size_t drop = 0; drop < flows.size(); ++drop) {
    std::string body = nodes;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      if (i != drop) body += flows[i];
    }
    const auto e = parse_error(wrap(body));
    EXPECT_TRUE(mentions(e, "'" + stranded[drop] + "' is unreachable")) << "dropped f" << drop + 1;
  }
}

TEST(SerializeDefinition, ScenarioRoundTripsIsomorphically) {
  const auto def = parse_definition(scenario_xml());
  const auto again = parse_definition(serialize_definition(def));
  std::string why;
  EXPECT_TRUE(testkit::isomorphic(def.graph, again.graph, &why)) << why;
}

TEST(SerializeDefinition, TimerCyclePreservedVerbatim) {
  const auto def = parse_definition(wrap(R"(<bpmn:startEvent id="s"><bpmn:timerEventDefinition>
    <bpmn:timeCycle>R/P1D</bpmn:timeCycle></bpmn:timerEventDefinition></bpmn:startEvent>
    <bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/>)"));
  EXPECT_NE(serialize_definition(def).find(">R/P1D<"), std::string::npos);
}

TEST(SerializeDefinition, RandomDefinitionsRoundTrip) {
  testkit::RandomDefinitionGenerator gen(1234, {.min_nodes = 3, .max_nodes = 8, .service_tasks = true,
                                                .subprocesses = true, .timers = true});
  for (int i = 0; i < 100; ++i) {
    const auto def = parse_definition(gen.next_xml());
    const auto again = parse_definition(serialize_definition(def));
    std::string why;
    ASSERT_TRUE(testkit::isomorphic(def.graph, again.graph, &why)) << why;
  }
}

TEST(ValidateConnectors, Cases) {
  const auto def = parse_definition(scenario_xml());
  const std::set<std::string> full = {"satellite.bands", "weather.forecast", "disease.warning", "iot.daily",
                                      "iot.history",     "farm.history",     "notify.alert"};
  EXPECT_TRUE(validate_connectors(def, full).empty());

  auto missing = full;
  missing.erase("weather.forecast");
  const auto violations = validate_connectors(def, missing);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_NE(violations[0].find("st_weather"), std::string::npos);

  EXPECT_TRUE(validate_connectors(parse_definition(kMinimal), {}).empty());
}

TEST(ValidateTimers, DateTimerMustBeInFuture) {
  const auto def = parse_definition(wrap(R"(<bpmn:startEvent id="s"><bpmn:timerEventDefinition>
    <bpmn:timeDate>2025-05-01T00:00:00Z</bpmn:timeDate></bpmn:timerEventDefinition></bpmn:startEvent>
    <bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="e"/>)"));
  EXPECT_TRUE(validate_timers(def, *parse_timestamp("2025-04-30")).empty());
  EXPECT_EQ(validate_timers(def, *parse_timestamp("2025-05-02")).size(), 1u);
}

TEST(TimeUtilities, DurationsAndCalendarArithmetic) {
  const auto d = parse_iso_duration("P1Y2M3DT4H5M6S");
  ASSERT_TRUE(d);
  EXPECT_EQ(format_iso_duration(*d), "P1Y2M3DT4H5M6S");
  const auto t = *parse_timestamp("2025-01-31T06:00:00Z");
  EXPECT_EQ(format_timestamp(add_duration(t, *parse_iso_duration("P1M"))), "2025-02-28T06:00:00Z");
  EXPECT_EQ(format_timestamp(add_duration(t, *parse_iso_duration("P1Y"))), "2026-01-31T06:00:00Z");
  EXPECT_EQ(format_timestamp(add_duration(t, *parse_iso_duration("P1D"), 31)), "2025-03-03T06:00:00Z");
  EXPECT_FALSE(parse_repeating_interval("R/P"));
  EXPECT_EQ(parse_repeating_interval("R5/PT1H")->repetitions, 5);
  EXPECT_FALSE(parse_timestamp("2025-02-30"));
}
