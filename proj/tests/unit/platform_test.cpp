#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "agriflow/error.hpp"
#include "agriflow/platform.hpp"
#include "fixtures.hpp"

using namespace agriflow;
using namespace agriflow::testkit;
using namespace std::chrono_literals;
using engine::InstanceStatus;

namespace {

const Timestamp kDeployAt = *parse_timestamp("2025-04-30T06:00:00Z");

PlatformOptions simulated() {
  PlatformOptions o;
  o.simulated_start = kDeployAt;
  return o;
}

std::string weather_only() {
  return process_xml(R"(<bpmn:startEvent id="s"/>
    <bpmn:serviceTask id="w" agri:connector="weather.forecast"><bpmn:extensionElements>
      <agri:input name="location" value="orphanos-vineyard"/><agri:input name="date" variable="start_date"/>
      <agri:output name="t_max" variable="t_max"/></bpmn:extensionElements></bpmn:serviceTask>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="w"/><bpmn:sequenceFlow id="f2" sourceRef="w" targetRef="e"/>)",
                     "weather_only");
}

std::string timer_process(const std::string& cycle, const std::string& id) {
  return process_xml(R"(<bpmn:startEvent id="s"><bpmn:timerEventDefinition><bpmn:timeCycle>)" + cycle +
                         R"(</bpmn:timeCycle></bpmn:timerEventDefinition></bpmn:startEvent>
    <bpmn:endEvent id="e"/><bpmn:sequenceFlow id="f" sourceRef="s" targetRef="e"/>)",
                     id);
}

std::size_t count_kind(const Platform& p, store::EventKind kind) {
  store::HistoryFilter f;
  f.kind = kind;
  return p.history(f).size();
}

engine::Actor actor(const std::string& user, Role role) { return engine::Actor{user, {role}}; }

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("agriflow-platform-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(Scheduler, HealthyJobDeliversForecast) {
  Platform p(simulated());
  p.deploy(weather_only(), "manager");
  const std::string id = p.start("weather_only", {}, "manager");
  const auto outcomes = p.run_due_jobs();
  ASSERT_EQ(outcomes.size(), 1u);
  EXPECT_TRUE(outcomes[0].success);
  EXPECT_EQ(outcomes[0].connector, "weather.forecast");
  const double t_max = std::get<double>(outcomes[0].outputs.at("t_max"));
  const auto expected = conn::simulate_weather({}, kDeployAt);
  EXPECT_EQ(t_max, expected.t_max);
  p.read([&](const engine::RuntimeState& s) {
    EXPECT_EQ(s.instances.at(id).status, InstanceStatus::kCompleted);
    EXPECT_EQ(std::get<double>(s.instances.at(id).variables.at("t_max")), t_max);
  });
}

TEST(Scheduler, RetrySpacingDoublesFromThirtySeconds) {
  PlatformOptions o = simulated();
  o.engine.max_attempts = 5;
  Platform p(o);
  p.deploy(weather_only(), "manager");
  p.connectors().inject_fault("weather.forecast", {0, true});
  const std::string id = p.start("weather_only", {}, "manager");
  const auto outcomes = p.advance_to(kDeployAt + 1h);
  ASSERT_EQ(outcomes.size(), 5u);
  store::HistoryFilter f;
  f.kind = store::EventKind::kJobFailed;
  const auto failures = p.history(f);
  ASSERT_EQ(failures.size(), 5u);
  for (std::size_t k = 1; k < failures.size(); ++k) {
    const auto gap = failures[k].at - failures[k - 1].at;
    EXPECT_EQ(gap, std::chrono::seconds(30LL << (k - 1))) << "between attempts " << k << " and " << k + 1;
  }
  for (std::size_t k = 0; k + 1 < outcomes.size(); ++k) EXPECT_FALSE(outcomes[k].terminal);
  EXPECT_TRUE(outcomes.back().terminal);
  p.read([&](const engine::RuntimeState& s) {
    const auto& inst = s.instances.at(id);
    EXPECT_EQ(inst.status, InstanceStatus::kFailed);
    EXPECT_NE(inst.failure.find("weather.forecast"), std::string::npos) << inst.failure;
    EXPECT_TRUE(s.jobs.empty());
  });
}

TEST(Scheduler, FailTwiceThenSucceed) {
  Platform p(simulated());
  p.deploy(weather_only(), "manager");
  p.connectors().inject_fault("weather.forecast", {2, false});
  const std::string id = p.start("weather_only", {}, "manager");
  const auto outcomes = p.advance_to(kDeployAt + 10min);
  ASSERT_EQ(outcomes.size(), 3u);
  EXPECT_FALSE(outcomes[0].success);
  EXPECT_FALSE(outcomes[1].success);
  EXPECT_TRUE(outcomes[2].success);
  EXPECT_EQ(outcomes[2].attempt, 3);
  EXPECT_EQ(p.connectors().calls("weather.forecast"), 3);
  p.read([&](const auto& s) { EXPECT_EQ(s.instances.at(id).status, InstanceStatus::kCompleted); });
}

TEST(Scheduler, AlwaysFailingExhaustsThreeAttempts) {
  Platform p(simulated());
  p.deploy(weather_only(), "manager");
  p.connectors().inject_fault("weather.forecast", {0, true});
  const std::string id = p.start("weather_only", {}, "manager");
  const auto outcomes = p.advance_to(kDeployAt + 1h);
  ASSERT_EQ(outcomes.size(), 3u);
  EXPECT_TRUE(outcomes[2].terminal);
  p.read([&](const auto& s) {
    EXPECT_EQ(s.instances.at(id).status, InstanceStatus::kFailed);
    EXPECT_NE(s.instances.at(id).failure.find("after 3 attempts"), std::string::npos);
  });
}

TEST(Scheduler, DailyCycleOverThirtyOneDays) {
  Platform p(simulated());
  p.deploy(timer_process("R/P1D", "daily"), "manager");
  EXPECT_TRUE(p.advance_to(kDeployAt).empty());  // zero time, zero starts
  EXPECT_EQ(count_kind(p, store::EventKind::kInstanceStarted), 0u);
  const auto outcomes = p.advance_to(kDeployAt + std::chrono::days(31));
  EXPECT_EQ(outcomes.size(), 31u);
  EXPECT_EQ(count_kind(p, store::EventKind::kInstanceStarted), 31u);
  // First firing one full period after deployment.
  store::HistoryFilter f;
  f.kind = store::EventKind::kInstanceStarted;
  EXPECT_EQ(p.history(f).front().at, kDeployAt + std::chrono::days(1));
}

TEST(Scheduler, YearlyCycleFiresOncePerYear) {
  Platform p(simulated());
  p.deploy(annual_xml(), "manager");
  p.advance_to(kDeployAt + std::chrono::days(364));
  EXPECT_EQ(count_kind(p, store::EventKind::kInstanceStarted), 0u);
  p.advance_to(kDeployAt + std::chrono::days(365));
  EXPECT_EQ(count_kind(p, store::EventKind::kInstanceStarted), 1u);
  p.read([](const auto& s) {
    ASSERT_EQ(s.instances.size(), 1u);
    EXPECT_EQ(s.instances.begin()->second.trigger, "timer");
  });
}

TEST(Scheduler, BoundedCycleStopsAfterRepetitions) {
  Platform p(simulated());
  p.deploy(timer_process("R3/PT1H", "thrice"), "manager");
  p.advance_to(kDeployAt + 24h);
  EXPECT_EQ(count_kind(p, store::EventKind::kInstanceStarted), 3u);
  p.read([](const auto& s) { EXPECT_TRUE(s.jobs.empty()); });
}

TEST(Scheduler, OnlyNewestVersionIsTriggered) {
  Platform p(simulated());
  p.deploy(timer_process("R/P1D", "daily"), "manager");
  p.advance_to(kDeployAt + 12h);
  p.deploy(timer_process("R/P1D", "daily"), "manager");
  p.advance_to(kDeployAt + std::chrono::days(3));
  store::HistoryFilter f;
  f.kind = store::EventKind::kInstanceStarted;
  const auto starts = p.history(f);
  ASSERT_EQ(starts.size(), 2u);  // v2 armed at +12h fires at +36h and +60h
  for (const auto& r : starts) EXPECT_EQ(r.payload.at("version"), 2);
}

TEST(Scheduler, TimerDeterminism) {
  auto run = [] {
    Platform p(simulated());
    p.deploy(timer_process("R/PT6H", "quarter"), "manager");
    for (int h : {5, 7, 30, 30, 49}) p.advance_to(kDeployAt + std::chrono::hours(h));
    store::HistoryFilter f;
    f.kind = store::EventKind::kInstanceStarted;
    std::string out;
    for (const auto& r : p.history(f)) out += store::encode_record(r) + "\n";
    return out;
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 8);
}

TEST(Scheduler, DailyScenarioDayParksAtHumanTasks) {
  Platform p(simulated());
  p.deploy(daily_xml(), "manager");
  p.advance_to(kDeployAt + std::chrono::days(1));
  p.read([](const engine::RuntimeState& s) {
    ASSERT_EQ(s.instances.size(), 1u);
    const auto& inst = s.instances.begin()->second;
    EXPECT_EQ(inst.status, InstanceStatus::kRunning);
    std::set<std::string> pending;
    for (const auto& [id, t] : s.tasks) {
      if (t.pending()) pending.insert(t.node);
    }
    EXPECT_EQ(pending, (std::set<std::string>{"ut_assessment", "ut_define_qc"}));
    EXPECT_TRUE(inst.variables.count("t_max"));
    EXPECT_TRUE(inst.variables.count("iot_temperature"));
    EXPECT_TRUE(std::holds_alternative<DocumentRef>(inst.variables.at("satellite_scene")));
    // Only the timer job for the next day remains.
    ASSERT_EQ(s.jobs.size(), 1u);
    EXPECT_EQ(s.jobs.begin()->second.kind, engine::JobKind::kTimerFire);
  });
  EXPECT_TRUE(p.replay_matches());
}

TEST(Scheduler, NoDuplicateJobDelivery) {
  Platform p(simulated());
  p.deploy(daily_xml(), "manager");
  p.connectors().inject_fault("iot.daily", {1, false});
  p.advance_to(kDeployAt + std::chrono::days(3));
  std::set<std::string> completed;
  store::HistoryFilter f;
  f.kind = store::EventKind::kJobCompleted;
  for (const auto& r : p.history(f)) {
    EXPECT_TRUE(completed.insert(r.payload.at("job_id").get<std::string>()).second) << r.payload.dump();
  }
  EXPECT_EQ(completed.size(), 3u * 4u);  // satellite, weather, disease, iot per day
}

TEST(Platform, ConcurrentCompletionHasOneWinner) {
  Platform p(simulated());
  p.deploy(process_xml(R"(<bpmn:startEvent id="s"/><bpmn:userTask id="t" agri:candidateRole="FieldWorker">
      <bpmn:extensionElements><agri:formField name="n" type="integer" required="true"/></bpmn:extensionElements>
      </bpmn:userTask><bpmn:endEvent id="e"/>
      <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="t"/><bpmn:sequenceFlow id="f2" sourceRef="t" targetRef="e"/>)"),
           "manager");
  for (int round = 0; round < 20; ++round) {
    const std::string id = p.start("p", {}, "manager");
    const std::string task = p.read([&](const auto& s) {
      for (const auto& [tid, t] : s.tasks) {
        if (t.instance_id == id) return tid;
      }
      return std::string();
    });
    std::atomic<int> wins{0}, conflicts{0};
    std::vector<std::thread> threads;
    for (int k = 0; k < 8; ++k) {
      threads.emplace_back([&, k] {
        try {
          p.complete(task, {{"n", std::int64_t{k}}}, actor("w" + std::to_string(k), Role::kFieldWorker));
          ++wins;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kConflict) ++conflicts;
        }
      });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(conflicts.load(), 7);
  }
  EXPECT_TRUE(p.replay_matches());
}

TEST(Platform, ConcurrentStartsGetDenseSequenceNumbers) {
  Platform p(simulated());
  p.deploy(timer_process("R/P1D", "daily"), "manager");
  std::vector<std::thread> threads;
  for (int k = 0; k < 8; ++k) {
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) p.start("daily", {}, "manager");
    });
  }
  for (auto& t : threads) t.join();
  std::int64_t expected = 1;
  store::HistoryFilter all;
  for (const auto& r : p.history(all)) EXPECT_EQ(r.sequence_no, expected++);
  EXPECT_EQ(count_kind(p, store::EventKind::kInstanceStarted), 200u);
}

TEST(Platform, IngestIsContentAddressedAndIdempotent) {
  Platform p(simulated());
  const std::string report = "AGRIREPORT 1\nkind: qc.analysis\nfields: sugar_content:decimal, acidity:decimal\n"
                             "sugar_content = 21.4\nacidity = 6.1\n";
  const IngestResult a = p.ingest_file("qc.analysis", report, {{"sample", "S1"}}, "qc-user");
  EXPECT_FALSE(a.duplicate);
  EXPECT_EQ(a.document.id.rfind("sha256:", 0), 0u);
  EXPECT_EQ(std::get<double>(a.variables.at("sugar_content")), 21.4);
  const auto before = p.journal_length();
  const IngestResult b = p.ingest_file("qc.analysis", report, {}, "someone-else");
  EXPECT_TRUE(b.duplicate);
  EXPECT_EQ(b.document, a.document);
  EXPECT_EQ(p.journal_length(), before);

  try {
    p.ingest_file("qc.analysis", "AGRIREPORT 1\nkind: qc.analysis\nfields: sugar_content:decimal\n", {}, "qc-user");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_FALSE(e.details().empty());
  }
  EXPECT_THROW(p.ingest_file("weather.forecast", report, {}, "qc-user"), Error);
  EXPECT_THROW(p.ingest_file("qc.analysis", std::string("\xff\xfe", 2), {}, "qc-user"), Error);
  EXPECT_THROW(p.ingest_file("lab.results", report, {}, "qc-user"), Error);
  EXPECT_EQ(p.journal_length(), before);
}

TEST(Platform, Utf8Validation) {
  EXPECT_TRUE(valid_utf8("plain ascii"));
  EXPECT_TRUE(valid_utf8("Ασύρτικο"));
  EXPECT_TRUE(valid_utf8("\xF0\x9F\x8D\x87"));       // grapes
  EXPECT_FALSE(valid_utf8("\xC0\xAF"));              // overlong
  EXPECT_FALSE(valid_utf8("\xED\xA0\x80"));          // surrogate
  EXPECT_FALSE(valid_utf8("\xE2\x82"));              // truncated
  EXPECT_FALSE(valid_utf8("\xF4\x90\x80\x80"));      // past U+10FFFF
}

TEST(Platform, ForwardingUsesSavedContactsOnce) {
  // Raise a notification through a connector job: heat alert on a forced day.
  PlatformOptions o = simulated();
  o.simulation.overrides["2025-05-01"].t_max = 36.2;
  Platform hot(o);
  hot.deploy(daily_xml(), "manager");
  hot.advance_to(kDeployAt + std::chrono::days(1));
  const std::string task = hot.read([](const auto& s) {
    for (const auto& [id, t] : s.tasks) {
      if (t.node == "ut_assessment") return id;
    }
    return std::string();
  });
  const std::string qc = hot.read([](const auto& s) {
    for (const auto& [id, t] : s.tasks) {
      if (t.node == "ut_define_qc") return id;
    }
    return std::string();
  });
  const auto viti = actor("viti", Role::kAgronomist);
  hot.complete(task, {{"assessment_notes", std::string("leaves curling")}}, viti);
  hot.complete(qc, {{"qc_needed", false}}, viti);
  hot.run_due_jobs();
  const std::string ntf = hot.read([](const auto& s) {
    EXPECT_EQ(s.notifications.size(), 1u);
    return s.notifications.begin()->first;
  });
  hot.read([&](const auto& s) {
    const auto& n = s.notifications.at(ntf);
    EXPECT_EQ(n.event, "heat");
    EXPECT_EQ(n.recipient_role, "Agronomist");
    EXPECT_EQ(n.source, "connector");
  });

  hot.add_contact("viti", {"Dr. Pappas", "pappas@agro.example"});
  EXPECT_THROW(hot.add_contact("viti", {"Duplicate", "pappas@agro.example"}), Error);
  try {
    hot.forward(ntf, {"stranger@example.org"}, "viti");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  EXPECT_EQ(hot.forward(ntf, {"pappas@agro.example"}, "viti").forwarded_to.size(), 1u);
  const auto len = hot.journal_length();
  EXPECT_EQ(hot.forward(ntf, {"pappas@agro.example"}, "viti").forwarded_to.size(), 1u);
  EXPECT_EQ(hot.journal_length(), len);
  hot.mark_read(ntf);
  hot.mark_read(ntf);
  EXPECT_EQ(hot.journal_length(), len + 1);
  EXPECT_TRUE(hot.replay_matches());
}

TEST(Platform, ReopenContinuesJournalAndRestoresPendingWork) {
  TempDir dir;
  PlatformOptions o = simulated();
  o.journal_path = dir.path / "journal.ndjson";
  o.fsync = false;
  std::string live;
  std::int64_t length = 0;
  {
    Platform p(o);
    p.deploy(daily_xml(), "manager");
    p.advance_to(kDeployAt + std::chrono::days(1));
    live = p.canonical_state();
    length = p.journal_length();
  }
  Platform again(o);
  EXPECT_EQ(again.canonical_state(), live);
  EXPECT_EQ(again.journal_length(), length);
  // The pending timer survives the restart and keeps the daily cadence.
  again.advance_to(kDeployAt + std::chrono::days(2));
  EXPECT_EQ(count_kind(again, store::EventKind::kInstanceStarted), 2u);
  EXPECT_TRUE(again.replay_matches());
}

TEST(Platform, SnapshotAcceleratesRecovery) {
  TempDir dir;
  PlatformOptions o = simulated();
  o.journal_path = dir.path / "journal.ndjson";
  o.snapshot_path = dir.path / "snapshot.json";
  o.fsync = false;
  std::string live;
  {
    Platform p(o);
    p.deploy(daily_xml(), "manager");
    p.advance_to(kDeployAt + std::chrono::days(1));
    p.write_snapshot(*o.snapshot_path);
    p.advance_to(kDeployAt + std::chrono::days(2));
    live = p.canonical_state();
  }
  Platform again(o);
  EXPECT_GT(again.replayed_from_snapshot(), 0);
  EXPECT_EQ(again.canonical_state(), live);

  // A snapshot of another history is ignored, not trusted.
  PlatformOptions other = o;
  other.journal_path = dir.path / "other.ndjson";
  {
    Platform p(other);
    p.deploy(timer_process("R/P1D", "daily"), "manager");
  }
  Platform fresh(other);
  EXPECT_EQ(fresh.replayed_from_snapshot(), 0);
}

TEST(Platform, StorageFailureLeavesNoTrace) {
  Platform p(simulated());
  p.deploy(weather_only(), "manager");
  const std::string before = p.canonical_state();
  const auto length = p.journal_length();
  p.journal_for_testing().inject_failures(1);
  try {
    p.start("weather_only", {}, "manager");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStorage);
  }
  EXPECT_EQ(p.canonical_state(), before);
  EXPECT_EQ(p.journal_length(), length);
  EXPECT_NO_THROW(p.start("weather_only", {}, "manager"));
  EXPECT_TRUE(p.replay_matches());
}

TEST(Platform, DeploymentChecksConnectorsAndTimers) {
  Platform p(simulated());
  const std::string xml = process_xml(R"(<bpmn:startEvent id="s"/>
    <bpmn:serviceTask id="radar" agri:connector="weather.radar"/><bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="radar"/><bpmn:sequenceFlow id="f2" sourceRef="radar" targetRef="e"/>)");
  try {
    p.deploy(xml, "manager");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    ASSERT_EQ(e.details().size(), 1u);
    EXPECT_NE(e.details()[0].find("radar"), std::string::npos);
  }
  EXPECT_EQ(p.journal_length(), 0);
}

TEST(Platform, RealClockWorkerRunsJobs) {
  Platform p;  // real clock
  p.deploy(weather_only(), "manager");
  const std::string id = p.start("weather_only", {}, "manager");
  p.start_worker(std::chrono::milliseconds(5));
  for (int i = 0; i < 400; ++i) {
    if (p.read([&](const auto& s) { return s.instances.at(id).status; }) == InstanceStatus::kCompleted) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  p.stop_worker();
  p.read([&](const auto& s) { EXPECT_EQ(s.instances.at(id).status, InstanceStatus::kCompleted); });
  EXPECT_THROW(p.advance_to(p.clock().now() + 1h), Error);
}
