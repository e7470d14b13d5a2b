#include "agriflow/platform.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "agriflow/digest.hpp"
#include "agriflow/error.hpp"
#include "agriflow/model/process_definition.hpp"

namespace agriflow {

using engine::JobKind;
using nlohmann::json;
using store::EventKind;

namespace {

constexpr const char* kSnapshotFormat = "agriflow-snapshot 1";

std::string prefix_digest(const std::vector<store::EventRecord>& records, std::size_t n) {
  std::string text;
  for (std::size_t i = 0; i < n; ++i) text += store::encode_record(records[i]) + "\n";
  return sha256_hex(text);
}

std::string error_text(const Error& e) {
  std::string out = e.what();
  for (const auto& d : e.details()) out += "; " + d;
  return out;
}

}  // namespace

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      n = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      n = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      n = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + n >= s.size()) return false;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += n + 1;
  }
  return true;
}

Platform::Platform(PlatformOptions options)
    : options_(std::move(options)),
      clock_(options_.simulated_start ? sched::Clock::simulated(*options_.simulated_start) : sched::Clock::real()),
      engine_(
          state_, [this](EventKind k, std::optional<std::string> inst, json p) { commit(k, std::move(inst), std::move(p)); },
          [this] { return clock_.now(); }, options_.engine) {
  if (options_.register_simulators) conn::register_simulators(registry_, options_.simulation, options_.connector_kinds);

  if (options_.journal_path) {
    journal_ = store::Journal::open(*options_.journal_path, options_.fsync);
    break_ = journal_.break_point();
  }
  const auto& records = journal_.records();

  std::size_t from = 0;
  if (options_.snapshot_path && std::filesystem::exists(*options_.snapshot_path)) {
    std::ifstream in(*options_.snapshot_path);
    json snap;
    try {
      snap = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kStorage, std::string("unreadable snapshot: ") + e.what());
    }
    if (snap.value("format", "") != kSnapshotFormat) throw Error(ErrorCode::kStorage, "unknown snapshot format");
    const auto n = snap.at("sequence").get<std::int64_t>();
    // A snapshot ahead of the journal, or of a different history, is ignored.
    if (n <= static_cast<std::int64_t>(records.size()) &&
        snap.at("journal_sha256").get<std::string>() == prefix_digest(records, static_cast<std::size_t>(n))) {
      state_ = engine::state_from_canonical(snap.at("state"));
      from = static_cast<std::size_t>(n);
      snapshot_sequence_ = n;
    }
  }
  for (std::size_t i = from; i < records.size(); ++i) engine::apply(state_, records[i]);
  if (clock_.mode() == sched::ClockMode::kSimulated && !records.empty() && records.back().at > clock_.now()) {
    clock_.set(records.back().at);
  }

  if (options_.recover_on_open) {
    std::unique_lock lock(mu_);
    engine_.recover();
  }
}

Platform::~Platform() { stop_worker(); }

void Platform::commit(EventKind kind, std::optional<std::string> instance, json payload) {
  store::EventRecord r;
  r.kind = kind;
  r.instance_id = std::move(instance);
  r.payload = std::move(payload);
  r.at = clock_.now();
  r.sequence_no = journal_.append(r);
  try {
    engine::apply(state_, r);
  } catch (const Error& e) {
    dirty_ = true;
    throw Error(ErrorCode::kStorage, std::string("journaled record does not apply: ") + e.what());
  }
}

void Platform::heal() {
  if (!dirty_) return;
  engine_.recover();
  dirty_ = false;
}

template <class F>
decltype(auto) Platform::mutate(F&& f) {
  std::unique_lock lock(mu_);
  heal();
  try {
    return f();
  } catch (const Error& e) {
    // A failed append in the middle of an advancement leaves tokens to finish.
    if (e.code() == ErrorCode::kStorage) dirty_ = true;
    throw;
  }
}

DeployResult Platform::deploy(std::string_view xml, const std::string& user) {
  const model::ProcessDefinition def = model::parse_definition(xml);
  return mutate([&] {
    auto problems = model::validate_connectors(def, registry_.kinds(conn::Mode::kApiCall));
    for (auto& p : model::validate_timers(def, clock_.now())) problems.push_back(std::move(p));
    if (!problems.empty()) throw Error(ErrorCode::kValidation, "definition '" + def.id + "' cannot be deployed", problems);
    const int version = engine_.deploy(def, xml, user);
    return DeployResult{def.id, version, def.name};
  });
}

std::string Platform::start(const std::string& definition_id, const VariableMap& vars, const std::string& user) {
  return mutate([&] { return engine_.start_instance(definition_id, vars, user); });
}

void Platform::claim(const std::string& task_id, const engine::Actor& actor) {
  mutate([&] { engine_.claim_task(task_id, actor); });
}

void Platform::complete(const std::string& task_id, const VariableMap& values, const engine::Actor& actor) {
  mutate([&] { engine_.complete_task(task_id, values, actor); });
}

void Platform::terminate(const std::string& instance_id, const std::string& reason, const std::string& user) {
  mutate([&] { engine_.terminate(instance_id, reason, user); });
}

DocumentRef Platform::store_document(const std::string& kind, const std::string& content, const json& metadata,
                                     const VariableMap& variables, const std::string& user,
                                     const std::optional<std::string>& instance_id) {
  const DocumentRef ref{"sha256:" + sha256_hex(content)};
  mutate([&] {
    if (state_.documents.count(ref.id)) return;
    if (instance_id && !state_.instances.count(*instance_id)) {
      throw Error(ErrorCode::kNotFound, "unknown instance '" + *instance_id + "'");
    }
    commit(EventKind::kFileIngested, instance_id,
           {{"document", ref.id},
            {"kind", kind},
            {"content", content},
            {"metadata", metadata.is_object() ? metadata : json::object()},
            {"variables", to_json(variables)},
            {"uploaded_by", user}});
  });
  return ref;
}

IngestResult Platform::ingest_file(const std::string& kind, std::string_view bytes, const json& metadata,
                                   const std::string& user, const std::optional<std::string>& instance_id) {
  const conn::Connector* c = registry_.find(kind);
  if (!c) throw Error(ErrorCode::kNotFound, "unknown connector kind '" + kind + "'");
  if (c->descriptor().mode != conn::Mode::kFileUpload) {
    throw Error(ErrorCode::kValidation, "connector '" + kind + "' does not accept file uploads");
  }
  if (!valid_utf8(bytes)) throw Error(ErrorCode::kValidation, "uploaded file is not UTF-8 text");
  const std::string id = "sha256:" + sha256_hex(bytes);
  {
    std::shared_lock lock(mu_);
    auto it = state_.documents.find(id);
    if (it != state_.documents.end()) return IngestResult{DocumentRef{id}, it->second.variables, true};
  }
  IngestResult out;
  out.variables = c->extract(bytes);
  out.document = store_document(kind, std::string(bytes), metadata, out.variables, user, instance_id);
  return out;
}

void Platform::mark_read(const std::string& notification_id) {
  mutate([&] {
    auto it = state_.notifications.find(notification_id);
    if (it == state_.notifications.end()) throw Error(ErrorCode::kNotFound, "unknown notification '" + notification_id + "'");
    if (it->second.read) return;
    commit(EventKind::kNotificationRead, it->second.instance_id, {{"notification_id", notification_id}});
  });
}

engine::Notification Platform::forward(const std::string& notification_id, const std::vector<std::string>& addresses,
                                       const std::string& user) {
  return mutate([&] {
    auto it = state_.notifications.find(notification_id);
    if (it == state_.notifications.end()) throw Error(ErrorCode::kNotFound, "unknown notification '" + notification_id + "'");
    const auto saved = state_.contacts.count(user) ? state_.contacts.at(user) : std::vector<engine::Contact>{};
    std::vector<std::string> problems;
    json fresh = json::array();
    std::set<std::string> seen;
    for (const auto& address : addresses) {
      auto c = std::find_if(saved.begin(), saved.end(), [&](const engine::Contact& x) { return x.address == address; });
      if (c == saved.end()) {
        problems.push_back("contact '" + address + "' is not in the contact list of " + user);
        continue;
      }
      const auto& already = it->second.forwarded_to;
      if (std::find(already.begin(), already.end(), *c) != already.end() || !seen.insert(address).second) continue;
      fresh.push_back({{"name", c->name}, {"address", c->address}});
    }
    if (addresses.empty()) problems.push_back("no contacts given");
    if (!problems.empty()) throw Error(ErrorCode::kValidation, "cannot forward " + notification_id, problems);
    if (!fresh.empty()) {
      // Delivery is a stub: the journal record is the delivery log.
      commit(EventKind::kNotificationEmitted, it->second.instance_id,
             {{"notification_id", notification_id}, {"forwarded_to", fresh}, {"by", user}});
    }
    return state_.notifications.at(notification_id);
  });
}

void Platform::add_contact(const std::string& user, const engine::Contact& contact) {
  mutate([&] {
    std::vector<std::string> problems;
    if (contact.name.empty()) problems.push_back("contact name is empty");
    if (contact.address.empty()) problems.push_back("contact address is empty");
    if (!problems.empty()) throw Error(ErrorCode::kValidation, "invalid contact", problems);
    if (auto it = state_.contacts.find(user); it != state_.contacts.end()) {
      for (const auto& c : it->second) {
        if (c.address == contact.address) throw Error(ErrorCode::kConflict, "contact '" + contact.address + "' already saved");
      }
    }
    commit(EventKind::kContactAdded, std::nullopt, {{"user", user}, {"name", contact.name}, {"address", contact.address}});
  });
}

void Platform::put_view(const std::string& user, const engine::View& view) {
  mutate([&] {
    if (view.id.empty()) throw Error(ErrorCode::kValidation, "view id is empty");
    json entries = json::array();
    for (const auto& e : view.entries) entries.push_back({{"source", e.source}, {"params", e.params}});
    commit(EventKind::kViewUpdated, std::nullopt,
           {{"user", user}, {"view_id", view.id}, {"title", view.title}, {"entries", entries}});
  });
}

void Platform::delete_view(const std::string& user, const std::string& view_id) {
  mutate([&] {
    auto it = state_.views.find(user);
    if (it == state_.views.end() || !it->second.count(view_id)) {
      throw Error(ErrorCode::kNotFound, "unknown view '" + view_id + "'");
    }
    commit(EventKind::kViewUpdated, std::nullopt, {{"user", user}, {"view_id", view_id}, {"deleted", true}});
  });
}

std::optional<JobOutcome> Platform::run_one() {
  engine::Job job;
  {
    std::shared_lock lock(mu_);
    const Timestamp now = clock_.now();
    const engine::Job* best = nullptr;
    for (const auto& [id, j] : state_.jobs) {
      if (j.exhausted || j.due_at > now) continue;
      if (!best || std::tie(j.due_at, j.id) < std::tie(best->due_at, best->id)) best = &j;
    }
    if (!best) return std::nullopt;
    job = *best;
  }

  JobOutcome out;
  out.job_id = job.id;
  out.kind = job.kind;
  out.connector = job.connector;
  out.attempt = job.attempts + 1;

  if (job.kind == JobKind::kTimerFire) {
    try {
      out.instance_id = mutate([&] { return engine_.fire_timer(job.id); });
      out.success = true;
    } catch (const Error& e) {
      out.error = error_text(e);
      out.terminal = true;
      mutate([&] {
        if (state_.jobs.count(job.id)) engine_.fail_job(job.id, out.error);
      });
    }
    return out;
  }

  conn::ConnectorContext ctx;
  ctx.now = clock_.now();
  ctx.job_id = job.id;
  ctx.instance_id = job.instance_id;
  ctx.history = [this](const store::HistoryFilter& f) { return history(f); };
  ctx.store_document = [this, &job](const std::string& kind, const std::string& content, const json& meta,
                                    const VariableMap& vars) {
    return store_document(kind, content, meta, vars, "connector:" + job.connector, job.instance_id);
  };
  ctx.notify = [this, &job](const conn::NotificationRequest& req) {
    const auto role = parse_role(req.recipient_role);
    if (!role) throw Error(ErrorCode::kInvalidArgument, "unknown recipient role '" + req.recipient_role + "'");
    return mutate([&] {
      // A job re-run after a crash must not raise its notification twice.
      for (const auto& [id, n] : state_.notifications) {
        if (n.source_job == job.id) return id;
      }
      const std::string id = engine::format_id("ntf", state_.notification_counter + 1);
      commit(EventKind::kNotificationEmitted, job.instance_id,
             {{"notification_id", id},
              {"recipient_role", to_string(*role)},
              {"severity", req.severity},
              {"body", req.body},
              {"source", "connector"},
              {"event", req.event},
              {"job", job.id}});
      return id;
    });
  };

  bool ok = false;
  try {
    out.outputs = registry_.call(job.connector, job.inputs, ctx);
    ok = true;
  } catch (const Error& e) {
    out.error = error_text(e);
  } catch (const std::exception& e) {
    out.error = e.what();
  }

  mutate([&] {
    auto it = state_.jobs.find(job.id);
    if (it == state_.jobs.end() || it->second.attempts != job.attempts || it->second.exhausted) {
      out.discarded = true;
      return;
    }
    if (ok) {
      try {
        engine_.complete_job(job.id, out.outputs);
        out.success = true;
        out.terminal = true;
        return;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kStorage) throw;
        out.error = error_text(e);
      }
    }
    out.terminal = out.attempt >= job.max_attempts;
    engine_.fail_job(job.id, out.error);
  });
  return out;
}

std::vector<JobOutcome> Platform::run_due_jobs() {
  std::lock_guard guard(jobs_mu_);
  std::vector<JobOutcome> outcomes;
  while (auto o = run_one()) outcomes.push_back(std::move(*o));
  return outcomes;
}

std::vector<JobOutcome> Platform::advance_to(Timestamp t) {
  if (clock_.mode() != sched::ClockMode::kSimulated) {
    throw Error(ErrorCode::kInvalidArgument, "advance_to needs the simulated clock");
  }
  if (t < clock_.now()) throw Error(ErrorCode::kInvalidArgument, "simulated time cannot move backwards");
  std::vector<JobOutcome> outcomes;
  for (;;) {
    std::optional<Timestamp> next;
    {
      std::shared_lock lock(mu_);
      for (const auto& [id, j] : state_.jobs) {
        if (!j.exhausted && (!next || j.due_at < *next)) next = j.due_at;
      }
    }
    if (!next || *next > t) break;
    if (*next > clock_.now()) clock_.set(*next);
    auto batch = run_due_jobs();
    if (batch.empty() && *next <= clock_.now()) {
      // Only jobs another runner is holding; nothing more to do at this time.
      break;
    }
    for (auto& o : batch) outcomes.push_back(std::move(o));
  }
  if (t > clock_.now()) clock_.set(t);
  return outcomes;
}

void Platform::start_worker(std::chrono::milliseconds poll) {
  if (worker_.joinable()) return;
  worker_stop_ = false;
  worker_ = std::thread([this, poll] {
    std::unique_lock lock(worker_mu_);
    while (!worker_stop_) {
      lock.unlock();
      try {
        run_due_jobs();
      } catch (const std::exception& e) {
        std::cerr << "agriflow: job runner: " << e.what() << "\n";
      }
      lock.lock();
      worker_cv_.wait_for(lock, poll, [this] { return worker_stop_; });
    }
  });
}

void Platform::stop_worker() {
  {
    std::lock_guard lock(worker_mu_);
    worker_stop_ = true;
  }
  worker_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::vector<store::EventRecord> Platform::history(const store::HistoryFilter& filter) const {
  std::shared_lock lock(mu_);
  return journal_.query(filter);
}

std::int64_t Platform::journal_length() const {
  std::shared_lock lock(mu_);
  return journal_.last_sequence();
}

std::string Platform::journal_text() const {
  std::shared_lock lock(mu_);
  std::string out;
  for (const auto& r : journal_.records()) out += store::encode_record(r) + "\n";
  return out;
}

std::string Platform::canonical_state() const {
  std::shared_lock lock(mu_);
  return engine::canonical_text(state_);
}

bool Platform::replay_matches(std::string* diff) const {
  std::shared_lock lock(mu_);
  engine::RuntimeState fresh;
  for (const auto& r : journal_.records()) engine::apply(fresh, r);
  const std::string a = engine::canonical_text(state_);
  const std::string b = engine::canonical_text(fresh);
  if (a == b) return true;
  if (diff) {
    std::size_t i = 0;
    while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
    const std::size_t from = i > 80 ? i - 80 : 0;
    *diff = "live:   ..." + a.substr(from, 160) + "\nreplay: ..." + b.substr(from, 160);
  }
  return false;
}

void Platform::write_snapshot(const std::filesystem::path& path) const {
  std::shared_lock lock(mu_);
  const auto& records = journal_.records();
  const json snap{{"format", kSnapshotFormat},
                  {"sequence", journal_.last_sequence()},
                  {"journal_sha256", prefix_digest(records, records.size())},
                  {"state", engine::canonical(state_)}};
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << snap.dump() << "\n";
    if (!out) throw Error(ErrorCode::kStorage, "cannot write snapshot " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace agriflow
