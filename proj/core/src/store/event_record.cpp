#include "agriflow/store/event_record.hpp"

#include <array>
#include <cstdio>

#include "agriflow/digest.hpp"
#include "agriflow/error.hpp"

namespace agriflow::store {

namespace {

constexpr std::array<std::pair<EventKind, const char*>, 19> kKindNames{{
    {EventKind::kDefinitionDeployed, "definition_deployed"},
    {EventKind::kInstanceStarted, "instance_started"},
    {EventKind::kTokenMoved, "token_moved"},
    {EventKind::kTaskCreated, "task_created"},
    {EventKind::kTaskAssigned, "task_assigned"},
    {EventKind::kTaskCompleted, "task_completed"},
    {EventKind::kVariableSet, "variable_set"},
    {EventKind::kJobEnqueued, "job_enqueued"},
    {EventKind::kJobCompleted, "job_completed"},
    {EventKind::kJobFailed, "job_failed"},
    {EventKind::kJobCancelled, "job_cancelled"},
    {EventKind::kInstanceCompleted, "instance_completed"},
    {EventKind::kInstanceFailed, "instance_failed"},
    {EventKind::kInstanceTerminated, "instance_terminated"},
    {EventKind::kNotificationEmitted, "notification_emitted"},
    {EventKind::kNotificationRead, "notification_read"},
    {EventKind::kFileIngested, "file_ingested"},
    {EventKind::kViewUpdated, "view_updated"},
    {EventKind::kContactAdded, "contact_added"},
}};

nlohmann::json body_of(const EventRecord& r) {
  nlohmann::json body = nlohmann::json::object();
  body["seq"] = r.sequence_no;
  body["kind"] = to_string(r.kind);
  body["at"] = format_timestamp(r.at);
  body["instance"] = r.instance_id ? nlohmann::json(*r.instance_id) : nlohmann::json(nullptr);
  body["payload"] = r.payload;
  return body;
}

std::string crc_text(std::uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

}  // namespace

const char* to_string(EventKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view name) noexcept {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  return std::nullopt;
}

std::string encode_record(const EventRecord& record) {
  nlohmann::json body = body_of(record);
  const std::string text = body.dump();
  body["crc"] = crc_text(crc32_of(text));
  return body.dump();
}

EventRecord decode_record(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kStorage, "record is not a JSON object");
  if (!j.contains("crc") || !j["crc"].is_string()) throw Error(ErrorCode::kStorage, "record has no crc");
  const std::string crc = j["crc"].get<std::string>();
  j.erase("crc");
  if (crc_text(crc32_of(j.dump())) != crc) throw Error(ErrorCode::kStorage, "crc mismatch");
  if (j.size() != 5) throw Error(ErrorCode::kStorage, "unexpected record fields");

  EventRecord r;
  try {
    r.sequence_no = j.at("seq").get<std::int64_t>();
    const auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::kStorage, "unknown event kind '" + j.at("kind").get<std::string>() + "'");
    r.kind = *kind;
    const auto at = parse_timestamp(j.at("at").get<std::string>());
    if (!at) throw Error(ErrorCode::kStorage, "bad timestamp");
    r.at = *at;
    if (!j.at("instance").is_null()) r.instance_id = j.at("instance").get<std::string>();
    r.payload = j.at("payload");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kStorage, std::string("malformed record: ") + e.what());
  }
  if (!r.payload.is_object()) throw Error(ErrorCode::kStorage, "payload is not an object");
  return r;
}

}  // namespace agriflow::store
