#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "agriflow/time.hpp"

namespace agriflow::store {

enum class EventKind {
  kDefinitionDeployed,
  kInstanceStarted,
  kTokenMoved,
  kTaskCreated,
  kTaskAssigned,
  kTaskCompleted,
  kVariableSet,
  kJobEnqueued,
  kJobCompleted,
  kJobFailed,
  kJobCancelled,
  kInstanceCompleted,
  kInstanceFailed,
  kInstanceTerminated,
  kNotificationEmitted,
  kNotificationRead,
  kFileIngested,
  kViewUpdated,
  kContactAdded,
};

const char* to_string(EventKind kind) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view name) noexcept;

struct EventRecord {
  std::int64_t sequence_no = 0;
  std::optional<std::string> instance_id;
  EventKind kind = EventKind::kVariableSet;
  nlohmann::json payload = nlohmann::json::object();
  Timestamp at{};
};

/// One journal line (no trailing newline). Keys are sorted and the line
/// carries a CRC-32 of the record body so torn or edited lines are detected.
std::string encode_record(const EventRecord& record);

/// Inverse of encode_record. Throws Error(kStorage) naming what is wrong.
EventRecord decode_record(std::string_view line);

}  // namespace agriflow::store
