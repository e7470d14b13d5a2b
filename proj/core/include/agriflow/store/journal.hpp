#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "agriflow/store/event_record.hpp"

namespace agriflow::store {

/// Where a journal stopped being readable.
struct JournalBreak {
  std::int64_t line = 0;          // 1-based line number of the first bad line
  std::uint64_t byte_offset = 0;  // offset of that line; everything before it is valid
  std::string reason;
};

struct JournalContents {
  std::vector<EventRecord> records;
  std::optional<JournalBreak> break_point;
};

/// Reads records until end of input or the first invalid line. Sequence
/// numbers must start at 1 and be dense.
JournalContents read_journal(std::istream& in);
JournalContents read_journal_file(const std::filesystem::path& path);

struct HistoryFilter {
  std::optional<std::string> instance_id;
  std::optional<EventKind> kind;
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // exclusive
  /// Dotted payload paths that must equal the given value ("values.action").
  std::vector<std::pair<std::string, nlohmann::json>> payload_equals;
  /// Keep only the most recent `last` matches.
  std::optional<std::size_t> last;
};

bool matches(const EventRecord& record, const HistoryFilter& filter);

/// Append-only event journal. Records live in memory; when backed by a file
/// every append is written (and optionally fsync'ed) before it returns.
/// Not internally synchronized: the owner serializes writers.
class Journal {
 public:
  Journal() = default;
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;
  Journal(Journal&&) noexcept;
  Journal& operator=(Journal&&) noexcept;

  /// Opens (creating if needed) a file journal. A torn or corrupt tail is
  /// reported through break_point() and cut off so later appends follow the
  /// last valid record.
  static Journal open(const std::filesystem::path& path, bool sync = true);

  /// Assigns the next sequence number, persists, and returns it. On storage
  /// failure throws Error(kStorage) and the journal is unchanged.
  std::int64_t append(EventRecord record);

  const std::vector<EventRecord>& records() const noexcept { return records_; }
  std::int64_t last_sequence() const noexcept;
  const std::optional<JournalBreak>& break_point() const noexcept { return break_; }
  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

  std::vector<EventRecord> query(const HistoryFilter& filter) const;

  /// Test hook: fail the next `n` appends as if the disk were full.
  void inject_failures(int n) noexcept { injected_failures_ = n; }

 private:
  std::vector<EventRecord> records_;
  std::optional<std::filesystem::path> path_;
  std::optional<JournalBreak> break_;
  std::FILE* file_ = nullptr;
  bool sync_ = false;
  int injected_failures_ = 0;
};

}  // namespace agriflow::store
