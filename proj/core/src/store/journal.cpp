#include "agriflow/store/journal.hpp"

#include <unistd.h>

#include <fstream>

#include "agriflow/error.hpp"

namespace agriflow::store {

JournalContents read_journal(std::istream& in) {
  JournalContents out;
  std::string line;
  std::uint64_t offset = 0;
  std::int64_t line_no = 0;
  while (true) {
    const std::uint64_t start = offset;
    if (!std::getline(in, line)) break;
    ++line_no;
    const bool terminated = !in.eof();
    offset += line.size() + (terminated ? 1 : 0);
    auto fail = [&](std::string reason) {
      out.break_point = JournalBreak{line_no, start, std::move(reason)};
    };
    if (!terminated) {
      // A last line without its newline was cut mid-write.
      fail("torn record (no line terminator)");
      break;
    }
    try {
      EventRecord r = decode_record(line);
      const std::int64_t expected = static_cast<std::int64_t>(out.records.size()) + 1;
      if (r.sequence_no != expected) {
        fail("sequence number " + std::to_string(r.sequence_no) + " where " + std::to_string(expected) +
             " was expected");
        break;
      }
      out.records.push_back(std::move(r));
    } catch (const Error& e) {
      fail(e.what());
      break;
    }
  }
  return out;
}

JournalContents read_journal_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  return read_journal(in);
}

namespace {

const nlohmann::json* lookup(const nlohmann::json& root, const std::string& dotted) {
  const nlohmann::json* cur = &root;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(key);
    if (it == cur->end()) return nullptr;
    cur = &*it;
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur;
}

}  // namespace

bool matches(const EventRecord& r, const HistoryFilter& f) {
  if (f.instance_id && r.instance_id != f.instance_id) return false;
  if (f.kind && r.kind != *f.kind) return false;
  if (f.from && r.at < *f.from) return false;
  if (f.to && r.at >= *f.to) return false;
  for (const auto& [path, expected] : f.payload_equals) {
    const nlohmann::json* v = lookup(r.payload, path);
    if (!v || *v != expected) return false;
  }
  return true;
}

Journal::~Journal() {
  if (file_) std::fclose(file_);
}

Journal::Journal(Journal&& o) noexcept
    : records_(std::move(o.records_)),
      path_(std::move(o.path_)),
      break_(std::move(o.break_)),
      file_(o.file_),
      sync_(o.sync_),
      injected_failures_(o.injected_failures_) {
  o.file_ = nullptr;
}

Journal& Journal::operator=(Journal&& o) noexcept {
  if (this != &o) {
    if (file_) std::fclose(file_);
    records_ = std::move(o.records_);
    path_ = std::move(o.path_);
    break_ = std::move(o.break_);
    file_ = o.file_;
    sync_ = o.sync_;
    injected_failures_ = o.injected_failures_;
    o.file_ = nullptr;
  }
  return *this;
}

Journal Journal::open(const std::filesystem::path& path, bool sync) {
  Journal j;
  j.path_ = path;
  j.sync_ = sync;
  JournalContents contents = read_journal_file(path);
  j.records_ = std::move(contents.records);
  j.break_ = std::move(contents.break_point);
  if (j.break_) {
    std::error_code ec;
    std::filesystem::resize_file(path, j.break_->byte_offset, ec);
    if (ec) throw Error(ErrorCode::kStorage, "cannot truncate corrupt journal tail: " + ec.message());
  }
  j.file_ = std::fopen(path.c_str(), "ab");
  if (!j.file_) throw Error(ErrorCode::kStorage, "cannot open journal " + path.string());
  return j;
}

std::int64_t Journal::last_sequence() const noexcept {
  return records_.empty() ? 0 : records_.back().sequence_no;
}

std::int64_t Journal::append(EventRecord record) {
  record.sequence_no = last_sequence() + 1;
  if (injected_failures_ > 0) {
    --injected_failures_;
    throw Error(ErrorCode::kStorage, "journal append failed (injected)");
  }
  if (file_) {
    const std::string line = encode_record(record) + "\n";
    const long before = std::ftell(file_);
    const bool ok = std::fwrite(line.data(), 1, line.size(), file_) == line.size() && std::fflush(file_) == 0 &&
                    (!sync_ || ::fsync(::fileno(file_)) == 0);
    if (!ok) {
      // Best effort: drop a partial line so the file stays a valid prefix.
      if (before >= 0 && path_) {
        std::error_code ec;
        std::filesystem::resize_file(*path_, static_cast<std::uintmax_t>(before), ec);
      }
      throw Error(ErrorCode::kStorage, "journal append failed");
    }
  }
  records_.push_back(std::move(record));
  return records_.back().sequence_no;
}

std::vector<EventRecord> Journal::query(const HistoryFilter& filter) const {
  std::vector<EventRecord> out;
  for (const EventRecord& r : records_) {
    if (matches(r, filter)) out.push_back(r);
  }
  if (filter.last && out.size() > *filter.last) out.erase(out.begin(), out.end() - static_cast<long>(*filter.last));
  return out;
}

}  // namespace agriflow::store
