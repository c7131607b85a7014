#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "varlab/error.hpp"
#include "varlab/experiment.hpp"

namespace varlab {

namespace fs = std::filesystem;

namespace {

// Reads every complete line; drops (and truncates away) a torn tail.
std::vector<Json> recover_log(int fd, const fs::path& path) {
  std::string text;
  char buf[1 << 16];
  if (::lseek(fd, 0, SEEK_SET) < 0) fail(ErrorCode::kIo, "cannot seek " + path.string());
  while (true) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, "cannot read " + path.string() + ": " + std::strerror(errno));
    }
    if (n == 0) break;
    text.append(buf, static_cast<std::size_t>(n));
  }
  const std::size_t last_nl = text.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != text.size()) {
    if (::ftruncate(fd, static_cast<off_t>(keep)) != 0)
      fail(ErrorCode::kIo, "cannot truncate torn tail of " + path.string());
  }
  std::vector<Json> rows;
  std::size_t pos = 0;
  while (pos < keep) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::kValidation, path.string() + ": corrupt record: " + e.what());
    }
  }
  return rows;
}

}  // namespace

ResponseStore::ResponseStore(const fs::path& dir, bool sync_writes) : sync_writes_(sync_writes) {
  fs::create_directories(dir);
  sessions_fd_ = open_log(dir / kSessionsFile);
  responses_fd_ = open_log(dir / kResponsesFile);
  for (const auto& row : recover_log(sessions_fd_, dir / kSessionsFile))
    sessions_.push_back(session_event_from_json(row));
  for (const auto& row : recover_log(responses_fd_, dir / kResponsesFile))
    trials_.push_back(trial_record_from_json(row));
}

ResponseStore::~ResponseStore() {
  if (sessions_fd_ >= 0) ::close(sessions_fd_);
  if (responses_fd_ >= 0) ::close(responses_fd_);
}

int ResponseStore::open_log(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorCode::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
  return fd;
}

void ResponseStore::append_line(int fd, const std::string& line) {
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, std::string("append failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync_writes_ && ::fdatasync(fd) != 0) {
    fail(ErrorCode::kIo, std::string("fdatasync failed: ") + std::strerror(errno));
  }
}

void ResponseStore::append_session(const SessionEvent& event) {
  append_line(sessions_fd_, to_json(event).dump() + "\n");
  sessions_.push_back(event);
}

void ResponseStore::append_trial(const TrialRecord& record) {
  record.validate();
  append_line(responses_fd_, to_json(record).dump() + "\n");
  trials_.push_back(record);
}

std::vector<TrialRecord> read_trial_records(const fs::path& responses_file) {
  std::vector<TrialRecord> out;
  if (!fs::exists(responses_file)) return out;
  for (const auto& row : read_jsonl(responses_file)) out.push_back(trial_record_from_json(row));
  return out;
}

}  // namespace varlab
