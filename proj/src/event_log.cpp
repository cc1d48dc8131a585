#include "styleval/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "styleval/errors.hpp"

namespace styleval {

EventLog::EventLog(std::filesystem::path path, Options options)
    : path_(std::move(path)), options_(options) {
  std::string content;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::size_t good = 0;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto end = content.find('\n', pos);
    ++line_no;
    if (end == std::string::npos) break;  // unterminated tail
    const std::string_view line(content.data() + pos, end - pos);
    if (!line.empty()) {
      try {
        recovered_.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParse,
                    fmt::format("{} line {}: corrupt record: {}", path_.string(), line_no, e.what()));
      }
    }
    pos = end + 1;
    good = pos;
  }
  if (good < content.size()) {
    discarded_bytes_ = content.size() - good;
    spdlog::warn("{}: dropping {} byte torn tail", path_.string(), discarded_bytes_);
    std::filesystem::resize_file(path_, good);
  }

  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw Error(ErrorCode::kIo, fmt::format("cannot open event log {}", path_.string()));
}

EventLog::~EventLog() {
  if (file_) std::fclose(file_);
}

void EventLog::append(const nlohmann::json& record) {
  const std::string line = record.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw Error(ErrorCode::kIo, fmt::format("write to {} failed", path_.string()));
  }
  if (options_.fsync && ::fsync(::fileno(file_)) != 0) {
    throw Error(ErrorCode::kIo, fmt::format("fsync of {} failed", path_.string()));
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, fmt::format("cannot create {}", tmp.string()));
  std::size_t off = 0;
  while (off < content.size()) {
    const auto n = ::write(fd, content.data() + off, content.size() - off);
    if (n <= 0) {
      ::close(fd);
      throw Error(ErrorCode::kIo, fmt::format("write to {} failed", tmp.string()));
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::filesystem::rename(tmp, path);
}

}  // namespace styleval
