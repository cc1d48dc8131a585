#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace styleval {

// Append-only JSON-lines file. Each append is written, flushed and (unless
// disabled) fsynced before returning, so an acknowledged record survives a
// crash. On open, a torn final line left by a crash mid-write is cut off.
class EventLog {
 public:
  struct Options {
    bool fsync = true;
  };

  EventLog(std::filesystem::path path, Options options);
  explicit EventLog(std::filesystem::path path) : EventLog(std::move(path), Options{}) {}
  ~EventLog();

  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Records present when the log was opened.
  const std::vector<nlohmann::json>& recovered() const { return recovered_; }
  // Bytes dropped from a torn tail during recovery.
  std::size_t discarded_bytes() const { return discarded_bytes_; }

  void append(const nlohmann::json& record);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  Options options_;
  std::FILE* file_ = nullptr;
  std::vector<nlohmann::json> recovered_;
  std::size_t discarded_bytes_ = 0;
};

// Writes `content` to a sibling temp file, fsyncs and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace styleval
