#pragma once

#include <filesystem>
#include <mutex>
#include <vector>

#include "proofgrade/studystats.hpp"

namespace proofgrade {

/// Append-only line-delimited attempt log. Each append writes one record and
/// fsyncs before returning. Opening an existing file replays its records.
class AttemptLog {
 public:
  /// In-memory log (nothing persisted).
  AttemptLog() = default;
  explicit AttemptLog(const std::filesystem::path& path);
  ~AttemptLog();

  AttemptLog(const AttemptLog&) = delete;
  AttemptLog& operator=(const AttemptLog&) = delete;

  void append(const Attempt& attempt);

  /// Every record: replayed ones first, then appended ones.
  std::vector<Attempt> records() const;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::vector<Attempt> records_;
};

}  // namespace proofgrade
