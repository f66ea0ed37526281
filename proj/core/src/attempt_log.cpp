#include "proofgrade/attempt_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

[[noreturn]] void io_fail(const std::string& what, const std::filesystem::path& path) {
  throw Error(ErrorKind::Config, what + " " + path.string() + ": " + std::strerror(errno));
}

}  // namespace

AttemptLog::AttemptLog(const std::filesystem::path& path) : path_(path) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();
    std::size_t start = 0;
    std::size_t lineno = 0;
    while (start < data.size()) {
      const std::size_t nl = data.find('\n', start);
      ++lineno;
      const std::string where = path.string() + ":" + std::to_string(lineno);
      if (nl == std::string::npos) {
        // Torn final write: keep the record only if it is complete.
        try {
          records_.push_back(attempt_from_json_line(data.substr(start), where));
        } catch (const Error&) {
          std::filesystem::resize_file(path, start);
        }
        break;
      }
      const std::string_view line(data.data() + start, nl - start);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos)
        records_.push_back(attempt_from_json_line(line, where));
      start = nl + 1;
    }
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) io_fail("cannot open attempt log", path);
  // A replayed record without its newline gets one before new appends.
  if (!records_.empty() && std::filesystem::file_size(path) > 0) {
    std::ifstream tail(path, std::ios::binary);
    tail.seekg(-1, std::ios::end);
    if (tail.get() != '\n' && ::write(fd_, "\n", 1) != 1) io_fail("cannot write", path);
  }
}

AttemptLog::~AttemptLog() {
  if (fd_ >= 0) ::close(fd_);
}

void AttemptLog::append(const Attempt& attempt) {
  std::string line = attempt_to_json_line(attempt);
  line.push_back('\n');
  std::lock_guard lock(mu_);
  if (fd_ >= 0) {
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      const ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        io_fail("cannot append to attempt log", path_);
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) io_fail("cannot sync attempt log", path_);
  }
  records_.push_back(attempt);
}

std::vector<Attempt> AttemptLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

}  // namespace proofgrade
