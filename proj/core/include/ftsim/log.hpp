#pragma once

#include <sstream>

namespace ftsim {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Process-wide level, initialized from the FTSIM_LOG environment variable
// (error|warn|info|debug, default info) on first use.
LogLevel log_level();
void set_log_level(LogLevel lvl);

namespace detail {

class LogLine {
 public:
  explicit LogLine(LogLevel lvl);
  ~LogLine();
  LogLine(const LogLine&) = delete;
  LogLine& operator=(const LogLine&) = delete;

  template <typename T>
  LogLine& operator<<(const T& v) {
    if (active_) out_ << v;
    return *this;
  }

 private:
  bool active_;
  LogLevel lvl_;
  std::ostringstream out_;
};

}  // namespace detail

inline detail::LogLine log_error() { return detail::LogLine(LogLevel::Error); }
inline detail::LogLine log_warn() { return detail::LogLine(LogLevel::Warn); }
inline detail::LogLine log_info() { return detail::LogLine(LogLevel::Info); }
inline detail::LogLine log_debug() { return detail::LogLine(LogLevel::Debug); }

}  // namespace ftsim
