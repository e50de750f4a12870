#include "ftsim/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace ftsim {

namespace {

LogLevel parse_level(const char* s) {
  if (s == nullptr) return LogLevel::Info;
  if (std::strcmp(s, "error") == 0) return LogLevel::Error;
  if (std::strcmp(s, "warn") == 0) return LogLevel::Warn;
  if (std::strcmp(s, "info") == 0) return LogLevel::Info;
  if (std::strcmp(s, "debug") == 0) return LogLevel::Debug;
  return LogLevel::Info;
}

std::atomic<LogLevel>& level_slot() {
  static std::atomic<LogLevel> lvl{parse_level(std::getenv("FTSIM_LOG"))};
  return lvl;
}

const char* tag(LogLevel lvl) {
  switch (lvl) {
    case LogLevel::Error: return "error";
    case LogLevel::Warn: return "warn";
    case LogLevel::Info: return "info";
    case LogLevel::Debug: return "debug";
  }
  return "?";
}

std::mutex g_write_mutex;

}  // namespace

LogLevel log_level() { return level_slot().load(std::memory_order_relaxed); }

void set_log_level(LogLevel lvl) {
  level_slot().store(lvl, std::memory_order_relaxed);
}

namespace detail {

LogLine::LogLine(LogLevel lvl) : active_(lvl <= log_level()), lvl_(lvl) {}

LogLine::~LogLine() {
  if (!active_) return;
  std::lock_guard<std::mutex> lock(g_write_mutex);
  std::fprintf(stderr, "[ftsim %s] %s\n", tag(lvl_), out_.str().c_str());
}

}  // namespace detail

}  // namespace ftsim
