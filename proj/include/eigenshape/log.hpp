#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace eigenshape::log {

// Verbosity from EIGENSHAPE_LOG: "quiet" (default), "info", "debug".
inline int level() {
  static const int lvl = [] {
    const char* v = std::getenv("EIGENSHAPE_LOG");
    if (!v) return 0;
    if (!std::strcmp(v, "debug")) return 2;
    if (!std::strcmp(v, "info")) return 1;
    return 0;
  }();
  return lvl;
}

inline void warn(const std::string& msg) {
  std::fprintf(stderr, "[eigenshape] warning: %s\n", msg.c_str());
}

inline void info(const std::string& msg) {
  if (level() >= 1) std::fprintf(stderr, "[eigenshape] %s\n", msg.c_str());
}

inline void debug(const std::string& msg) {
  if (level() >= 2) std::fprintf(stderr, "[eigenshape] %s\n", msg.c_str());
}

}  // namespace eigenshape::log
