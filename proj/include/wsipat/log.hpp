#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace wsipat {

// Log verbosity comes from WSI_PATTERNS_LOG (quiet|info|debug), default info.
// Logging goes to stderr and never touches command outputs.
enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("WSI_PATTERNS_LOG");
        if (!env) {
            return LogLevel::Info;
        }
        const std::string v(env);
        if (v == "quiet") {
            return LogLevel::Quiet;
        }
        if (v == "debug") {
            return LogLevel::Debug;
        }
        return LogLevel::Info;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) {
        std::cerr << msg << "\n";
    }
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) {
        std::cerr << msg << "\n";
    }
}

} // namespace wsipat
