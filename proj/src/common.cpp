#include "dilam/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

namespace dilam {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("DILAM_LOG");
        if (!env) return LogLevel::info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
        if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
        return LogLevel::info;
    }();
    return level;
}

void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) < static_cast<int>(log_level())) return;
    const char* tag = level == LogLevel::debug ? "debug" : level == LogLevel::info ? "info" : "warn";
    std::fprintf(stderr, "[dilam %s] %s\n", tag, msg.c_str());
}

static std::string vstrfmt(const char* fmt, va_list ap) {
    va_list ap2;
    va_copy(ap2, ap);
    int n = std::vsnprintf(nullptr, 0, fmt, ap2);
    va_end(ap2);
    if (n <= 0) return {};
    std::vector<char> buf(static_cast<size_t>(n) + 1);
    std::vsnprintf(buf.data(), buf.size(), fmt, ap);
    return std::string(buf.data(), static_cast<size_t>(n));
}

void logf(LogLevel level, const char* fmt, ...) {
    if (static_cast<int>(level) < static_cast<int>(log_level())) return;
    va_list ap;
    va_start(ap, fmt);
    std::string s = vstrfmt(fmt, ap);
    va_end(ap);
    log_msg(level, s);
}

std::string strfmt(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    std::string s = vstrfmt(fmt, ap);
    va_end(ap);
    return s;
}

}  // namespace dilam
