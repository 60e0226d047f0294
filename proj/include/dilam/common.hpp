#pragma once

#include <cstdarg>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dilam {

/// Raised when a tensor contains NaN/Inf after a forward or backward pass.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class IoCode {
    bad_magic,
    version_mismatch,
    truncated,
    crc_mismatch,
    checksum_mismatch,
    corrupt,
    io,
};

struct IoError : std::runtime_error {
    IoError(IoCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    IoCode code() const { return code_; }

  private:
    IoCode code_;
};

/// Pipeline stage failure; carries the stage name so the CLI can report
/// "stage <name> failed: <cause>".
struct StageError : std::runtime_error {
    StageError(std::string stage, const std::string& cause)
        : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

  private:
    std::string stage_;
};

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(const void* p, size_t n, uint64_t h = kFnvOffset) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

// Log verbosity comes from the DILAM_LOG environment variable only
// (quiet|warn|info|debug), default info.
enum class LogLevel { debug = 0, info = 1, warn = 2, quiet = 3 };

LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);
void logf(LogLevel level, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

std::string strfmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace dilam
