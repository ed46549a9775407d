#pragma once

#include <cstdio>
#include <utility>

namespace lsfm {

enum class LogLevel : int { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level comes from the LOCAL_SFM_LOG environment variable
// (error|warn|info|debug), default warn.
LogLevel log_level();
void set_log_level(LogLevel level);

namespace detail {
void log_line(LogLevel level, const char* fmt, ...);
}

}  // namespace lsfm

#define LSFM_LOG_ERROR(...) ::lsfm::detail::log_line(::lsfm::LogLevel::kError, __VA_ARGS__)
#define LSFM_LOG_WARN(...) ::lsfm::detail::log_line(::lsfm::LogLevel::kWarn, __VA_ARGS__)
#define LSFM_LOG_INFO(...) ::lsfm::detail::log_line(::lsfm::LogLevel::kInfo, __VA_ARGS__)
#define LSFM_LOG_DEBUG(...) ::lsfm::detail::log_line(::lsfm::LogLevel::kDebug, __VA_ARGS__)
