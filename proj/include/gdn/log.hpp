#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace gdn {

// Log level comes from the GDN_LOG environment variable
// (error | warn | info | debug); default info.
enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level();

namespace detail {
void log_line(LogLevel lvl, const std::string& msg);
}

template <typename... Args>
void log(LogLevel lvl, Args&&... args) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    std::ostringstream os;
    (os << ... << args);
    detail::log_line(lvl, os.str());
}

template <typename... Args>
void log_error(Args&&... args) {
    log(LogLevel::Error, std::forward<Args>(args)...);
}
template <typename... Args>
void log_warn(Args&&... args) {
    log(LogLevel::Warn, std::forward<Args>(args)...);
}
template <typename... Args>
void log_info(Args&&... args) {
    log(LogLevel::Info, std::forward<Args>(args)...);
}
template <typename... Args>
void log_debug(Args&&... args) {
    log(LogLevel::Debug, std::forward<Args>(args)...);
}

}  // namespace gdn
