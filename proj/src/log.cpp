#include "gdn/log.hpp"

#include <cstdlib>

namespace gdn {

namespace {

LogLevel parse_level() {
    const char* env = std::getenv("GDN_LOG");
    if (!env) return LogLevel::Info;
    const std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "warn") return LogLevel::Warn;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

const char* level_name(LogLevel lvl) {
    switch (lvl) {
        case LogLevel::Error: return "error";
        case LogLevel::Warn: return "warn";
        case LogLevel::Info: return "info";
        default: return "debug";
    }
}

}  // namespace

LogLevel log_level() {
    static const LogLevel lvl = parse_level();
    return lvl;
}

void detail::log_line(LogLevel lvl, const std::string& msg) {
    std::cerr << "[gdn " << level_name(lvl) << "] " << msg << "\n";
}

}  // namespace gdn
