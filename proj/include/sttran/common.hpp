// Shared error taxonomy and a minimal stderr logger.
#pragma once

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sttran {

// Exit-code mapping: ConfigError/DataError -> 1, ContractError/DimensionError/
// NumericError -> 2, verification failures -> 3 (handled by the CLI).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, silent = 4 };

inline LogLevel& log_level() {
    static LogLevel level = LogLevel::info;
    return level;
}

inline void log_at(LogLevel lvl, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (lvl < log_level()) return;
    std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::debug, msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::info, msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::warn, msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::error, msg); }

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

inline void check_contract(bool ok, const std::string& msg) {
    if (!ok) throw ContractError(msg);
}

}  // namespace sttran
