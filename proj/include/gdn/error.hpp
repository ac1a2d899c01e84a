#pragma once

#include <stdexcept>
#include <string>

namespace gdn {

// Fatal error categories, mapped one-to-one onto process exit codes.
enum class ErrorCode : int {
    Usage = 2,
    Data = 3,
    Numeric = 4,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }
    int exit_code() const { return static_cast<int>(code_); }

  private:
    ErrorCode code_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(ErrorCode::Usage, msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(ErrorCode::Data, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorCode::Numeric, msg) {}
};

}  // namespace gdn
