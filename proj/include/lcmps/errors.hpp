#pragma once

#include <stdexcept>
#include <string>

namespace lcmps {

// Exit codes used by the command-line driver.
enum class ExitCode : int { ok = 0, config = 2, numerical = 3, io = 4 };

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A numerical guard tripped: SVD failure, Taylor norm drift, dead sampling branch.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace lcmps
