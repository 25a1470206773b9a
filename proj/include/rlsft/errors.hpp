#pragma once

#include <stdexcept>
#include <string>

namespace rlsft {

// CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// CLI exit code 3: a pipeline phase cannot proceed (saturated bank, empty
// clean set, missing upstream artifact).
struct PhaseAbort : std::runtime_error {
    explicit PhaseAbort(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rlsft
