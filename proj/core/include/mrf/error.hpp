#pragma once

#include <stdexcept>
#include <string>

namespace mrf {

/// Base error. `module()` names the component that raised it so CLI
/// diagnostics can report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string &what);
    const std::string &module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Invalid argument, configuration or precondition violation.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Non-finite state, failed decomposition, divergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures, malformed or corrupt files.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mrf
