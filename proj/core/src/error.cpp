#include "mrf/error.hpp"

namespace mrf {

Error::Error(std::string module, const std::string &what)
    : std::runtime_error("[" + module + "] " + what), module_(std::move(module)) {}

} // namespace mrf
