#pragma once

#include <stdexcept>

namespace lrmpc {

// CLI exit code 2
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CLI exit code 3
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CLI exit code 4
struct InsecureOpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace lrmpc
