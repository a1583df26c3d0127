#pragma once
#include <stdexcept>

namespace iontrap {

// Bad input: malformed config, unphysical parameters, inconsistent sizes.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An algorithm failed at runtime: divergence, lost norm, no convergence.
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace iontrap
