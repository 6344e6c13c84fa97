#pragma once

#include <stdexcept>
#include <string>

namespace trapsim {

/// A computation that ran on valid input but could not produce a trustworthy
/// result: saddle instead of minimum, rank-deficient system, divergent search.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace trapsim
