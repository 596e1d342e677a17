#pragma once

#include <stdexcept>
#include <string>

namespace peergrade {

// Bad user-supplied configuration: missing strategy or quality, unknown id,
// parameter out of range.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A loss or estimator is undefined on the given input, e.g. a student with no
// reviews, a single-reviewer submission under an exclusive-consensus loss, or
// |E| < 2 for the global variance.
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The requested combinatorial structure cannot be built.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace peergrade
