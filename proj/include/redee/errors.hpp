#pragma once

#include <stdexcept>
#include <string>

namespace redee {

// Malformed input files (bad JSON, bad schema).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a data invariant (dangling references,
// out-of-range spans).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or infeasible configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace redee
