#pragma once

#include <stdexcept>
#include <string>

namespace ssvep {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A harmonic of a stimulus would sit at or above Nyquist.
struct AliasingError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A decision reached the task for a detector that was gated off. Always a
/// wiring bug, never a user error.
struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Config validation failure. what() lists every failing field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ssvep
