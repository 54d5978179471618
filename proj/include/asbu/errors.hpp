#pragma once

#include <stdexcept>
#include <string>

namespace asbu {

// Shape or dimension violations (zero dims, mismatched operands).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Out-of-range element access.
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed files: bad magic, version, truncation, CRC, shape table.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration values or unknown config keys.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runtime failures in numeric routines (NaN loss, empty calibration set, ...).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace asbu
