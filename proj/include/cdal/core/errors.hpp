#pragma once

#include <stdexcept>
#include <string>

namespace cdal {

// Invalid configuration value or file. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/grid dimensions incompatible with the requested operation.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or malformed dataset/checkpoint files.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cdal
