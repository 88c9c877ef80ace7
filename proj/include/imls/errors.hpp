#pragma once

#include <stdexcept>
#include <string>

namespace imls {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raw volume / manifest disagreements (size, missing file).
class ManifestError : public Error { using Error::Error; };
// Unknown dtype tags, bad magic numbers, malformed files.
class FormatError : public Error { using Error::Error; };
// Out-of-range or inconsistent arguments.
class ParameterError : public Error { using Error::Error; };
// Degenerate camera.
class ViewError : public Error { using Error::Error; };
// Sampling pattern does not fit the compact image.
class CapacityError : public Error { using Error::Error; };
// Network / run configuration problems, including missing checkpoints.
class ConfigError : public Error { using Error::Error; };
// Tensor or image shape disagreements.
class ShapeError : public Error { using Error::Error; };

}  // namespace imls
