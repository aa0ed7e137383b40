#pragma once

#include <stdexcept>
#include <string>

namespace unmix {

// Error taxonomy used across the toolkit. The CLI maps these to exit codes:
// usage errors -> 1, Format/Dimension -> 2, Numerical/Domain -> 3.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace unmix
