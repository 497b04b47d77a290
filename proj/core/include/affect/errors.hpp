#ifndef AFFECT_ERRORS_HPP
#define AFFECT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace affect {

// Tensor/layer shape incompatibilities.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-range or otherwise invalid user-supplied parameter.
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Weight transfer between incompatible architectures.
struct TransferError : std::runtime_error {
    explicit TransferError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (CSV rows, layouts, checkpoints).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace affect

#endif  // AFFECT_ERRORS_HPP
