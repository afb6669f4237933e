#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecfkit {

/// Malformed arguments: bad sizes, mismatched grids, out-of-range parameters.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A group has fewer than two curves, so its covariance is undefined.
class InsufficientSample : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// n - k is too small for the bias-reduced trace estimators.
class DegenerateDof : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The data carry no variation (zero traces, no positive eigenvalues).
class DegenerateData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file could not be parsed. Row and column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : std::runtime_error(format(what, row, column)), row_(row), column_(column) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t column) {
        std::string out = what;
        if (row != 0) {
            out += " (row " + std::to_string(row);
            if (column != 0) out += ", column " + std::to_string(column);
            out += ")";
        }
        return out;
    }

    std::size_t row_;
    std::size_t column_;
};

}  // namespace ecfkit
