#pragma once

#include <stdexcept>
#include <string>

namespace usdiff {

// Shape disagreement between grids, or a non-positive dimension.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// A scalar argument outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Timestep or element index out of range.
class IndexError : public std::out_of_range {
public:
    explicit IndexError(const std::string& what) : std::out_of_range(what) {}
};

// A formula hit a numerically degenerate regime (division by ~0 etc).
class NumericDegenerateError : public std::runtime_error {
public:
    explicit NumericDegenerateError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unreadable file, bad configuration key/value.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace usdiff
