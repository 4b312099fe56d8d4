#pragma once

#include <stdexcept>
#include <string>

namespace mmc {

/// Bad command line or configuration file. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input data (CSV rows, manifests, label vocabularies).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Semantically invalid data: labels outside the vocabulary, degenerate
/// class distributions, inconsistent shapes.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mmc
