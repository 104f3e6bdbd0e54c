#pragma once

#include <stdexcept>
#include <string>

namespace asmcmc {

/// Bad user input: malformed config, missing fields, invalid parameters.
/// The CLI maps this to exit status 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: non-convergence, singular systems, non-finite values.
/// The CLI maps this to exit status 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace asmcmc
