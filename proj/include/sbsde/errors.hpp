#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sbsde {

/* Malformed or out-of-range scenario/configuration input. The CLI maps this
   to exit code 2. */
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/* Input whose structure an operation does not support: jump noise where a
   Brownian filtration is required, atoms where a continuous control is
   required, distributions without the moments the sampler needs, and so on.
   These are contract violations, not numerical failures. */
class UnsupportedInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/* An iterative solver exhausted its budget. Carries the residual (or update
   norm) history so callers can report how the iteration behaved. The CLI
   maps this to exit code 3. */
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

} // namespace sbsde
