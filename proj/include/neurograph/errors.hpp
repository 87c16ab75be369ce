#pragma once

#include <stdexcept>
#include <string>

namespace neurograph {

// Malformed user-facing input (config file, CLI flags, manifest schema).
// The CLI maps this to exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Failure inside a running experiment: I/O, parse, numeric divergence.
// The CLI maps this to exit code 3.
struct pipeline_error : std::runtime_error {
    explicit pipeline_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace neurograph
