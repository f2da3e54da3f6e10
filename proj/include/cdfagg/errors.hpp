#pragma once

#include <stdexcept>
#include <string>

namespace cdfagg {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes.
// std::invalid_argument is used directly for precondition violations.

class parse_error : public std::runtime_error {
public:
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Panel misalignment: missing days, missing experts, duplicate rows.
class alignment_error : public std::runtime_error {
public:
    explicit alignment_error(const std::string& what) : std::runtime_error(what) {}
};

class convergence_error : public std::runtime_error {
public:
    explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cdfagg
