#pragma once

#include <stdexcept>
#include <string>

namespace graphdyn {

// Invalid input data or an operation applied outside its domain.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A configured work cap (enumeration size, chain length, depth) was exceeded.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace graphdyn
