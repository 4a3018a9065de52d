#pragma once

#include <stdexcept>
#include <string>

namespace mangascript {

// Raised for malformed inputs, violated preconditions and unsolvable instances.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mangascript
