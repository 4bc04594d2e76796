#pragma once

#include <stdexcept>
#include <string>

namespace dropvision {

// Thrown for every contract violation and I/O failure in this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace dropvision
