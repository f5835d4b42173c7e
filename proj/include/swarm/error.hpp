#pragma once

#include <stdexcept>
#include <string>

namespace swarm {

/// Exception carrying a module-specific error kind.
template <class Kind>
class Error : public std::runtime_error {
public:
    Error(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

} // namespace swarm
