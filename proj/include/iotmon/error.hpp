#pragma once

#include <stdexcept>
#include <string>

namespace iotmon {

/// Fatal condition raised by any pipeline stage. `what()` is a single line
/// of the form "<stage>: <reason>" so callers can surface it verbatim.
class Error : public std::runtime_error {
public:
    Error(const std::string& stage, const std::string& reason)
        : std::runtime_error(stage + ": " + reason), stage_(stage) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace iotmon
