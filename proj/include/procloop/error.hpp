#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace procloop {

enum class Errc {
    EmptySegment,
    NoPhases,
    InvalidPhase,
    ZeroFrequency,
    NonPositiveTotal,
    EmptyPool,
    NoEligibleEntry,
    EmptyTrace,
    InvalidCut,
    EmptyLog,
    DepthExceeded,
    UnstructuredModel,
    Timeout,
    HttpError,
    MissingApiKey,
    EmptyGeneration,
    NoConsensus,
    SpawnFailed,
    ParseError,
    IoError,
    InvalidArgument,
};

std::string_view to_string(Errc code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    Errc code() const noexcept { return code_; }
    // Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

}  // namespace procloop
