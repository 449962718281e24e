#pragma once

#include <stdexcept>
#include <string>

namespace bplab {

enum class ErrorCode : int {
    InvalidArgument = 1,
    GenerationFailed,
    ExpertFailure,
    ValidationFailed,
    VersionMismatch,
    CorruptRecord,
    ReplayDivergence,
    ShapeMismatch,
    IndexOutOfRange,
    NotScalar,
    InvalidPair,
    EpisodeTooShort,
    Divergence,
    MissingFrozenParam,
    TaskMismatch,
    InvalidAction,
    EmptyDataset,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void check(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) { fail(code, msg); }
}

} // namespace bplab
