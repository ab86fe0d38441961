#pragma once

#include <stdexcept>
#include <string>

namespace aegis {

enum class ErrorCode {
    UnknownMagic,
    Truncated,
    CorruptLength,
    IoFailure,
    BadMagic,
    VersionMismatch,
    DimMismatch,
    EmptyCorpus,
    NotADistribution,
    NonFiniteInput,
    BoundaryPoint,
    SingleClassDataset,
    InsufficientData,
    BadCapacity,
    DegenerateClass,
    RingMissing,
    CheckpointMissing,
    SequenceGap,
    InvalidArgument,
};

/// Exception carrying a machine-checkable code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace aegis
