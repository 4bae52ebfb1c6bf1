#include "cfood/error.hpp"

namespace cfood {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::Truncated: return "truncated file";
    case ErrorKind::LabelOutOfRange: return "label out of range";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::EmptyClass: return "empty class";
    case ErrorKind::DegenerateInput: return "degenerate input";
    case ErrorKind::MissingRefs: return "missing input refs";
    case ErrorKind::NonFinite: return "non-finite value";
    }
    return "unknown";
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Io:
        return 3;
    case ErrorKind::DegenerateInput:
        return 5;
    default:
        return 4;
    }
}

} // namespace cfood
