#pragma once

#include <stdexcept>
#include <string>

namespace cfood {

enum class ErrorKind {
    Io,
    BadMagic,
    Truncated,
    LabelOutOfRange,
    DimensionMismatch,
    InvalidArgument,
    EmptyClass,
    DegenerateInput,
    MissingRefs,
    NonFinite,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Process exit code for an error kind: 3 = I/O, 4 = validation, 5 = degenerate input.
int exit_code(ErrorKind kind);

} // namespace cfood
