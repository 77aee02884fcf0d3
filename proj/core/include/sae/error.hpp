#pragma once

#include <stdexcept>
#include <string>

namespace sae {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Raised when the isolation layer itself cannot do its job (missing mount
// source, unknown dependency bundle, namespace setup failure). Never used for
// limit breaches or misbehaving user code.
class SandboxError : public Error {
public:
    using Error::Error;
};

}  // namespace sae
