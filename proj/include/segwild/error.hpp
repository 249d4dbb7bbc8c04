// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace segwild {

enum class ErrorCode {
    InvalidArgument = 1,
    Validation,
    Io,
    Format,
    NotFound,
    DimensionMismatch,
    Runtime,
};

/// Stable machine-readable name, e.g. "dimension_mismatch".
const char *errorCodeName(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), mCode(code) {}

    ErrorCode
    code() const noexcept {
        return mCode;
    }

  private:
    ErrorCode mCode;
};

[[noreturn]] void fail(ErrorCode code, const std::string &message);

inline void
check(bool condition, ErrorCode code, const char *message) {
    if (!condition) {
        fail(code, message);
    }
}

} // namespace segwild
