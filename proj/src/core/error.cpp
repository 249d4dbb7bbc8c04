// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/error.hpp>

namespace segwild {

const char *
errorCodeName(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::Runtime: return "runtime";
    }
    return "unknown";
}

void
fail(ErrorCode code, const std::string &message) {
    throw Error(code, message);
}

} // namespace segwild
