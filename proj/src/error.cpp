// SPDX-License-Identifier: Apache-2.0
#include "unipix/error.hpp"

namespace unipix {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::shape_mismatch: return "shape_mismatch";
        case ErrorCode::unsupported_character: return "unsupported_character";
        case ErrorCode::zero_capacity: return "zero_capacity";
        case ErrorCode::missing_file: return "missing_file";
        case ErrorCode::version_mismatch: return "version_mismatch";
        case ErrorCode::checksum_mismatch: return "checksum_mismatch";
        case ErrorCode::format_error: return "format_error";
        case ErrorCode::config_error: return "config_error";
        case ErrorCode::codec_mismatch: return "codec_mismatch";
        case ErrorCode::non_finite: return "non_finite";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

}  // namespace unipix
