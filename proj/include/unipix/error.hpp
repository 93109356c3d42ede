// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unipix {

// Error classes surface verbatim on the command line, so keep them stable.
enum class ErrorCode {
    invalid_argument,
    shape_mismatch,
    unsupported_character,
    zero_capacity,
    missing_file,
    version_mismatch,
    checksum_mismatch,
    format_error,
    config_error,
    codec_mismatch,
    non_finite,
    divergence,
    io_error,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace unipix
