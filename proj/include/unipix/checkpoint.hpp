// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container, little-endian throughout:
//
//   "UNIM" | u32 version | u64 header_len | header (JSON)
//   u32 tensor_count | per tensor: u32 name_len, name, u8 dtype (0 = f32),
//                                  u32 ndim, u64 dims[ndim], u64 offset
//   f32 payload (offsets are relative to its start)
//   u32 crc32 of every preceding byte
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unipix/config.hpp"

namespace unipix {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> data;
    bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
    RunConfig config;
    std::uint64_t step = 0;
    std::string rng_state;
    std::uint64_t adam_step = 0;
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
    bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace unipix
