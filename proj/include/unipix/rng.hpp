// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace unipix {

// Thin wrapper over mt19937_64. The engine's sequence is fixed by the
// standard; the real-valued conversions below are done by hand because the
// std distributions are implementation-defined, which would break
// cross-platform reproducibility of checkpoints.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; stateless (no cached second value).
    double normal();

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::string state() const;
    void set_state(const std::string& state);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

    // Seed for a labelled substream, e.g. derive(seed, "init").
    static std::uint64_t derive(std::uint64_t seed, std::string_view label);

private:
    std::mt19937_64 engine_;
};

}  // namespace unipix
