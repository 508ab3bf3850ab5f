#pragma once

#include <array>
#include <cstdint>

namespace flycl {

/// Philox4x32-10 block function (Salmon et al., Random123 constants).
/// Pure function of (counter, key); no hidden state.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Sequential view over one Philox stream.
///
/// The key is the 64-bit seed; counter words 2..3 carry a 64-bit stream id and
/// words 0..1 a 64-bit block index. Every draw is therefore addressable as
/// (seed, stream, position), which is what makes matrices reproducible in any
/// language that implements the same block function and the same samplers:
///
///  - next_u32: the 4 words of each block in order.
///  - next_u64: (hi << 32) | lo from two consecutive words, hi first.
///  - next_uniform: (next_u64() >> 11) + 0.5, times 2^-53. Never 0 or 1.
///  - next_normal: inverse normal CDF of next_uniform (Wichura AS241).
///  - uniform_below(n): Lemire's multiply-shift with rejection on next_u32.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint64_t stream) noexcept;

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;
    double next_uniform() noexcept;
    double next_normal() noexcept;
    std::uint32_t uniform_below(std::uint32_t bound) noexcept;

private:
    PhiloxKey key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    PhiloxCounter buffer_{};
    int used_ = 4;
};

/// Inverse of the standard normal CDF, AS241 (PPND16), |rel err| ~ 1e-16.
double normal_quantile(double p) noexcept;

}  // namespace flycl
