#pragma once

#include <cmath>
#include <cstdint>

namespace meanref {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block is
/// a pure function of (key, counter), so any draw in any stream can be
/// produced independently of evaluation order.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static void block(std::uint32_t key0, std::uint32_t key1, std::uint32_t ctr[4]) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr[0] = hi1 ^ ctr[1] ^ key0;
            ctr[1] = lo1;
            ctr[2] = hi0 ^ ctr[3] ^ key1;
            ctr[3] = lo0;
            key0 += kWeyl0;
            key1 += kWeyl1;
        }
    }
};

/// Standard normal draws from the stream keyed by (seed, stream index);
/// block c of the stream yields four draws by Box-Muller on the four
/// uniforms (x + 1/2) 2^-32.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          ctr0_(static_cast<std::uint32_t>(stream)),
          ctr1_(static_cast<std::uint32_t>(stream >> 32)) {}

    double next() {
        if (have_ == 0) refill();
        return cache_[4 - have_--];
    }

private:
    static double to_unit(std::uint32_t x) {
        return (static_cast<double>(x) + 0.5) * 0x1p-32;
    }

    void refill() {
        std::uint32_t ctr[4] = {ctr0_, ctr1_, block_++, 0u};
        Philox4x32::block(key0_, key1_, ctr);
        const double two_pi = 6.283185307179586476925286766559;
        const double r0 = std::sqrt(-2.0 * std::log(to_unit(ctr[0])));
        const double a0 = two_pi * to_unit(ctr[1]);
        const double r1 = std::sqrt(-2.0 * std::log(to_unit(ctr[2])));
        const double a1 = two_pi * to_unit(ctr[3]);
        cache_[0] = r0 * std::cos(a0);
        cache_[1] = r0 * std::sin(a0);
        cache_[2] = r1 * std::cos(a1);
        cache_[3] = r1 * std::sin(a1);
        have_ = 4;
    }

    std::uint32_t key0_, key1_, ctr0_, ctr1_;
    std::uint32_t block_ = 0;
    double cache_[4] = {0, 0, 0, 0};
    int have_ = 0;
};

}  // namespace meanref
