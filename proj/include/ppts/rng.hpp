#pragma once

#include <cmath>
#include <cstdint>

#include "ppts/errors.hpp"

namespace ppts {

// splitmix64 finalizer, used only to derive stream keys
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Philox4x32-10 counter-based generator. The 64-bit key identifies a
// stream; the block counter advances as numbers are drawn, so draws
// depend only on (key, draw index) and never on other streams.
class Rng {
  public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    // independent child stream; derivation is a keyed hash, so
    // stream(a) and stream(b) collide only by 64-bit accident
    Rng stream(std::uint64_t idx) const {
        return Rng(mix64(key_ ^ mix64(idx + 0x632be59bd9b4e019ull)));
    }

    std::uint64_t next_u64() {
        if (have_ == 0) refill();
        std::uint32_t lo = buf_[4 - have_];
        std::uint32_t hi = buf_[5 - have_];
        have_ -= 2;
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }        // [0,1)
    double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }  // (0,1]

    double normal() {
        double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        double a = 6.283185307179586 * uniform();
        return r * std::cos(a);
    }

    // exact Poisson: product-of-uniforms for small means, Hormann's
    // PTRS transformed rejection for large ones
    long poisson(double mu) {
        if (!(mu >= 0.0)) throw config_error("poisson: mean must be nonnegative");
        if (mu == 0.0) return 0;
        if (mu < 10.0) {
            double limit = std::exp(-mu);
            long k = 0;
            double prod = uniform_pos();
            while (prod > limit) {
                ++k;
                prod *= uniform_pos();
            }
            return k;
        }
        double b = 0.931 + 2.53 * std::sqrt(mu);
        double a = -0.059 + 0.02483 * b;
        double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        double v_r = 0.9277 - 3.6224 / (b - 2.0);
        double log_mu = std::log(mu);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform_pos();
            double us = 0.5 - std::abs(u);
            double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<long>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * log_mu - mu - std::lgamma(k + 1.0))
                return static_cast<long>(k);
        }
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int have_ = 0;

    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(ctr_);
        std::uint32_t c1 = static_cast<std::uint32_t>(ctr_ >> 32);
        std::uint32_t c2 = 0, c3 = 0;
        std::uint32_t k0 = static_cast<std::uint32_t>(key_);
        std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = 0xD2511F53ull * c0;
            std::uint64_t p1 = 0xCD9E8D57ull * c2;
            std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            std::uint32_t n1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            std::uint32_t n3 = static_cast<std::uint32_t>(p0);
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buf_[0] = c0; buf_[1] = c1; buf_[2] = c2; buf_[3] = c3;
        ++ctr_;
        have_ = 4;
    }
};

}  // namespace ppts
