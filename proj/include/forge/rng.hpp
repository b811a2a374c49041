#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace forge {

/// Seeded random stream used for every stochastic draw in training.
///
/// Wraps std::mt19937_64. Normal variates come from Box-Muller with the spare
/// value held in the object, so the full state (engine + spare) serializes and
/// a restored stream continues bit-exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();

    std::string serialize() const;
    static Rng deserialize(std::string_view text);

    bool operator==(const Rng& o) const {
        return engine_ == o.engine_ && has_spare_ == o.has_spare_ && spare_ == o.spare_;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace forge
