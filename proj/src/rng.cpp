#include "forge/rng.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace forge {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    std::uint64_t spare_bits;
    std::memcpy(&spare_bits, &spare_, sizeof spare_bits);
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << spare_bits;
    return os.str();
}

Rng Rng::deserialize(std::string_view text) {
    std::istringstream is{std::string(text)};
    Rng rng;
    int has_spare = 0;
    std::uint64_t spare_bits = 0;
    is >> rng.engine_ >> has_spare >> spare_bits;
    if (!is) throw std::invalid_argument("Rng::deserialize: malformed state");
    rng.has_spare_ = has_spare != 0;
    std::memcpy(&rng.spare_, &spare_bits, sizeof spare_bits);
    return rng;
}

}  // namespace forge
