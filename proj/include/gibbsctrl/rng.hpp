#pragma once

#include <cmath>
#include <cstdint>

#include "gibbsctrl/util.hpp"

namespace gibbsctrl {

// Counter-based random stream. Each draw is mix64(key, counter), so a stream
// is fully determined by its key: trajectories own disjoint streams and the
// simulation result cannot depend on scheduling.
class RngStream {
  public:
    explicit RngStream(uint64_t key) : key_(key) {}

    static RngStream for_trajectory(uint64_t seed, uint64_t trajectory) {
        return RngStream(hash_combine(mix64(seed), trajectory + 1));
    }

    uint64_t next_u64() { return mix64(key_ ^ (counter_++ * 0xd1342543de82ef95ULL)); }

    // uniform on (0,1)
    double next_uniform() {
        // 53 random bits, then shift into (0,1) strictly
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; second value of the pair is cached
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    uint64_t key_;
    uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gibbsctrl
