#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cdal/core/tensor.hpp"

namespace cdal {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mixes a label into a seed so that independent streams (init, data order,
// per-instance noise, ...) can be derived from one user seed.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ splitmix64(tag ^ 0xd1b54a32d192ed03ULL));
}

// mt19937_64 with hand-rolled output transforms so the produced values depend
// only on the generator's bit stream, not on libstdc++ distribution internals.
// Box-Muller keeps a cached spare normal; that spare is part of the stream
// state and is included in serialization.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] inclusive. Modulo bias is negligible for the
    // small ranges used here (timesteps, indices).
    int uniform_int(int lo, int hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename Real>
    void fill_normal(Tensor<Real>& t) {
        for (auto& v : t.data) v = static_cast<Real>(normal());
    }

    template <typename Real>
    void fill_normal(Tensor<Real>& t, Real stddev) {
        for (auto& v : t.data) v = static_cast<Real>(normal()) * stddev;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(engine_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    Rng fork(uint64_t tag) { return Rng(derive_seed(engine_(), tag)); }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_ << " " << (has_spare_ ? 1 : 0) << " ";
        os.precision(17);
        os << spare_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        int flag = 0;
        is >> engine_ >> flag >> spare_;
        has_spare_ = (flag != 0);
        if (!is) throw IoError("Rng::deserialize: malformed state string");
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cdal
