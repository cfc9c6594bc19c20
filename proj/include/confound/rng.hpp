#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace confound {

// Counter-based seed derivation: every independent stream (permutation
// iteration, simulation replicate, bootstrap tree) gets its own sub-seed
// hashed from (master, stream). Results are then independent of execution
// order, which is what makes parallel runs bit-reproducible.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix64(mix64(master) ^ mix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

// mt19937_64 core with hand-rolled draws. The standard distributions are
// implementation-defined, so bounded ints, uniforms and normals are coded
// here to keep streams stable across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [0, n); unbiased rejection sampling
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t reject = (-n) % n;  // 2^64 mod n
        std::uint64_t x = next_u64();
        while (x < reject) x = next_u64();
        return x % n;
    }

    // standard normal via Box-Muller, second value cached
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace confound
