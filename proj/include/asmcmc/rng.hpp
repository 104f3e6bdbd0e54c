#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace asmcmc {

/// Derive a child seed from a master seed and a stream index (splitmix64).
/// Parallel lanes and bootstrap replicates each get their own stream so
/// results are reproducible regardless of lane count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seeded generator with explicit Box-Muller gaussians so streams are
/// identical across platforms (std::normal_distribution is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard gaussian, Box-Muller; the spare is cached and is part of
    /// the generator state for checkpointing.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::vector<double> gaussian_vector(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = gaussian();
        return v;
    }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Independent child stream; deterministic in (seed, stream).
    Rng derive(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

    /// Serialize full state (engine + spare cache) for chain checkpoints.
    std::string save_state() const {
        std::ostringstream os;
        os << seed_ << ' ' << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
        os.precision(17);
        os << spare_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        int flag = 0;
        is >> seed_ >> engine_ >> flag >> spare_;
        has_spare_ = (flag != 0);
    }

private:
    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace asmcmc
