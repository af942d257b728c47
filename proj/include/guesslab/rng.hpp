#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace guesslab {

/// Deterministic random stream. All randomness in the project flows from one
/// root seed through named substreams so components can be re-run
/// independently without perturbing each other. Gaussian draws use an
/// explicit Box-Muller transform instead of std::normal_distribution, which
/// keeps streams identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    /// Substream derived from (root, name). Same inputs, same stream.
    static Rng named(std::uint64_t root_seed, std::string_view stream);

    std::uint64_t next();

    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (cached spare).
    double normal();

    /// Uniform integer in [0, n). Rejection-sampled, no modulo bias.
    std::size_t uniform_index(std::size_t n);

    /// In-place Fisher-Yates; stable across platforms unlike std::shuffle.
    template <typename Container>
    void shuffle(Container& c) {
        for (std::size_t i = c.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(c[i - 1], c[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// 64-bit FNV-1a, used to derive substream seeds from names.
std::uint64_t fnv1a64(std::string_view s);

/// splitmix64 finalizer; scrambles seeds before feeding the generator.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace guesslab
