#pragma once

#include <cstdint>
#include <random>

namespace rgr {

using Seed = std::uint64_t;

// Independent sub-streams drawn from one user seed. The numeric values are
// part of the reproducibility contract: changing them changes every output.
enum class Stream : std::uint64_t {
    permutation = 1,
    graph = 2,
    embedding = 3,
    signatures = 4,
    contexts = 5,
    validation_contexts = 6,
    test_contexts = 7,
    training_contexts = 8,
    initialization = 9,
    trial = 10,
    pair_sampling = 11,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Counter-based seed derivation: a pure function of (base, stream, index).
Seed derive_seed(Seed base, Stream stream, std::uint64_t index = 0) noexcept;

class Rng {
public:
    explicit Rng(Seed seed) : engine_{seed} {}
    Rng(Seed base, Stream stream, std::uint64_t index = 0)
        : engine_{derive_seed(base, stream, index)} {}

    std::mt19937_64& engine() noexcept { return engine_; }

    // Uniform integer in [0, n).
    int uniform_index(int n);
    double uniform01();
    double normal(double mean = 0.0, double stddev = 1.0);
    bool bernoulli(double p);
    int binomial(int trials, double p);
    double rademacher();

private:
    std::mt19937_64 engine_;
};

}  // namespace rgr
