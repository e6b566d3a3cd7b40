#include "rgr/rng.hpp"

namespace rgr {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Seed derive_seed(Seed base, Stream stream, std::uint64_t index) noexcept {
    std::uint64_t h = splitmix64(base);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return splitmix64(h ^ (index * 0xD1B54A32D192ED03ULL));
}

int Rng::uniform_index(int n) {
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(engine_);
}

double Rng::uniform01() {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(engine_);
}

double Rng::normal(double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(engine_);
}

bool Rng::bernoulli(double p) {
    std::bernoulli_distribution dist(p);
    return dist(engine_);
}

int Rng::binomial(int trials, double p) {
    std::binomial_distribution<int> dist(trials, p);
    return dist(engine_);
}

double Rng::rademacher() {
    return (engine_() >> 63) != 0 ? 1.0 : -1.0;
}

}  // namespace rgr
