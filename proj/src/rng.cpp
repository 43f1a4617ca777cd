#include "marblesim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace marblesim {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream_id, StreamTag tag) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream_id * 0xd1342543de82ef95ULL;
    std::uint64_t b = splitmix64(s);
    s ^= static_cast<std::uint64_t>(tag) * 0xa0761d6478bd642fULL;
    std::uint64_t c = splitmix64(s);
    std::uint64_t d = splitmix64(s);
    return std::seed_seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                         static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                         static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                         static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id, StreamTag tag)
    : seed_(seed), stream_id_(stream_id) {
    auto seq = make_seed_seq(seed, stream_id, tag);
    engine_.seed(seq);
}

double RngStream::uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::exponential() { return -std::log(uniform()); }

double RngStream::gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    std::gamma_distribution<double> g(shape, 1.0);
    return g(engine_);
}

std::uint64_t RngStream::poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be nonnegative");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
        // sequential inversion
        double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (p < 1e-300 && k > mean) break;
        }
        return k;
    }
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(engine_);
}

}  // namespace marblesim
