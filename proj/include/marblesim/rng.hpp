#pragma once

#include <cstdint>
#include <random>

namespace marblesim {

// Module tags folded into stream derivation so that different simulators fed
// the same (seed, replica) never share draws.
enum class StreamTag : std::uint64_t {
    Generic = 0,
    Bessel = 1,
    Ladder = 2,
    Vein = 3,
    Marble = 4,
    Population = 5,
    Spine = 6,
    Survival = 7,
};

std::uint64_t splitmix64(std::uint64_t& state);

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id, StreamTag tag = StreamTag::Generic);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // Uniform on the open interval (0,1), 53 bits.
    double uniform();
    double normal();
    // Exp(1).
    double exponential();
    double gamma(double shape);
    std::uint64_t poisson(double mean);

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace marblesim
