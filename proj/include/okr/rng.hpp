#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace okr {

/// Named sub-streams. A generator for (seed, stream) is independent of every
/// other stream drawn from the same seed, so adding draws to one stage never
/// perturbs another.
enum class Stream : std::uint64_t {
    GpFunction = 1,
    GpSplit = 2,
    GpNoise = 3,
    Features = 4,
    ClusterMeans = 5,
    ClusterSamples = 6,
    Ordering = 7,
    MlpInit = 8,
    Experiment = 9,
};

/// xoshiro256** seeded through splitmix64.
///
/// The bit stream is fully specified, and the real-valued draws are derived
/// from it with explicit formulas (53-bit uniforms, Box-Muller normals), so
/// datasets depend only on the seed, not on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    Rng(std::uint64_t seed, Stream stream);

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform();
    /// Standard normal.
    double normal();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace okr
