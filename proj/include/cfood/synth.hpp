#pragma once

#include "cfood/data_model.hpp"

#include <filesystem>
#include <random>

namespace cfood {

struct SynthConfig {
    std::int64_t classes = 3;
    std::int64_t dim = 2;
    std::int64_t train_per_class = 1000;
    std::int64_t test_count = 500;
    std::int64_t ood_count = 500;
    double sigma = 1.0;
    double separation = 10.0;   // minimum distance between cluster means, in sigmas
    double jitter = 0.5;        // midpoint OOD jitter, in sigmas
    double far_factor = 3.0;    // far-field shell radius over the layout radius
    std::uint64_t seed = 0;
};

/// Seeded Gaussian-cluster benchmark: ID train/test, OOD points around the
/// midpoints between cluster means, OOD points on a far-field shell, and a
/// least-squares linear head fitted to the training set.
struct SynthBenchmark {
    FeatureDataset train;
    FeatureDataset test;
    FeatureDataset ood_mid;
    FeatureDataset ood_far;
    LinearHead head;
    Matrix means;   // C x D
};

/// mt19937_64 with Box-Muller normals, so a seed gives the same stream on every
/// standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();   // [0, 1)
    double normal();
    std::int64_t below(std::int64_t n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0;
    bool has_spare_ = false;
};

/// Cluster centres with every pair at least `distance` apart (exactly that far
/// for neighbouring clusters), centred on the origin.
Matrix cluster_means(std::int64_t classes, std::int64_t dim, double distance);

/// Least-squares fit of one-hot targets on [features, 1].
LinearHead fit_least_squares_head(const FeatureDataset& ds);

SynthBenchmark make_synthetic(const SynthConfig& cfg);

/// Writes train/test/ood_mid/ood_far .cfod (with .refs sidecars), head.cfhd and
/// one JSON manifest per dataset into `dir`.
void write_synthetic(const SynthBenchmark& bench, const std::filesystem::path& dir);

} // namespace cfood
