#pragma once

// Brute-force reference implementations for tests. Nothing here calls into the
// index, scorer or metric code it is used to check.

#include "cfood/data_model.hpp"
#include "cfood/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

using cfood::ClassLabel;
using cfood::FeatureDataset;
using cfood::LinearHead;
using cfood::RowIndex;
using cfood::Vector;

inline double sq_dist(const FeatureDataset& ds, RowIndex i, const Vector& z)
{
    double s = 0.0;
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
        const double t = static_cast<double>(ds.features(i, j)) - z(j);
        s += t * t;
    }
    return s;
}

inline std::vector<double> logit_scan(const LinearHead& head, const Vector& z)
{
    std::vector<double> out(static_cast<std::size_t>(head.class_count()));
    for (Eigen::Index c = 0; c < head.class_count(); ++c) {
        double s = 0;
        for (Eigen::Index j = 0; j < head.dim(); ++j)
            s += static_cast<double>(head.weights(c, j)) * z(j);
        out[static_cast<std::size_t>(c)] = s + static_cast<double>(head.bias(c));
    }
    return out;
}

inline ClassLabel predict(const LinearHead& head, const Vector& z)
{
    const auto l = logit_scan(head, z);
    ClassLabel best = 0;
    for (std::size_t c = 1; c < l.size(); ++c)
        if (l[c] > l[static_cast<std::size_t>(best)])
            best = static_cast<ClassLabel>(c);
    return best;
}

inline std::vector<bool> eligible(const FeatureDataset& ds, const LinearHead* head)
{
    std::vector<bool> ok(static_cast<std::size_t>(ds.rows()), true);
    if (head)
        for (RowIndex i = 0; i < ds.rows(); ++i)
            ok[static_cast<std::size_t>(i)] = predict(*head, ds.row(i)) == ds.labels(i);
    return ok;
}

/// All (distance, index) pairs of the chosen rows, sorted.
inline std::vector<std::pair<double, RowIndex>> sorted_rows(const FeatureDataset& ds, const std::vector<bool>& ok,
                                                            const Vector& z, ClassLabel only_class = -1)
{
    std::vector<std::pair<double, RowIndex>> all;
    for (RowIndex i = 0; i < ds.rows(); ++i) {
        if (!ok[static_cast<std::size_t>(i)])
            continue;
        if (only_class >= 0 && ds.labels(i) != only_class)
            continue;
        all.emplace_back(sq_dist(ds, i, z), i);
    }
    std::sort(all.begin(), all.end());
    return all;
}

/// Straight-line counterfactual-distance score with NNCE by exhaustive scan.
inline double nnce_score(const FeatureDataset& train, const LinearHead& head, const Vector& z, bool average,
                         bool normalize)
{
    const auto ok = eligible(train, &head);
    const ClassLabel pred = predict(head, z);
    Vector mu = Vector::Zero(train.dim());
    for (RowIndex i = 0; i < train.rows(); ++i)
        for (Eigen::Index j = 0; j < train.dim(); ++j)
            mu(j) += static_cast<double>(train.features(i, j));
    mu /= static_cast<double>(train.rows());

    double total = 0;
    int count = 0;
    for (ClassLabel y = 0; y < head.class_count(); ++y) {
        if (y == pred)
            continue;
        double best = std::numeric_limits<double>::infinity();
        for (RowIndex i = 0; i < train.rows(); ++i)
            if (ok[static_cast<std::size_t>(i)] && train.labels(i) == y)
                best = std::min(best, sq_dist(train, i, z));
        if (std::isinf(best))
            continue;
        total += std::sqrt(best);
        ++count;
    }
    double norm = 0;
    for (Eigen::Index j = 0; j < z.size(); ++j)
        norm += (z(j) - mu(j)) * (z(j) - mu(j));
    norm = std::sqrt(norm);
    double score = total;
    if (average)
        score /= count;
    if (normalize)
        score /= norm;
    return score;
}

inline double pairwise_auroc(const std::vector<double>& id, const std::vector<double>& ood)
{
    double wins = 0;
    for (double a : id)
        for (double b : ood)
            wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

/// Sweeps every attained ID score as a threshold and keeps the largest with
/// TPR >= 0.95.
inline std::pair<double, double> sweep_fpr95(const std::vector<double>& id, const std::vector<double>& ood)
{
    double best_tau = -std::numeric_limits<double>::infinity();
    for (double tau : id) {
        const auto tp = std::count_if(id.begin(), id.end(), [&](double s) { return s >= tau; });
        if (static_cast<double>(tp) * 100.0 >= 95.0 * static_cast<double>(id.size()) && tau > best_tau)
            best_tau = tau;
    }
    const auto fp = std::count_if(ood.begin(), ood.end(), [&](double s) { return s >= best_tau; });
    return {static_cast<double>(fp) / static_cast<double>(ood.size()), best_tau};
}

/// Random dataset with every label present. Coordinates are quantised to a
/// grid when `grid > 0` so exact distance ties occur.
inline FeatureDataset random_dataset(cfood::Rng& rng, std::int64_t n, std::int64_t d, std::int64_t c,
                                     double grid = 0.0)
{
    FeatureDataset ds;
    ds.class_count = c;
    ds.features.resize(n, d);
    ds.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            double v = rng.normal();
            if (grid > 0)
                v = std::round(v / grid) * grid;
            ds.features(i, j) = static_cast<float>(v);
        }
        ds.labels(i) = static_cast<ClassLabel>(i < c ? i : rng.below(c));
    }
    return ds;
}

inline LinearHead random_head(cfood::Rng& rng, std::int64_t c, std::int64_t d)
{
    LinearHead h;
    h.weights.resize(c, d);
    h.bias.resize(c);
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            h.weights(i, j) = static_cast<float>(rng.normal());
        h.bias(i) = static_cast<float>(0.1 * rng.normal());
    }
    return h;
}

/// Relabels rows with the head's own prediction (every row then eligible).
inline void label_by_head(FeatureDataset& ds, const LinearHead& head)
{
    for (RowIndex i = 0; i < ds.rows(); ++i)
        ds.labels(i) = predict(head, ds.row(i));
}

inline Vector random_query(cfood::Rng& rng, std::int64_t d)
{
    Vector z(d);
    for (Eigen::Index j = 0; j < d; ++j)
        z(j) = rng.normal();
    return z;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("cfood_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace oracle
