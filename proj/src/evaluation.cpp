#include "cfood/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace cfood {

namespace {

void check_finite(const Eigen::Ref<const Vector>& logits)
{
    if (logits.size() < 2)
        throw Error(ErrorKind::InvalidArgument, "need at least two logits");
    if (!logits.allFinite())
        throw Error(ErrorKind::NonFinite, "non-finite logits");
}

void check_scores(std::span<const double> id_scores, std::span<const double> ood_scores)
{
    if (id_scores.empty() || ood_scores.empty())
        throw Error(ErrorKind::InvalidArgument, "need at least one ID and one OOD score");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(id_scores.begin(), id_scores.end(), finite)
        || !std::all_of(ood_scores.begin(), ood_scores.end(), finite))
        throw Error(ErrorKind::NonFinite, "non-finite score");
}

std::vector<double> sorted(std::span<const double> v)
{
    std::vector<double> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

const char* to_string(Verdict v) { return v == Verdict::Id ? "ID" : "OOD"; }

double msp_score(const Eigen::Ref<const Vector>& logits)
{
    check_finite(logits);
    const double m = logits.maxCoeff();
    // The max entry contributes exp(0) = 1 to the partition sum.
    return 1.0 / (logits.array() - m).exp().sum();
}

double energy_score(const Eigen::Ref<const Vector>& logits, double temperature)
{
    check_finite(logits);
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
    const Vector scaled = logits / temperature;
    const double m = scaled.maxCoeff();
    return temperature * (m + std::log((scaled.array() - m).exp().sum()));
}

Vector unit_normalize(const Eigen::Ref<const Vector>& z)
{
    const double norm = z.norm();
    if (norm == 0.0)
        throw Error(ErrorKind::DegenerateInput, "degenerate input: cannot unit-normalise a zero vector");
    return z / norm;
}

FeatureDataset unit_normalize(const FeatureDataset& ds)
{
    FeatureDataset out = ds;
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        out.features.row(i) = unit_normalize(ds.row(i)).transpose().cast<float>();
    return out;
}

double knn_score(const ClassIndex& normalized_idx, const Eigen::Ref<const Vector>& z, std::int64_t k)
{
    return -std::sqrt(kth_nearest_global(normalized_idx, unit_normalize(z), k));
}

double fdbd_score(const LinearHead& head, const TrainStatistics& stats, const Eigen::Ref<const Vector>& z,
                  std::vector<ClassLabel>* skipped)
{
    const ClassLabel predicted = predict(head, z);
    const double normalizer = std::sqrt(squared_distance(z, stats.mu_train));
    if (normalizer == 0.0)
        throw Error(ErrorKind::DegenerateInput, "degenerate input: query equals the training mean");

    const Eigen::RowVectorXd w_pred = head.weights.row(predicted).cast<double>();
    double total = 0.0;
    std::int64_t count = 0;
    for (ClassLabel c = 0; c < head.class_count(); ++c) {
        if (c == predicted)
            continue;
        const Eigen::RowVectorXd dw = w_pred - head.weights.row(c).cast<double>();
        const double denom = dw.norm();
        if (denom == 0.0) {
            if (skipped)
                skipped->push_back(c);
            continue;
        }
        const double db = static_cast<double>(head.bias(predicted)) - static_cast<double>(head.bias(c));
        total += std::abs(dw.dot(z.transpose()) + db) / denom;
        ++count;
    }
    if (count == 0)
        throw Error(ErrorKind::DegenerateInput, "degenerate head: every weight row equals the predicted row");
    return total / static_cast<double>(count) / normalizer;
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores)
{
    check_scores(id_scores, ood_scores);
    const auto ood = sorted(ood_scores);
    // Twice the Mann-Whitney U, kept integral so the result is exact.
    std::uint64_t twice_u = 0;
    for (double s : id_scores) {
        const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
        const auto hi = std::upper_bound(lo, ood.end(), s);
        twice_u += 2 * static_cast<std::uint64_t>(lo - ood.begin()) + static_cast<std::uint64_t>(hi - lo);
    }
    return static_cast<double>(twice_u)
           / (2.0 * static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size()));
}

FprAt95 fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores)
{
    check_scores(id_scores, ood_scores);
    const auto id = sorted(id_scores);
    const auto n = static_cast<std::uint64_t>(id.size());
    const std::uint64_t required = (95 * n + 99) / 100;   // ceil(0.95 n)
    const double tau = id[n - required];
    const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s >= tau; });
    return {static_cast<double>(accepted) / static_cast<double>(ood_scores.size()), tau};
}

DetectionMetrics evaluate_detector(std::span<const double> id_scores, std::span<const double> ood_scores)
{
    DetectionMetrics m;
    m.auroc = auroc(id_scores, ood_scores);
    const auto f = fpr_at_95_tpr(id_scores, ood_scores);
    m.fpr95 = f.fpr95;
    m.threshold_tau = f.tau;
    m.id_count = static_cast<std::int64_t>(id_scores.size());
    m.ood_count = static_cast<std::int64_t>(ood_scores.size());
    return m;
}

} // namespace cfood
