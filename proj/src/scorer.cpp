#include "cfood/scorer.hpp"

#include "cfood/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <ostream>

namespace cfood {

TrainStatistics compute_mu_train(const FeatureDataset& ds)
{
    if (ds.rows() < 1)
        throw Error(ErrorKind::DimensionMismatch, "cannot average an empty dataset");
    Vector sum = Vector::Zero(ds.dim());
    Vector carry = Vector::Zero(ds.dim());
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.dim(); ++j) {
            // Neumaier summation
            const double x = ds.features(i, j);
            const double t = sum(j) + x;
            if (std::abs(sum(j)) >= std::abs(x))
                carry(j) += (sum(j) - t) + x;
            else
                carry(j) += (x - t) + sum(j);
            sum(j) = t;
        }
    }
    return {(sum + carry) / static_cast<double>(ds.rows())};
}

std::int64_t resolve_k_classes(const ScoreConfig& cfg, std::int64_t class_count)
{
    const std::int64_t full = class_count - 1;
    const std::int64_t k = cfg.k_classes == 0 ? full : cfg.k_classes;
    if (k < 1 || k > full)
        throw Error(ErrorKind::InvalidArgument, "k_classes must be in [1, " + std::to_string(full) + "], got "
                                                    + std::to_string(cfg.k_classes));
    return k;
}

std::vector<ClassLabel> select_target_classes(const std::optional<Vector>& logits, ClassLabel predicted,
                                              std::int64_t k, std::int64_t class_count)
{
    if (k < 1 || k > class_count - 1)
        throw Error(ErrorKind::InvalidArgument, "k must be in [1, C-1]");
    std::vector<ClassLabel> classes;
    classes.reserve(static_cast<std::size_t>(class_count - 1));
    for (ClassLabel c = 0; c < class_count; ++c)
        if (c != predicted)
            classes.push_back(c);
    if (!logits) {
        if (k < class_count - 1)
            throw Error(ErrorKind::InvalidArgument, "top-k class selection needs logits");
        return classes;
    }
    if (logits->size() != class_count)
        throw Error(ErrorKind::DimensionMismatch, "logits have " + std::to_string(logits->size())
                                                      + " entries, expected " + std::to_string(class_count));
    const auto& l = *logits;
    std::stable_sort(classes.begin(), classes.end(), [&](ClassLabel a, ClassLabel b) { return l(a) > l(b); });
    classes.resize(static_cast<std::size_t>(k));
    return classes;
}

ScoredInput score_input_for_targets(const ClassIndex& idx, const LinearHead& head, const TrainStatistics& stats,
                                    const Eigen::Ref<const Vector>& z, std::vector<ClassLabel> targets,
                                    const ScoreConfig& cfg)
{
    ScoredInput out;
    out.predicted_class = predict(head, z);
    out.normalizer = get_distance(z, stats.mu_train);
    if (cfg.normalize && out.normalizer == 0.0)
        throw Error(ErrorKind::DegenerateInput, "degenerate input: query equals the training mean");

    // Summing in class order makes top-k = C-1 identical to the full path.
    std::sort(targets.begin(), targets.end());
    double total = 0.0;
    for (ClassLabel t : targets) {
        if (t == out.predicted_class)
            throw Error(ErrorKind::InvalidArgument, "target list contains the predicted class");
        if (t < 0 || t >= idx.class_count())
            throw Error(ErrorKind::InvalidArgument, "target class " + std::to_string(t) + " out of range");
        if (idx.class_size(t) == 0) {
            out.skipped_classes.push_back(t);
            continue;
        }
        const double d = find_counterfactual(cfg.method, idx, head, z, t).distance;
        out.per_class_distances.emplace_back(t, d);
        total += d;
    }
    if (out.per_class_distances.empty())
        throw Error(ErrorKind::EmptyClass, "empty class: every target class has no eligible training rows");

    double score = total;
    if (cfg.average)
        score /= static_cast<double>(out.per_class_distances.size());
    if (cfg.normalize)
        score /= out.normalizer;
    out.score = score;
    return out;
}

ScoredInput score_input(const ClassIndex& idx, const LinearHead& head, const TrainStatistics& stats,
                        const Eigen::Ref<const Vector>& z, const std::optional<Vector>& input_logits,
                        const ScoreConfig& cfg)
{
    const auto k = resolve_k_classes(cfg, head.class_count());
    const std::optional<Vector> lg = input_logits ? input_logits : std::optional<Vector>(logits(head, z));
    const ClassLabel predicted = predict(head, z);
    return score_input_for_targets(idx, head, stats, z, select_target_classes(lg, predicted, k, head.class_count()),
                                   cfg);
}

std::vector<ScoredInput> score_batch(const FeatureDataset& test, const ClassIndex& idx, const LinearHead& head,
                                     const TrainStatistics& stats, const ScoreConfig& cfg, int threads)
{
    if (test.dim() != idx.dim())
        throw Error(ErrorKind::DimensionMismatch, "test set has " + std::to_string(test.dim())
                                                      + " features, training set has " + std::to_string(idx.dim()));
    resolve_k_classes(cfg, head.class_count());
    std::vector<ScoredInput> out(static_cast<std::size_t>(test.rows()));
    parallel_for(test.rows(), threads, [&](std::int64_t i) {
        std::optional<Vector> lg;
        if (test.logits)
            lg = test.logits->row(i).transpose().cast<double>();
        try {
            out[static_cast<std::size_t>(i)] = score_input(idx, head, stats, test.row(i), lg, cfg);
        } catch (const Error& e) {
            throw Error(e.kind(), "row " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

void write_scores_jsonl(const std::vector<ScoredInput>& scores, const std::vector<std::string>* refs,
                        std::ostream& out)
{
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        nlohmann::ordered_json j;
        j["row"] = i;
        if (refs)
            j["ref"] = (*refs)[i];
        j["predicted_class"] = s.predicted_class;
        j["score"] = s.score;
        j["normalizer"] = s.normalizer;
        nlohmann::ordered_json dist = nlohmann::ordered_json::object();
        for (const auto& [c, d] : s.per_class_distances)
            dist[std::to_string(c)] = d;
        j["per_class_distances"] = std::move(dist);
        if (!s.skipped_classes.empty())
            j["skipped_classes"] = s.skipped_classes;
        out << j.dump() << '\n';
    }
}

} // namespace cfood
