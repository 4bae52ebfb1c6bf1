#pragma once

#include "cfood/counterfactual.hpp"

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace cfood {

struct ScoreConfig {
    Method method = Method::Nnce;
    /// Number of target classes, in [1, C-1]. 0 means all C-1.
    std::int64_t k_classes = 0;
    /// Divide by the distance from the input to the training mean.
    bool normalize = true;
    /// Divide by the number of counterfactuals computed.
    bool average = true;
};

struct TrainStatistics {
    Vector mu_train;
};

struct ScoredInput {
    ClassLabel predicted_class = -1;
    /// Higher means more in-distribution.
    double score = 0;
    /// (target class, Euclidean counterfactual distance), ascending by class.
    std::vector<std::pair<ClassLabel, double>> per_class_distances;
    double normalizer = 0;
    /// Selected targets with no eligible training rows.
    std::vector<ClassLabel> skipped_classes;

    friend bool operator==(const ScoredInput&, const ScoredInput&) = default;
};

/// Coordinate-wise mean over every row (compensated summation).
TrainStatistics compute_mu_train(const FeatureDataset& ds);

std::int64_t resolve_k_classes(const ScoreConfig& cfg, std::int64_t class_count);

/// The k non-predicted classes with the highest logits, descending, ties by
/// lowest class. Without logits only k = C-1 is allowed and the classes come
/// back ascending.
std::vector<ClassLabel> select_target_classes(const std::optional<Vector>& logits, ClassLabel predicted,
                                              std::int64_t k, std::int64_t class_count);

/// Counterfactual-distance score for one input. `input_logits` drives top-k
/// selection; when absent the head's logits are used.
ScoredInput score_input(const ClassIndex& idx, const LinearHead& head, const TrainStatistics& stats,
                        const Eigen::Ref<const Vector>& z, const std::optional<Vector>& input_logits,
                        const ScoreConfig& cfg);

/// Same score over an explicit target list (cfg.k_classes is ignored).
ScoredInput score_input_for_targets(const ClassIndex& idx, const LinearHead& head, const TrainStatistics& stats,
                                    const Eigen::Ref<const Vector>& z, std::vector<ClassLabel> targets,
                                    const ScoreConfig& cfg);

/// score_input over every row, in row order. Output does not depend on threads.
std::vector<ScoredInput> score_batch(const FeatureDataset& test, const ClassIndex& idx, const LinearHead& head,
                                     const TrainStatistics& stats, const ScoreConfig& cfg, int threads = 1);

/// One JSON object per line: row, [ref], predicted_class, score, normalizer,
/// per_class_distances, [skipped_classes].
void write_scores_jsonl(const std::vector<ScoredInput>& scores, const std::vector<std::string>* refs,
                        std::ostream& out);

} // namespace cfood
