#pragma once

#include "cfood/nn_index.hpp"
#include "cfood/scorer.hpp"

#include <span>
#include <vector>

namespace cfood {

enum class Verdict { Id, Ood };

const char* to_string(Verdict v);

/// Threshold detector: ID iff score >= tau.
inline Verdict classify(double score, double tau) { return score >= tau ? Verdict::Id : Verdict::Ood; }

struct DetectionMetrics {
    double auroc = 0;
    double fpr95 = 0;
    double threshold_tau = 0;
    std::int64_t id_count = 0;
    std::int64_t ood_count = 0;
};

struct FprAt95 {
    double fpr95 = 0;
    double tau = 0;
};

// Baseline scores; higher means more in-distribution for all of them.

/// Maximum softmax probability.
double msp_score(const Eigen::Ref<const Vector>& logits);

/// T * log sum_c exp(logit_c / T), i.e. the negated free energy.
double energy_score(const Eigen::Ref<const Vector>& logits, double temperature = 1.0);

Vector unit_normalize(const Eigen::Ref<const Vector>& z);
/// Every row scaled to unit L2 norm; the KNN baseline indexes this.
FeatureDataset unit_normalize(const FeatureDataset& ds);

/// Negative k-th nearest neighbour distance of the unit-normalised query.
/// `normalized_idx` must be built over unit_normalize(train).
double knn_score(const ClassIndex& normalized_idx, const Eigen::Ref<const Vector>& z, std::int64_t k);

/// Mean closed-form distance to the predicted class's linear decision
/// boundaries, divided by ||z - mu_train||. Classes whose weight difference
/// vanishes are skipped and listed in `skipped` when given.
double fdbd_score(const LinearHead& head, const TrainStatistics& stats, const Eigen::Ref<const Vector>& z,
                  std::vector<ClassLabel>* skipped = nullptr);

/// P(id > ood) + 0.5 P(id == ood) over all pairs, computed from ranks.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// tau is the largest attained ID score keeping TPR >= 95% under `score >= tau`;
/// fpr95 is the fraction of OOD scores >= tau.
FprAt95 fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores);

DetectionMetrics evaluate_detector(std::span<const double> id_scores, std::span<const double> ood_scores);

} // namespace cfood
