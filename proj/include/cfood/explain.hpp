#pragma once

#include "cfood/evaluation.hpp"
#include "cfood/scorer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cfood {

struct ReportNeighbour {
    RowIndex row = -1;
    std::string input_ref;
    double distance = 0;   // Euclidean, not normalised
};

struct UnlikeBlock {
    ClassLabel label = -1;
    std::vector<ReportNeighbour> neighbours;   // ascending distance
};

/// Nearest training neighbours of a query: the k closest rows of the predicted
/// class and, per other class, its k closest rows. Blocks are ordered by their
/// nearest member.
struct ExplanationReport {
    std::string query_ref;
    ClassLabel predicted_class = -1;
    Verdict verdict = Verdict::Id;
    double score = 0;
    double normalizer = 0;
    std::vector<ReportNeighbour> like_neighbours;
    std::vector<UnlikeBlock> unlike_blocks;
    /// Classes with no eligible rows, left out of the report.
    std::vector<ClassLabel> omitted_classes;
};

/// Above this class count only the closest kMaxUnlikeBlocks classes are listed.
inline constexpr std::int64_t kAllBlocksClassLimit = 10;
inline constexpr std::size_t kMaxUnlikeBlocks = 5;

/// `train` supplies the input refs for indexed rows and must carry them.
ExplanationReport build_report(const ClassIndex& idx, const LinearHead& head, const TrainStatistics& stats,
                               const FeatureDataset& train, const Eigen::Ref<const Vector>& z,
                               const std::string& ref, std::int64_t k, double tau, const ScoreConfig& cfg);

/// JSON array of reports.
void write_reports_json(const std::vector<ExplanationReport>& reports, std::ostream& out);

/// Plain-text layout: query line, like row, then one row per unlike class.
void render_text(const ExplanationReport& report, std::ostream& out);

} // namespace cfood
