#include "cfood/explain.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace cfood {

namespace {

std::vector<ReportNeighbour> resolve(const std::vector<Neighbour>& found, const std::vector<std::string>& refs)
{
    std::vector<ReportNeighbour> out;
    out.reserve(found.size());
    for (const auto& n : found)
        out.push_back({n.index, refs[static_cast<std::size_t>(n.index)], std::sqrt(n.squared_distance)});
    return out;
}

nlohmann::ordered_json neighbour_json(const ReportNeighbour& n)
{
    nlohmann::ordered_json j;
    j["row"] = n.row;
    j["input_ref"] = n.input_ref;
    j["distance"] = n.distance;
    return j;
}

} // namespace

ExplanationReport build_report(const ClassIndex& idx, const LinearHead& head, const TrainStatistics& stats,
                               const FeatureDataset& train, const Eigen::Ref<const Vector>& z,
                               const std::string& ref, std::int64_t k, double tau, const ScoreConfig& cfg)
{
    if (!train.input_refs)
        throw Error(ErrorKind::MissingRefs, "missing input refs: the training manifest needs a refs_path "
                                            "(or a .refs sidecar) so neighbours can be mapped back to inputs");
    if (k < 1)
        throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    if (train.rows() != idx.source_rows())
        throw Error(ErrorKind::DimensionMismatch, "training set does not match the index");
    const auto& refs = *train.input_refs;

    const ScoredInput scored = score_input(idx, head, stats, z, std::nullopt, cfg);

    ExplanationReport report;
    report.query_ref = ref;
    report.predicted_class = scored.predicted_class;
    report.score = scored.score;
    report.normalizer = scored.normalizer;
    report.verdict = classify(scored.score, tau);

    if (idx.class_size(scored.predicted_class) > 0)
        report.like_neighbours = resolve(k_nearest_in_class(idx, z, scored.predicted_class, k), refs);
    else
        report.omitted_classes.push_back(scored.predicted_class);

    for (ClassLabel c = 0; c < idx.class_count(); ++c) {
        if (c == scored.predicted_class)
            continue;
        if (idx.class_size(c) == 0) {
            report.omitted_classes.push_back(c);
            continue;
        }
        report.unlike_blocks.push_back({c, resolve(k_nearest_in_class(idx, z, c, k), refs)});
    }
    std::stable_sort(report.unlike_blocks.begin(), report.unlike_blocks.end(),
                     [](const UnlikeBlock& a, const UnlikeBlock& b) {
                         return a.neighbours.front().distance < b.neighbours.front().distance;
                     });
    if (idx.class_count() > kAllBlocksClassLimit && report.unlike_blocks.size() > kMaxUnlikeBlocks)
        report.unlike_blocks.resize(kMaxUnlikeBlocks);
    std::sort(report.omitted_classes.begin(), report.omitted_classes.end());
    return report;
}

void write_reports_json(const std::vector<ExplanationReport>& reports, std::ostream& out)
{
    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["query_ref"] = r.query_ref;
        j["predicted_class"] = r.predicted_class;
        j["verdict"] = to_string(r.verdict);
        j["score"] = r.score;
        j["normalizer"] = r.normalizer;
        auto like = nlohmann::ordered_json::array();
        for (const auto& n : r.like_neighbours) {
            auto nj = neighbour_json(n);
            nj["class"] = r.predicted_class;
            like.push_back(std::move(nj));
        }
        j["like_neighbours"] = std::move(like);
        auto blocks = nlohmann::ordered_json::array();
        for (const auto& b : r.unlike_blocks) {
            nlohmann::ordered_json bj;
            bj["class"] = b.label;
            auto ns = nlohmann::ordered_json::array();
            for (const auto& n : b.neighbours)
                ns.push_back(neighbour_json(n));
            bj["neighbours"] = std::move(ns);
            blocks.push_back(std::move(bj));
        }
        j["unlike_blocks"] = std::move(blocks);
        j["omitted_classes"] = r.omitted_classes;
        all.push_back(std::move(j));
    }
    out << all.dump(2) << '\n';
}

void render_text(const ExplanationReport& r, std::ostream& out)
{
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::fixed << std::setprecision(3);
    out << "query " << r.query_ref << "  predicted " << r.predicted_class << "  " << to_string(r.verdict)
        << "  score " << r.score << "  normalizer " << r.normalizer << '\n';
    out << "  like    [" << r.predicted_class << "]";
    for (const auto& n : r.like_neighbours)
        out << "  " << n.input_ref << " (" << n.distance << ")";
    out << '\n';
    for (const auto& b : r.unlike_blocks) {
        out << "  unlike  [" << b.label << "]";
        for (const auto& n : b.neighbours)
            out << "  " << n.input_ref << " (" << n.distance << ")";
        out << '\n';
    }
    if (!r.omitted_classes.empty()) {
        out << "  omitted (no eligible rows):";
        for (auto c : r.omitted_classes)
            out << ' ' << c;
        out << '\n';
    }
    out.flags(flags);
    out.precision(precision);
}

} // namespace cfood
