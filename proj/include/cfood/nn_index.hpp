#pragma once

#include "cfood/data_model.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace cfood {

struct Neighbour {
    RowIndex index = -1;           // original training row
    double squared_distance = 0;

    friend bool operator==(const Neighbour&, const Neighbour&) = default;
};

/// Exact Euclidean nearest-neighbour search over training rows, partitioned by
/// class. Each class block stores its rows in tiles of kTileRows, laid out
/// feature-major inside the tile so one pass over the query scores a whole tile.
///
/// All distances are squared and accumulated sequentially over features in
/// double, so results are bit-identical to a naive per-row scan. Ties go to the
/// lowest original row index.
class ClassIndex {
public:
    static constexpr Eigen::Index kTileRows = 8;

    std::int64_t dim() const { return dim_; }
    std::int64_t class_count() const { return static_cast<std::int64_t>(blocks_.size()); }
    std::int64_t source_rows() const { return source_rows_; }
    std::int64_t size() const { return size_; }
    bool filtered() const { return filtered_; }

    std::int64_t class_size(ClassLabel c) const;
    /// Original row indices of class c, ascending.
    std::span<const RowIndex> class_rows(ClassLabel c) const;
    /// Classes with no eligible rows.
    const std::vector<ClassLabel>& empty_classes() const { return empty_classes_; }
    bool contains(RowIndex row) const;
    /// Stored features of an indexed training row, widened to double.
    Vector point(RowIndex row) const;

private:
    struct Block {
        std::vector<RowIndex> rows;
        std::vector<float> tiles;   // ceil(rows/kTileRows) tiles of dim x kTileRows
    };

    friend ClassIndex make_index(const FeatureDataset&, std::vector<std::vector<RowIndex>>, bool);
    friend Neighbour nearest_in_class(const ClassIndex&, const Eigen::Ref<const Vector>&, ClassLabel);
    friend std::vector<Neighbour> k_nearest_in_class(const ClassIndex&, const Eigen::Ref<const Vector>&,
                                                     ClassLabel, std::int64_t);
    friend double kth_nearest_global(const ClassIndex&, const Eigen::Ref<const Vector>&, std::int64_t);

    const Block& block(ClassLabel c) const;

    std::vector<Block> blocks_;
    std::vector<std::int64_t> position_;   // source row -> slot inside its block, -1 if not indexed
    std::vector<ClassLabel> row_class_;
    std::vector<ClassLabel> empty_classes_;
    std::int64_t dim_ = 0;
    std::int64_t source_rows_ = 0;
    std::int64_t size_ = 0;
    bool filtered_ = false;
};

/// Indexes every row.
ClassIndex build_index(const FeatureDataset& ds);

/// With filter_misclassified, only rows the head predicts as their own label
/// are indexed.
ClassIndex build_index(const FeatureDataset& ds, const LinearHead& head, bool filter_misclassified = true);

Neighbour nearest_in_class(const ClassIndex& idx, const Eigen::Ref<const Vector>& z, ClassLabel c);

/// Ascending by (distance, index); length min(k, class size).
std::vector<Neighbour> k_nearest_in_class(const ClassIndex& idx, const Eigen::Ref<const Vector>& z,
                                          ClassLabel c, std::int64_t k);

/// Squared distance to the k-th closest indexed row over all classes.
double kth_nearest_global(const ClassIndex& idx, const Eigen::Ref<const Vector>& z, std::int64_t k);

// CFIX cache: row membership only; features always come from the dataset.
void save_index(const ClassIndex& idx, const std::filesystem::path& path);
ClassIndex load_index(const std::filesystem::path& path, const FeatureDataset& ds);

} // namespace cfood
