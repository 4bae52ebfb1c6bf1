#pragma once

#include "cfood/error.hpp"
#include "cfood/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cfood {

/// Training or test features in one space (raw input or embedding), with labels
/// and optional logits / input references. Immutable once loaded.
struct FeatureDataset {
    StorageMatrix features;                 // N x D
    LabelVector labels;                     // N, values in [0, class_count)
    std::optional<StorageMatrix> logits;    // N x C
    std::optional<std::vector<std::string>> input_refs;
    std::int64_t class_count = 0;

    std::int64_t rows() const { return features.rows(); }
    std::int64_t dim() const { return features.cols(); }

    Vector row(std::int64_t i) const { return features.row(i).transpose().cast<double>(); }
};

/// Final affine layer: logits = weights * z + bias.
struct LinearHead {
    StorageMatrix weights;   // C x D
    StorageVector bias;      // C

    std::int64_t class_count() const { return weights.rows(); }
    std::int64_t dim() const { return weights.cols(); }
};

enum class Space { InputSpace, EmbeddingSpace };

struct DatasetManifest {
    std::filesystem::path features_path;
    std::filesystem::path head_path;
    std::filesystem::path refs_path;
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::int64_t c = 0;
    Space space = Space::EmbeddingSpace;
};

// Throws Error on any violated invariant.
void validate(const FeatureDataset& ds);
void validate(const LinearHead& head);

FeatureDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const FeatureDataset& ds, const std::filesystem::path& path);

LinearHead load_head(const std::filesystem::path& path);
void save_head(const LinearHead& head, const std::filesystem::path& path);

/// Sidecar holding input refs, one UTF-8 line per row.
std::filesystem::path refs_sidecar_path(const std::filesystem::path& features_path);

// Relative paths inside a manifest resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Loads the dataset a manifest points at and checks N, D, C against it.
FeatureDataset load_dataset(const DatasetManifest& manifest);

/// Rows are `f1,...,fD,label`. class_count <= 0 infers max(label) + 1 (at least 2).
FeatureDataset read_csv(std::istream& in, std::int64_t class_count = 0);
void write_csv(const FeatureDataset& ds, std::ostream& out);

/// CSV to CFOD without materialising the feature matrix; produces the same bytes
/// as save_dataset(read_csv(...)).
void convert_csv_stream(std::istream& in, const std::filesystem::path& out_path,
                        std::int64_t class_count = 0);

template <typename Derived>
Vector logits(const LinearHead& head, const Eigen::MatrixBase<Derived>& z)
{
    if (z.size() != head.dim())
        throw Error(ErrorKind::DimensionMismatch,
                    "query has " + std::to_string(z.size()) + " features, head expects "
                        + std::to_string(head.dim()));
    return head.weights.cast<double>() * z.template cast<double>()
           + head.bias.cast<double>();
}

/// Argmax with ties broken by lowest index.
template <typename Derived>
ClassLabel argmax(const Eigen::MatrixBase<Derived>& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < v.size(); ++c)
        if (v(c) > v(best))
            best = c;
    return static_cast<ClassLabel>(best);
}

template <typename Derived>
ClassLabel predict(const LinearHead& head, const Eigen::MatrixBase<Derived>& z)
{
    return argmax(logits(head, z));
}

} // namespace cfood
