#include "cfood/nn_index.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <array>
#include <queue>

namespace cfood {

namespace {

constexpr std::array<char, 4> kIndexMagic{'C', 'F', 'I', 'X'};
constexpr Eigen::Index kTile = ClassIndex::kTileRows;

using TileDistances = std::array<double, kTile>;

// Lane l accumulates sum_j (x[l][j] - z[j])^2 in feature order, exactly as a
// scalar per-row loop would.
inline void tile_distances(const float* tile, const double* z, Eigen::Index dim, TileDistances& acc)
{
    acc.fill(0.0);
    for (Eigen::Index j = 0; j < dim; ++j) {
        const float* lane = tile + j * kTile;
        const double zj = z[j];
        for (Eigen::Index l = 0; l < kTile; ++l) {
            const double t = static_cast<double>(lane[l]) - zj;
            acc[l] += t * t;
        }
    }
}

struct FarthestFirst {
    bool operator()(const Neighbour& a, const Neighbour& b) const
    {
        return a.squared_distance < b.squared_distance
               || (a.squared_distance == b.squared_distance && a.index < b.index);
    }
};

// Bounded max-heap keeping the k smallest (distance, index) pairs.
class TopK {
public:
    explicit TopK(std::int64_t k) : k_(static_cast<std::size_t>(k)) {}

    void offer(const Neighbour& n)
    {
        if (heap_.size() < k_) {
            heap_.push(n);
        } else if (FarthestFirst{}(n, heap_.top())) {
            heap_.pop();
            heap_.push(n);
        }
    }

    std::vector<Neighbour> sorted()
    {
        std::vector<Neighbour> out;
        out.reserve(heap_.size());
        while (!heap_.empty()) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

    const Neighbour& worst() const { return heap_.top(); }

private:
    std::size_t k_;
    std::priority_queue<Neighbour, std::vector<Neighbour>, FarthestFirst> heap_;
};

template <typename Visit>
void scan_block(const std::vector<RowIndex>& rows, const std::vector<float>& tiles, Eigen::Index dim,
                const double* z, Visit&& visit)
{
    TileDistances acc;
    const auto n = static_cast<Eigen::Index>(rows.size());
    for (Eigen::Index base = 0, t = 0; base < n; base += kTile, ++t) {
        tile_distances(tiles.data() + t * dim * kTile, z, dim, acc);
        const auto lanes = std::min(kTile, n - base);
        for (Eigen::Index l = 0; l < lanes; ++l)
            visit(Neighbour{rows[static_cast<std::size_t>(base + l)], acc[static_cast<std::size_t>(l)]});
    }
}

void check_query(const ClassIndex& idx, const Eigen::Ref<const Vector>& z)
{
    if (z.size() != idx.dim())
        throw Error(ErrorKind::DimensionMismatch, "query has " + std::to_string(z.size())
                                                      + " features, index has " + std::to_string(idx.dim()));
}

void check_class(const ClassIndex& idx, ClassLabel c)
{
    if (c < 0 || c >= idx.class_count())
        throw Error(ErrorKind::InvalidArgument, "class " + std::to_string(c) + " is outside [0, "
                                                    + std::to_string(idx.class_count()) + ")");
    if (idx.class_size(c) == 0)
        throw Error(ErrorKind::EmptyClass, "empty class: class " + std::to_string(c) + " has no eligible rows");
}

} // namespace

ClassIndex make_index(const FeatureDataset& ds, std::vector<std::vector<RowIndex>> members, bool filtered)
{
    ClassIndex idx;
    idx.dim_ = ds.dim();
    idx.source_rows_ = ds.rows();
    idx.filtered_ = filtered;
    idx.position_.assign(static_cast<std::size_t>(ds.rows()), -1);
    idx.row_class_.assign(static_cast<std::size_t>(ds.rows()), -1);
    idx.blocks_.resize(members.size());

    const Eigen::Index dim = ds.dim();
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto& block = idx.blocks_[c];
        block.rows = std::move(members[c]);
        const auto n = static_cast<Eigen::Index>(block.rows.size());
        const auto tiles = (n + kTile - 1) / kTile;
        block.tiles.assign(static_cast<std::size_t>(tiles * dim * kTile), 0.0f);
        for (Eigen::Index s = 0; s < n; ++s) {
            const RowIndex row = block.rows[static_cast<std::size_t>(s)];
            float* tile = block.tiles.data() + (s / kTile) * dim * kTile;
            const Eigen::Index lane = s % kTile;
            for (Eigen::Index j = 0; j < dim; ++j)
                tile[j * kTile + lane] = ds.features(row, j);
            idx.position_[static_cast<std::size_t>(row)] = s;
            idx.row_class_[static_cast<std::size_t>(row)] = static_cast<ClassLabel>(c);
        }
        idx.size_ += n;
        if (n == 0)
            idx.empty_classes_.push_back(static_cast<ClassLabel>(c));
    }
    return idx;
}

namespace {

ClassIndex build(const FeatureDataset& ds, const LinearHead* head)
{
    validate(ds);
    if (head) {
        validate(*head);
        if (head->dim() != ds.dim() || head->class_count() != ds.class_count)
            throw Error(ErrorKind::DimensionMismatch, "head is " + std::to_string(head->class_count()) + "x"
                                                          + std::to_string(head->dim()) + ", dataset has C="
                                                          + std::to_string(ds.class_count)
                                                          + " D=" + std::to_string(ds.dim()));
    }
    std::vector<std::vector<RowIndex>> members(static_cast<std::size_t>(ds.class_count));
    for (RowIndex i = 0; i < ds.rows(); ++i) {
        const ClassLabel label = ds.labels(i);
        if (head && predict(*head, ds.row(i)) != label)
            continue;
        members[static_cast<std::size_t>(label)].push_back(i);
    }
    return make_index(ds, std::move(members), head != nullptr);
}

} // namespace

ClassIndex build_index(const FeatureDataset& ds) { return build(ds, nullptr); }

ClassIndex build_index(const FeatureDataset& ds, const LinearHead& head, bool filter_misclassified)
{
    if (!filter_misclassified) {
        validate(head);
        return build(ds, nullptr);
    }
    return build(ds, &head);
}

const ClassIndex::Block& ClassIndex::block(ClassLabel c) const
{
    return blocks_.at(static_cast<std::size_t>(c));
}

std::int64_t ClassIndex::class_size(ClassLabel c) const
{
    return static_cast<std::int64_t>(block(c).rows.size());
}

std::span<const RowIndex> ClassIndex::class_rows(ClassLabel c) const { return block(c).rows; }

bool ClassIndex::contains(RowIndex row) const
{
    return row >= 0 && row < source_rows_ && position_[static_cast<std::size_t>(row)] >= 0;
}

Vector ClassIndex::point(RowIndex row) const
{
    if (!contains(row))
        throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(row) + " is not in the index");
    const auto& b = block(row_class_[static_cast<std::size_t>(row)]);
    const auto slot = position_[static_cast<std::size_t>(row)];
    const float* tile = b.tiles.data() + (slot / kTile) * dim_ * kTile;
    Vector p(dim_);
    for (Eigen::Index j = 0; j < dim_; ++j)
        p(j) = static_cast<double>(tile[j * kTile + slot % kTile]);
    return p;
}

Neighbour nearest_in_class(const ClassIndex& idx, const Eigen::Ref<const Vector>& z, ClassLabel c)
{
    check_query(idx, z);
    check_class(idx, c);
    const auto& b = idx.block(c);
    Neighbour best{-1, 0.0};
    // Rows are ascending, so a strict comparison keeps the lowest index on ties.
    scan_block(b.rows, b.tiles, idx.dim_, z.data(), [&](const Neighbour& n) {
        if (best.index < 0 || n.squared_distance < best.squared_distance)
            best = n;
    });
    return best;
}

std::vector<Neighbour> k_nearest_in_class(const ClassIndex& idx, const Eigen::Ref<const Vector>& z,
                                          ClassLabel c, std::int64_t k)
{
    if (k < 1)
        throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    check_query(idx, z);
    check_class(idx, c);
    const auto& b = idx.block(c);
    TopK top(k);
    scan_block(b.rows, b.tiles, idx.dim_, z.data(), [&](const Neighbour& n) { top.offer(n); });
    return top.sorted();
}

double kth_nearest_global(const ClassIndex& idx, const Eigen::Ref<const Vector>& z, std::int64_t k)
{
    if (k < 1)
        throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    if (k > idx.size())
        throw Error(ErrorKind::InvalidArgument, "k=" + std::to_string(k) + " exceeds the "
                                                    + std::to_string(idx.size()) + " indexed rows");
    check_query(idx, z);
    TopK top(k);
    for (const auto& b : idx.blocks_)
        scan_block(b.rows, b.tiles, idx.dim_, z.data(), [&](const Neighbour& n) { top.offer(n); });
    return top.worst().squared_distance;
}

void save_index(const ClassIndex& idx, const std::filesystem::path& path)
{
    detail::Writer w(path);
    w.bytes(kIndexMagic.data(), kIndexMagic.size());
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(idx.source_rows()));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(idx.dim()));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(idx.class_count()));
    w.scalar<std::uint8_t>(idx.filtered() ? 1 : 0);
    for (ClassLabel c = 0; c < idx.class_count(); ++c)
        w.scalar<std::uint64_t>(static_cast<std::uint64_t>(idx.class_size(c)));
    for (ClassLabel c = 0; c < idx.class_count(); ++c)
        for (RowIndex row : idx.class_rows(c))
            w.scalar<std::uint64_t>(static_cast<std::uint64_t>(row));
    w.finish();
}

ClassIndex load_index(const std::filesystem::path& path, const FeatureDataset& ds)
{
    validate(ds);
    detail::Reader r(path);
    std::array<char, 4> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kIndexMagic)
        throw Error(ErrorKind::BadMagic, "bad magic in " + path.string() + ": expected CFIX");
    const auto n = r.scalar<std::uint64_t>();
    const auto d = r.scalar<std::uint64_t>();
    const auto c = r.scalar<std::uint64_t>();
    const bool filtered = r.scalar<std::uint8_t>() != 0;
    if (n != static_cast<std::uint64_t>(ds.rows()) || d != static_cast<std::uint64_t>(ds.dim())
        || c != static_cast<std::uint64_t>(ds.class_count))
        throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: index cache " + path.string()
                                                      + " was built for a different dataset");
    std::vector<std::uint64_t> counts(c);
    std::uint64_t total = 0;
    for (auto& count : counts) {
        count = r.scalar<std::uint64_t>();
        total += count;
    }
    if (total > n)
        throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: index cache lists more rows than the dataset");
    const std::uint64_t expected = 4 + 3 * 8 + 1 + 8 * c + 8 * total;
    if (r.size() != expected)
        throw Error(r.size() < expected ? ErrorKind::Truncated : ErrorKind::DimensionMismatch,
                    "index cache " + path.string() + " size does not match its header");

    std::vector<std::vector<RowIndex>> members(c);
    for (std::uint64_t k = 0; k < c; ++k) {
        auto& rows = members[k];
        rows.resize(counts[k]);
        for (auto& row : rows) {
            const auto v = r.scalar<std::uint64_t>();
            if (v >= n || ds.labels(static_cast<Eigen::Index>(v)) != static_cast<ClassLabel>(k)
                || (!rows.empty() && &row != rows.data() && static_cast<RowIndex>(v) <= *(&row - 1)))
                throw Error(ErrorKind::InvalidArgument, "index cache " + path.string() + " is stale");
            row = static_cast<RowIndex>(v);
        }
    }
    return make_index(ds, std::move(members), filtered);
}

} // namespace cfood
