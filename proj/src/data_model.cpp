#include "cfood/data_model.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cfood {

namespace fs = std::filesystem;

namespace {

using detail::Reader;
using detail::Writer;

constexpr std::array<char, 4> kDatasetMagic{'C', 'F', 'O', 'D'};
constexpr std::array<char, 4> kHeadMagic{'C', 'F', 'H', 'D'};
constexpr std::uint8_t kFlagLogits = 0x1;
constexpr std::uint8_t kFlagRefs = 0x2;
constexpr std::uint64_t kDatasetHeaderBytes = 4 + 3 * 8 + 1;
constexpr std::uint64_t kHeadHeaderBytes = 4 + 2 * 8;

void check_magic(Reader& r, const std::array<char, 4>& magic)
{
    if (r.size() < magic.size())
        throw Error(ErrorKind::Truncated, "truncated file: " + r.path().string());
    std::array<char, 4> got{};
    r.bytes(got.data(), got.size());
    if (got != magic)
        throw Error(ErrorKind::BadMagic, "bad magic in " + r.path().string() + ": expected "
                                             + std::string(magic.begin(), magic.end()));
}

// Multiplies with overflow detection; a corrupt header must not wrap around.
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const fs::path& path)
{
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: header sizes overflow in " + path.string());
    return a * b;
}

void check_payload(std::uint64_t expected, std::uint64_t actual, const fs::path& path)
{
    if (actual < expected)
        throw Error(ErrorKind::Truncated, "truncated file: " + path.string() + " has " + std::to_string(actual)
                                              + " bytes, header implies " + std::to_string(expected));
    if (actual > expected)
        throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: " + path.string() + " has "
                                                      + std::to_string(actual) + " bytes, header implies "
                                                      + std::to_string(expected));
}

std::vector<std::string> read_refs(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open input refs " + path.string());
    std::vector<std::string> refs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        refs.push_back(line);
    }
    return refs;
}

void write_refs(const std::vector<std::string>& refs, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    for (const auto& r : refs)
        out << r << '\n';
    if (!out)
        throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string space_name(Space s) { return s == Space::InputSpace ? "input-space" : "embedding-space"; }

Space parse_space(const std::string& s)
{
    if (s == "input-space")
        return Space::InputSpace;
    if (s == "embedding-space")
        return Space::EmbeddingSpace;
    throw Error(ErrorKind::InvalidArgument, "unknown space tag '" + s + "'");
}

template <typename T>
bool parse_number(std::string_view text, T& out)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

struct CsvRow {
    std::vector<float> features;
    ClassLabel label = 0;
};

// Returns false on blank lines.
bool parse_csv_row(const std::string& line, std::size_t line_no, CsvRow& row)
{
    if (line.find_first_not_of(" \t\r") == std::string::npos)
        return false;
    row.features.clear();
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
        auto comma = rest.find(',');
        fields.push_back(rest.substr(0, comma));
        if (comma == std::string_view::npos)
            break;
        rest.remove_prefix(comma + 1);
    }
    auto malformed = [&](const std::string& why) {
        return Error(ErrorKind::InvalidArgument, "malformed CSV row " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 2)
        throw malformed("need at least one feature and a label");
    for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
        float v = 0;
        if (!parse_number(fields[j], v))
            throw malformed("bad feature value '" + std::string(fields[j]) + "'");
        row.features.push_back(v);
    }
    if (!parse_number(fields.back(), row.label))
        throw malformed("bad label '" + std::string(fields.back()) + "'");
    return true;
}

std::int64_t infer_class_count(std::int64_t requested, ClassLabel max_label)
{
    if (requested > 0)
        return requested;
    return std::max<std::int64_t>(2, static_cast<std::int64_t>(max_label) + 1);
}

void check_labels(const LabelVector& labels, std::int64_t class_count)
{
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        if (labels(i) < 0 || labels(i) >= class_count)
            throw Error(ErrorKind::LabelOutOfRange, "label out of range: row " + std::to_string(i) + " has label "
                                                        + std::to_string(labels(i)) + ", class count is "
                                                        + std::to_string(class_count));
}

} // namespace

void validate(const FeatureDataset& ds)
{
    if (ds.rows() < 1 || ds.dim() < 1)
        throw Error(ErrorKind::DimensionMismatch, "dataset needs N >= 1 and D >= 1");
    if (ds.class_count < 2)
        throw Error(ErrorKind::DimensionMismatch, "dataset needs at least 2 classes");
    if (ds.labels.size() != ds.rows())
        throw Error(ErrorKind::DimensionMismatch, "label count differs from row count");
    check_labels(ds.labels, ds.class_count);
    if (ds.logits && (ds.logits->rows() != ds.rows() || ds.logits->cols() != ds.class_count))
        throw Error(ErrorKind::DimensionMismatch, "logits must be N x C");
    if (ds.input_refs && static_cast<std::int64_t>(ds.input_refs->size()) != ds.rows())
        throw Error(ErrorKind::DimensionMismatch, "input refs count differs from row count");
}

void validate(const LinearHead& head)
{
    if (head.class_count() < 2 || head.dim() < 1)
        throw Error(ErrorKind::DimensionMismatch, "head needs C >= 2 and D >= 1");
    if (head.bias.size() != head.class_count())
        throw Error(ErrorKind::DimensionMismatch, "head bias length differs from weight rows");
}

fs::path refs_sidecar_path(const fs::path& features_path)
{
    auto p = features_path;
    p += ".refs";
    return p;
}

FeatureDataset load_dataset(const fs::path& path)
{
    Reader r(path);
    check_magic(r, kDatasetMagic);
    if (r.size() < kDatasetHeaderBytes)
        throw Error(ErrorKind::Truncated, "truncated file: " + path.string());
    const auto n = r.scalar<std::uint64_t>();
    const auto d = r.scalar<std::uint64_t>();
    const auto c = r.scalar<std::uint64_t>();
    const auto flags = r.scalar<std::uint8_t>();

    std::uint64_t expected = kDatasetHeaderBytes;
    expected += checked_mul(checked_mul(n, d, path), 4, path);
    expected += checked_mul(n, 4, path);
    if (flags & kFlagLogits)
        expected += checked_mul(checked_mul(n, c, path), 4, path);
    check_payload(expected, r.size(), path);
    if (n < 1 || d < 1 || c < 2)
        throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: header has N=" + std::to_string(n)
                                                      + " D=" + std::to_string(d) + " C=" + std::to_string(c));

    FeatureDataset ds;
    ds.class_count = static_cast<std::int64_t>(c);
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    r.array(ds.features.data(), n * d);
    ds.labels.resize(static_cast<Eigen::Index>(n));
    r.array(ds.labels.data(), n);
    check_labels(ds.labels, ds.class_count);
    if (flags & kFlagLogits) {
        ds.logits.emplace(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
        r.array(ds.logits->data(), n * c);
    }
    if (flags & kFlagRefs) {
        auto refs = read_refs(refs_sidecar_path(path));
        if (refs.size() != n)
            throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: input refs sidecar has "
                                                          + std::to_string(refs.size()) + " lines, expected "
                                                          + std::to_string(n));
        ds.input_refs = std::move(refs);
    }
    return ds;
}

void save_dataset(const FeatureDataset& ds, const fs::path& path)
{
    validate(ds);
    if (ds.input_refs)
        for (const auto& ref : *ds.input_refs)
            if (ref.find('\n') != std::string::npos)
                throw Error(ErrorKind::InvalidArgument, "input refs may not contain newlines");

    std::uint8_t flags = 0;
    if (ds.logits)
        flags |= kFlagLogits;
    if (ds.input_refs)
        flags |= kFlagRefs;

    Writer w(path);
    w.bytes(kDatasetMagic.data(), kDatasetMagic.size());
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(ds.rows()));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(ds.dim()));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(ds.class_count));
    w.scalar<std::uint8_t>(flags);
    w.array(ds.features.data(), static_cast<std::size_t>(ds.features.size()));
    w.array(ds.labels.data(), static_cast<std::size_t>(ds.labels.size()));
    if (ds.logits)
        w.array(ds.logits->data(), static_cast<std::size_t>(ds.logits->size()));
    w.finish();
    if (ds.input_refs)
        write_refs(*ds.input_refs, refs_sidecar_path(path));
}

LinearHead load_head(const fs::path& path)
{
    Reader r(path);
    check_magic(r, kHeadMagic);
    if (r.size() < kHeadHeaderBytes)
        throw Error(ErrorKind::Truncated, "truncated file: " + path.string());
    const auto c = r.scalar<std::uint64_t>();
    const auto d = r.scalar<std::uint64_t>();
    std::uint64_t expected = kHeadHeaderBytes + checked_mul(checked_mul(c, d, path), 4, path) + checked_mul(c, 4, path);
    check_payload(expected, r.size(), path);
    if (c < 2 || d < 1)
        throw Error(ErrorKind::DimensionMismatch,
                    "dimension mismatch: head header has C=" + std::to_string(c) + " D=" + std::to_string(d));

    LinearHead head;
    head.weights.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d));
    r.array(head.weights.data(), c * d);
    head.bias.resize(static_cast<Eigen::Index>(c));
    r.array(head.bias.data(), c);
    return head;
}

void save_head(const LinearHead& head, const fs::path& path)
{
    validate(head);
    Writer w(path);
    w.bytes(kHeadMagic.data(), kHeadMagic.size());
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(head.class_count()));
    w.scalar<std::uint64_t>(static_cast<std::uint64_t>(head.dim()));
    w.array(head.weights.data(), static_cast<std::size_t>(head.weights.size()));
    w.array(head.bias.data(), static_cast<std::size_t>(head.bias.size()));
    w.finish();
}

DatasetManifest load_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, "manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const char* key) -> fs::path {
        if (!j.contains(key) || j[key].is_null())
            return {};
        fs::path p = j[key].get<std::string>();
        if (p.empty() || p.is_absolute())
            return p;
        return base / p;
    };
    DatasetManifest m;
    try {
        m.features_path = resolve("features_path");
        m.head_path = resolve("head_path");
        m.refs_path = resolve("refs_path");
        m.n = j.at("n").get<std::int64_t>();
        m.d = j.at("d").get<std::int64_t>();
        m.c = j.at("c").get<std::int64_t>();
        m.space = parse_space(j.value("space", std::string("embedding-space")));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, "manifest " + path.string() + ": " + e.what());
    }
    if (m.features_path.empty())
        throw Error(ErrorKind::InvalidArgument, "manifest " + path.string() + " has no features_path");
    return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path)
{
    nlohmann::ordered_json j;
    j["features_path"] = m.features_path.generic_string();
    j["head_path"] = m.head_path.generic_string();
    j["refs_path"] = m.refs_path.generic_string();
    j["n"] = m.n;
    j["d"] = m.d;
    j["c"] = m.c;
    j["space"] = space_name(m.space);
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

FeatureDataset load_dataset(const DatasetManifest& m)
{
    auto ds = load_dataset(m.features_path);
    if (ds.rows() != m.n || ds.dim() != m.d || ds.class_count != m.c)
        throw Error(ErrorKind::DimensionMismatch,
                    "dimension mismatch: manifest says N=" + std::to_string(m.n) + " D=" + std::to_string(m.d)
                        + " C=" + std::to_string(m.c) + ", file " + m.features_path.string() + " has N="
                        + std::to_string(ds.rows()) + " D=" + std::to_string(ds.dim())
                        + " C=" + std::to_string(ds.class_count));
    if (!m.refs_path.empty() && m.refs_path != refs_sidecar_path(m.features_path)) {
        auto refs = read_refs(m.refs_path);
        if (static_cast<std::int64_t>(refs.size()) != ds.rows())
            throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: refs file " + m.refs_path.string()
                                                          + " has " + std::to_string(refs.size()) + " lines");
        ds.input_refs = std::move(refs);
    }
    return ds;
}

FeatureDataset read_csv(std::istream& in, std::int64_t class_count)
{
    std::vector<float> values;
    std::vector<ClassLabel> labels;
    std::int64_t d = -1;
    std::string line;
    std::size_t line_no = 0;
    CsvRow row;
    while (std::getline(in, line)) {
        ++line_no;
        if (!parse_csv_row(line, line_no, row))
            continue;
        if (d < 0)
            d = static_cast<std::int64_t>(row.features.size());
        else if (d != static_cast<std::int64_t>(row.features.size()))
            throw Error(ErrorKind::InvalidArgument, "malformed CSV row " + std::to_string(line_no) + ": expected "
                                                        + std::to_string(d) + " features");
        values.insert(values.end(), row.features.begin(), row.features.end());
        labels.push_back(row.label);
    }
    if (labels.empty())
        throw Error(ErrorKind::InvalidArgument, "CSV input has no rows");

    FeatureDataset ds;
    const auto n = static_cast<Eigen::Index>(labels.size());
    ds.features = Eigen::Map<const StorageMatrix>(values.data(), n, d);
    ds.labels = Eigen::Map<const LabelVector>(labels.data(), n);
    ds.class_count = infer_class_count(class_count, ds.labels.maxCoeff());
    validate(ds);
    return ds;
}

void write_csv(const FeatureDataset& ds, std::ostream& out)
{
    std::array<char, 64> buf{};
    for (std::int64_t i = 0; i < ds.rows(); ++i) {
        for (std::int64_t j = 0; j < ds.dim(); ++j) {
            auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), ds.features(i, j));
            out.write(buf.data(), end - buf.data());
            out.put(',');
        }
        out << ds.labels(i) << '\n';
    }
}

void convert_csv_stream(std::istream& in, const fs::path& out_path, std::int64_t class_count)
{
    std::vector<ClassLabel> labels;
    std::int64_t d = -1;
    std::string line;
    std::size_t line_no = 0;
    CsvRow row;
    {
        Writer w(out_path);
        w.bytes(kDatasetMagic.data(), kDatasetMagic.size());
        w.scalar<std::uint64_t>(0);
        w.scalar<std::uint64_t>(0);
        w.scalar<std::uint64_t>(0);
        w.scalar<std::uint8_t>(0);
        while (std::getline(in, line)) {
            ++line_no;
            if (!parse_csv_row(line, line_no, row))
                continue;
            if (d < 0)
                d = static_cast<std::int64_t>(row.features.size());
            else if (d != static_cast<std::int64_t>(row.features.size()))
                throw Error(ErrorKind::InvalidArgument, "malformed CSV row " + std::to_string(line_no)
                                                            + ": expected " + std::to_string(d) + " features");
            w.array(row.features.data(), row.features.size());
            labels.push_back(row.label);
        }
        if (labels.empty())
            throw Error(ErrorKind::InvalidArgument, "CSV input has no rows");
        const auto n = static_cast<Eigen::Index>(labels.size());
        LabelVector label_vec = Eigen::Map<const LabelVector>(labels.data(), n);
        const auto c = infer_class_count(class_count, label_vec.maxCoeff());
        check_labels(label_vec, c);
        w.array(labels.data(), labels.size());
        w.seek(4);
        w.scalar<std::uint64_t>(static_cast<std::uint64_t>(n));
        w.scalar<std::uint64_t>(static_cast<std::uint64_t>(d));
        w.scalar<std::uint64_t>(static_cast<std::uint64_t>(c));
        w.finish();
    }
}

} // namespace cfood
