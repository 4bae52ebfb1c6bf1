#include "cfood/data_model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

using namespace cfood;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& bytes)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FeatureDataset small_dataset()
{
    FeatureDataset ds;
    ds.class_count = 2;
    ds.features.resize(4, 2);
    ds.features << 0.0f, 0.0f, 1.5f, -2.0f, 3.25f, 1e-7f, -4.0f, 8.0f;
    ds.labels.resize(4);
    ds.labels << 0, 1, 1, 0;
    return ds;
}

ErrorKind kind_of(const auto& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

bool bit_equal(const StorageMatrix& a, const StorageMatrix& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols()
           && std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace

TEST_SUITE("data_model")
{
    TEST_CASE("dataset round-trips field for field")
    {
        const auto dir = oracle::temp_dir("dm_roundtrip");
        auto ds = small_dataset();
        ds.logits = StorageMatrix(4, 2);
        *ds.logits << 1, 2, 3, 4, 5, 6, 7, 8;
        ds.input_refs = std::vector<std::string>{"a.png", "b.png", "dir/c.png", "3"};
        save_dataset(ds, dir / "d.cfod");
        const auto back = load_dataset(dir / "d.cfod");
        CHECK(back.class_count == 2);
        CHECK(bit_equal(back.features, ds.features));
        CHECK(back.labels == ds.labels);
        REQUIRE(back.logits);
        CHECK(bit_equal(*back.logits, *ds.logits));
        REQUIRE(back.input_refs);
        CHECK(*back.input_refs == *ds.input_refs);
    }

    TEST_CASE("absent logits leave flag bit 0 clear")
    {
        const auto dir = oracle::temp_dir("dm_flags");
        save_dataset(small_dataset(), dir / "d.cfod");
        const auto bytes = read_bytes(dir / "d.cfod");
        REQUIRE(bytes.size() == 29 + 4 * 2 * 4 + 4 * 4);
        CHECK(bytes.substr(0, 4) == "CFOD");
        CHECK((static_cast<unsigned char>(bytes[28]) & 0x1) == 0);
        CHECK_FALSE(load_dataset(dir / "d.cfod").logits);
    }

    TEST_CASE("10k-row random dataset round-trips bit-exactly")
    {
        const auto dir = oracle::temp_dir("dm_big");
        Rng rng(7);
        auto ds = oracle::random_dataset(rng, 10000, 16, 5);
        ds.logits = StorageMatrix(10000, 5);
        for (Eigen::Index i = 0; i < ds.logits->size(); ++i)
            ds.logits->data()[i] = static_cast<float>(rng.normal());
        save_dataset(ds, dir / "big.cfod");
        const auto back = load_dataset(dir / "big.cfod");
        CHECK(bit_equal(back.features, ds.features));
        CHECK(bit_equal(*back.logits, *ds.logits));
        CHECK(back.labels == ds.labels);
    }

    TEST_CASE("load errors are distinct")
    {
        const auto dir = oracle::temp_dir("dm_errors");
        save_dataset(small_dataset(), dir / "ok.cfod");
        const auto good = read_bytes(dir / "ok.cfod");

        auto bad_magic = good;
        bad_magic[0] = 'X';
        write_bytes(dir / "magic.cfod", bad_magic);
        CHECK(kind_of([&] { load_dataset(dir / "magic.cfod"); }) == ErrorKind::BadMagic);

        write_bytes(dir / "short.cfod", good.substr(0, good.size() - 3));
        CHECK(kind_of([&] { load_dataset(dir / "short.cfod"); }) == ErrorKind::Truncated);

        write_bytes(dir / "long.cfod", good + "xxxx");
        CHECK(kind_of([&] { load_dataset(dir / "long.cfod"); }) == ErrorKind::DimensionMismatch);

        // Last label (row 3) set to C = 2.
        auto bad_label = good;
        const std::int32_t two = 2;
        std::memcpy(bad_label.data() + good.size() - 4, &two, 4);
        write_bytes(dir / "label.cfod", bad_label);
        try {
            load_dataset(dir / "label.cfod");
            FAIL("expected label error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::LabelOutOfRange);
            CHECK(std::string(e.what()).find("label out of range") != std::string::npos);
        }

        CHECK(kind_of([&] { load_dataset(dir / "missing.cfod"); }) == ErrorKind::Io);
        write_bytes(dir / "tiny.cfod", "CF");
        CHECK(kind_of([&] { load_dataset(dir / "tiny.cfod"); }) == ErrorKind::Truncated);
    }

    TEST_CASE("saving to an unwritable path is an I/O error")
    {
        CHECK(kind_of([] { save_dataset(small_dataset(), "/nonexistent-dir/x.cfod"); }) == ErrorKind::Io);
    }

    TEST_CASE("CSV ingestion")
    {
        std::istringstream in("0.0,0.0,0\n1.0,0.0,1\n");
        const auto ds = read_csv(in);
        CHECK(ds.rows() == 2);
        CHECK(ds.dim() == 2);
        CHECK(ds.labels(0) == 0);
        CHECK(ds.labels(1) == 1);
        CHECK(ds.features(1, 0) == 1.0f);

        std::istringstream ragged("0,0,0\n1,1\n");
        CHECK(kind_of([&] { read_csv(ragged); }) == ErrorKind::InvalidArgument);
        std::istringstream junk("0,abc,0\n");
        CHECK(kind_of([&] { read_csv(junk); }) == ErrorKind::InvalidArgument);
        std::istringstream empty("");
        CHECK(kind_of([&] { read_csv(empty); }) == ErrorKind::InvalidArgument);
        std::istringstream negative("0,0,-1\n");
        CHECK(kind_of([&] { read_csv(negative, 2); }) == ErrorKind::LabelOutOfRange);
    }

    TEST_CASE("CSV text round-trips float values exactly")
    {
        Rng rng(3);
        const auto ds = oracle::random_dataset(rng, 200, 7, 4);
        std::stringstream text;
        write_csv(ds, text);
        const auto back = read_csv(text, 4);
        CHECK(bit_equal(back.features, ds.features));
        CHECK(back.labels == ds.labels);
    }

    TEST_CASE("streamed CSV conversion matches the in-memory path")
    {
        const auto dir = oracle::temp_dir("dm_stream");
        Rng rng(11);
        const auto ds = oracle::random_dataset(rng, 5000, 12, 6);
        std::stringstream text;
        write_csv(ds, text);
        const std::string csv = text.str();

        std::istringstream a(csv);
        save_dataset(read_csv(a), dir / "mem.cfod");
        std::istringstream b(csv);
        convert_csv_stream(b, dir / "stream.cfod");
        CHECK(read_bytes(dir / "mem.cfod") == read_bytes(dir / "stream.cfod"));
    }

    TEST_CASE("head predictions")
    {
        LinearHead id;
        id.weights.resize(2, 2);
        id.weights << 1, 0, 0, 1;
        id.bias = StorageVector::Zero(2);
        CHECK(predict(id, Vector{{2.0, 1.0}}) == 0);
        CHECK(predict(id, Vector{{0.0, 0.0}}) == 0);

        LinearHead tied;
        tied.weights.resize(2, 2);
        tied.weights << 1, 0, 1, 0;
        tied.bias = StorageVector::Zero(2);
        CHECK(predict(tied, Vector{{1.0, 0.0}}) == 0);

        LinearHead four;
        four.weights = StorageMatrix::Zero(4, 3);
        four.weights(1, 0) = 0.5f;
        four.weights(3, 0) = 2.0f;
        four.weights(2, 1) = 5.0f;
        four.bias = StorageVector::Zero(4);
        // logits for e1: (0, 0.5, 0, 2)
        CHECK(predict(four, Vector{{1.0, 0.0, 0.0}}) == 3);

        CHECK_THROWS_AS(predict(id, Vector{{1.0, 2.0, 3.0}}), Error);
    }

    TEST_CASE("predict matches a brute-force logit scan")
    {
        Rng rng(5);
        for (int trial = 0; trial < 500; ++trial) {
            const auto c = 2 + rng.below(9);
            const auto d = 1 + rng.below(20);
            const auto head = oracle::random_head(rng, c, d);
            const Vector z = oracle::random_query(rng, d);
            REQUIRE(predict(head, z) == oracle::predict(head, z));
        }
    }

    TEST_CASE("permuting class rows permutes predictions")
    {
        Rng rng(9);
        const auto head = oracle::random_head(rng, 6, 5);
        const std::vector<int> perm{3, 0, 5, 1, 4, 2};   // new row r holds old class perm[r]
        LinearHead permuted = head;
        for (int r = 0; r < 6; ++r) {
            permuted.weights.row(r) = head.weights.row(perm[static_cast<std::size_t>(r)]);
            permuted.bias(r) = head.bias(perm[static_cast<std::size_t>(r)]);
        }
        for (int trial = 0; trial < 200; ++trial) {
            const Vector z = oracle::random_query(rng, 5);
            const auto p = predict(permuted, z);
            CHECK(perm[static_cast<std::size_t>(p)] == predict(head, z));
        }
    }

    TEST_CASE("head round-trips and rejects bad files")
    {
        const auto dir = oracle::temp_dir("dm_head");
        Rng rng(13);
        const auto head = oracle::random_head(rng, 10, 33);
        save_head(head, dir / "h.cfhd");
        const auto back = load_head(dir / "h.cfhd");
        CHECK(bit_equal(back.weights, head.weights));
        CHECK(std::memcmp(back.bias.data(), head.bias.data(), 40) == 0);

        auto bytes = read_bytes(dir / "h.cfhd");
        write_bytes(dir / "short.cfhd", bytes.substr(0, bytes.size() - 1));
        CHECK(kind_of([&] { load_head(dir / "short.cfhd"); }) == ErrorKind::Truncated);
        bytes[3] = 'X';
        write_bytes(dir / "magic.cfhd", bytes);
        CHECK(kind_of([&] { load_head(dir / "magic.cfhd"); }) == ErrorKind::BadMagic);
        // A dataset file is not a head.
        save_dataset(small_dataset(), dir / "d.cfod");
        CHECK(kind_of([&] { load_head(dir / "d.cfod"); }) == ErrorKind::BadMagic);
    }

    TEST_CASE("manifest paths resolve and dimensions are checked")
    {
        const auto dir = oracle::temp_dir("dm_manifest");
        auto ds = small_dataset();
        ds.input_refs = std::vector<std::string>{"r0", "r1", "r2", "r3"};
        save_dataset(ds, dir / "d.cfod");
        DatasetManifest m;
        m.features_path = "d.cfod";
        m.refs_path = "d.cfod.refs";
        m.head_path = "h.cfhd";
        m.n = 4;
        m.d = 2;
        m.c = 2;
        m.space = Space::InputSpace;
        save_manifest(m, dir / "d.json");

        const auto loaded = load_manifest(dir / "d.json");
        CHECK(loaded.features_path == dir / "d.cfod");
        CHECK(loaded.head_path == dir / "h.cfhd");
        CHECK(loaded.space == Space::InputSpace);
        const auto back = load_dataset(loaded);
        CHECK(back.input_refs->at(2) == "r2");

        m.n = 5;
        save_manifest(m, dir / "bad.json");
        CHECK(kind_of([&] { load_dataset(load_manifest(dir / "bad.json")); }) == ErrorKind::DimensionMismatch);

        write_bytes(dir / "broken.json", "{not json");
        CHECK(kind_of([&] { load_manifest(dir / "broken.json"); }) == ErrorKind::InvalidArgument);
    }

    TEST_CASE("validate rejects broken invariants")
    {
        auto ds = small_dataset();
        ds.class_count = 1;
        CHECK(kind_of([&] { validate(ds); }) == ErrorKind::DimensionMismatch);
        ds = small_dataset();
        ds.logits = StorageMatrix(4, 3);
        CHECK(kind_of([&] { validate(ds); }) == ErrorKind::DimensionMismatch);
        ds = small_dataset();
        ds.input_refs = std::vector<std::string>{"only one"};
        CHECK(kind_of([&] { validate(ds); }) == ErrorKind::DimensionMismatch);
    }
}
