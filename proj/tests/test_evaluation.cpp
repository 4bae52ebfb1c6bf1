#include "cfood/evaluation.hpp"
#include "cfood/scorer.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace cfood;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t n, double shift, double grid)
{
    std::vector<double> out(n);
    for (auto& s : out) {
        s = rng.normal() + shift;
        if (grid > 0)
            s = std::round(s / grid) * grid;
    }
    return out;
}

} // namespace

TEST_SUITE("evaluation")
{
    TEST_CASE("maximum softmax probability")
    {
        CHECK(msp_score(Vector{{0.0, 0.0, 0.0}}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(msp_score(Vector{{100.0, 0.0}}) == doctest::Approx(1.0).epsilon(1e-15));
        const long double e1 = std::exp(1.0L), e2 = std::exp(2.0L), e3 = std::exp(3.0L);
        CHECK(msp_score(Vector{{1.0, 2.0, 3.0}}) == doctest::Approx(static_cast<double>(e3 / (e1 + e2 + e3))));
        CHECK(msp_score(Vector{{1.0, 2.0, 3.0}}) == doctest::Approx(0.66524).epsilon(1e-5));
        CHECK(std::isfinite(msp_score(Vector{{1e6, -1e6}})));
        CHECK_THROWS_AS(msp_score(Vector{{1.0}}), Error);
        CHECK_THROWS_AS(msp_score(Vector{{1.0, std::nan("")}}), Error);
    }

    TEST_CASE("energy")
    {
        CHECK(energy_score(Vector{{0.0, 0.0}}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
        // One dominant logit: the score approaches that logit.
        CHECK(energy_score(Vector{{1000.0, 0.0}}) == doctest::Approx(1000.0).epsilon(1e-15));
        const long double expect =
            2.0L * std::log(std::exp(0.5L) + std::exp(1.0L) + std::exp(1.5L));
        CHECK(energy_score(Vector{{1.0, 2.0, 3.0}}, 2.0)
              == doctest::Approx(static_cast<double>(expect)).epsilon(1e-14));
        CHECK_THROWS_AS(energy_score(Vector{{1.0, 2.0}}, 0.0), Error);
    }

    TEST_CASE("knn baseline")
    {
        Rng rng(3);
        const auto train = oracle::random_dataset(rng, 300, 4, 3);
        const auto normed = unit_normalize(train);
        for (Eigen::Index i = 0; i < normed.rows(); ++i)
            REQUIRE(normed.row(i).norm() == doctest::Approx(1.0).epsilon(1e-6));
        const auto idx = build_index(normed);

        // A training row scaled is its own nearest neighbour.
        CHECK(knn_score(idx, train.row(7) * 3.0, 1) == doctest::Approx(0.0).epsilon(1e-6));
        for (int q = 0; q < 30; ++q) {
            const Vector z = oracle::random_query(rng, 4);
            double prev = 1.0;
            for (std::int64_t k = 1; k <= 20; ++k) {
                const double s = knn_score(idx, z, k);
                REQUIRE(s <= prev);
                REQUIRE(s <= 0.0);
                prev = s;
            }
        }
        CHECK_THROWS_AS(unit_normalize(Vector::Zero(3)), Error);
    }

    TEST_CASE("decision-boundary baseline")
    {
        LinearHead h;
        h.weights.resize(2, 2);
        h.weights << 1, 0, -1, 0;
        h.bias = StorageVector::Zero(2);
        const TrainStatistics stats{Vector{{0.0, 1.0}}};
        CHECK(fdbd_score(h, stats, Vector{{1.0, 0.0}}) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
        CHECK(fdbd_score(h, stats, Vector{{0.0, 5.0}}) == 0.0);
        CHECK_THROWS_AS(fdbd_score(h, stats, Vector{{0.0, 1.0}}), Error);

        Rng rng(17);
        for (int t = 0; t < 200; ++t) {
            const auto c = 2 + rng.below(6);
            const auto d = 1 + rng.below(10);
            const auto head = oracle::random_head(rng, c, d);
            const TrainStatistics mu{oracle::random_query(rng, d)};
            const Vector z = oracle::random_query(rng, d);
            const auto l = oracle::logit_scan(head, z);
            const auto pred = oracle::predict(head, z);
            double total = 0;
            for (ClassLabel k = 0; k < c; ++k) {
                if (k == pred)
                    continue;
                double w = 0;
                for (Eigen::Index j = 0; j < d; ++j) {
                    const double diff = static_cast<double>(head.weights(pred, j)) - head.weights(k, j);
                    w += diff * diff;
                }
                total += std::abs(l[static_cast<std::size_t>(pred)] - l[static_cast<std::size_t>(k)]) / std::sqrt(w);
            }
            const double expect = total / static_cast<double>(c - 1) / (z - mu.mu_train).norm();
            REQUIRE(fdbd_score(head, mu, z) == doctest::Approx(expect).epsilon(1e-10));
        }
    }

    TEST_CASE("fdbd and the counterfactual score share a normaliser")
    {
        Rng rng(23);
        auto train = oracle::random_dataset(rng, 200, 3, 3);
        const auto head = oracle::random_head(rng, 3, 3);
        oracle::label_by_head(train, head);
        const auto idx = build_index(train, head);
        const auto stats = compute_mu_train(train);
        for (int q = 0; q < 20; ++q) {
            const Vector z = oracle::random_query(rng, 3);
            const auto s = score_input(idx, head, stats, z, std::nullopt, {});
            ScoreConfig raw;
            raw.normalize = false;
            const auto r = score_input(idx, head, stats, z, std::nullopt, raw);
            CHECK(s.score == doctest::Approx(r.score / s.normalizer).epsilon(1e-15));
            const double f = fdbd_score(head, stats, z);
            CHECK(f * s.normalizer == doctest::Approx(fdbd_score(head, TrainStatistics{z + Vector::Unit(3, 0)}, z))
                                          .epsilon(1e-12));
        }
    }

    TEST_CASE("auroc")
    {
        CHECK(auroc(std::vector<double>{3, 4, 5}, std::vector<double>{1, 2}) == 1.0);
        CHECK(auroc(std::vector<double>{1, 2}, std::vector<double>{3, 4, 5}) == 0.0);
        CHECK(auroc(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.5);
        CHECK(auroc(std::vector<double>{2}, std::vector<double>{1, 3}) == 0.5);
        CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<double>{1}), Error);
        CHECK_THROWS_AS(auroc(std::vector<double>{std::nan("")}, std::vector<double>{1}), Error);

        Rng rng(5);
        for (int t = 0; t < 50; ++t) {
            const auto id = random_scores(rng, 1 + rng.below(200), 0.7, t % 2 ? 0.25 : 0.0);
            const auto ood = random_scores(rng, 1 + rng.below(200), 0.0, t % 2 ? 0.25 : 0.0);
            const double a = auroc(id, ood);
            REQUIRE(std::abs(a - oracle::pairwise_auroc(id, ood)) <= 1e-12);
            REQUIRE(std::abs(auroc(ood, id) - (1.0 - a)) <= 1e-12);
            // Invariant under strictly increasing transforms.
            auto tid = id, tood = ood;
            for (auto& s : tid)
                s = std::exp(s / 3.0) - 7.0;
            for (auto& s : tood)
                s = std::exp(s / 3.0) - 7.0;
            REQUIRE(auroc(tid, tood) == a);
        }
    }

    TEST_CASE("fpr at 95% tpr")
    {
        std::vector<double> id;
        for (int i = 1; i <= 100; ++i)
            id.push_back(i);
        const auto r = fpr_at_95_tpr(id, std::vector<double>{5.5, 6, 7, 100});
        CHECK(r.tau == 6.0);
        CHECK(r.fpr95 == 0.75);

        CHECK(fpr_at_95_tpr(std::vector<double>{10, 11, 12}, std::vector<double>{1, 2}).fpr95 == 0.0);
        CHECK(fpr_at_95_tpr(id, id).fpr95 >= 0.95);

        Rng rng(9);
        for (int t = 0; t < 100; ++t) {
            const auto a = random_scores(rng, 1 + rng.below(300), 1.0, t % 3 ? 0.0 : 0.5);
            const auto b = random_scores(rng, 1 + rng.below(300), 0.0, t % 3 ? 0.0 : 0.5);
            const auto got = fpr_at_95_tpr(a, b);
            const auto [fpr, tau] = oracle::sweep_fpr95(a, b);
            REQUIRE(got.tau == tau);
            REQUIRE(got.fpr95 == fpr);
            const auto tp = std::count_if(a.begin(), a.end(), [&](double s) { return classify(s, got.tau) == Verdict::Id; });
            REQUIRE(static_cast<double>(tp) >= 0.95 * static_cast<double>(a.size()));
        }

        const auto m = evaluate_detector(id, std::vector<double>{5.5, 6, 7, 100});
        CHECK(m.id_count == 100);
        CHECK(m.ood_count == 4);
        CHECK(m.threshold_tau == 6.0);
        CHECK(m.fpr95 == 0.75);
    }

    TEST_CASE("threshold classification")
    {
        CHECK(classify(1.0, 1.0) == Verdict::Id);
        CHECK(classify(std::nextafter(1.0, 0.0), 1.0) == Verdict::Ood);
        CHECK(std::string(to_string(Verdict::Ood)) == "OOD");
        CHECK(std::string(to_string(Verdict::Id)) == "ID");
    }
}
