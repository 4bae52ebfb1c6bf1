#include "cfood/synth.hpp"

#include <cmath>
#include <numbers>

namespace cfood {

namespace fs = std::filesystem;

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::int64_t Rng::below(std::int64_t n)
{
    return static_cast<std::int64_t>(uniform() * static_cast<double>(n));
}

Matrix cluster_means(std::int64_t classes, std::int64_t dim, double distance)
{
    if (classes < 2 || dim < 1)
        throw Error(ErrorKind::InvalidArgument, "need at least 2 classes and 1 dimension");
    Matrix means = Matrix::Zero(classes, dim);
    if (dim >= classes) {
        // Scaled simplex corners: every pair exactly `distance` apart.
        for (Eigen::Index c = 0; c < classes; ++c)
            means(c, c) = distance / std::numbers::sqrt2;
    } else if (dim >= 2) {
        // Regular polygon with neighbouring vertices `distance` apart.
        const double radius = distance / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
        for (Eigen::Index c = 0; c < classes; ++c) {
            const double angle = std::numbers::pi / 2 + 2.0 * std::numbers::pi * static_cast<double>(c)
                                                            / static_cast<double>(classes);
            means(c, 0) = radius * std::cos(angle);
            means(c, 1) = radius * std::sin(angle);
        }
    } else {
        for (Eigen::Index c = 0; c < classes; ++c)
            means(c, 0) = distance * static_cast<double>(c);
    }
    const Eigen::RowVectorXd centre = means.colwise().mean();
    means.rowwise() -= centre;
    return means;
}

LinearHead fit_least_squares_head(const FeatureDataset& ds)
{
    validate(ds);
    const Eigen::Index n = ds.rows();
    const Eigen::Index d = ds.dim();
    Eigen::MatrixXd x(n, d + 1);
    x.leftCols(d) = ds.features.cast<double>();
    x.col(d).setOnes();
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, ds.class_count);
    for (Eigen::Index i = 0; i < n; ++i)
        y(i, ds.labels(i)) = 1.0;
    const Eigen::MatrixXd solution = x.colPivHouseholderQr().solve(y);   // (D+1) x C

    LinearHead head;
    head.weights = solution.topRows(d).transpose().cast<float>();
    head.bias = solution.row(d).transpose().cast<float>();
    return head;
}

namespace {

FeatureDataset make_set(const std::vector<Vector>& points, const std::vector<ClassLabel>& labels,
                        std::vector<std::string> refs, std::int64_t classes)
{
    FeatureDataset ds;
    const auto n = static_cast<Eigen::Index>(points.size());
    const Eigen::Index d = points.front().size();
    ds.features.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        ds.features.row(i) = points[static_cast<std::size_t>(i)].transpose().cast<float>();
    ds.labels = Eigen::Map<const LabelVector>(labels.data(), n);
    ds.class_count = classes;
    ds.input_refs = std::move(refs);
    return ds;
}

void attach_logits(FeatureDataset& ds, const LinearHead& head)
{
    StorageMatrix lg(ds.rows(), head.class_count());
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        lg.row(i) = logits(head, ds.row(i)).transpose().cast<float>();
    ds.logits = std::move(lg);
}

// OOD rows carry the head's prediction as their label.
void label_by_head(FeatureDataset& ds, const LinearHead& head)
{
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        ds.labels(i) = predict(head, ds.row(i));
}

} // namespace

SynthBenchmark make_synthetic(const SynthConfig& cfg)
{
    if (cfg.train_per_class < 1 || cfg.test_count < 1 || cfg.ood_count < 1)
        throw Error(ErrorKind::InvalidArgument, "synthetic set sizes must be positive");
    if (!(cfg.sigma > 0) || !(cfg.separation > 0) || cfg.jitter < 0 || !(cfg.far_factor > 0))
        throw Error(ErrorKind::InvalidArgument, "sigma, separation and far factor must be positive");

    const std::int64_t classes = cfg.classes;
    const std::int64_t dim = cfg.dim;
    SynthBenchmark bench;
    bench.means = cluster_means(classes, dim, cfg.separation * cfg.sigma);
    Rng rng(cfg.seed);

    auto gaussian = [&](const Vector& centre, double scale) {
        Vector p(dim);
        for (Eigen::Index j = 0; j < dim; ++j)
            p(j) = centre(j) + scale * rng.normal();
        return p;
    };

    std::vector<Vector> points;
    std::vector<ClassLabel> labels;
    std::vector<std::string> refs;

    for (std::int64_t c = 0; c < classes; ++c) {
        const Vector centre = bench.means.row(c).transpose();
        for (std::int64_t i = 0; i < cfg.train_per_class; ++i) {
            refs.push_back("train/" + std::to_string(points.size()));
            points.push_back(gaussian(centre, cfg.sigma));
            labels.push_back(static_cast<ClassLabel>(c));
        }
    }
    bench.train = make_set(points, labels, std::move(refs), classes);
    bench.head = fit_least_squares_head(bench.train);

    points.clear();
    labels.clear();
    refs.clear();
    for (std::int64_t i = 0; i < cfg.test_count; ++i) {
        const auto c = static_cast<ClassLabel>(i % classes);
        refs.push_back("test/" + std::to_string(i));
        points.push_back(gaussian(bench.means.row(c).transpose(), cfg.sigma));
        labels.push_back(c);
    }
    bench.test = make_set(points, labels, std::move(refs), classes);

    points.clear();
    labels.clear();
    refs.clear();
    for (std::int64_t i = 0; i < cfg.ood_count; ++i) {
        const std::int64_t a = rng.below(classes);
        std::int64_t b = rng.below(classes - 1);
        if (b >= a)
            ++b;
        const Vector mid = 0.5 * (bench.means.row(a) + bench.means.row(b)).transpose();
        refs.push_back("ood-mid/" + std::to_string(std::min(a, b)) + "-" + std::to_string(std::max(a, b)) + "/"
                       + std::to_string(i));
        points.push_back(gaussian(mid, cfg.jitter * cfg.sigma));
        labels.push_back(0);
    }
    bench.ood_mid = make_set(points, labels, std::move(refs), classes);

    double layout_radius = 0;
    for (Eigen::Index c = 0; c < classes; ++c)
        layout_radius = std::max(layout_radius, bench.means.row(c).norm());
    const double shell = cfg.far_factor * (layout_radius + cfg.separation * cfg.sigma);
    points.clear();
    labels.clear();
    refs.clear();
    for (std::int64_t i = 0; i < cfg.ood_count; ++i) {
        Vector dir = gaussian(Vector::Zero(dim), 1.0);
        while (dir.norm() == 0.0)
            dir = gaussian(Vector::Zero(dim), 1.0);
        refs.push_back("ood-far/" + std::to_string(i));
        points.push_back(shell * dir / dir.norm());
        labels.push_back(0);
    }
    bench.ood_far = make_set(points, labels, std::move(refs), classes);

    label_by_head(bench.ood_mid, bench.head);
    label_by_head(bench.ood_far, bench.head);
    for (auto* ds : {&bench.train, &bench.test, &bench.ood_mid, &bench.ood_far})
        attach_logits(*ds, bench.head);
    return bench;
}

void write_synthetic(const SynthBenchmark& bench, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    save_head(bench.head, dir / "head.cfhd");
    const std::pair<const char*, const FeatureDataset*> sets[] = {
        {"train", &bench.train}, {"test", &bench.test}, {"ood_mid", &bench.ood_mid}, {"ood_far", &bench.ood_far}};
    for (const auto& [name, ds] : sets) {
        const std::string file = std::string(name) + ".cfod";
        save_dataset(*ds, dir / file);
        DatasetManifest m;
        m.features_path = file;
        m.head_path = "head.cfhd";
        m.refs_path = file + ".refs";
        m.n = ds->rows();
        m.d = ds->dim();
        m.c = ds->class_count;
        m.space = Space::InputSpace;
        save_manifest(m, dir / (std::string(name) + ".json"));
    }
}

} // namespace cfood
