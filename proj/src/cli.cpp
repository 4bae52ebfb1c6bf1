#include "cfood/cli.hpp"

#include "cfood/evaluation.hpp"
#include "cfood/explain.hpp"
#include "cfood/parallel.hpp"
#include "cfood/scorer.hpp"
#include "cfood/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace cfood {

namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string train;
    std::string head;
    std::string test;
    std::vector<std::string> ood;
    std::string out;
    std::string csv;
    std::string in;
    std::string index_cache;
    std::string method = "nnce";
    std::int64_t k_classes = 0;
    std::int64_t k_neighbours = 0;
    std::optional<double> tau;
    int threads = 0;
    bool time = false;
    bool no_filter = false;
    bool no_normalize = false;
    bool no_average = false;
    bool text = false;
    std::vector<std::int64_t> rows;
    std::vector<std::string> detectors{"cf"};
    double temperature = 1.0;
    std::int64_t classes = 0;
    SynthConfig synth;
};

struct TrainContext {
    FeatureDataset train;
    LinearHead head;
    ClassIndex index;
    TrainStatistics stats;
    ScoreConfig score;
};

std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    return out;
}

std::string dataset_name(const std::string& manifest_path) { return fs::path(manifest_path).stem().string(); }

TrainContext load_training(const RunConfig& cfg, std::ostream& err)
{
    const auto manifest = load_manifest(cfg.train);
    TrainContext ctx;
    ctx.train = load_dataset(manifest);
    fs::path head_path = cfg.head.empty() ? manifest.head_path : fs::path(cfg.head);
    if (head_path.empty())
        throw Error(ErrorKind::InvalidArgument, "no head given: pass --head or set head_path in the training manifest");
    ctx.head = load_head(head_path);
    validate(ctx.head);
    if (ctx.head.dim() != ctx.train.dim() || ctx.head.class_count() != ctx.train.class_count)
        throw Error(ErrorKind::DimensionMismatch, "dimension mismatch: head does not match the training set");

    if (!cfg.index_cache.empty() && fs::exists(cfg.index_cache)) {
        ctx.index = load_index(cfg.index_cache, ctx.train);
    } else {
        ctx.index = build_index(ctx.train, ctx.head, !cfg.no_filter);
        if (!cfg.index_cache.empty())
            save_index(ctx.index, cfg.index_cache);
    }
    if (!ctx.index.empty_classes().empty()) {
        err << "warning: classes with no eligible training rows:";
        for (auto c : ctx.index.empty_classes())
            err << ' ' << c;
        err << '\n';
    }
    ctx.stats = compute_mu_train(ctx.train);
    ctx.score.method = parse_method(cfg.method);
    ctx.score.k_classes = cfg.k_classes;
    ctx.score.normalize = !cfg.no_normalize;
    ctx.score.average = !cfg.no_average;
    resolve_k_classes(ctx.score, ctx.train.class_count);
    return ctx;
}

FeatureDataset load_test(const std::string& manifest_path, const TrainContext& ctx)
{
    auto ds = load_dataset(load_manifest(manifest_path));
    if (ds.dim() != ctx.train.dim() || ds.class_count != ctx.train.class_count)
        throw Error(ErrorKind::DimensionMismatch,
                    "dimension mismatch: " + manifest_path + " does not match the training set");
    return ds;
}

void warn_skipped(const std::vector<ScoredInput>& scores, std::ostream& err)
{
    std::size_t rows = 0;
    for (const auto& s : scores)
        rows += s.skipped_classes.empty() ? 0 : 1;
    if (rows > 0)
        err << "warning: " << rows << " rows skipped empty target classes\n";
}

int cmd_score(const RunConfig& cfg, std::ostream& err)
{
    const auto ctx = load_training(cfg, err);
    const auto test = load_test(cfg.test, ctx);
    const int threads = resolve_threads(cfg.threads);

    if (cfg.time) {
        const std::int64_t count = std::min<std::int64_t>(100, test.rows());
        double total_ms = 0;
        for (std::int64_t i = 0; i < count; ++i) {
            std::optional<Vector> lg;
            if (test.logits)
                lg = test.logits->row(i).transpose().cast<double>();
            const Vector z = test.row(i);
            const auto start = std::chrono::steady_clock::now();
            const auto scored = score_input(ctx.index, ctx.head, ctx.stats, z, lg, ctx.score);
            const auto stop = std::chrono::steady_clock::now();
            total_ms += std::chrono::duration<double, std::milli>(stop - start).count();
            (void)scored;
        }
        err << "timing: " << std::fixed << std::setprecision(3) << total_ms / static_cast<double>(count)
            << " ms/input over " << count << " inputs (single thread)\n";
        err.unsetf(std::ios::floatfield);
    }

    const auto scores = score_batch(test, ctx.index, ctx.head, ctx.stats, ctx.score, threads);
    warn_skipped(scores, err);
    auto out = open_output(cfg.out);
    write_scores_jsonl(scores, test.input_refs ? &*test.input_refs : nullptr, out);
    if (!out)
        throw Error(ErrorKind::Io, "write failed for " + cfg.out);
    return 0;
}

std::vector<double> detector_scores(const std::string& detector, const FeatureDataset& ds, const TrainContext& ctx,
                                    const ClassIndex* knn_index, const RunConfig& cfg, int threads,
                                    std::ostream& err)
{
    std::vector<double> scores(static_cast<std::size_t>(ds.rows()));
    auto logits_of = [&](std::int64_t i) -> Vector {
        if (ds.logits)
            return ds.logits->row(i).transpose().cast<double>();
        return logits(ctx.head, ds.row(i));
    };
    if (detector == "cf") {
        const auto scored = score_batch(ds, ctx.index, ctx.head, ctx.stats, ctx.score, threads);
        warn_skipped(scored, err);
        for (std::size_t i = 0; i < scored.size(); ++i)
            scores[i] = scored[i].score;
        return scores;
    }
    const std::int64_t k = cfg.k_neighbours > 0 ? cfg.k_neighbours : 50;
    parallel_for(ds.rows(), threads, [&](std::int64_t i) {
        double s = 0;
        if (detector == "msp")
            s = msp_score(logits_of(i));
        else if (detector == "energy")
            s = energy_score(logits_of(i), cfg.temperature);
        else if (detector == "knn")
            s = knn_score(*knn_index, ds.row(i), k);
        else
            s = fdbd_score(ctx.head, ctx.stats, ds.row(i));
        scores[static_cast<std::size_t>(i)] = s;
    });
    return scores;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& err)
{
    for (const auto& d : cfg.detectors)
        if (d != "cf" && d != "msp" && d != "energy" && d != "knn" && d != "fdbd")
            throw Error(ErrorKind::InvalidArgument, "unknown detector '" + d + "'");
    const auto ctx = load_training(cfg, err);
    const auto id_set = load_test(cfg.test, ctx);
    std::vector<std::pair<std::string, FeatureDataset>> ood_sets;
    for (const auto& path : cfg.ood)
        ood_sets.emplace_back(dataset_name(path), load_test(path, ctx));
    const int threads = resolve_threads(cfg.threads);

    std::optional<ClassIndex> knn_index;
    if (std::find(cfg.detectors.begin(), cfg.detectors.end(), "knn") != cfg.detectors.end())
        knn_index = build_index(unit_normalize(ctx.train));

    nlohmann::ordered_json report;
    report["method"] = cfg.method;
    report["k_classes"] = resolve_k_classes(ctx.score, ctx.train.class_count);
    report["id_dataset"] = dataset_name(cfg.test);
    auto detectors = nlohmann::ordered_json::array();

    std::vector<std::vector<std::string>> csv_rows;
    for (const auto& detector : cfg.detectors) {
        const auto name = detector == "cf" ? "cf-" + cfg.method : detector;
        const auto id_scores = detector_scores(detector, id_set, ctx, knn_index ? &*knn_index : nullptr, cfg, threads, err);
        nlohmann::ordered_json dj;
        dj["name"] = name;
        auto datasets = nlohmann::ordered_json::array();
        double sum_auroc = 0;
        double sum_fpr = 0;
        std::vector<std::string> csv_row{name};
        for (const auto& [ood_name, ood] : ood_sets) {
            const auto ood_scores = detector_scores(detector, ood, ctx, knn_index ? &*knn_index : nullptr, cfg, threads, err);
            const auto m = evaluate_detector(id_scores, ood_scores);
            nlohmann::ordered_json mj;
            mj["dataset"] = ood_name;
            mj["auroc"] = m.auroc;
            mj["fpr95"] = m.fpr95;
            mj["tau"] = m.threshold_tau;
            mj["id_count"] = m.id_count;
            mj["ood_count"] = m.ood_count;
            datasets.push_back(std::move(mj));
            sum_auroc += m.auroc;
            sum_fpr += m.fpr95;
            std::ostringstream fpr, au;
            fpr << std::fixed << std::setprecision(2) << 100.0 * m.fpr95;
            au << std::fixed << std::setprecision(2) << 100.0 * m.auroc;
            csv_row.push_back(fpr.str());
            csv_row.push_back(au.str());
        }
        const double count = static_cast<double>(ood_sets.size());
        dj["datasets"] = std::move(datasets);
        dj["average"] = {{"auroc", sum_auroc / count}, {"fpr95", sum_fpr / count}};
        std::ostringstream fpr, au;
        fpr << std::fixed << std::setprecision(2) << 100.0 * sum_fpr / count;
        au << std::fixed << std::setprecision(2) << 100.0 * sum_auroc / count;
        csv_row.push_back(fpr.str());
        csv_row.push_back(au.str());
        csv_rows.push_back(std::move(csv_row));
        detectors.push_back(std::move(dj));
    }
    report["detectors"] = std::move(detectors);

    auto out = open_output(cfg.out);
    out << report.dump(2) << '\n';
    if (!cfg.csv.empty()) {
        auto csv = open_output(cfg.csv);
        csv << "detector";
        for (const auto& [ood_name, ood] : ood_sets)
            csv << ',' << ood_name << "_fpr95," << ood_name << "_auroc";
        csv << ",average_fpr95,average_auroc\n";
        for (const auto& row : csv_rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                csv << (i ? "," : "") << row[i];
            csv << '\n';
        }
    }
    return 0;
}

int cmd_explain(const RunConfig& cfg, std::ostream& err)
{
    const auto ctx = load_training(cfg, err);
    if (!ctx.train.input_refs)
        throw Error(ErrorKind::MissingRefs, "missing input refs: the training manifest needs a refs_path "
                                            "(or a .refs sidecar) so neighbours can be mapped back to inputs");
    const auto queries = load_test(cfg.test, ctx);
    std::vector<std::int64_t> rows = cfg.rows;
    if (rows.empty())
        for (std::int64_t i = 0; i < queries.rows(); ++i)
            rows.push_back(i);
    const std::int64_t k = cfg.k_neighbours > 0 ? cfg.k_neighbours : 4;

    std::vector<ExplanationReport> reports(rows.size());
    parallel_for(static_cast<std::int64_t>(rows.size()), resolve_threads(cfg.threads), [&](std::int64_t i) {
        const auto row = rows[static_cast<std::size_t>(i)];
        if (row < 0 || row >= queries.rows())
            throw Error(ErrorKind::InvalidArgument, "query row " + std::to_string(row) + " is out of range");
        const std::string ref = queries.input_refs ? (*queries.input_refs)[static_cast<std::size_t>(row)]
                                                   : "row/" + std::to_string(row);
        reports[static_cast<std::size_t>(i)] =
            build_report(ctx.index, ctx.head, ctx.stats, ctx.train, queries.row(row), ref, k, *cfg.tau, ctx.score);
    });

    auto out = open_output(cfg.out);
    if (cfg.text)
        for (const auto& r : reports)
            render_text(r, out);
    else
        write_reports_json(reports, out);
    return 0;
}

int cmd_synth(const RunConfig& cfg, std::ostream& err)
{
    const auto bench = make_synthetic(cfg.synth);
    write_synthetic(bench, cfg.out);
    std::int64_t correct = 0;
    for (Eigen::Index i = 0; i < bench.train.rows(); ++i)
        correct += predict(bench.head, bench.train.row(i)) == bench.train.labels(i) ? 1 : 0;
    err << "synth: head accuracy on train " << std::fixed << std::setprecision(4)
        << static_cast<double>(correct) / static_cast<double>(bench.train.rows()) << '\n';
    err.unsetf(std::ios::floatfield);
    return 0;
}

bool has_extension(const std::string& path, const char* ext) { return fs::path(path).extension() == ext; }

int cmd_convert(const RunConfig& cfg, std::ostream&)
{
    if (has_extension(cfg.in, ".csv") && has_extension(cfg.out, ".cfod")) {
        std::ifstream in(cfg.in);
        if (!in)
            throw Error(ErrorKind::Io, "cannot open " + cfg.in);
        convert_csv_stream(in, cfg.out, cfg.classes);
        return 0;
    }
    if (has_extension(cfg.in, ".cfod") && has_extension(cfg.out, ".csv")) {
        const auto ds = load_dataset(fs::path(cfg.in));
        auto out = open_output(cfg.out);
        write_csv(ds, out);
        return 0;
    }
    throw Error(ErrorKind::InvalidArgument, "convert needs a .csv -> .cfod or .cfod -> .csv pair");
}

void add_training_options(CLI::App* sub, RunConfig& cfg)
{
    sub->add_option("--train", cfg.train, "Training manifest (JSON)")->required();
    sub->add_option("--head", cfg.head, "Linear head (CFHD); defaults to the manifest's head_path");
    sub->add_option("--method", cfg.method, "Counterfactual search")->check(CLI::IsMember({"nnce", "nice"}));
    sub->add_option("--k-classes", cfg.k_classes, "Target classes per input, 1..C-1 (0 = all)");
    sub->add_option("--threads", cfg.threads, "Worker threads (default: CF_OOD_THREADS or all cores)");
    sub->add_option("--index-cache", cfg.index_cache, "CFIX cache file for the training index");
    sub->add_flag("--no-filter", cfg.no_filter, "Index misclassified training rows too");
    sub->add_flag("--no-normalize", cfg.no_normalize, "Skip division by the distance to the training mean");
    sub->add_flag("--no-average", cfg.no_average, "Sum counterfactual distances instead of averaging");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    CLI::App app{"Counterfactual-distance out-of-distribution detection"};
    app.require_subcommand(1);

    auto* score = app.add_subcommand("score", "Score a test set, one JSON line per input");
    add_training_options(score, cfg);
    score->add_option("--test", cfg.test, "Test manifest")->required();
    score->add_option("--out", cfg.out, "Output JSON-lines file")->required();
    score->add_flag("--time", cfg.time, "Report average single-thread scoring time over 100 inputs");

    auto* evaluate = app.add_subcommand("evaluate", "AUROC / FPR95 of detectors on ID vs OOD sets");
    add_training_options(evaluate, cfg);
    evaluate->add_option("--test", cfg.test, "ID test manifest")->required();
    evaluate->add_option("--ood", cfg.ood, "OOD manifest (repeatable)")->required();
    evaluate->add_option("--out", cfg.out, "Metrics JSON")->required();
    evaluate->add_option("--csv", cfg.csv, "Optional metrics table (percent)");
    evaluate->add_option("--detectors", cfg.detectors, "Any of cf, msp, energy, knn, fdbd")->delimiter(',');
    evaluate->add_option("--k-neighbours", cfg.k_neighbours, "k for the KNN baseline (default 50)");
    evaluate->add_option("--temperature", cfg.temperature, "Energy temperature");

    auto* explain = app.add_subcommand("explain", "Nearest like / unlike neighbour reports");
    add_training_options(explain, cfg);
    explain->add_option("--test", cfg.test, "Query manifest")->required();
    explain->add_option("--rows", cfg.rows, "Query rows (default: all)")->delimiter(',');
    explain->add_option("--k-neighbours", cfg.k_neighbours, "Neighbours per class (default 4)");
    explain->add_option("--tau", cfg.tau, "Detection threshold")->required();
    explain->add_option("--out", cfg.out, "Report file")->required();
    explain->add_flag("--text", cfg.text, "Plain-text layout instead of JSON");

    auto* synth = app.add_subcommand("synth", "Generate a seeded Gaussian-cluster benchmark");
    synth->add_option("--out", cfg.out, "Output directory")->required();
    synth->add_option("--classes", cfg.synth.classes)->check(CLI::Range(2, 1 << 20));
    synth->add_option("--dim", cfg.synth.dim)->check(CLI::Range(1, 1 << 20));
    synth->add_option("--train-per-class", cfg.synth.train_per_class);
    synth->add_option("--test-count", cfg.synth.test_count);
    synth->add_option("--ood-count", cfg.synth.ood_count);
    synth->add_option("--separation", cfg.synth.separation, "Mean separation in sigmas");
    synth->add_option("--sigma", cfg.synth.sigma);
    synth->add_option("--jitter", cfg.synth.jitter, "Midpoint jitter in sigmas");
    synth->add_option("--seed", cfg.synth.seed);

    auto* convert = app.add_subcommand("convert", "CSV <-> CFOD");
    convert->add_option("--in", cfg.in, "Input .csv or .cfod")->required();
    convert->add_option("--out", cfg.out, "Output .cfod or .csv")->required();
    convert->add_option("--classes", cfg.classes, "Class count for CSV input (default: max label + 1)");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (score->parsed())
            return cmd_score(cfg, err);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, err);
        if (explain->parsed())
            return cmd_explain(cfg, err);
        if (synth->parsed())
            return cmd_synth(cfg, err);
        return cmd_convert(cfg, err);
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 4;
    }
}

} // namespace cfood
