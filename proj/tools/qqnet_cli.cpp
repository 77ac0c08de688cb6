// qqnet command-line tool. Exit codes: 0 success, 1 domain/ingestion/IO
// error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qqnet/qqnet.hpp"

namespace fs = std::filesystem;
using namespace qqnet;

namespace {

struct Common {
    std::string config_path;
    std::uint64_t seed = 1;
    int threads = 0;

    NetConfig config() const { return config_path.empty() ? NetConfig{} : load_config(config_path); }
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
    sub->add_option("--config", c.config_path, "JSON file overriding network defaults")->check(CLI::ExistingFile);
    if (with_seed) sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--threads", c.threads, "Worker threads (0 = hardware parallelism)")->check(CLI::NonNegativeNumber);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

Image synthetic_image(const std::string& kind, std::uint64_t seed, int size) {
    if (kind == "smooth") return make_smooth_texture(size, 8.0, seed);
    if (kind == "noise") return make_noise(size, size, seed);
    return make_texture(parse_texture_kind(kind), {}, seed, size);
}

// ---------------------------------------------------------------- features

struct FeaturesArgs {
    Common common;
    std::string image, out;
    std::optional<double> s0;
};

int run_features(const FeaturesArgs& a) {
    const NetConfig cfg = a.common.config();
    const std::string hash = config_hash(cfg);
    const Image img = to_grey(load_image(a.image));
    fs::create_directories(a.out);
    const std::vector<double> scales = a.s0 ? std::vector<double>{*a.s0} : cfg.s0_list;
    json manifest{{"image", a.image}, {"config", cfg}, {"config_hash", hash}, {"maps", json::array()}};
    for (double s0 : scales) {
        NetworkCascade net(img, cfg, s0);
        while (!net.done()) {
            const LayerOutput& layer = net.step();
            for (const FeatureMap& fm : layer.maps) {
                std::ostringstream stem;
                stem << "s0_" << s0 << "_L" << layer.layer_index << "_" << fm.path.to_string();
                const fs::path base = fs::path(a.out) / stem.str();
                save_png(fm.field, base.string() + ".png", true);
                std::string raw;
                raw.reserve(fm.field.pixel_count() * 4);
                for (double v : fm.field.data()) detail::put_f32(raw, static_cast<float>(v));
                write_text(base.string() + ".f32", raw);
                const json side{{"width", fm.field.width()},   {"height", fm.field.height()},
                                {"layer", layer.layer_index},  {"path", fm.path.to_string()},
                                {"s0", s0},                    {"s_k", layer.scale_s},
                                {"dtype", "float32-le"},       {"order", "row-major"},
                                {"config_hash", hash}};
                write_json(base.string() + ".json", side);
                manifest["maps"].push_back(stem.str());
            }
        }
    }
    write_json((fs::path(a.out) / "manifest.json").string(), manifest);
    return 0;
}

// -------------------------------------------------------------- descriptor

struct DescriptorArgs {
    Common common;
    std::string image, out, mode = "grey";
};

int run_descriptor(const DescriptorArgs& a) {
    const NetConfig cfg = a.common.config();
    const Descriptor d = assemble_descriptor(load_image(a.image), cfg, parse_channel_mode(a.mode));
    write_descriptor(a.out, d, cfg);
    std::cout << "wrote " << d.size() << " values to " << a.out << " (config " << d.config_hash << ")\n";
    return 0;
}

// ---------------------------------------------------------------- classify

struct DatasetArgs {
    std::string index, root, layout = "flat";

    DatasetIndex load() const {
        if (!index.empty()) {
            std::ifstream in(index);
            if (!in) throw IoError("cannot open index: " + index);
            try {
                return index_from_json(json::parse(in));
            } catch (const json::exception& e) {
                throw FormatError("bad index file " + index + ": " + e.what());
            }
        }
        if (root.empty()) throw CLI::ValidationError("dataset", "either --index or --root is required");
        return index_dataset(root, layout);
    }
};

void add_dataset(CLI::App* sub, DatasetArgs& d) {
    auto* idx = sub->add_option("--index", d.index, "Dataset index JSON written by `dataset`");
    auto* root = sub->add_option("--root", d.root, "Dataset root directory (one sub-directory per class)");
    idx->excludes(root);
    sub->add_option("--layout", d.layout, "Directory layout")->check(CLI::IsMember({"flat", "curet", "umd", "kthtips2"}));
}

struct ClassifyArgs {
    Common common;
    DatasetArgs data;
    std::string mode = "grey", classifier = "svm", model, out;
    double lambda = 1e-4;
    int epochs = 50;
    // protocol
    std::string protocol = "standard";
    double S = 2.0;
    bool non_covariant = false, single_grid = false, benchmark = false;
    std::vector<std::string> train_sizes, test_sizes;
    int repetitions = 10, samples = 20;
};

SvmParams svm_params(const ClassifyArgs& a) { return {a.lambda, a.epochs, a.common.seed}; }

std::vector<std::vector<double>> describe_all(const DatasetIndex& idx, const DescriptorSource& src,
                                              const NetConfig& cfg, int threads) {
    std::vector<std::vector<double>> X(idx.entries.size());
    parallel_for(X.size(), threads, [&](std::size_t i) { X[i] = src(idx.entries[i], cfg.s0_list); });
    return X;
}

int run_train(const ClassifyArgs& a) {
    const NetConfig cfg = a.common.config();
    const DatasetIndex idx = a.data.load();
    const auto X = describe_all(idx, CachedDescriptorSource(cfg, parse_channel_mode(a.mode)), cfg, a.common.threads);
    std::vector<std::string> y;
    for (const auto& e : idx.entries) y.push_back(e.label);
    const TrainedModel m = train(X, y, parse_classifier(a.classifier), svm_params(a));
    write_model(a.model, m, config_hash(cfg));
    std::cout << "trained " << to_string(m.kind) << " on " << X.size() << " descriptors, " << m.labels.size()
              << " classes -> " << a.model << "\n";
    return 0;
}

int run_eval(const ClassifyArgs& a) {
    const NetConfig cfg = a.common.config();
    const DatasetIndex idx = a.data.load();
    const TrainedModel m = read_model(a.model);
    const auto X = describe_all(idx, CachedDescriptorSource(cfg, parse_channel_mode(a.mode)), cfg, a.common.threads);
    ProtocolReport rep;
    rep.protocol = "eval";
    rep.seed = a.common.seed;
    rep.labels = m.labels;
    for (const auto& e : idx.entries)
        if (!std::binary_search(rep.labels.begin(), rep.labels.end(), e.label))
            rep.labels.insert(std::lower_bound(rep.labels.begin(), rep.labels.end(), e.label), e.label);
    rep.confusion.assign(rep.labels.size(), std::vector<std::size_t>(rep.labels.size(), 0));
    rep.params = {{"model", a.model}, {"config_hash", config_hash(cfg)}, {"classifier", to_string(m.kind)}};
    FoldResult f;
    f.name = "eval";
    f.test_count = X.size();
    auto pos = [&](const std::string& l) {
        return static_cast<std::size_t>(std::lower_bound(rep.labels.begin(), rep.labels.end(), l) - rep.labels.begin());
    };
    json predictions = json::array();
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Prediction p = predict(m, X[i]);
        if (p.label == idx.entries[i].label) ++f.correct;
        ++rep.confusion[pos(idx.entries[i].label)][pos(p.label)];
        predictions.push_back({{"path", idx.entries[i].path}, {"label", p.label}, {"score", p.score}});
    }
    f.accuracy = X.empty() ? 0.0 : static_cast<double>(f.correct) / static_cast<double>(X.size());
    rep.mean_accuracy = f.accuracy;
    rep.folds.push_back(f);
    json j = report_to_json(rep);
    j["predictions"] = predictions;
    write_json(a.out, j);
    return 0;
}

int run_protocol_cmd(const ClassifyArgs& a) {
    ProtocolSpec ps;
    ps.kind = parse_protocol(a.protocol);
    ps.classifier = parse_classifier(a.classifier);
    ps.svm = svm_params(a);
    ps.seed = a.common.seed;
    ps.S = a.S;
    ps.covariant = !a.non_covariant;
    ps.aggregated = !a.single_grid;
    ps.train_sizes = a.train_sizes;
    ps.test_sizes = a.test_sizes;
    ps.repetitions = a.repetitions;
    ps.threads = a.common.threads;

    ProtocolReport rep;
    if (a.benchmark) {
        const NetConfig cfg = a.common.config_path.empty() ? benchmark_config() : a.common.config();
        BenchmarkSpec spec;
        spec.samples_per_size = a.samples;
        spec.seed = a.common.seed;
        std::vector<int> sizes;
        for (int s = 2; s <= 10; ++s) sizes.push_back(s);
        rep = run_protocol(benchmark_index(spec, sizes), ps, cfg, benchmark_source(spec, cfg));
    } else {
        const NetConfig cfg = a.common.config();
        rep = run_protocol(a.data.load(), ps, cfg, CachedDescriptorSource(cfg, parse_channel_mode(a.mode)));
    }
    write_json(a.out, report_to_json(rep));
    std::cerr << rep.protocol << ": mean accuracy " << rep.mean_accuracy << "\n";
    return 0;
}

// ------------------------------------------------------------------ verify

struct VerifyArgs {
    Common common;
    std::string suite, image, synthetic = "smooth", out;
    int size = 256;
    double S = 2.0, s0 = 1.0, s = 2.0, Gamma = 0.0, tol = -1.0;
    int quarter_turns = 1, order = 1;
};

int run_verify(const VerifyArgs& a) {
    auto input = [&] { return a.image.empty() ? synthetic_image(a.synthetic, a.common.seed, a.size) : to_grey(load_image(a.image)); };
    json j;
    bool passed = true;
    if (a.suite == "scale") {
        const NetConfig cfg = a.common.config();
        const auto r = check_scale_covariance(input(), cfg, a.S, a.s0, a.tol < 0 ? 0.07 : a.tol);
        j = report_to_json(r);
        passed = r.passed;
    } else if (a.suite == "rotation") {
        const NetConfig cfg = a.common.config();
        const auto r = check_rotation_covariance(input(), cfg, a.quarter_turns, a.s0, a.tol < 0 ? 1e-9 : a.tol);
        j = report_to_json(r);
        passed = r.passed;
    } else if (a.suite == "gamma1") {
        const auto r = check_gamma1_derivative_equality(input(), a.s, a.S, a.order, a.tol < 0 ? 0.05 : a.tol);
        j = result_to_json(r);
        j["config_hash"] = config_hash(a.common.config());
        passed = r.passed;
    } else if (a.suite == "selection") {
        j = {{"experiment", "selection"}, {"config_hash", config_hash(a.common.config())}, {"rows", json::array()}};
        for (double s0 : {16.0, 18.0})
            for (int n : {0, 1, 2}) {
                const auto r = sweep_scale_selection(s0, a.Gamma, n, selection_scale_grid(s0));
                json row = result_to_json(r);
                row.erase("scales");
                row.erase("responses");
                j["rows"].push_back(row);
                passed = passed && r.within_one_step;
            }
    } else {  // ripple
        const auto rows = ripple_suite({{1.0, 1.0}, {4.0, 4.0}, {16.0, 16.0}, {2.0, 8.0}, {8.0, 2.0}});
        j = rows_to_json(rows);
        j["config_hash"] = config_hash(a.common.config());
        for (const auto& r : rows) passed = passed && r.rel_error < 0.01;
    }
    j["passed"] = passed;
    write_json(a.out, j);
    return 0;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
    Common common;
    double s = 1.0, eps = kDefaultKernelEps, s0 = 16.0, Gamma = 0.0;
    int order = 0;
    std::string out;
};

int run_kernel(const AnalyzeArgs& a) {
    const Kernel1D k = discrete_gaussian_kernel(a.s, a.eps);
    std::ostringstream os;
    os << std::setprecision(17) << "# s=" << a.s << " eps=" << a.eps << "\nn,coefficient\n";
    for (int n = -k.radius; n <= k.radius; ++n) os << n << "," << k.at(n) << "\n";
    write_text(a.out, os.str());
    return 0;
}

int run_selection_csv(const AnalyzeArgs& a) {
    const auto r = sweep_scale_selection(a.s0, a.Gamma, a.order, selection_scale_grid(a.s0));
    std::ostringstream os;
    os << std::setprecision(10) << "# n=" << a.order << " s0=" << a.s0 << " Gamma=" << a.Gamma
       << " predicted=" << r.predicted << " empirical=" << r.empirical
       << " config_hash=" << config_hash(a.common.config()) << "\ns,Q_center\n";
    for (std::size_t i = 0; i < r.scales.size(); ++i) os << r.scales[i] << "," << r.responses[i] << "\n";
    write_text(a.out, os.str());
    return 0;
}

// ------------------------------------------------------------------- synth

struct SynthArgs {
    Common common;
    std::string kind, out;
    int size = 256;
    double wavelength = 8.0, orientation = 0.0, phase = 0.0;
};

int run_synth(const SynthArgs& a) {
    Image img;
    if (a.kind == "smooth") img = make_smooth_texture(a.size, a.wavelength, a.common.seed);
    else if (a.kind == "noise") img = make_noise(a.size, a.size, a.common.seed);
    else img = make_texture(parse_texture_kind(a.kind), {a.wavelength, a.orientation, a.phase}, a.common.seed, a.size);
    save_png(img, a.out, false);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scale- and rotation-covariant quasi-quadrature networks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "qqnet 0.1.0");

    FeaturesArgs fa;
    auto* features = app.add_subcommand("features", "Write every feature map as PNG plus raw float32 dump");
    features->add_option("image", fa.image, "Input image (PNG/PNM)")->required()->check(CLI::ExistingFile);
    features->add_option("--out", fa.out, "Output directory")->required();
    features->add_option("--s0", fa.s0, "Single initial scale (variance); default: every configured s0");
    add_common(features, fa.common, false);

    DescriptorArgs da;
    auto* descriptor = app.add_subcommand("descriptor", "Compute a mean-reduced descriptor (QQD1 file)");
    descriptor->add_option("image", da.image, "Input image")->required()->check(CLI::ExistingFile);
    descriptor->add_option("--mode", da.mode, "Channel mode")->check(CLI::IsMember({"grey", "luv"}));
    descriptor->add_option("--out", da.out, "Output .qqd file")->required();
    add_common(descriptor, da.common, false);

    ClassifyArgs ca;
    auto* classify = app.add_subcommand("classify", "Train, evaluate or run a benchmark protocol");
    classify->require_subcommand(1);
    auto add_clf = [&](CLI::App* sub) {
        add_common(sub, ca.common, true);
        sub->add_option("--mode", ca.mode, "Channel mode")->check(CLI::IsMember({"grey", "luv"}));
        sub->add_option("--classifier", ca.classifier, "Classifier")->check(CLI::IsMember({"svm", "nn"}));
        sub->add_option("--lambda", ca.lambda, "SVM regularization")->check(CLI::PositiveNumber);
        sub->add_option("--epochs", ca.epochs, "SVM epochs")->check(CLI::PositiveNumber);
    };
    auto* ctrain = classify->add_subcommand("train", "Train a classifier on a dataset");
    add_dataset(ctrain, ca.data);
    add_clf(ctrain);
    ctrain->add_option("--model", ca.model, "Output model file")->required();
    auto* ceval = classify->add_subcommand("eval", "Evaluate a trained model on a dataset");
    add_dataset(ceval, ca.data);
    add_clf(ceval);
    ceval->add_option("--model", ca.model, "Model file")->required()->check(CLI::ExistingFile);
    ceval->add_option("--out", ca.out, "Report JSON (default stdout)");
    auto* cproto = classify->add_subcommand("protocol", "Run an evaluation protocol and write a JSON report");
    add_dataset(cproto, ca.data);
    add_clf(cproto);
    cproto->add_option("--protocol", ca.protocol, "Protocol")
        ->check(CLI::IsMember({"standard", "scale_matched", "scale_aggregated", "random_split"}));
    cproto->add_option("--S", ca.S, "Scale factor for scale_matched")->check(CLI::PositiveNumber);
    cproto->add_flag("--non-covariant", ca.non_covariant, "Use the base grid on the test side");
    cproto->add_flag("--single-grid", ca.single_grid, "Disable scale aggregation");
    cproto->add_option("--train-sizes", ca.train_sizes, "Training size labels");
    cproto->add_option("--test-sizes", ca.test_sizes, "Test size labels");
    cproto->add_option("--repetitions", ca.repetitions, "random_split repetitions")->check(CLI::PositiveNumber);
    cproto->add_flag("--benchmark", ca.benchmark, "Use the built-in synthetic multi-scale benchmark");
    cproto->add_option("--samples", ca.samples, "Benchmark samples per (class, size)")->check(CLI::PositiveNumber);
    cproto->add_option("--out", ca.out, "Report JSON (default stdout)");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "Run a covariance or closed-form verification suite");
    add_common(verify, va.common, true);
    verify->add_option("--suite", va.suite, "Suite")->required()->check(
        CLI::IsMember({"scale", "rotation", "gamma1", "selection", "ripple"}));
    auto* vimg = verify->add_option("--image", va.image, "Input image")->check(CLI::ExistingFile);
    verify->add_option("--synthetic", va.synthetic, "Synthetic input: smooth, noise or a texture kind")->excludes(vimg);
    verify->add_option("--size", va.size, "Synthetic image size")->check(CLI::PositiveNumber);
    verify->add_option("--S", va.S, "Scale factor")->check(CLI::PositiveNumber);
    verify->add_option("--s0", va.s0, "Initial scale (variance)")->check(CLI::PositiveNumber);
    verify->add_option("--s", va.s, "Derivative scale for gamma1")->check(CLI::PositiveNumber);
    verify->add_option("--n", va.order, "Derivative order for gamma1")->check(CLI::Range(1, 2));
    verify->add_option("--quarter-turns", va.quarter_turns, "Rotation in quarter turns");
    verify->add_option("--Gamma", va.Gamma, "Gamma for the selection suite");
    verify->add_option("--tol", va.tol, "Tolerance override");
    verify->add_option("--json", va.out, "Output JSON (default stdout)");

    AnalyzeArgs aa;
    auto* analyze = app.add_subcommand("analyze", "Dump kernels or scale-selection sweeps as CSV");
    analyze->require_subcommand(1);
    auto* akernel = analyze->add_subcommand("kernel", "Discrete Gaussian kernel coefficients");
    akernel->add_option("--s", aa.s, "Scale (variance)")->required()->check(CLI::NonNegativeNumber);
    akernel->add_option("--eps", aa.eps, "Truncation tail")->check(CLI::PositiveNumber);
    akernel->add_option("--out", aa.out, "CSV file (default stdout)");
    add_common(akernel, aa.common, false);
    auto* asel = analyze->add_subcommand("scale-selection", "Q at the blob centre over a scale sweep");
    asel->add_option("--s0", aa.s0, "Blob scale (variance)")->check(CLI::Range(1.0, 1e6));
    asel->add_option("--n", aa.order, "Blob derivative order")->check(CLI::Range(0, 2));
    asel->add_option("--Gamma", aa.Gamma, "Complementary normalization power");
    asel->add_option("--out", aa.out, "CSV file (default stdout)");
    add_common(asel, aa.common, false);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Render a synthetic texture to PNG");
    synth->add_option("--kind", sa.kind, "grating, checker, blob_noise, stripes_irregular, spots, smooth or noise")->required();
    synth->add_option("--size", sa.size, "Image size in pixels")->check(CLI::PositiveNumber);
    synth->add_option("--wavelength", sa.wavelength, "Wavelength in pixels")->check(CLI::PositiveNumber);
    synth->add_option("--orientation", sa.orientation, "Orientation in radians");
    synth->add_option("--phase", sa.phase, "Phase in radians");
    synth->add_option("--out", sa.out, "Output PNG")->required();
    add_common(synth, sa.common, true);

    DatasetArgs dsa;
    std::string dataset_out;
    auto* dataset = app.add_subcommand("dataset", "Index a dataset directory into JSON");
    dataset->add_option("--root", dsa.root, "Dataset root")->required();
    dataset->add_option("--layout", dsa.layout, "Directory layout")->check(CLI::IsMember({"flat", "curet", "umd", "kthtips2"}));
    dataset->add_option("--out", dataset_out, "Index JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (e.get_exit_code() != 0) std::cerr << "\n" << app.help();
        return 2;
    }

    try {
        if (*features) return run_features(fa);
        if (*descriptor) return run_descriptor(da);
        if (*ctrain) return run_train(ca);
        if (*ceval) return run_eval(ca);
        if (*cproto) return run_protocol_cmd(ca);
        if (*verify) return run_verify(va);
        if (*akernel) return run_kernel(aa);
        if (*asel) return run_selection_csv(aa);
        if (*synth) return run_synth(sa);
        if (*dataset) {
            write_json(dataset_out, index_to_json(dsa.load()));
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
