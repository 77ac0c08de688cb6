#pragma once

// Dataset ingestion, standardized nearest-neighbour and one-vs-rest linear
// SVM classifiers, and the benchmark protocols (standard sample split,
// scale-matched split, scale-aggregated training, random equal split).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "descriptor.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "parallel.hpp"
#include "synthetic.hpp"

namespace qqnet {

// ---------------------------------------------------------------- datasets

struct DatasetEntry {
    std::string path;  // image or QQD1 file; may be a synthetic:// locator
    std::string label;
    std::string sample_id;
    std::optional<std::string> size_label;
    std::optional<std::string> condition_id;
};

struct DatasetIndex {
    std::vector<DatasetEntry> entries;
    std::string layout = "flat";

    std::vector<std::string> classes() const {
        std::set<std::string> s;
        for (const auto& e : entries) s.insert(e.label);
        return {s.begin(), s.end()};
    }
};

inline void to_json(json& j, const DatasetEntry& e) {
    j = json{{"path", e.path}, {"label", e.label}, {"sample", e.sample_id}};
    if (e.size_label) j["size"] = *e.size_label;
    if (e.condition_id) j["condition"] = *e.condition_id;
}

inline void from_json(const json& j, DatasetEntry& e) {
    j.at("path").get_to(e.path);
    j.at("label").get_to(e.label);
    e.sample_id = j.value("sample", std::string{});
    if (j.contains("size")) e.size_label = j.at("size").get<std::string>();
    if (j.contains("condition")) e.condition_id = j.at("condition").get<std::string>();
}

inline json index_to_json(const DatasetIndex& idx) { return json{{"layout", idx.layout}, {"entries", idx.entries}}; }

inline DatasetIndex index_from_json(const json& j) {
    DatasetIndex idx;
    idx.layout = j.value("layout", std::string("flat"));
    idx.entries = j.at("entries").get<std::vector<DatasetEntry>>();
    return idx;
}

namespace detail {

inline bool is_dataset_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".qqd";
}

inline std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir, bool recursive) {
    std::vector<std::filesystem::path> out;
    if (recursive) {
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
            if (e.is_regular_file() && is_dataset_file(e.path())) out.push_back(e.path());
    } else {
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file() && is_dataset_file(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Parses KTH-TIPS2 style names such as "42a-scale_4_im_5_col.png".
inline std::optional<DatasetEntry> parse_kth_filename(const std::string& filename) {
    static const std::regex re(R"(^\d+([a-z])-scale_(\d+)_im_(\d+)(?:_[A-Za-z0-9]+)?\.[A-Za-z]+$)");
    std::smatch m;
    if (!std::regex_match(filename, m, re)) return std::nullopt;
    DatasetEntry e;
    e.sample_id = m[1].str();
    e.size_label = m[2].str();
    e.condition_id = "im_" + m[3].str();
    return e;
}

/// Builds an index with the class taken from the first-level directory name.
/// Layouts: flat, curet and umd (files anywhere below each class directory,
/// sample id = file stem) and kthtips2 (size/sample parsed from file names).
inline DatasetIndex index_dataset(const std::string& root, const std::string& layout) {
    namespace fs = std::filesystem;
    if (layout != "flat" && layout != "curet" && layout != "umd" && layout != "kthtips2")
        throw DomainError("index_dataset: unknown layout '" + layout + "'");
    if (!fs::is_directory(root)) throw IngestionError("dataset root is not a directory: " + root);
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());

    DatasetIndex idx;
    idx.layout = layout;
    std::vector<std::string> empty_classes, unparsable;
    for (const auto& dir : class_dirs) {
        const auto files = detail::sorted_files(dir, true);
        if (files.empty()) empty_classes.push_back(dir.string());
        for (const auto& f : files) {
            DatasetEntry e;
            if (layout == "kthtips2") {
                auto parsed = parse_kth_filename(f.filename().string());
                if (!parsed) {
                    unparsable.push_back(f.string());
                    continue;
                }
                e = std::move(*parsed);
            } else {
                e.sample_id = f.stem().string();
            }
            e.path = f.string();
            e.label = dir.filename().string();
            idx.entries.push_back(std::move(e));
        }
    }
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += "\n  " + x;
        return s;
    };
    if (!empty_classes.empty()) throw IngestionError("dataset has empty classes:" + join(empty_classes));
    if (!unparsable.empty()) throw IngestionError("cannot parse size/sample from:" + join(unparsable));
    if (idx.classes().size() < 2) throw IngestionError("dataset must contain at least 2 classes: " + root);
    return idx;
}

// ------------------------------------------------------------- classifiers

enum class ClassifierKind { nn, linear_svm };

inline std::string to_string(ClassifierKind k) { return k == ClassifierKind::nn ? "nn" : "svm"; }

inline ClassifierKind parse_classifier(const std::string& s) {
    if (s == "nn" || s == "nnc") return ClassifierKind::nn;
    if (s == "svm" || s == "linear_svm") return ClassifierKind::linear_svm;
    throw DomainError("unknown classifier '" + s + "' (expected nn or svm)");
}

struct SvmParams {
    double lambda = 1e-4;
    int epochs = 50;
    std::uint64_t seed = 1;
};

struct TrainedModel {
    ClassifierKind kind = ClassifierKind::nn;
    std::vector<std::string> labels;  // sorted
    std::vector<double> mean, stddev;
    // nn
    std::vector<std::vector<double>> exemplars;
    std::vector<int> exemplar_class;
    // svm: per class, dim weights followed by the bias
    std::vector<std::vector<double>> weights;

    std::size_t dim() const noexcept { return mean.size(); }
};

struct Prediction {
    std::string label;
    double score = 0.0;  // nn: distance to the nearest exemplar; svm: winning margin
};

namespace detail {

inline std::vector<double> standardize(std::span<const double> x, const TrainedModel& m) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m.mean[i]) / m.stddev[i];
    return z;
}

// Pegasos with the bias folded in as a constant regularized feature and
// projection onto the ball of radius 1/sqrt(lambda). The returned weights are
// the average iterate over the second half of the epochs.
inline std::vector<double> pegasos_binary(const std::vector<std::vector<double>>& z, const std::vector<double>& y,
                                          const SvmParams& p, std::uint64_t seed) {
    const std::size_t n = z.size(), d = z.front().size();
    std::vector<double> w(d + 1, 0.0), avg(d + 1, 0.0);
    double scale = 1.0;  // w_true = scale * w
    std::uint64_t averaged = 0;
    Uniform rnd(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const double radius = 1.0 / std::sqrt(p.lambda);
    std::uint64_t t = 0;
    for (int ep = 0; ep < p.epochs; ++ep) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rnd() * i)]);
        for (std::size_t oi : order) {
            ++t;
            const double eta = 1.0 / (p.lambda * static_cast<double>(t));
            const auto& x = z[oi];
            double dot = w[d];
            for (std::size_t k = 0; k < d; ++k) dot += w[k] * x[k];
            const double margin = y[oi] * scale * dot;
            scale *= (1.0 - eta * p.lambda);
            if (scale < 1e-9 || t == 1) {
                // t == 1 zeroes the scale exactly; re-materialize
                for (double& v : w) v *= scale;
                scale = 1.0;
            }
            if (margin < 1.0) {
                const double step = eta * y[oi] / scale;
                for (std::size_t k = 0; k < d; ++k) w[k] += step * x[k];
                w[d] += step;
            }
            double norm2 = 0.0;
            for (double v : w) norm2 += v * v;
            const double norm = scale * std::sqrt(norm2);
            if (norm > radius) scale *= radius / norm;
            if (ep >= p.epochs / 2) {
                for (std::size_t k = 0; k <= d; ++k) avg[k] += scale * w[k];
                ++averaged;
            }
        }
    }
    for (double& v : avg) v /= static_cast<double>(averaged);
    return avg;
}

}  // namespace detail

/// Fits per-dimension standardization and the chosen classifier.
/// Deterministic for fixed inputs and seed.
inline TrainedModel train(const std::vector<std::vector<double>>& descriptors, const std::vector<std::string>& labels,
                          ClassifierKind kind, const SvmParams& svm = {}) {
    detail::require(!descriptors.empty() && descriptors.size() == labels.size(), "train: descriptor/label count mismatch");
    const std::size_t d = descriptors.front().size();
    detail::require(d > 0, "train: empty descriptors");
    for (const auto& x : descriptors) detail::require(x.size() == d, "train: descriptors differ in length");
    TrainedModel m;
    m.kind = kind;
    const std::set<std::string> unique(labels.begin(), labels.end());
    m.labels.assign(unique.begin(), unique.end());
    for (const auto& l : m.labels) detail::require(!l.empty(), "train: empty class label");

    const double n = static_cast<double>(descriptors.size());
    m.mean.assign(d, 0.0);
    m.stddev.assign(d, 0.0);
    for (const auto& x : descriptors)
        for (std::size_t k = 0; k < d; ++k) m.mean[k] += x[k];
    for (double& v : m.mean) v /= n;
    for (const auto& x : descriptors)
        for (std::size_t k = 0; k < d; ++k) m.stddev[k] += (x[k] - m.mean[k]) * (x[k] - m.mean[k]);
    for (double& v : m.stddev) v = std::max(std::sqrt(v / n), 1e-12);

    std::vector<std::vector<double>> z;
    z.reserve(descriptors.size());
    for (const auto& x : descriptors) z.push_back(detail::standardize(x, m));
    std::vector<int> cls(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        cls[i] = static_cast<int>(std::lower_bound(m.labels.begin(), m.labels.end(), labels[i]) - m.labels.begin());

    if (kind == ClassifierKind::nn) {
        m.exemplars = std::move(z);
        m.exemplar_class = std::move(cls);
    } else {
        detail::require(svm.lambda > 0.0 && svm.epochs >= 1, "train: invalid SVM parameters");
        for (std::size_t c = 0; c < m.labels.size(); ++c) {
            std::vector<double> y(cls.size());
            for (std::size_t i = 0; i < cls.size(); ++i) y[i] = cls[i] == static_cast<int>(c) ? 1.0 : -1.0;
            m.weights.push_back(detail::pegasos_binary(z, y, svm, svm.seed * 1000003ULL + c));
        }
    }
    return m;
}

/// One-vs-rest margins of a linear SVM model, in label order.
inline std::vector<double> svm_margins(const TrainedModel& m, std::span<const double> x) {
    const auto z = detail::standardize(x, m);
    std::vector<double> out;
    for (const auto& w : m.weights) {
        double dot = w.back();
        for (std::size_t k = 0; k < z.size(); ++k) dot += w[k] * z[k];
        out.push_back(dot);
    }
    return out;
}

/// Ties resolve to the lexicographically smallest label.
inline Prediction predict(const TrainedModel& m, std::span<const double> x) {
    detail::require(x.size() == m.dim(), "predict: descriptor length does not match the model");
    if (m.kind == ClassifierKind::nn) {
        const auto z = detail::standardize(x, m);
        double best = std::numeric_limits<double>::infinity();
        int best_cls = -1;
        for (std::size_t i = 0; i < m.exemplars.size(); ++i) {
            double d2 = 0.0;
            const auto& e = m.exemplars[i];
            for (std::size_t k = 0; k < z.size(); ++k) d2 += (z[k] - e[k]) * (z[k] - e[k]);
            if (d2 < best || (d2 == best && m.exemplar_class[i] < best_cls)) best = d2, best_cls = m.exemplar_class[i];
        }
        return {m.labels[static_cast<std::size_t>(best_cls)], std::sqrt(best)};
    }
    const auto margins = svm_margins(m, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < margins.size(); ++c)
        if (margins[c] > margins[best]) best = c;
    return {m.labels[best], margins[best]};
}

// -- model files: "QQM1", u32 LE header length, JSON header, f64 LE payload --

inline std::string encode_model(const TrainedModel& m, const std::string& cfg_hash = {}) {
    json header{{"format", "QQM1"},
                {"kind", to_string(m.kind)},
                {"labels", m.labels},
                {"dim", m.dim()},
                {"config_hash", cfg_hash}};
    if (m.kind == ClassifierKind::nn) {
        header["exemplars"] = m.exemplars.size();
        header["exemplar_class"] = m.exemplar_class;
    }
    const std::string h = header.dump();
    std::string out = "QQM1";
    detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
    out += h;
    auto put = [&](const std::vector<double>& v) {
        for (double x : v) {
            const auto bits = std::bit_cast<std::uint64_t>(x);
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
        }
    };
    put(m.mean);
    put(m.stddev);
    for (const auto& e : m.exemplars) put(e);
    for (const auto& w : m.weights) put(w);
    return out;
}

inline TrainedModel decode_model(const std::vector<unsigned char>& b, const std::string& what = "model") {
    if (b.size() < 8 || std::memcmp(b.data(), "QQM1", 4) != 0) throw FormatError(what + ": missing QQM1 magic");
    const std::uint32_t hlen = detail::get_u32(b.data() + 4);
    if (b.size() < 8ull + hlen) throw FormatError(what + ": truncated header");
    TrainedModel m;
    std::size_t pos = 8ull + hlen;
    auto get = [&](std::size_t n) {
        if (pos + 8 * n > b.size()) throw FormatError(what + ": truncated payload");
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[pos + 8 * i + k]) << (8 * k);
            v[i] = std::bit_cast<double>(bits);
        }
        pos += 8 * n;
        return v;
    };
    try {
        const json h = json::parse(b.begin() + 8, b.begin() + 8 + hlen);
        m.kind = parse_classifier(h.at("kind").get<std::string>());
        m.labels = h.at("labels").get<std::vector<std::string>>();
        const auto d = h.at("dim").get<std::size_t>();
        m.mean = get(d);
        m.stddev = get(d);
        if (m.kind == ClassifierKind::nn) {
            const auto n = h.at("exemplars").get<std::size_t>();
            m.exemplar_class = h.at("exemplar_class").get<std::vector<int>>();
            for (std::size_t i = 0; i < n; ++i) m.exemplars.push_back(get(d));
        } else {
            for (std::size_t c = 0; c < m.labels.size(); ++c) m.weights.push_back(get(d + 1));
        }
    } catch (const json::exception& e) {
        throw FormatError(what + ": bad header: " + e.what());
    }
    if (pos != b.size()) throw FormatError(what + ": trailing bytes");
    return m;
}

inline void write_model(const std::string& path, const TrainedModel& m, const std::string& cfg_hash = {}) {
    detail::write_bytes(path, encode_model(m, cfg_hash));
}
inline TrainedModel read_model(const std::string& path) { return decode_model(detail::slurp(path), path); }

// --------------------------------------------------------------- protocols

/// Produces a descriptor for a dataset entry at a given s0 grid (variances).
using DescriptorSource = std::function<std::vector<double>(const DatasetEntry&, const std::vector<double>& s0_grid)>;

/// Loads images (or QQD1 files) and computes descriptors, memoized by
/// (path, grid). Copies share one cache; thread-safe.
class CachedDescriptorSource {
public:
    CachedDescriptorSource(NetConfig cfg, ChannelMode mode) : st_(std::make_shared<State>()) {
        st_->cfg = std::move(cfg);
        st_->mode = mode;
    }

    /// Replaces image loading, e.g. to synthesize images from locators.
    void set_loader(std::function<Image(const DatasetEntry&)> loader) { st_->loader = std::move(loader); }

    std::vector<double> operator()(const DatasetEntry& e, const std::vector<double>& grid) const {
        Key key{e.path, grid};
        {
            std::lock_guard lock(st_->mu);
            if (auto it = st_->cache.find(key); it != st_->cache.end()) return it->second;
        }
        std::vector<double> v;
        if (std::filesystem::path(e.path).extension() == ".qqd") {
            v = read_descriptor(e.path).values;
        } else {
            NetConfig c = st_->cfg;
            c.s0_list = grid;
            const Image img = st_->loader ? st_->loader(e) : load_image(e.path);
            v = assemble_descriptor(img, c, st_->mode).values;
        }
        std::lock_guard lock(st_->mu);
        return st_->cache.emplace(std::move(key), std::move(v)).first->second;
    }

    std::size_t cached() const {
        std::lock_guard lock(st_->mu);
        return st_->cache.size();
    }

private:
    using Key = std::pair<std::string, std::vector<double>>;
    struct State {
        NetConfig cfg;
        ChannelMode mode = ChannelMode::grey;
        std::function<Image(const DatasetEntry&)> loader;
        std::mutex mu;
        std::map<Key, std::vector<double>> cache;
    };
    std::shared_ptr<State> st_;
};

enum class ProtocolKind { standard, scale_matched, scale_aggregated, random_split };

inline std::string to_string(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::standard: return "standard";
        case ProtocolKind::scale_matched: return "scale_matched";
        case ProtocolKind::scale_aggregated: return "scale_aggregated";
        case ProtocolKind::random_split: return "random_split";
    }
    return "?";
}

inline ProtocolKind parse_protocol(const std::string& s) {
    for (auto k : {ProtocolKind::standard, ProtocolKind::scale_matched, ProtocolKind::scale_aggregated,
                   ProtocolKind::random_split})
        if (to_string(k) == s) return k;
    throw DomainError("unknown protocol '" + s + "'");
}

struct ProtocolSpec {
    ProtocolKind kind = ProtocolKind::standard;
    ClassifierKind classifier = ClassifierKind::linear_svm;
    SvmParams svm;
    std::uint64_t seed = 1;
    // scale_matched: relative factor S between test and training textures;
    // covariant = test grid multiplied by S, otherwise the base grid on both sides
    double S = 2.0;
    bool covariant = true;
    std::vector<std::string> train_sizes, test_sizes;  // empty = preset for S
    // scale_aggregated: grids = base grid times 2^(j/2), j < aggregation_grids
    bool aggregated = true;
    int aggregation_grids = 5;
    // random_split
    int repetitions = 10;
    int threads = 0;  // 0 = hardware concurrency
};

struct FoldResult {
    std::string name;
    std::size_t train_count = 0, test_count = 0, correct = 0;
    double accuracy = 0.0;
    json params;
};

struct ProtocolReport {
    std::string protocol;
    std::uint64_t seed = 0;
    json params;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], summed over folds
};

inline json report_to_json(const ProtocolReport& r) {
    json folds = json::array();
    for (const auto& f : r.folds)
        folds.push_back({{"name", f.name},
                         {"train", f.train_count},
                         {"test", f.test_count},
                         {"correct", f.correct},
                         {"accuracy", f.accuracy},
                         {"params", f.params}});
    return json{{"protocol", r.protocol}, {"seed", r.seed},           {"params", r.params},
                {"folds", folds},         {"mean_accuracy", r.mean_accuracy},
                {"labels", r.labels},     {"confusion", r.confusion}};
}

/// Size-label partition for the scale-matched protocol on KTH-TIPS2 style
/// size labels 2..10 (adjacent sizes differ by 2^(1/4)).
inline std::pair<std::vector<std::string>, std::vector<std::string>> scale_matched_preset(double S) {
    auto near = [&](double v) { return std::abs(S - v) < 1e-6; };
    if (near(std::sqrt(2.0))) return {{"5", "6", "9", "10"}, {"3", "4", "7", "8"}};
    if (near(2.0)) return {{"7", "8", "9", "10"}, {"3", "4", "5", "6"}};
    if (near(2.0 * std::sqrt(2.0))) return {{"8", "9", "10"}, {"2", "3", "4"}};
    if (near(4.0)) return {{"10"}, {"2"}};
    throw DomainError("scale_matched: no size preset for S; pass train/test sizes explicitly");
}

namespace detail {

inline std::vector<double> scale_grid(const std::vector<double>& s0_list, double sigma_factor) {
    std::vector<double> g;
    for (double s : s0_list) g.push_back(s * sigma_factor * sigma_factor);
    return g;
}

struct Split {
    std::string name;
    std::vector<std::size_t> train, test;
    std::vector<std::vector<double>> train_grids;  // each training entry is described at every grid
    std::vector<double> test_grid;
    json params;
};

inline FoldResult evaluate_split(const DatasetIndex& idx, const Split& sp, const ProtocolSpec& spec,
                                 DescriptorSource& source, const std::vector<std::string>& labels,
                                 std::vector<std::vector<std::size_t>>& confusion) {
    require(!sp.train.empty() && !sp.test.empty(), "protocol: empty training or test partition in " + sp.name);
    // descriptors are computed in parallel; order is fixed by job index
    struct Job { std::size_t entry; const std::vector<double>* grid; };
    std::vector<Job> jobs;
    for (const auto& g : sp.train_grids)
        for (std::size_t i : sp.train) jobs.push_back({i, &g});
    for (std::size_t i : sp.test) jobs.push_back({i, &sp.test_grid});
    std::vector<std::vector<double>> desc(jobs.size());
    parallel_for(jobs.size(), spec.threads, [&](std::size_t j) { desc[j] = source(idx.entries[jobs[j].entry], *jobs[j].grid); });

    const std::size_t ntrain = sp.train.size() * sp.train_grids.size();
    std::vector<std::vector<double>> X(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(ntrain));
    std::vector<std::string> y;
    for (std::size_t g = 0; g < sp.train_grids.size(); ++g)
        for (std::size_t i : sp.train) y.push_back(idx.entries[i].label);
    std::set<std::string> train_classes(y.begin(), y.end());
    require(train_classes.size() >= 2, "protocol: fewer than 2 classes in training partition " + sp.name);
    const TrainedModel model = train(X, y, spec.classifier, spec.svm);

    FoldResult fr;
    fr.name = sp.name;
    fr.params = sp.params;
    fr.train_count = ntrain;
    fr.test_count = sp.test.size();
    for (std::size_t t = 0; t < sp.test.size(); ++t) {
        const auto& truth = idx.entries[sp.test[t]].label;
        const auto pred = predict(model, desc[ntrain + t]);
        if (pred.label == truth) ++fr.correct;
        const auto ti = std::lower_bound(labels.begin(), labels.end(), truth) - labels.begin();
        const auto pi = std::lower_bound(labels.begin(), labels.end(), pred.label) - labels.begin();
        ++confusion[static_cast<std::size_t>(ti)][static_cast<std::size_t>(pi)];
    }
    fr.accuracy = static_cast<double>(fr.correct) / static_cast<double>(fr.test_count);
    return fr;
}

inline double size_value(const std::string& s) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("protocol: size label '" + s + "' is not an integer");
    }
}

}  // namespace detail

/// Runs a benchmark protocol. The report is a deterministic function of the
/// index, spec, configuration and descriptor source.
inline ProtocolReport run_protocol(const DatasetIndex& idx, const ProtocolSpec& spec, const NetConfig& cfg,
                                   DescriptorSource source) {
    cfg.validate();
    const auto labels = idx.classes();
    detail::require(labels.size() >= 2, "protocol: dataset must contain at least 2 classes");

    ProtocolReport rep;
    rep.protocol = to_string(spec.kind);
    rep.seed = spec.seed;
    rep.labels = labels;
    rep.confusion.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
    rep.params = {{"classifier", to_string(spec.classifier)},
                  {"config_hash", config_hash(cfg)},
                  {"s0_list", cfg.s0_list},
                  {"svm", {{"lambda", spec.svm.lambda}, {"epochs", spec.svm.epochs}, {"seed", spec.svm.seed}}}};

    std::vector<detail::Split> splits;
    const auto& E = idx.entries;
    auto require_sizes = [&] {
        for (const auto& e : E)
            detail::require(e.size_label.has_value(), "protocol " + rep.protocol + " needs size labels (missing for " + e.path + ")");
    };

    switch (spec.kind) {
        case ProtocolKind::standard: {
            std::map<std::string, std::vector<std::string>> samples;
            for (const auto& e : E) {
                detail::require(!e.sample_id.empty(), "standard protocol needs sample ids (missing for " + e.path + ")");
                auto& v = samples[e.label];
                if (std::find(v.begin(), v.end(), e.sample_id) == v.end()) v.push_back(e.sample_id);
            }
            std::size_t folds = 0;
            for (auto& [_, v] : samples) {
                std::sort(v.begin(), v.end());
                if (folds == 0) folds = v.size();
                detail::require(v.size() == folds, "standard protocol: classes have differing sample counts");
            }
            detail::require(folds >= 2, "standard protocol: need at least 2 samples per class");
            for (std::size_t f = 0; f < folds; ++f) {
                detail::Split sp;
                sp.name = "fold" + std::to_string(f);
                for (std::size_t i = 0; i < E.size(); ++i) {
                    const bool is_test = samples[E[i].label][f] == E[i].sample_id;
                    (is_test ? sp.test : sp.train).push_back(i);
                }
                sp.train_grids = {cfg.s0_list};
                sp.test_grid = cfg.s0_list;
                sp.params = {{"test_sample_index", f}};
                splits.push_back(std::move(sp));
            }
            break;
        }
        case ProtocolKind::scale_matched: {
            require_sizes();
            auto [tr, te] = spec.train_sizes.empty() ? scale_matched_preset(spec.S)
                                                     : std::make_pair(spec.train_sizes, spec.test_sizes);
            detail::require(!tr.empty() && !te.empty(), "scale_matched: train and test sizes must be non-empty");
            detail::Split sp;
            sp.name = "S=" + std::to_string(spec.S);
            for (std::size_t i = 0; i < E.size(); ++i) {
                if (std::find(tr.begin(), tr.end(), *E[i].size_label) != tr.end()) sp.train.push_back(i);
                else if (std::find(te.begin(), te.end(), *E[i].size_label) != te.end()) sp.test.push_back(i);
            }
            sp.train_grids = {cfg.s0_list};
            sp.test_grid = spec.covariant ? detail::scale_grid(cfg.s0_list, spec.S) : cfg.s0_list;
            sp.params = {{"S", spec.S}, {"covariant", spec.covariant}, {"train_sizes", tr}, {"test_sizes", te},
                         {"test_grid", sp.test_grid}};
            splits.push_back(std::move(sp));
            break;
        }
        case ProtocolKind::scale_aggregated: {
            require_sizes();
            const std::vector<std::string> tr = spec.train_sizes.empty() ? std::vector<std::string>{"2"} : spec.train_sizes;
            std::vector<std::string> te = spec.test_sizes;
            if (te.empty())
                for (int s = 3; s <= 10; ++s) te.push_back(std::to_string(s));
            detail::require(tr.size() == 1, "scale_aggregated: exactly one training size expected");
            std::vector<std::vector<double>> grids{cfg.s0_list};
            if (spec.aggregated)
                for (int j = 1; j < spec.aggregation_grids; ++j) grids.push_back(detail::scale_grid(cfg.s0_list, std::pow(2.0, 0.5 * j)));
            std::vector<std::size_t> train;
            for (std::size_t i = 0; i < E.size(); ++i)
                if (*E[i].size_label == tr[0]) train.push_back(i);
            for (const auto& size : te) {
                detail::Split sp;
                const double S = std::pow(2.0, (detail::size_value(size) - detail::size_value(tr[0])) / 4.0);
                sp.name = "size=" + size;
                sp.train = train;
                for (std::size_t i = 0; i < E.size(); ++i)
                    if (*E[i].size_label == size) sp.test.push_back(i);
                sp.train_grids = grids;
                sp.test_grid = cfg.s0_list;
                sp.params = {{"S", S}, {"aggregated", spec.aggregated}, {"train_size", tr[0]}, {"test_size", size},
                             {"grids", grids.size()}};
                splits.push_back(std::move(sp));
            }
            break;
        }
        case ProtocolKind::random_split: {
            detail::require(spec.repetitions >= 1, "random_split: repetitions must be >= 1");
            std::map<std::string, std::vector<std::size_t>> by_class;
            for (std::size_t i = 0; i < E.size(); ++i) by_class[E[i].label].push_back(i);
            detail::Uniform rnd(spec.seed);
            for (int r = 0; r < spec.repetitions; ++r) {
                detail::Split sp;
                sp.name = "rep" + std::to_string(r);
                for (auto& [_, members] : by_class) {
                    detail::require(members.size() >= 2, "random_split: every class needs at least 2 entries");
                    std::vector<std::size_t> perm = members;
                    for (std::size_t i = perm.size(); i > 1; --i)
                        std::swap(perm[i - 1], perm[static_cast<std::size_t>(rnd() * i)]);
                    const std::size_t half = perm.size() / 2;
                    sp.train.insert(sp.train.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
                    sp.test.insert(sp.test.end(), perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
                }
                std::sort(sp.train.begin(), sp.train.end());
                std::sort(sp.test.begin(), sp.test.end());
                sp.train_grids = {cfg.s0_list};
                sp.test_grid = cfg.s0_list;
                splits.push_back(std::move(sp));
            }
            break;
        }
    }

    double acc = 0.0;
    for (const auto& sp : splits) {
        rep.folds.push_back(detail::evaluate_split(idx, sp, spec, source, labels, rep.confusion));
        acc += rep.folds.back().accuracy;
    }
    rep.mean_accuracy = acc / static_cast<double>(rep.folds.size());
    return rep;
}

}  // namespace qqnet
