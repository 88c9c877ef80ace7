#include "imls/nn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "imls/errors.hpp"
#include "imls/hash.hpp"
#include "imls/image_io.hpp"
#include "imls/log.hpp"
#include "imls/nn/checkpoint.hpp"
#include "imls/nn/compaction_ops.hpp"
#include "imls/nn/tensor_io.hpp"
#include "imls/plot.hpp"

namespace imls {

namespace fs = std::filesystem;
namespace nnf = torch::nn::functional;
using Clock = std::chrono::steady_clock;

namespace {

ViewParams orbit_view(const Vec3& dir, double radius, const Vec3& up_hint) {
    ViewParams v;
    v.eye = dir * radius;
    v.look_at = {0, 0, 0};
    const Vec3 f = normalized(v.look_at - v.eye);
    Vec3 up = up_hint - f * dot(up_hint, f);
    if (length(up) < 1e-3) {
        const Vec3 alt{0, 0, 1};
        up = alt - f * dot(alt, f);
    }
    v.up = normalized(up);
    return v;
}

std::string index_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu.png", i);
    return buf;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw FormatError("cannot write " + path.string());
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

torch::Tensor index_tensor(const std::vector<int>& idx, std::size_t begin, std::size_t end) {
    auto t = torch::empty({static_cast<std::int64_t>(end - begin)}, torch::kInt64);
    auto* p = t.data_ptr<std::int64_t>();
    for (std::size_t k = begin; k < end; ++k) p[k - begin] = idx[k];
    return t;
}

/// Shuffled mini-batches over `idx`, reshuffled per call with a per-epoch seed.
std::vector<torch::Tensor> batches(std::vector<int> idx, int batch_size, std::uint64_t seed, bool shuffle) {
    if (shuffle) {
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
    }
    std::vector<torch::Tensor> out;
    for (std::size_t b = 0; b < idx.size(); b += batch_size)
        out.push_back(index_tensor(idx, b, std::min(idx.size(), b + batch_size)));
    return out;
}

struct CorpusTensors {
    torch::Tensor c;   // N x 3 x n x n
    torch::Tensor fr;  // N x 3 x m x m
    explicit CorpusTensors(const Corpus& corpus) : c(stack_images(corpus.c)), fr(stack_images(corpus.fr)) {}
};

void apply_threads(const TrainOptions& opts) {
    if (opts.threads > 0) torch::set_num_threads(opts.threads);
}

void check_finite(double loss, TrainingReport& report, int epoch) {
    if (!std::isfinite(loss)) {
        report.diverged = true;
        report.warnings.push_back("non-finite training loss at epoch " + std::to_string(epoch));
    }
}

}  // namespace

std::vector<ViewParams> sample_views(int count, double radius_min, double radius_max, std::uint64_t seed,
                                     double up_jitter) {
    if (count < 1) throw ParameterError("sample_views: count must be >= 1");
    if (!(radius_min > 0.0) || radius_max < radius_min) throw ParameterError("sample_views: bad radius range");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> radius(radius_min, radius_max);
    std::vector<ViewParams> views;
    views.reserve(count);
    while (static_cast<int>(views.size()) < count) {
        const Vec3 g{gauss(rng), gauss(rng), gauss(rng)};
        if (length(g) < 1e-9) continue;
        const double r = radius(rng);
        const Vec3 hint{up_jitter * gauss(rng), 1.0 + up_jitter * gauss(rng), up_jitter * gauss(rng)};
        views.push_back(orbit_view(normalized(g), r, hint));
    }
    return views;
}

std::vector<ViewParams> exploration_trajectory(int count, double radius_min, double radius_max, std::uint64_t seed) {
    if (count < 1) throw ParameterError("exploration_trajectory: count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    const double az0 = phase(rng), el_phase = phase(rng), r_phase = phase(rng);
    std::vector<ViewParams> views;
    views.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double t = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
        const double az = az0 + 2.0 * M_PI * 1.25 * t;
        const double el = 0.6 * std::sin(2.0 * M_PI * 1.5 * t + el_phase);
        const double r = radius_min + (radius_max - radius_min) * (0.5 + 0.5 * std::sin(2.0 * M_PI * t + r_phase));
        const Vec3 dir{std::cos(el) * std::cos(az), std::sin(el), std::cos(el) * std::sin(az)};
        views.push_back(orbit_view(dir, r, {0, 1, 0}));
    }
    return views;
}

void quantize8(Image& img) {
    for (float& v : img.data) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
}

void split_indices(int count, std::uint64_t seed, std::vector<int>& train, std::vector<int>& val) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n_val = static_cast<int>(std::lround(count / 10.0));
    val.assign(idx.begin(), idx.begin() + n_val);
    train.assign(idx.begin() + n_val, idx.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
}

Corpus build_corpus(const Volume& volume, const TransferFunction& tf, const RenderConfig& cfg,
                    const std::vector<ViewParams>& views, const SamplingPattern& pattern, const CompactionMap& map,
                    std::uint64_t split_seed) {
    if (pattern.resolution() != cfg.resolution || map.full_resolution != cfg.resolution)
        throw ParameterError("build_corpus: pattern, map and render resolution disagree");
    if (map.pad_start() != pattern.count()) throw CapacityError("build_corpus: compaction map does not match pattern");
    Corpus corpus;
    corpus.views = views;
    corpus.pattern = pattern;
    corpus.map = map;
    corpus.fr.reserve(views.size());
    corpus.c.reserve(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
        try {
            Image fr = render_image_parallel(volume, tf, cfg, views[i]).rgb;
            quantize8(fr);
            corpus.c.push_back(compact(map, fr));
            corpus.fr.push_back(std::move(fr));
        } catch (const Error& e) {
            throw Error("view " + std::to_string(i) + ": " + e.what());
        }
    }
    split_indices(static_cast<int>(views.size()), split_seed, corpus.train, corpus.val);
    return corpus;
}

std::uint64_t Corpus::content_hash() const {
    Fnv1a h;
    for (const auto& v : views) {
        const auto a = v.to_array();
        h.update(a.data(), sizeof(float) * a.size());
    }
    for (const auto& im : fr) h.update(std::span<const float>(im.data));
    for (const auto& im : c) h.update(std::span<const float>(im.data));
    h.update(std::span<const int>(train));
    h.update(std::span<const int>(val));
    h.update(std::span<const std::uint32_t>(map.source));
    return h.digest();
}

void Corpus::save(const fs::path& dir) const {
    fs::create_directories(dir / "fr");
    fs::create_directories(dir / "c");
    nlohmann::json jviews = nlohmann::json::array();
    for (const auto& v : views) jviews.push_back(v.to_array());
    write_json(dir / "views.json", jviews);
    for (std::size_t i = 0; i < size(); ++i) {
        write_png(fr[i], dir / "fr" / index_name(i));
        write_png(c[i], dir / "c" / index_name(i));
    }
    write_json(dir / "split.json", {{"train", train}, {"val", val}});
    save_pattern(pattern, dir / "pattern.png");
    map.save(dir / "map.bin");
    write_json(dir / "index.json", {{"count", size()},
                                    {"m", map.full_resolution},
                                    {"n", map.compact_resolution},
                                    {"content_hash", std::to_string(content_hash())}});
}

Corpus Corpus::load(const fs::path& dir) {
    const auto index = read_json(dir / "index.json");
    Corpus corpus;
    for (const auto& a : read_json(dir / "views.json")) corpus.views.push_back(ViewParams::from_array(a.get<std::array<float, 9>>()));
    const std::size_t count = index.at("count").get<std::size_t>();
    if (corpus.views.size() != count) throw FormatError("corpus view count disagrees with index.json");
    for (std::size_t i = 0; i < count; ++i) {
        corpus.fr.push_back(read_png(dir / "fr" / index_name(i)));
        corpus.c.push_back(read_png(dir / "c" / index_name(i)));
    }
    const auto split = read_json(dir / "split.json");
    corpus.train = split.at("train").get<std::vector<int>>();
    corpus.val = split.at("val").get<std::vector<int>>();
    corpus.pattern = load_pattern(dir / "pattern.png");
    corpus.map = CompactionMap::load(dir / "map.bin");
    if (std::to_string(corpus.content_hash()) != index.at("content_hash").get<std::string>())
        throw FormatError("corpus content hash mismatch in " + dir.string());
    return corpus;
}

void to_json(nlohmann::json& j, const TrainOptions& o) {
    j = {{"batch_size", o.batch_size}, {"lr", o.lr},       {"patience", o.patience}, {"max_epochs", o.max_epochs},
         {"min_delta", o.min_delta},   {"seed", o.seed},   {"threads", o.threads}};
}

void from_json(const nlohmann::json& j, TrainOptions& o) {
    o.batch_size = j.value("batch_size", o.batch_size);
    o.lr = j.value("lr", o.lr);
    o.patience = j.value("patience", o.patience);
    o.max_epochs = j.value("max_epochs", o.max_epochs);
    o.min_delta = j.value("min_delta", o.min_delta);
    o.seed = j.value("seed", o.seed);
    o.threads = j.value("threads", o.threads);
    if (o.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (o.lr < 0.0) throw ConfigError("lr must be >= 0");
    if (o.patience < 1) throw ConfigError("patience must be >= 1");
    if (o.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

nlohmann::json TrainingReport::to_json() const {
    return {{"regime", regime},     {"epochs", epochs},
            {"seconds", seconds},   {"hours", seconds / 3600.0},
            {"best_val", best_val}, {"best_epoch", best_epoch},
            {"train_curve", train_curve}, {"val_curve", val_curve},
            {"metrics", metrics},   {"config", config},
            {"warnings", warnings}, {"diverged", diverged}};
}

void TrainingReport::save(const fs::path& dir, const std::string& stem) const {
    fs::create_directories(dir);
    write_json(dir / (stem + ".json"), to_json());
    write_png(line_chart({{train_curve, palette(0)}, {val_curve, palette(1)}}), dir / (stem + "_loss.png"));
}

EarlyStopper::EarlyStopper(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw ParameterError("patience must be >= 1");
}

bool EarlyStopper::update(double val) {
    ++epoch_;
    if (val < best_ - min_delta_) {
        best_ = val;
        best_epoch_ = epoch_;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

torch::Tensor recnn_input(const RecNN& net, const CompactionMap& map, const torch::Tensor& c_batch) {
    return net->config().kind == RecNNKind::SuperRes ? c_batch : decompact_tensor(map, c_batch);
}

torch::Tensor recnn_mask(const RecNN& net, const SamplingPattern& pattern, std::int64_t batch) {
    if (net->config().kind == RecNNKind::SuperRes) return {};
    return grid_to_tensor(pattern.grid).unsqueeze(0).expand({batch, 1, -1, -1});
}

TrainedRecNN train_recnn(const Corpus& corpus, const RecNNConfig& cfg, const TrainOptions& opts) {
    apply_threads(opts);
    torch::manual_seed(opts.seed);
    TrainedRecNN out{RecNN(cfg), {}};
    auto& net = out.net;
    auto& report = out.report;
    report.regime = "recnn";
    report.config = {{"recnn", cfg}, {"train", opts}};
    const CorpusTensors data(corpus);
    torch::optim::Adam optim(net->parameters(), torch::optim::AdamOptions(opts.lr));
    EarlyStopper stopper(opts.patience, opts.min_delta);
    std::string best_state = snapshot_state(*net);
    const auto t0 = Clock::now();
    for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        net->train();
        double sum = 0;
        std::size_t seen = 0;
        for (const auto& idx : batches(corpus.train, opts.batch_size, opts.seed * 1000003 + epoch, true)) {
            auto c = data.c.index_select(0, idx);
            auto fr = data.fr.index_select(0, idx);
            auto pred = net->forward(recnn_input(net, corpus.map, c), recnn_mask(net, corpus.pattern, c.size(0)));
            auto loss = nnf::mse_loss(pred, fr);
            optim.zero_grad();
            loss.backward();
            optim.step();
            sum += loss.item<double>() * idx.size(0);
            seen += idx.size(0);
        }
        const double train_loss = sum / std::max<std::size_t>(1, seen);
        check_finite(train_loss, report, epoch);
        if (report.diverged) break;

        net->eval();
        double vsum = 0;
        {
            torch::NoGradGuard guard;
            for (const auto& idx : batches(corpus.val, opts.batch_size, 0, false)) {
                auto c = data.c.index_select(0, idx);
                auto pred = net->forward(recnn_input(net, corpus.map, c), recnn_mask(net, corpus.pattern, c.size(0)));
                vsum += nnf::mse_loss(pred, data.fr.index_select(0, idx)).item<double>() * idx.size(0);
            }
        }
        const double val_loss = vsum / std::max<std::size_t>(1, corpus.val.size());
        report.train_curve.push_back(train_loss);
        report.val_curve.push_back(val_loss);
        report.epochs = epoch;
        if (stopper.update(val_loss)) best_state = snapshot_state(*net);
        log_info(strprintf("recnn epoch %d train %.6f val %.6f", epoch, train_loss, val_loss));
        if (opts.on_epoch) opts.on_epoch(epoch, train_loss, val_loss);
        if (stopper.stop()) break;
    }
    restore_state(*net, best_state);
    net->eval();
    report.best_val = stopper.best();
    report.best_epoch = stopper.best_epoch();
    report.seconds = seconds_since(t0);
    return out;
}

std::string to_string(IMLMode m) { return m == IMLMode::Standalone ? "standalone" : "end_to_end"; }

IMLMode parse_iml_mode(const std::string& s) {
    if (s == "standalone") return IMLMode::Standalone;
    if (s == "end_to_end") return IMLMode::EndToEnd;
    throw ConfigError("unknown IML training mode '" + s + "'");
}

TrainedIML train_iml(const Corpus& corpus, const IMLConfig& cfg, const TrainOptions& opts, IMLMode mode,
                     RecNN* recnn) {
    if (mode == IMLMode::EndToEnd && (recnn == nullptr || !*recnn))
        throw ConfigError("end-to-end IML training needs a RecNN");
    if (cfg.resolution != corpus.map.compact_resolution)
        throw ConfigError("IML resolution " + std::to_string(cfg.resolution) + " differs from the corpus C-image size");
    apply_threads(opts);
    torch::manual_seed(opts.seed);
    TrainedIML out{IMLNet(cfg), {}};
    auto& net = out.net;
    auto& report = out.report;
    report.regime = "iml_" + to_string(mode);
    report.config = {{"iml", cfg}, {"train", opts}, {"mode", to_string(mode)}};
    const CorpusTensors data(corpus);
    const auto valid = valid_slot_tensor(corpus.map);

    auto params = net->parameters();
    if (mode == IMLMode::EndToEnd)
        for (auto& p : (*recnn)->parameters()) params.push_back(p);
    torch::optim::Adam optim(params, torch::optim::AdamOptions(opts.lr));

    auto full_prediction = [&](const torch::Tensor& recon_c) {
        return (*recnn)->forward(recnn_input(*recnn, corpus.map, recon_c),
                                 recnn_mask(*recnn, corpus.pattern, recon_c.size(0)));
    };

    EarlyStopper stopper(opts.patience, opts.min_delta);
    std::string best_state = snapshot_state(*net);
    std::string best_recnn = mode == IMLMode::EndToEnd ? snapshot_state(**recnn) : std::string();
    std::vector<double> val_ipr, val_full_mse, val_compact_mse;
    const int n = cfg.resolution;
    std::uint64_t step = 0;
    const auto t0 = Clock::now();
    for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        net->train();
        if (mode == IMLMode::EndToEnd) (*recnn)->train();
        double sum = 0;
        std::size_t seen = 0;
        for (const auto& idx : batches(corpus.train, opts.batch_size, opts.seed * 1000003 + epoch, true)) {
            // Fresh toroidal shift of the plastic pattern per batch.
            const auto p = pattern_tensor(plastic_pattern(n, cranley_patterson_offset(opts.seed, ++step)));
            auto c = data.c.index_select(0, idx);
            auto o = net->forward(c, p, MaskMode::Soft, valid);
            torch::Tensor loss;
            if (mode == IMLMode::Standalone)
                loss = compaction_loss(o.reconstruction, c);
            else
                loss = end_to_end_loss(o.reconstruction, c, full_prediction(o.reconstruction),
                                       data.fr.index_select(0, idx));
            optim.zero_grad();
            loss.backward();
            optim.step();
            sum += loss.item<double>() * idx.size(0);
            seen += idx.size(0);
        }
        const double train_loss = sum / std::max<std::size_t>(1, seen);
        check_finite(train_loss, report, epoch);
        if (report.diverged) break;

        net->eval();
        if (mode == IMLMode::EndToEnd) (*recnn)->eval();
        double vsum = 0, ones = 0, full_sum = 0, compact_sum = 0;
        {
            torch::NoGradGuard guard;
            for (const auto& idx : batches(corpus.val, opts.batch_size, 0, false)) {
                auto c = data.c.index_select(0, idx);
                auto o = net->forward(c, net->inference_pattern(), MaskMode::Hard, valid);
                const double cm = compaction_loss(o.reconstruction, c).item<double>();
                compact_sum += cm * idx.size(0);
                ones += o.im.sum().item<double>();
                if (mode == IMLMode::Standalone) {
                    vsum += cm * idx.size(0);
                } else {
                    auto fr = data.fr.index_select(0, idx);
                    auto full = full_prediction(o.reconstruction);
                    vsum += end_to_end_loss(o.reconstruction, c, full, fr).item<double>() * idx.size(0);
                    full_sum += nnf::mse_loss(full, fr).item<double>() * idx.size(0);
                }
            }
        }
        const double nv = std::max<std::size_t>(1, corpus.val.size());
        const double val_loss = vsum / nv;
        val_ipr.push_back(ones / (nv * n * n));
        val_compact_mse.push_back(compact_sum / nv);
        if (mode == IMLMode::EndToEnd) val_full_mse.push_back(full_sum / nv);
        report.train_curve.push_back(train_loss);
        report.val_curve.push_back(val_loss);
        report.epochs = epoch;
        if (stopper.update(val_loss)) {
            best_state = snapshot_state(*net);
            if (mode == IMLMode::EndToEnd) best_recnn = snapshot_state(**recnn);
        }
        log_info(strprintf("iml[%s u=%.2f] epoch %d train %.6f val %.6f ipr %.3f", to_string(mode).c_str(),
                           cfg.norm.u, epoch, train_loss, val_loss, val_ipr.back()));
        if (opts.on_epoch) opts.on_epoch(epoch, train_loss, val_loss);
        if (stopper.stop()) break;
    }
    restore_state(*net, best_state);
    net->eval();
    if (mode == IMLMode::EndToEnd) {
        restore_state(**recnn, best_recnn);
        (*recnn)->eval();
    }
    report.best_val = stopper.best();
    report.best_epoch = stopper.best_epoch();
    report.seconds = seconds_since(t0);
    report.metrics["val_ipr"] = val_ipr;
    report.metrics["val_compaction_mse"] = val_compact_mse;
    if (mode == IMLMode::EndToEnd) report.metrics["val_full_mse"] = val_full_mse;
    return out;
}

std::vector<BoolGrid> ims_labels(IMLNet& iml, const Corpus& corpus) {
    const auto valid = valid_slot_tensor(corpus.map);
    const auto c_all = stack_images(corpus.c);
    std::vector<BoolGrid> labels;
    labels.reserve(corpus.size());
    for (std::int64_t b = 0; b < c_all.size(0); b += 16) {
        auto o = iml->infer(c_all.slice(0, b, std::min<std::int64_t>(c_all.size(0), b + 16)), valid);
        for (std::int64_t k = 0; k < o.im.size(0); ++k) labels.push_back(tensor_to_grid(o.im[k]));
    }
    return labels;
}

void save_label_set(const fs::path& dir, const std::vector<ViewParams>& views, const std::vector<BoolGrid>& labels) {
    if (views.size() != labels.size()) throw ParameterError("save_label_set: view and label counts differ");
    fs::create_directories(dir / "masks");
    nlohmann::json index = {{"views", nlohmann::json::array()}, {"masks", nlohmann::json::array()}};
    for (std::size_t i = 0; i < views.size(); ++i) {
        write_png(grid_to_image(labels[i]), dir / "masks" / index_name(i));
        index["views"].push_back(views[i].to_array());
        index["masks"].push_back("masks/" + index_name(i));
    }
    write_json(dir / "index.json", index);
}

void load_label_set(const fs::path& dir, std::vector<ViewParams>& views, std::vector<BoolGrid>& labels) {
    const auto index = read_json(dir / "index.json");
    views.clear();
    labels.clear();
    for (const auto& a : index.at("views")) views.push_back(ViewParams::from_array(a.get<std::array<float, 9>>()));
    for (const auto& m : index.at("masks")) {
        const Image img = read_png(dir / m.get<std::string>());
        BoolGrid g(img.width);
        for (std::size_t k = 0; k < g.cells.size(); ++k) g.cells[k] = img.data[k * img.channels] > 0.5f;
        labels.push_back(std::move(g));
    }
    if (views.size() != labels.size()) throw FormatError("label set index is inconsistent");
}

namespace {

torch::Tensor label_tensor(const std::vector<BoolGrid>& labels) {
    std::vector<torch::Tensor> ts;
    ts.reserve(labels.size());
    for (const auto& g : labels) ts.push_back(grid_to_tensor(g));
    return torch::stack(ts);
}

double batch_iou(const torch::Tensor& pred_bin, const torch::Tensor& label) {
    // Per-sample IoU, empty-vs-empty counts as 1.
    auto inter = (pred_bin * label).flatten(1).sum(1);
    auto uni = ((pred_bin + label) > 0).to(torch::kFloat32).flatten(1).sum(1);
    auto iou = torch::where(uni > 0, inter / uni.clamp_min(1), torch::ones_like(uni));
    return iou.sum().item<double>();
}

}  // namespace

TrainedIMS train_ims(const IMSData& data, const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg,
                     FeatureExtractor& extractor, const TrainOptions& opts, bool adversarial) {
    if (data.views.size() != data.labels.size()) throw ParameterError("train_ims: view and label counts differ");
    if (gcfg.resolution() != dcfg.resolution || gcfg.resolution() != data.valid.size)
        throw ConfigError("generator, discriminator and label resolutions disagree");
    apply_threads(opts);
    torch::manual_seed(opts.seed);
    TrainedIMS out{Generator(gcfg), Discriminator(dcfg), {}};
    auto& gen = out.generator;
    auto& disc = out.discriminator;
    auto& report = out.report;
    report.regime = adversarial ? "ims_per_adv" : "ims_per";
    report.config = {{"generator", gcfg}, {"discriminator", dcfg}, {"train", opts}, {"adversarial", adversarial},
                     {"extractor", extractor.name()}};

    const auto views = view_tensor(data.views, gcfg.orbit_radius);
    const auto labels01 = label_tensor(data.labels);
    const auto labels = scale_label(labels01);
    const auto valid = grid_to_tensor(data.valid).unsqueeze(0);
    torch::optim::Adam opt_g(gen->parameters(), torch::optim::AdamOptions(opts.lr));
    torch::optim::Adam opt_d(disc->parameters(), torch::optim::AdamOptions(opts.lr));

    EarlyStopper stopper(opts.patience, opts.min_delta);
    std::string best_state = snapshot_state(*gen);
    std::vector<double> d_curve, adv_curve, iou_curve;
    const auto t0 = Clock::now();
    for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        gen->train();
        disc->train();
        double per_sum = 0, d_sum = 0, adv_sum = 0;
        std::size_t seen = 0;
        for (const auto& idx : batches(data.train, opts.batch_size, opts.seed * 1000003 + epoch, true)) {
            auto v = views.index_select(0, idx);
            auto real = labels.index_select(0, idx);
            if (adversarial) {
                auto fake = gen->forward(v).detach();
                auto gl = gan_losses(disc->forward(real), disc->forward(fake));
                opt_d.zero_grad();
                gl.discriminator.backward();
                opt_d.step();
                d_sum += gl.discriminator.item<double>() * idx.size(0);
            }
            auto fake = gen->forward(v);
            auto per = perceptual_loss(extractor, fake, real);
            auto loss = kPerceptualWeight * per;
            if (adversarial) {
                auto adv = -torch::log(disc->forward(fake).clamp(1e-7, 1.0 - 1e-7)).mean();
                loss = loss + kAdversarialWeight * adv;
                adv_sum += adv.item<double>() * idx.size(0);
            }
            opt_g.zero_grad();
            loss.backward();
            opt_g.step();
            per_sum += per.item<double>() * idx.size(0);
            seen += idx.size(0);
        }
        const double train_loss = per_sum / std::max<std::size_t>(1, seen);
        check_finite(train_loss, report, epoch);
        if (report.diverged) break;

        gen->eval();
        double vsum = 0, iou_sum = 0;
        {
            torch::NoGradGuard guard;
            for (const auto& idx : batches(data.val, opts.batch_size, 0, false)) {
                auto pred = gen->forward(views.index_select(0, idx));
                vsum += perceptual_loss(extractor, pred, labels.index_select(0, idx)).item<double>() * idx.size(0);
                iou_sum += batch_iou(binarize_im(pred, valid), labels01.index_select(0, idx));
            }
        }
        const double nv = std::max<std::size_t>(1, data.val.size());
        const double val_loss = vsum / nv;
        report.train_curve.push_back(train_loss);
        report.val_curve.push_back(val_loss);
        iou_curve.push_back(iou_sum / nv);
        d_curve.push_back(d_sum / std::max<std::size_t>(1, seen));
        adv_curve.push_back(adv_sum / std::max<std::size_t>(1, seen));
        report.epochs = epoch;
        if (stopper.update(val_loss)) best_state = snapshot_state(*gen);
        if (epoch % 10 == 1 || stopper.stop())
            log_info(strprintf("%s epoch %d per %.5f val %.5f iou %.3f", report.regime.c_str(), epoch, train_loss,
                               val_loss, iou_curve.back()));
        if (opts.on_epoch) opts.on_epoch(epoch, train_loss, val_loss);
        if (stopper.stop()) break;
    }
    restore_state(*gen, best_state);
    gen->eval();
    disc->eval();
    report.best_val = stopper.best();
    report.best_epoch = stopper.best_epoch();
    report.seconds = seconds_since(t0);
    report.metrics["val_iou"] = iou_curve;
    if (adversarial) {
        report.metrics["discriminator_loss"] = d_curve;
        report.metrics["generator_adv_loss"] = adv_curve;
        torch::NoGradGuard guard;
        const auto tr = index_tensor(data.train, 0, data.train.size());
        auto pr = disc->forward(labels.index_select(0, tr));
        auto pf = disc->forward(gen->forward(views.index_select(0, tr)));
        std::vector<double> pos(pr.data_ptr<float>(), pr.data_ptr<float>() + pr.numel());
        std::vector<double> neg(pf.data_ptr<float>(), pf.data_ptr<float>() + pf.numel());
        report.metrics["discriminator_auc"] = auc(pos, neg);
    }
    std::vector<ViewParams> probe(data.views.begin(), data.views.begin() + std::min<std::size_t>(32, data.views.size()));
    const double variance = output_variance(gen, probe, gcfg.orbit_radius);
    report.metrics["output_variance"] = variance;
    if (variance < 1e-6) report.warnings.push_back("mode collapse: generator output variance across views < 1e-6");
    return out;
}

double output_variance(Generator& gen, const std::vector<ViewParams>& views, double orbit_radius) {
    if (views.size() < 2) return 0.0;
    torch::NoGradGuard guard;
    auto out = gen->forward(view_tensor(views, orbit_radius));
    return out.var(0, /*unbiased=*/false).mean().item<double>();
}

double auc(const std::vector<double>& positives, const std::vector<double>& negatives) {
    if (positives.empty() || negatives.empty()) throw ParameterError("auc needs both classes");
    double wins = 0;
    for (double p : positives)
        for (double n : negatives) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return wins / (static_cast<double>(positives.size()) * negatives.size());
}

}  // namespace imls
