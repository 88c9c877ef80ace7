#include "imls/nn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "imls/errors.hpp"
#include "imls/hash.hpp"
#include "imls/log.hpp"
#include "imls/metrics.hpp"
#include "imls/nn/checkpoint.hpp"

namespace imls {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json render_json(const RenderConfig& r) {
    return {{"resolution", r.resolution},
            {"sample_distance", r.sample_distance},
            {"fov_y_degrees", r.fov_y_degrees},
            {"termination_opacity", r.termination_opacity},
            {"lighting",
             {{"ambient", r.lighting.ambient},
              {"diffuse", r.lighting.diffuse},
              {"specular", r.lighting.specular},
              {"shininess", r.lighting.shininess}}},
            {"background", r.background}};
}

RenderConfig render_from_json(const json& j) {
    RenderConfig r;
    r.resolution = j.value("resolution", r.resolution);
    r.sample_distance = j.value("sample_distance", r.sample_distance);
    r.fov_y_degrees = j.value("fov_y_degrees", r.fov_y_degrees);
    r.termination_opacity = j.value("termination_opacity", r.termination_opacity);
    r.background = j.value("background", r.background);
    if (j.contains("lighting")) {
        const auto& l = j.at("lighting");
        r.lighting.ambient = l.value("ambient", r.lighting.ambient);
        r.lighting.diffuse = l.value("diffuse", r.lighting.diffuse);
        r.lighting.specular = l.value("specular", r.lighting.specular);
        r.lighting.shininess = l.value("shininess", r.lighting.shininess);
    }
    return r;
}

std::string hex8(const json& j) { return strprintf("%08llx", static_cast<unsigned long long>(config_hash(j) & 0xffffffffULL)); }

std::string mean_tag(double u) { return strprintf("u%.3f", u); }

json parse_scalar(const std::string& text) {
    try {
        json v = json::parse(text);
        if (v.is_primitive()) return v;
    } catch (const json::parse_error&) {
    }
    return text;
}

void find_unknown(const json& given, const json& known, const std::string& prefix, std::vector<std::string>& out) {
    if (!given.is_object() || !known.is_object()) return;
    for (const auto& [k, v] : given.items()) {
        const std::string path = prefix.empty() ? k : prefix + "." + k;
        if (!known.contains(k))
            out.push_back(path);
        else
            find_unknown(v, known.at(k), path, out);
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    render.validate();
    if (pattern != "downsample" && pattern != "foveal") throw ConfigError("pattern must be downsample or foveal");
    if (factor < 1) throw ConfigError("factor must be >= 1");
    if (compact_resolution < 3) throw ConfigError("compact_resolution must be >= 3");
    if (views < 10) throw ConfigError("views must be >= 10");
    if (trajectory < 1) throw ConfigError("trajectory must be >= 1");
    if (!(radius_min > 0.0 && radius_min <= radius_max)) throw ConfigError("need 0 < radius_min <= radius_max");
    if (bank.empty()) throw ConfigError("bank must not be empty");
    for (double u : bank)
        if (!(u > 0.0 && u <= 1.0)) throw ConfigError("bank means must lie in (0, 1]");
    if (extractor != "encoder" && extractor != "random") throw ConfigError("extractor must be encoder or random");
    if (orp_eps_db < 0.0) throw ConfigError("orp_eps_db must be >= 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    recnn.validate();
    if (recnn.output_resolution != render.resolution)
        throw ConfigError("recnn.output_resolution must equal render.resolution");
    if (recnn.kind == RecNNKind::SuperRes && recnn.input_resolution() != compact_resolution)
        throw ConfigError("super-resolution input must equal compact_resolution");
    if (iml.resolution != compact_resolution) throw ConfigError("iml.resolution must equal compact_resolution");
    if (generator.resolution() != compact_resolution)
        throw ConfigError("generator resolution (2^layers) must equal compact_resolution");
    if (discriminator.resolution != compact_resolution)
        throw ConfigError("discriminator.resolution must equal compact_resolution");
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"name", c.name},
             {"work_dir", c.work_dir.string()},
             {"dataset",
              {{"manifest", c.manifest.string()},
               {"synthetic", c.synthetic},
               {"dims", c.dims},
               {"seed", c.volume_seed},
               {"transfer_function", c.transfer_function.string()}}},
             {"render", render_json(c.render)},
             {"pattern",
              {{"kind", c.pattern},
               {"factor", c.factor},
               {"foveal_center", c.foveal_center},
               {"foveal_seed", c.foveal_seed}}},
             {"compact_resolution", c.compact_resolution},
             {"views",
              {{"count", c.views},
               {"radius_min", c.radius_min},
               {"radius_max", c.radius_max},
               {"seed", c.view_seed},
               {"split_seed", c.split_seed}}},
             {"trajectory", {{"count", c.trajectory}, {"seed", c.trajectory_seed}}},
             {"recnn", c.recnn},
             {"iml", c.iml},
             {"generator", c.generator},
             {"discriminator", c.discriminator},
             {"train", {{"recnn", c.train_recnn}, {"iml", c.train_iml}, {"ims", c.train_ims}}},
             {"bank", c.bank},
             {"extractor", {{"kind", c.extractor}, {"levels", c.extractor_levels}}},
             {"orp_eps_db", c.orp_eps_db},
             {"threads", c.threads}};
}

void from_json(const json& j, ExperimentConfig& c) {
    c.name = j.value("name", c.name);
    c.work_dir = j.value("work_dir", c.work_dir.string());
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        c.manifest = d.value("manifest", c.manifest.string());
        c.synthetic = d.value("synthetic", c.synthetic);
        c.dims = d.value("dims", c.dims);
        c.volume_seed = d.value("seed", c.volume_seed);
        c.transfer_function = d.value("transfer_function", c.transfer_function.string());
    }
    if (j.contains("render")) c.render = render_from_json(j.at("render"));
    if (j.contains("pattern")) {
        const auto& p = j.at("pattern");
        c.pattern = p.value("kind", c.pattern);
        c.factor = p.value("factor", c.factor);
        c.foveal_center = p.value("foveal_center", c.foveal_center);
        c.foveal_seed = p.value("foveal_seed", c.foveal_seed);
    }
    c.compact_resolution = j.value("compact_resolution", c.compact_resolution);
    if (j.contains("views")) {
        const auto& v = j.at("views");
        c.views = v.value("count", c.views);
        c.radius_min = v.value("radius_min", c.radius_min);
        c.radius_max = v.value("radius_max", c.radius_max);
        c.view_seed = v.value("seed", c.view_seed);
        c.split_seed = v.value("split_seed", c.split_seed);
    }
    if (j.contains("trajectory")) {
        c.trajectory = j.at("trajectory").value("count", c.trajectory);
        c.trajectory_seed = j.at("trajectory").value("seed", c.trajectory_seed);
    }
    if (j.contains("recnn")) c.recnn = j.at("recnn").get<RecNNConfig>();
    if (j.contains("iml")) c.iml = j.at("iml").get<IMLConfig>();
    if (j.contains("generator")) c.generator = j.at("generator").get<GeneratorConfig>();
    if (j.contains("discriminator")) c.discriminator = j.at("discriminator").get<DiscriminatorConfig>();
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("recnn")) c.train_recnn = t.at("recnn").get<TrainOptions>();
        if (t.contains("iml")) c.train_iml = t.at("iml").get<TrainOptions>();
        if (t.contains("ims")) c.train_ims = t.at("ims").get<TrainOptions>();
    }
    c.bank = j.value("bank", c.bank);
    if (j.contains("extractor")) {
        c.extractor = j.at("extractor").value("kind", c.extractor);
        c.extractor_levels = j.at("extractor").value("levels", c.extractor_levels);
    }
    c.orp_eps_db = j.value("orp_eps_db", c.orp_eps_db);
    c.threads = j.value("threads", c.threads);

    std::vector<std::string> unknown;
    find_unknown(j, json(c), "", unknown);
    if (!unknown.empty()) throw ConfigError("unknown config key '" + unknown.front() + "'");
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    auto cfg = j.get<ExperimentConfig>();
    if (cfg.work_dir.is_relative()) cfg.work_dir = fs::absolute(path).parent_path() / cfg.work_dir;
    cfg.validate();
    return cfg;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (!node->is_primitive()) throw ConfigError("'" + key + "' is not a scalar field");
    *node = parse_scalar(assignment.substr(eq + 1));
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    fs::create_directories(cfg_.work_dir / "ckpt");
    fs::create_directories(report_dir());
}

const Volume& Experiment::volume() {
    if (!volume_) {
        if (!cfg_.manifest.empty())
            volume_ = load_volume(cfg_.manifest);
        else
            volume_ = generate_synthetic_volume(parse_synthetic_kind(cfg_.synthetic), cfg_.dims, cfg_.volume_seed);
    }
    return *volume_;
}

const TransferFunction& Experiment::transfer_function() {
    if (!tf_)
        tf_ = cfg_.transfer_function.empty() ? TransferFunction::default_ramp()
                                             : TransferFunction::from_file(cfg_.transfer_function);
    return *tf_;
}

const SamplingPattern& Experiment::pattern() {
    if (!pattern_) {
        const int m = cfg_.render.resolution;
        if (cfg_.pattern == "downsample") {
            pattern_ = downsampling_pattern(m, cfg_.factor);
        } else {
            const auto noise = blue_noise_pattern(m, cfg_.foveal_seed);
            const std::size_t cap = static_cast<std::size_t>(cfg_.compact_resolution) * cfg_.compact_resolution;
            pattern_ = foveal_pattern(m, fit_foveal_sigma(m, cap, cfg_.foveal_center, noise), cfg_.foveal_center, noise);
        }
    }
    return *pattern_;
}

const CompactionMap& Experiment::map() {
    if (!map_) map_ = build_compaction_map(pattern(), cfg_.compact_resolution);
    return *map_;
}

std::string Experiment::corpus_key() const {
    const json j = cfg_;
    return hex8({{"dataset", j["dataset"]},
                 {"render", j["render"]},
                 {"pattern", j["pattern"]},
                 {"n", cfg_.compact_resolution},
                 {"views", j["views"]}});
}

fs::path Experiment::corpus_dir() const { return cfg_.work_dir / ("corpus_" + corpus_key()); }

const Corpus& Experiment::corpus() {
    if (corpus_) return *corpus_;
    const fs::path dir = corpus_dir();
    if (fs::exists(dir / "index.json")) {
        corpus_ = Corpus::load(dir);
        return *corpus_;
    }
    log_info("rendering corpus of " + std::to_string(cfg_.views) + " views into " + dir.string());
    const auto views = sample_views(cfg_.views, cfg_.radius_min, cfg_.radius_max, cfg_.view_seed);
    corpus_ = build_corpus(volume(), transfer_function(), cfg_.render, views, pattern(), map(), cfg_.split_seed);
    corpus_->save(dir);
    return *corpus_;
}

void Experiment::require_trainable(const fs::path& missing) const {
    if (!allow_training_) throw ConfigError("missing checkpoint " + missing.string());
}

fs::path Experiment::checkpoint_path(const std::string& stem) const { return cfg_.work_dir / "ckpt" / (stem + ".ckpt"); }

std::string Experiment::recnn_stem() const {
    return "recnn_" + hex8({{"corpus", corpus_key()}, {"net", cfg_.recnn}, {"train", cfg_.train_recnn}});
}

RecNN Experiment::recnn() {
    if (recnn_) return recnn_;
    const std::string stem = recnn_stem();
    const auto path = checkpoint_path(stem);
    if (fs::exists(path)) {
        recnn_ = load_recnn(path);
        return recnn_;
    }
    require_trainable(path);
    auto trained = train_recnn(corpus(), cfg_.recnn, cfg_.train_recnn);
    trained.report.save(report_dir(), stem);
    save_recnn(path, trained.net, {{"best_val", trained.report.best_val}});
    trained.net->eval();
    recnn_ = trained.net;
    return recnn_;
}

std::string Experiment::iml_key(double u, IMLMode mode) const {
    IMLConfig c = cfg_.iml;
    c.norm.u = u;
    json j = {{"corpus", corpus_key()}, {"net", c}, {"train", cfg_.train_iml}, {"mode", to_string(mode)}};
    if (mode == IMLMode::EndToEnd) j["recnn"] = {cfg_.recnn, cfg_.train_recnn};
    return "iml_" + to_string(mode) + "_" + mean_tag(u) + "_" + hex8(j);
}

IMLNet Experiment::iml(double u, IMLMode mode) {
    const std::string stem = iml_key(u, mode);
    if (auto it = imls_.find(stem); it != imls_.end()) return it->second;
    const auto path = checkpoint_path(stem);
    const auto rec_path = e2e_recnn_checkpoint(u);
    if (fs::exists(path) && (mode == IMLMode::Standalone || fs::exists(rec_path))) {
        if (mode == IMLMode::EndToEnd) e2e_recnns_.insert_or_assign(stem, load_recnn(rec_path));
        return imls_.insert_or_assign(stem, load_iml(path)).first->second;
    }
    require_trainable(path);
    IMLConfig c = cfg_.iml;
    c.norm.u = u;
    RecNN joint{nullptr};
    if (mode == IMLMode::EndToEnd) {
        recnn();
        // Start from the separately trained RecNN and fine-tune it jointly.
        joint = load_recnn(checkpoint_path(recnn_stem()));
        joint->train();
    }
    auto trained = train_iml(corpus(), c, cfg_.train_iml, mode, joint ? &joint : nullptr);
    trained.report.save(report_dir(), stem);
    save_iml(path, trained.net, to_string(mode));
    trained.net->eval();
    if (joint) {
        joint->eval();
        save_recnn(rec_path, joint, {{"joint_with", stem}});
        e2e_recnns_.insert_or_assign(stem, joint);
    }
    imls_.insert_or_assign(stem, trained.net);
    return trained.net;
}

RecNN Experiment::e2e_recnn(double u) {
    iml(u, IMLMode::EndToEnd);
    return e2e_recnns_.at(iml_key(u, IMLMode::EndToEnd));
}

std::vector<BoolGrid> Experiment::labels(double u) {
    IMLNet net = iml(u, IMLMode::Standalone);
    return ims_labels(net, corpus());
}

std::unique_ptr<FeatureExtractor> Experiment::make_extractor() {
    if (cfg_.extractor == "random") return std::make_unique<RandomConvFeatures>(cfg_.train_ims.seed + 17);
    // The encoder of the bank member nearest 0.2 serves every generator.
    IMLNet ref = iml(snap_to_bank(cfg_.bank, 0.2), IMLMode::Standalone);
    return std::make_unique<EncoderFeatures>(ref->encoder, cfg_.extractor_levels);
}

std::string Experiment::generator_stem(double u, bool adversarial) const {
    const json key = {{"iml", iml_key(u, IMLMode::Standalone)},
                      {"extractor", {cfg_.extractor, cfg_.extractor_levels}},
                      {"g", cfg_.generator},
                      {"d", cfg_.discriminator},
                      {"train", cfg_.train_ims},
                      {"adv", adversarial}};
    return std::string("gen_") + (adversarial ? "adv" : "per") + "_" + mean_tag(u) + "_" + hex8(key);
}

fs::path Experiment::recnn_checkpoint() const { return checkpoint_path(recnn_stem()); }
fs::path Experiment::iml_checkpoint(double u, IMLMode mode) const { return checkpoint_path(iml_key(u, mode)); }
fs::path Experiment::e2e_recnn_checkpoint(double u) const {
    return checkpoint_path("recnn_e2e_" + iml_key(u, IMLMode::EndToEnd).substr(4));
}
fs::path Experiment::generator_checkpoint(double u, bool adversarial) const {
    return checkpoint_path(generator_stem(u, adversarial));
}

Generator Experiment::generator(double u, bool adversarial) {
    const std::string stem = generator_stem(u, adversarial);
    if (auto it = generators_.find(stem); it != generators_.end()) return it->second;
    const auto path = checkpoint_path(stem);
    if (fs::exists(path)) return generators_.insert_or_assign(stem, load_generator(path)).first->second;

    require_trainable(path);
    IMSData data;
    data.views = corpus().views;
    data.labels = labels(u);
    data.train = corpus().train;
    data.val = corpus().val;
    data.valid = map().valid_slots();
    save_label_set(cfg_.work_dir / ("ims_labels_" + mean_tag(u)), data.views, data.labels);
    auto extractor = make_extractor();
    auto trained = train_ims(data, cfg_.generator, cfg_.discriminator, *extractor, cfg_.train_ims, adversarial);
    trained.report.save(report_dir(), stem);
    save_generator(path, trained.generator, {{"u", u}, {"adversarial", adversarial}});
    trained.generator->eval();
    return generators_.insert_or_assign(stem, trained.generator).first->second;
}

PipelineContext Experiment::context(RecNN net) {
    PipelineContext ctx;
    ctx.volume = &volume();
    ctx.tf = &transfer_function();
    ctx.render = cfg_.render;
    ctx.pattern = pattern();
    ctx.map = map();
    ctx.recnn = net ? net : recnn();
    return ctx;
}

MaskStage Experiment::stage(double u, bool adversarial) {
    MaskStage s;
    const double top = *std::max_element(cfg_.bank.begin(), cfg_.bank.end());
    if (u >= 1.0) {
        s.iml = iml(top, IMLMode::Standalone);
        return s;
    }
    s.iml = iml(u, IMLMode::Standalone);
    s.generator = generator(u, adversarial);
    return s;
}

const Reference& Experiment::trajectory_reference() {
    if (!reference_) {
        const auto views = exploration_trajectory(cfg_.trajectory, cfg_.radius_min, cfg_.radius_max,
                                                  cfg_.trajectory_seed);
        reference_ = render_reference(context(), views);
    }
    return *reference_;
}

std::vector<EvalRecord> Experiment::eval(PipelineKind kind, double u) {
    auto ctx = context();
    const auto& ref = trajectory_reference();
    if (kind == PipelineKind::GroundTruth || kind == PipelineKind::RecNNOnly) return eval_trajectory(ctx, kind, nullptr, ref);
    MaskStage s = kind == PipelineKind::Imls ? stage(u) : MaskStage{iml(u, IMLMode::Standalone), nullptr};
    return eval_trajectory(ctx, kind, &s, ref);
}

ORPResult Experiment::orp() {
    const auto baseline = eval(PipelineKind::RecNNOnly);
    const double base_psnr = mean_psnr(baseline);
    auto result = orp_search(
        cfg_.bank, base_psnr,
        [&](double u) {
            const auto recs = eval(PipelineKind::Imls, u);
            return ProbeOutcome{mean_psnr(recs), mean_ipr(recs)};
        },
        cfg_.orp_eps_db);
    // Re-time the chosen member against the baseline view by view, so that drift
    // in machine load hits both pipelines alike.
    std::vector<EvalRecord> all;
    {
        auto ctx = context();
        const auto& ref = trajectory_reference();
        MaskStage s = stage(result.mean);
        std::vector<EvalRecord> chosen;
        for (std::size_t i = 0; i < ref.views.size(); ++i) {
            auto a = run_view(ctx, PipelineKind::RecNNOnly, nullptr, ref.views[i], &ref.gt[i]).record;
            auto b = run_view(ctx, PipelineKind::Imls, &s, ref.views[i], &ref.gt[i]).record;
            a.view_idx = b.view_idx = static_cast<int>(i);
            all.push_back(a);
            chosen.push_back(b);
        }
        all.insert(all.end(), chosen.begin(), chosen.end());
    }
    const auto report = latency_report(all);
    write_latency_report(report_dir() / "orp_latency", all, report);
    std::ofstream(report_dir() / "orp.json") << result.to_json().dump(2) << '\n';
    return result;
}

}  // namespace imls
