#include "imls/service/service.hpp"

#include <fstream>

#include "imls/image_io.hpp"
#include "imls/log.hpp"
#include "imls/metrics.hpp"
#include "imls/nn/checkpoint.hpp"

namespace imls {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> mask_to_png(const BoolGrid& g) { return encode_png(grid_to_image(g)); }

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_relative() ? base / path : path;
}

}  // namespace

RenderRequest RenderRequest::parse(const json& j) {
    if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
    RenderRequest r;
    try {
        r.dataset = j.at("dataset").get<std::string>();
        const auto arr = j.at("view").get<std::vector<double>>();
        if (arr.size() != 9) throw ServiceError(400, "view must have 9 numbers");
        std::array<double, 9> a{};
        std::copy(arr.begin(), arr.end(), a.begin());
        r.view = ViewParams::from_array(a);
        r.mode = j.value("mode", r.mode);
        if (j.contains("pattern")) r.pattern = j.at("pattern").get<std::string>();
        if (j.contains("mean") && !j.at("mean").is_null()) r.mean = j.at("mean").get<double>();
        if (j.contains("overlays")) r.mask_overlay = j.at("overlays").value("mask", false);
        r.psnr = j.value("psnr", false);
        if (j.contains("seq")) r.seq = j.at("seq").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed request: ") + e.what());
    }
    if (r.mode != "gt" && r.mode != "recnn" && r.mode != "imls")
        throw ServiceError(400, "mode must be gt, recnn or imls");
    if (r.mean && !(*r.mean > 0.0 && *r.mean <= 1.0)) throw ServiceError(400, "mean must lie in (0, 1]");
    try {
        r.view.validate();
    } catch (const ViewError& e) {
        throw ServiceError(400, std::string("malformed view: ") + e.what());
    }
    return r;
}

json RenderResponse::to_json(bool embed_image) const {
    json j = {{"dataset", dataset},
              {"mode", mode},
              {"mean", mean},
              {"ipr", ipr},
              {"low_confidence", low_confidence},
              {"timing",
               {{"t_mask_ms", timing.t_mask_ms},
                {"t_sr_ms", timing.t_sr_ms},
                {"t_recnn_ms", timing.t_recnn_ms},
                {"t_total_ms", timing.t_total_ms}}},
              {"benchmark_grade", false}};
    if (embed_image) j["image"] = base64_encode(image_png);
    if (!mask_png.empty()) j["mask"] = base64_encode(mask_png);
    if (psnr_vs_gt) j["psnr_vs_gt"] = *psnr_vs_gt;
    if (seq) j["seq"] = *seq;
    return j;
}

ServiceConfig parse_service_config(const json& j, const fs::path& base) {
    ServiceConfig cfg;
    try {
        cfg.host = j.value("host", cfg.host);
        cfg.port = j.value("port", cfg.port);
        for (const auto& d : j.value("datasets", json::array())) {
            DatasetEntry e;
            e.id = d.at("id").get<std::string>();
            e.experiment = resolve(base, d.at("experiment").get<std::string>());
            e.default_mean = d.value("default_mean", e.default_mean);
            const auto ck = d.value("checkpoints", json::object());
            if (ck.is_string()) {
                if (ck.get<std::string>() != "auto") throw ConfigError("checkpoints must be \"auto\" or an object");
                e.auto_checkpoints = true;
            } else {
                e.recnn = resolve(base, ck.value("recnn", ""));
                for (const auto& m : ck.value("members", json::array()))
                    e.members.push_back({m.at("mean").get<double>(), resolve(base, m.value("iml", "")),
                                         resolve(base, m.value("generator", ""))});
            }
            cfg.datasets.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("service config: ") + e.what());
    }
    if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("service port out of range");
    return cfg;
}

ServiceConfig load_service_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open service config " + path.string());
    try {
        return parse_service_config(json::parse(in), fs::absolute(path).parent_path());
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

struct PipelineService::Dataset {
    std::string id;
    std::unique_ptr<Experiment> experiment;
    PipelineContext ctx;
    std::map<double, MaskStage> members;  // full pipeline stages; a null generator means IPR 1.0
    std::vector<std::string> checkpoints;
    double default_mean = 0.2;

    [[nodiscard]] std::vector<std::string> modes() const {
        std::vector<std::string> m{"gt"};
        if (ctx.recnn) m.emplace_back("recnn");
        if (ctx.recnn && !members.empty()) m.emplace_back("imls");
        return m;
    }
};

PipelineService::PipelineService(const ServiceConfig& cfg) {
    for (const auto& e : cfg.datasets) {
        if (datasets_.count(e.id)) throw ConfigError("duplicate dataset id '" + e.id + "'");
        auto ds = std::make_unique<Dataset>();
        ds->id = e.id;
        ds->default_mean = e.default_mean;
        ds->experiment = std::make_unique<Experiment>(load_experiment_config(e.experiment));
        auto& ex = *ds->experiment;
        ds->ctx.volume = &ex.volume();
        ds->ctx.tf = &ex.transfer_function();
        ds->ctx.render = ex.config().render;
        ds->ctx.pattern = ex.pattern();
        ds->ctx.map = ex.map();

        fs::path recnn_path = e.recnn;
        std::vector<MemberPaths> members = e.members;
        if (e.auto_checkpoints) {
            recnn_path = ex.recnn_checkpoint();
            for (double u : ex.config().bank)
                members.push_back({u, ex.iml_checkpoint(u), u >= 1.0 ? fs::path() : ex.generator_checkpoint(u)});
        }
        if (!recnn_path.empty() && fs::exists(recnn_path)) {
            ds->ctx.recnn = load_recnn(recnn_path);
            ds->checkpoints.push_back(recnn_path.filename().string());
        } else if (!e.auto_checkpoints && !recnn_path.empty()) {
            throw ConfigError("missing checkpoint " + recnn_path.string());
        }
        for (const auto& m : members) {
            const bool need_gen = m.mean < 1.0;
            const bool have = fs::exists(m.iml) && (!need_gen || fs::exists(m.generator));
            if (!have) {
                if (e.auto_checkpoints) continue;
                throw ConfigError(strprintf("missing checkpoint for mean %.3f", m.mean));
            }
            MaskStage s;
            s.iml = load_iml(m.iml);
            ds->checkpoints.push_back(m.iml.filename().string());
            if (need_gen) {
                s.generator = load_generator(m.generator);
                ds->checkpoints.push_back(m.generator.filename().string());
            }
            ds->members.emplace(m.mean, s);
        }
        log_info(strprintf("dataset %s: %zu checkpoints", e.id.c_str(), ds->checkpoints.size()));
        datasets_.emplace(e.id, std::move(ds));
    }
}

PipelineService::~PipelineService() = default;

json PipelineService::handle_list() const {
    json datasets = json::array();
    json entries = json::array();
    for (const auto& [id, ds] : datasets_) {
        json means = json::array();
        for (const auto& [u, s] : ds->members) means.push_back(u);
        datasets.push_back({{"id", id},
                            {"pattern", to_string(ds->ctx.pattern.kind)},
                            {"resolution", ds->ctx.render.resolution},
                            {"compact_resolution", ds->ctx.map.compact_resolution},
                            {"modes", ds->modes()},
                            {"means", means},
                            {"checkpoints", ds->checkpoints}});
        for (const auto& m : ds->modes()) entries.push_back({{"dataset", id}, {"mode", m}});
    }
    return {{"datasets", datasets}, {"entries", entries}};
}

RenderResponse PipelineService::handle_render(const RenderRequest& req) const {
    const auto it = datasets_.find(req.dataset);
    if (it == datasets_.end()) throw ServiceError(404, "unknown dataset '" + req.dataset + "'");
    const Dataset& ds = *it->second;
    if (req.pattern && *req.pattern != to_string(ds.ctx.pattern.kind))
        throw ServiceError(400, "dataset '" + ds.id + "' serves the " + to_string(ds.ctx.pattern.kind) + " pattern");

    RenderResponse res;
    res.dataset = ds.id;
    res.mode = req.mode;
    res.seq = req.seq;
    PipelineKind kind = PipelineKind::GroundTruth;
    const MaskStage* stage = nullptr;
    if (req.mode == "recnn" || req.mode == "imls") {
        if (!ds.ctx.recnn) throw ServiceError(409, "missing checkpoint: RecNN for '" + ds.id + "'");
        kind = PipelineKind::RecNNOnly;
    }
    if (req.mode == "imls") {
        if (ds.members.empty()) throw ServiceError(409, "missing checkpoint: no IML/IMS members for '" + ds.id + "'");
        std::vector<double> means;
        for (const auto& [u, s] : ds.members) means.push_back(u);
        res.mean = snap_to_bank(means, req.mean.value_or(ds.default_mean));
        stage = &ds.members.at(res.mean);
        kind = PipelineKind::Imls;
    }

    ViewResult out;
    try {
        out = run_view(ds.ctx, kind, stage, req.view, nullptr);
    } catch (const ViewError& e) {
        throw ServiceError(400, std::string("malformed view: ") + e.what());
    }
    const auto& r = out.record;
    res.ipr = r.ipr;
    res.low_confidence = r.low_confidence;
    res.timing = {r.t_mask * 1e3, r.t_sr * 1e3, r.t_recnn * 1e3, r.t_total * 1e3};
    res.image_png = encode_png(out.image);
    if (req.mask_overlay) res.mask_png = mask_to_png(out.slots);
    if (req.psnr) {
        const Image gt = render_image_parallel(*ds.ctx.volume, *ds.ctx.tf, ds.ctx.render, req.view).rgb;
        res.psnr_vs_gt = psnr(out.image, gt);
    }
    return res;
}

}  // namespace imls
