#include "imls/nn/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "imls/errors.hpp"
#include "imls/image_io.hpp"
#include "imls/log.hpp"
#include "imls/metrics.hpp"
#include "imls/nn/compaction_ops.hpp"
#include "imls/nn/tensor_io.hpp"
#include "imls/nn/training.hpp"
#include "imls/plot.hpp"

namespace imls {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Renders the chosen slots (timed) into an otherwise zero C-image.
Image render_slots(const PipelineContext& ctx, const ViewParams& view, const BoolGrid& slots, double& seconds) {
    const auto sources = selected_sources(ctx.map, slots);
    const PixelBatch batch = render_pixels(*ctx.volume, *ctx.tf, ctx.render, view, sources, true);
    seconds = batch.total_seconds();
    const int n = ctx.map.compact_resolution;
    Image c(n, n, 3, 0.0f);
    std::size_t j = 0;
    for (std::size_t k = 0; k < ctx.map.pad_start(); ++k) {
        if (!slots.cells[k]) continue;
        for (int ch = 0; ch < 3; ++ch) c.data[k * 3 + ch] = static_cast<float>(batch.rgb[j][ch]);
        ++j;
    }
    return c;
}

torch::Tensor reconstruct(const PipelineContext& ctx, const torch::Tensor& c_batch) {
    RecNN net = ctx.recnn;
    return net->forward(recnn_input(net, ctx.map, c_batch), recnn_mask(net, ctx.pattern, 1));
}

}  // namespace

std::string to_string(PipelineKind k) {
    switch (k) {
        case PipelineKind::GroundTruth: return "gt";
        case PipelineKind::RecNNOnly: return "recnn_only";
        case PipelineKind::Imls: return "imls_recnn";
        case PipelineKind::ImlRecNN: return "iml_encoder";
    }
    return "?";
}

PipelineKind parse_pipeline_kind(const std::string& s) {
    if (s == "gt") return PipelineKind::GroundTruth;
    if (s == "recnn_only" || s == "recnn") return PipelineKind::RecNNOnly;
    if (s == "imls_recnn" || s == "imls") return PipelineKind::Imls;
    if (s == "iml_encoder") return PipelineKind::ImlRecNN;
    throw ConfigError("unknown pipeline '" + s + "'");
}

Reference render_reference(const PipelineContext& ctx, const std::vector<ViewParams>& views) {
    Reference ref;
    ref.views = views;
    ref.gt.reserve(views.size());
    for (const auto& v : views) ref.gt.push_back(render_image_parallel(*ctx.volume, *ctx.tf, ctx.render, v).rgb);
    return ref;
}

ViewResult run_view(const PipelineContext& ctx, PipelineKind kind, const MaskStage* stage, const ViewParams& view,
                    const Image* gt) {
    view.validate();
    ViewResult out;
    EvalRecord& r = out.record;
    r.mode = to_string(kind);
    const int n = ctx.map.compact_resolution;
    const double slots_total = static_cast<double>(n) * n;
    torch::NoGradGuard guard;

    if (kind != PipelineKind::GroundTruth && !ctx.recnn) throw ConfigError("missing checkpoint: RecNN");
    if ((kind == PipelineKind::Imls || kind == PipelineKind::ImlRecNN) && (stage == nullptr || !stage->iml))
        throw ConfigError("missing checkpoint: IML");

    switch (kind) {
        case PipelineKind::GroundTruth: {
            TimedImage timed = render_image(*ctx.volume, *ctx.tf, ctx.render, view);
            r.t_sr = timed.selective_render_seconds();
            out.image = std::move(timed.rgb);
            out.slots = ctx.map.valid_slots();
            r.ipr = 1.0;
            break;
        }
        case PipelineKind::RecNNOnly: {
            out.slots = ctx.map.valid_slots();
            const Image c = render_slots(ctx, view, out.slots, r.t_sr);
            const auto t0 = Clock::now();
            auto full = reconstruct(ctx, to_tensor(c).unsqueeze(0));
            out.image = to_image(full);
            r.t_recnn = since(t0);
            r.ipr = static_cast<double>(ctx.map.pad_start()) / slots_total;
            break;
        }
        case PipelineKind::Imls: {
            auto t0 = Clock::now();
            if (Generator gen = stage->generator) {
                const auto pred = gen->forward(view_tensor({view}, gen->config().orbit_radius));
                out.slots = binarize_im(pred, ctx.map.valid_slots());
            } else {
                out.slots = ctx.map.valid_slots();
            }
            r.t_mask = stage->generator ? since(t0) : 0.0;
            const Image c = render_slots(ctx, view, out.slots, r.t_sr);
            t0 = Clock::now();
            IMLNet iml = stage->iml;
            auto recon = iml->fill(to_tensor(c).unsqueeze(0), grid_to_tensor(out.slots).unsqueeze(0));
            out.image = to_image(reconstruct(ctx, recon));
            r.t_recnn = since(t0);
            r.ipr = static_cast<double>(out.slots.count()) / slots_total;
            break;
        }
        case PipelineKind::ImlRecNN: {
            // The encoder needs the complete C-image, so every pattern pixel is rendered.
            const Image c_full = render_slots(ctx, view, ctx.map.valid_slots(), r.t_sr);
            auto t0 = Clock::now();
            IMLNet iml = stage->iml;
            auto o = iml->infer(to_tensor(c_full).unsqueeze(0), valid_slot_tensor(ctx.map));
            r.t_mask = since(t0);
            out.slots = tensor_to_grid(o.im[0]);
            t0 = Clock::now();
            out.image = to_image(reconstruct(ctx, o.reconstruction));
            r.t_recnn = since(t0);
            r.ipr = static_cast<double>(out.slots.count()) / slots_total;
            break;
        }
    }
    r.low_confidence = kind != PipelineKind::GroundTruth && out.slots.count() == 0;
    r.t_infer = r.t_mask + r.t_recnn;
    r.t_total = r.t_sr + r.t_infer;
    if (gt) {
        r.psnr_db = psnr(out.image, *gt);
        r.ssim = ssim(out.image, *gt);
    }
    return out;
}

std::vector<EvalRecord> eval_trajectory(const PipelineContext& ctx, PipelineKind kind, const MaskStage* stage,
                                        const Reference& ref) {
    std::vector<EvalRecord> records;
    records.reserve(ref.views.size());
    for (std::size_t i = 0; i < ref.views.size(); ++i) {
        auto res = run_view(ctx, kind, stage, ref.views[i], &ref.gt[i]);
        res.record.view_idx = static_cast<int>(i);
        records.push_back(res.record);
    }
    return records;
}

double mean_psnr(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw ParameterError("mean_psnr: no records");
    double s = 0;
    for (const auto& r : records) s += r.psnr_db;
    return s / records.size();
}

double mean_ipr(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw ParameterError("mean_ipr: no records");
    double s = 0;
    for (const auto& r : records) s += r.ipr;
    return s / records.size();
}

double snap_to_bank(const std::vector<double>& bank, double x) {
    if (bank.empty()) throw ParameterError("snap_to_bank: empty bank");
    double best = bank.front();
    for (double b : bank) {
        const double d = std::abs(b - x), db = std::abs(best - x);
        if (d < db - 1e-12 || (std::abs(d - db) <= 1e-12 && b > best)) best = b;
    }
    return best;
}

nlohmann::json ORPResult::to_json() const {
    nlohmann::json trace_json = nlohmann::json::array();
    for (const auto& p : trace)
        trace_json.push_back({{"requested", p.requested}, {"bank_mean", p.bank_mean}, {"psnr", p.psnr},
                              {"ipr", p.ipr}, {"gap", p.gap}, {"within", p.within}, {"cached", p.cached}});
    return {{"mean", mean},   {"ipr", ipr},     {"gap_db", gap_db},       {"psnr", psnr},
            {"baseline_psnr", baseline_psnr}, {"satisfied", satisfied}, {"trace", trace_json},
            {"notes", notes}};
}

ORPResult orp_search(const std::vector<double>& bank, double baseline_psnr,
                     const std::function<ProbeOutcome(double)>& evaluate, double eps_db, double lo, double hi,
                     int max_probes) {
    if (!(lo < hi)) throw ParameterError("orp_search: empty interval");
    if (max_probes < 1) throw ParameterError("orp_search: max_probes must be >= 1");
    ORPResult res;
    res.baseline_psnr = baseline_psnr;
    std::map<double, ProbeOutcome> cache;
    std::optional<double> best;
    for (int k = 0; k < max_probes; ++k) {
        OrpProbe p;
        p.requested = 0.5 * (lo + hi);
        p.bank_mean = snap_to_bank(bank, p.requested);
        auto it = cache.find(p.bank_mean);
        p.cached = it != cache.end();
        const ProbeOutcome o = p.cached ? it->second : (cache[p.bank_mean] = evaluate(p.bank_mean));
        p.psnr = o.psnr;
        p.ipr = o.ipr;
        p.gap = baseline_psnr - o.psnr;
        p.within = p.gap <= eps_db;
        res.trace.push_back(p);
        if (p.within) {
            if (!best || p.bank_mean < *best) best = p.bank_mean;
            hi = p.requested;
        } else {
            lo = p.requested;
        }
    }
    // PSNR is assumed non-decreasing in the mean; report any probed pair that contradicts it.
    for (auto a = cache.begin(); a != cache.end(); ++a)
        for (auto b = std::next(a); b != cache.end(); ++b)
            if (a->second.psnr > b->second.psnr + 1e-9)
                res.notes.push_back(strprintf("non-monotone: mean %.3f gives %.3f dB but %.3f gives %.3f dB", a->first,
                                              a->second.psnr, b->first, b->second.psnr));
    for (const auto& note : res.notes) log_warn("orp: " + note);
    if (best) {
        const auto& o = cache.at(*best);
        res.mean = *best;
        res.ipr = o.ipr;
        res.psnr = o.psnr;
        res.gap_db = baseline_psnr - o.psnr;
        res.satisfied = true;
    } else {
        res.mean = 1.0;
        res.satisfied = false;
        if (auto it = cache.find(1.0); it != cache.end()) {
            res.ipr = it->second.ipr;
            res.psnr = it->second.psnr;
            res.gap_db = baseline_psnr - it->second.psnr;
        }
    }
    return res;
}

const ModeSummary* LatencyReport::find(const std::string& mode) const {
    for (const auto& m : modes)
        if (m.mode == mode) return &m;
    return nullptr;
}

nlohmann::json LatencyReport::to_json() const {
    nlohmann::json j = {{"modes", nlohmann::json::array()}};
    for (const auto& m : modes)
        j["modes"].push_back({{"mode", m.mode},           {"count", m.count},         {"ipr", m.ipr},
                              {"psnr_db", m.psnr_db},     {"ssim", m.ssim},           {"t_mask_ms", m.t_mask_ms},
                              {"t_sr_ms", m.t_sr_ms},     {"t_recnn_ms", m.t_recnn_ms},
                              {"t_total_ms", m.t_total_ms}});
    j["speedup"] = speedup ? nlohmann::json(*speedup) : nlohmann::json(nullptr);
    return j;
}

LatencyReport latency_report(const std::vector<EvalRecord>& records, const std::string& baseline,
                             const std::string& target) {
    if (records.empty()) throw ParameterError("latency_report: no records");
    LatencyReport rep;
    for (const auto& r : records) {
        ModeSummary* m = nullptr;
        for (auto& s : rep.modes)
            if (s.mode == r.mode) m = &s;
        if (!m) {
            rep.modes.push_back({});
            m = &rep.modes.back();
            m->mode = r.mode;
        }
        ++m->count;
        m->ipr += r.ipr;
        m->psnr_db += r.psnr_db;
        m->ssim += r.ssim;
        m->t_mask_ms += r.t_mask * 1e3;
        m->t_sr_ms += r.t_sr * 1e3;
        m->t_recnn_ms += r.t_recnn * 1e3;
        m->t_total_ms += r.t_total * 1e3;
    }
    for (auto& m : rep.modes) {
        const double c = m.count;
        m.ipr /= c;
        m.psnr_db /= c;
        m.ssim /= c;
        m.t_mask_ms /= c;
        m.t_sr_ms /= c;
        m.t_recnn_ms /= c;
        m.t_total_ms /= c;
    }
    const auto* b = rep.find(baseline);
    const auto* t = rep.find(target);
    if (b && t && t->t_total_ms > 0) rep.speedup = b->t_total_ms / t->t_total_ms;
    return rep;
}

void write_records_csv(const fs::path& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path);
    out << kRecordCsvHeader << '\n';
    for (const auto& r : records)
        out << strprintf("%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.view_idx, r.mode.c_str(), r.ipr, r.psnr_db,
                         r.ssim, r.t_sr * 1e3, r.t_infer * 1e3, r.t_total * 1e3);
    if (!out) throw FormatError("cannot write " + path.string());
}

std::vector<EvalRecord> read_records_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kRecordCsvHeader) throw FormatError(path.string() + ": unexpected CSV header");
    std::vector<EvalRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw FormatError(path.string() + ": malformed row '" + line + "'");
        EvalRecord r;
        r.view_idx = std::stoi(cells[0]);
        r.mode = cells[1];
        r.ipr = std::stod(cells[2]);
        r.psnr_db = std::stod(cells[3]);
        r.ssim = std::stod(cells[4]);
        r.t_sr = std::stod(cells[5]) / 1e3;
        r.t_infer = std::stod(cells[6]) / 1e3;
        r.t_total = std::stod(cells[7]) / 1e3;
        records.push_back(r);
    }
    return records;
}

void write_latency_report(const fs::path& dir, const std::vector<EvalRecord>& records, const LatencyReport& report) {
    fs::create_directories(dir);
    write_records_csv(dir / "records.csv", records);
    {
        std::ofstream out(dir / "breakdown.csv");
        out << "mode,t_mask_ms,t_sr_ms,t_recnn_ms,t_total_ms\n";
        for (const auto& m : report.modes)
            out << strprintf("%s,%.6f,%.6f,%.6f,%.6f\n", m.mode.c_str(), m.t_mask_ms, m.t_sr_ms, m.t_recnn_ms,
                             m.t_total_ms);
    }
    {
        std::ofstream out(dir / "report.json");
        out << report.to_json().dump(2) << '\n';
    }
    std::vector<std::vector<double>> stacks;
    for (const auto& m : report.modes) stacks.push_back({m.t_mask_ms, m.t_sr_ms, m.t_recnn_ms});
    write_png(stacked_bars(stacks), dir / "breakdown.png");
    std::vector<Series> series;
    for (std::size_t k = 0; k < report.modes.size(); ++k) {
        Series s;
        s.color = palette(k);
        for (const auto& r : records)
            if (r.mode == report.modes[k].mode) s.y.push_back(r.t_total * 1e3);
        series.push_back(std::move(s));
    }
    write_png(line_chart(series), dir / "latency_per_view.png");
}

}  // namespace imls
