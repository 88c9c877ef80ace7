#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>

#include "imls/compaction.hpp"
#include "imls/nn/iml.hpp"
#include "imls/nn/ims.hpp"
#include "imls/nn/recnn.hpp"
#include "imls/renderer.hpp"
#include "imls/transfer_function.hpp"
#include "imls/volume.hpp"

namespace imls {

/// Everything needed to run the rendering pipelines for one dataset.
struct PipelineContext {
    const Volume* volume = nullptr;
    const TransferFunction* tf = nullptr;
    RenderConfig render;
    SamplingPattern pattern;
    CompactionMap map;
    RecNN recnn{nullptr};
};

enum class PipelineKind {
    GroundTruth,  // full ray cast
    RecNNOnly,    // render every pattern pixel, then RecNN
    Imls,         // IMS mask -> selective render -> IML decoder -> RecNN
    ImlRecNN,     // IML encoder mask from the full C-image -> decoder -> RecNN (quality studies)
};
std::string to_string(PipelineKind k);
PipelineKind parse_pipeline_kind(const std::string& s);

/// Mask stage for Imls / ImlRecNN. A null generator in Imls mode selects every
/// valid slot (IPR 1.0).
struct MaskStage {
    IMLNet iml{nullptr};
    Generator generator{nullptr};
};

/// One trajectory view. Times are seconds; t_infer = t_mask + t_recnn and
/// t_total = t_sr + t_infer by construction.
struct EvalRecord {
    int view_idx = 0;
    std::string mode;
    double ipr = 1.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double t_mask = 0.0;
    double t_sr = 0.0;
    double t_recnn = 0.0;
    double t_infer = 0.0;
    double t_total = 0.0;
    bool low_confidence = false;
};

/// Ground-truth renders (untimed, parallel) for a list of views.
struct Reference {
    std::vector<ViewParams> views;
    std::vector<Image> gt;
};
Reference render_reference(const PipelineContext& ctx, const std::vector<ViewParams>& views);

struct ViewResult {
    EvalRecord record;
    Image image;
    BoolGrid slots;  // C-image slots that were rendered
};

/// Runs one pipeline on one view, timing each stage single-threaded.
/// `gt` (optional) is used for PSNR/SSIM.
ViewResult run_view(const PipelineContext& ctx, PipelineKind kind, const MaskStage* stage, const ViewParams& view,
                    const Image* gt);

std::vector<EvalRecord> eval_trajectory(const PipelineContext& ctx, PipelineKind kind, const MaskStage* stage,
                                        const Reference& ref);

double mean_psnr(const std::vector<EvalRecord>& records);
double mean_ipr(const std::vector<EvalRecord>& records);

/// Nearest bank member; exact ties go to the larger mean.
double snap_to_bank(const std::vector<double>& bank, double x);

struct OrpProbe {
    double requested = 0.0;  // midpoint of the current interval
    double bank_mean = 0.0;  // member actually evaluated
    double psnr = 0.0;
    double ipr = 0.0;
    double gap = 0.0;  // baseline - psnr
    bool within = false;
    bool cached = false;
};

struct ORPResult {
    double mean = 1.0;
    double ipr = 1.0;
    double gap_db = 0.0;
    double psnr = 0.0;
    double baseline_psnr = 0.0;
    bool satisfied = false;  // false: no probe met the tolerance
    std::vector<OrpProbe> trace;
    std::vector<std::string> notes;  // monotonicity violations

    [[nodiscard]] nlohmann::json to_json() const;
};

struct ProbeOutcome {
    double psnr = 0.0;
    double ipr = 0.0;
};

/// Binary search for the smallest mean whose average PSNR stays within eps_db
/// of the baseline. Probes are snapped to `bank`; each member is evaluated at
/// most once. At most `max_probes` probes.
ORPResult orp_search(const std::vector<double>& bank, double baseline_psnr,
                     const std::function<ProbeOutcome(double)>& evaluate, double eps_db = 1.0, double lo = 0.01,
                     double hi = 1.0, int max_probes = 8);

struct ModeSummary {
    std::string mode;
    int count = 0;
    double ipr = 0, psnr_db = 0, ssim = 0;
    double t_mask_ms = 0, t_sr_ms = 0, t_recnn_ms = 0, t_total_ms = 0;
};

struct LatencyReport {
    std::vector<ModeSummary> modes;  // in first-appearance order
    std::optional<double> speedup;   // t_total(baseline) / t_total(target)

    [[nodiscard]] const ModeSummary* find(const std::string& mode) const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Averages per mode; speedup when both modes are present. Empty input throws.
LatencyReport latency_report(const std::vector<EvalRecord>& records, const std::string& baseline = "recnn_only",
                             const std::string& target = "imls_recnn");

inline constexpr const char* kRecordCsvHeader = "view_idx,mode,ipr,psnr_db,ssim,t_sr_ms,t_infer_ms,t_total_ms";
void write_records_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path);

/// records.csv, breakdown.csv (mode,t_mask_ms,t_sr_ms,t_recnn_ms,t_total_ms), report.json,
/// breakdown.png (stacked bars) and latency_per_view.png.
void write_latency_report(const std::filesystem::path& dir, const std::vector<EvalRecord>& records,
                          const LatencyReport& report);

}  // namespace imls
