#include "../support/doctest_torch.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "imls/errors.hpp"
#include "imls/image_io.hpp"
#include "imls/metrics.hpp"
#include "imls/nn/evaluation.hpp"
#include "imls/nn/experiment.hpp"
#include "imls/nn/training.hpp"
#include "test_helpers.hpp"

using namespace imls;

namespace {

const std::vector<double> kBank{0.05, 0.1, 0.2, 0.4, 0.7, 1.0};

/// PSNR rising linearly with the mean, 30 dB at 1.0.
ProbeOutcome linear(double u) { return {20.0 + 10.0 * u, u}; }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TinyPipeline {
    Volume volume = generate_synthetic_volume(SyntheticKind::Spheres, {16, 16, 16}, 1);
    TransferFunction tf = TransferFunction::default_ramp();
    PipelineContext ctx;
    MaskStage stage;

    TinyPipeline() {
        ctx.volume = &volume;
        ctx.tf = &tf;
        ctx.render.resolution = 32;
        ctx.render.sample_distance = 0.05;
        ctx.pattern = downsampling_pattern(32, 2);
        ctx.map = build_compaction_map(ctx.pattern, 16);
        RecNNConfig rc;
        rc.scale = 2;
        rc.blocks = 1;
        rc.channels = 4;
        rc.output_resolution = 32;
        torch::manual_seed(2);
        ctx.recnn = RecNN(rc);
        ctx.recnn->eval();
        IMLConfig ic;
        ic.encoder = {2, 4, 3, 1};
        ic.decoder = {2, 4, 3, 3};
        ic.resolution = 16;
        stage.iml = IMLNet(ic);
        stage.iml->eval();
        GeneratorConfig g;
        g.layers = 4;
        g.base_channels = 4;
        g.max_channels = 8;
        g.latent = 8;
        stage.generator = Generator(g);
        stage.generator->eval();
    }
};

}  // namespace

TEST_CASE("snap_to_bank") {
    CHECK(snap_to_bank(kBank, 0.505) == 0.4);
    CHECK(snap_to_bank(kBank, 0.3) == 0.4);  // tie goes to the larger mean
    CHECK(snap_to_bank(kBank, 0.0) == 0.05);
    CHECK(snap_to_bank(kBank, 5.0) == 1.0);
    CHECK_THROWS_AS(snap_to_bank({}, 0.5), ParameterError);
}

TEST_CASE("orp_search: infinite tolerance returns the lowest probe") {
    const auto r = orp_search(kBank, 30.0, linear, std::numeric_limits<double>::infinity());
    CHECK(r.satisfied);
    CHECK(r.mean == 0.05);
    CHECK(r.trace.size() == 8);
    double lowest = 1.0;
    for (const auto& p : r.trace) lowest = std::min(lowest, p.bank_mean);
    CHECK(r.mean == lowest);
}

TEST_CASE("orp_search: baseline against itself has zero gap") {
    const auto r = orp_search(kBank, 30.0, [](double) { return ProbeOutcome{30.0, 0.5}; }, 1.0);
    CHECK(r.satisfied);
    CHECK(r.gap_db == 0.0);
}

TEST_CASE("orp_search: finds the smallest member within tolerance") {
    int calls = 0;
    const auto r = orp_search(kBank, 30.0, [&](double u) { ++calls; return linear(u); }, 3.5);
    // 20 + 10u >= 26.5  <=>  u >= 0.65, so 0.7 is the answer.
    CHECK(r.satisfied);
    CHECK(r.mean == 0.7);
    CHECK(r.gap_db <= 3.5);
    CHECK(r.trace.size() <= 8);
    CHECK(calls <= 6);  // members are evaluated once each
    for (const auto& p : r.trace) CHECK(p.within == (p.gap <= 3.5));
}

TEST_CASE("orp_search: unsatisfiable tolerance flags the result") {
    const auto r = orp_search(kBank, 40.0, linear, 1.0);
    CHECK_FALSE(r.satisfied);
    CHECK(r.mean == 1.0);
    CHECK(r.psnr == 30.0);
}

TEST_CASE("orp_search logs monotonicity violations") {
    // PSNR falling with the mean contradicts the search's assumption.
    const auto r = orp_search(kBank, 30.0, [](double u) { return ProbeOutcome{30.0 - 10.0 * u, u}; }, 1.0);
    CHECK_FALSE(r.notes.empty());
    CHECK(orp_search(kBank, 30.0, linear, 1.0).notes.empty());
    const auto j = r.to_json();
    CHECK(j["trace"].size() == r.trace.size());
}

TEST_CASE("latency report: equal records give speedup 1 and sums add up") {
    std::vector<EvalRecord> recs;
    for (const char* mode : {"recnn_only", "imls_recnn"})
        for (int i = 0; i < 5; ++i) {
            EvalRecord r;
            r.view_idx = i;
            r.mode = mode;
            r.t_mask = 0.001;
            r.t_sr = 0.02;
            r.t_recnn = 0.004;
            r.t_infer = r.t_mask + r.t_recnn;
            r.t_total = r.t_sr + r.t_infer;
            recs.push_back(r);
        }
    const auto rep = latency_report(recs);
    REQUIRE(rep.speedup.has_value());
    CHECK(*rep.speedup == doctest::Approx(1.0));
    for (const auto& m : rep.modes)
        CHECK(std::abs(m.t_mask_ms + m.t_sr_ms + m.t_recnn_ms - m.t_total_ms) <= 0.01 * m.t_total_ms);
    CHECK_THROWS_AS(latency_report({}), ParameterError);

    test::TempDir dir("latency");
    write_latency_report(dir.path(), recs, rep);
    for (const char* f : {"records.csv", "breakdown.csv", "report.json", "breakdown.png", "latency_per_view.png"})
        CHECK(std::filesystem::exists(dir / f));
}

TEST_CASE("record CSV matches the documented schema") {
    EvalRecord r;
    r.view_idx = 3;
    r.mode = "imls_recnn";
    r.ipr = 0.25;
    r.psnr_db = 31.5;
    r.ssim = 0.875;
    r.t_sr = 0.012;
    r.t_infer = 0.0045;
    r.t_total = 0.0165;
    test::TempDir dir("csv");
    write_records_csv(dir / "r.csv", {r});
    CHECK(slurp(dir / "r.csv") ==
          "view_idx,mode,ipr,psnr_db,ssim,t_sr_ms,t_infer_ms,t_total_ms\n"
          "3,imls_recnn,0.250000,31.500000,0.875000,12.000000,4.500000,16.500000\n");
    const auto back = read_records_csv(dir / "r.csv");
    REQUIRE(back.size() == 1);
    CHECK(back[0].mode == "imls_recnn");
    CHECK(back[0].t_total == doctest::Approx(0.0165));

    std::ofstream(dir / "bad.csv") << "a,b\n";
    CHECK_THROWS_AS(read_records_csv(dir / "bad.csv"), FormatError);
}

TEST_CASE("run_view: accounting identity, IPR conventions and determinism") {
    TinyPipeline tp;
    const auto views = exploration_trajectory(3, 2.8, 3.5, 1);
    const auto ref = render_reference(tp.ctx, views);

    const auto gt = eval_trajectory(tp.ctx, PipelineKind::GroundTruth, nullptr, ref);
    CHECK(gt.size() == 3);
    CHECK(gt[0].psnr_db == kPsnrCap);
    const auto base = eval_trajectory(tp.ctx, PipelineKind::RecNNOnly, nullptr, ref);
    CHECK(base[0].ipr == 1.0);
    const auto imls = eval_trajectory(tp.ctx, PipelineKind::Imls, &tp.stage, ref);
    const auto enc = eval_trajectory(tp.ctx, PipelineKind::ImlRecNN, &tp.stage, ref);
    for (const auto* set : {&gt, &base, &imls, &enc})
        for (const auto& r : *set) {
            CHECK(std::abs(r.t_total - (r.t_sr + r.t_infer)) < 1e-9);
            CHECK(std::abs(r.t_infer - (r.t_mask + r.t_recnn)) < 1e-9);
            CHECK(r.ipr >= 0.0);
            CHECK(r.ipr <= 1.0);
            CHECK(std::isfinite(r.psnr_db));
        }
    const auto a = run_view(tp.ctx, PipelineKind::Imls, &tp.stage, views[1], nullptr);
    const auto b = run_view(tp.ctx, PipelineKind::Imls, &tp.stage, views[1], nullptr);
    CHECK(a.image.data == b.image.data);
    CHECK(a.slots.cells == b.slots.cells);

    MaskStage all{tp.stage.iml, nullptr};
    CHECK(run_view(tp.ctx, PipelineKind::Imls, &all, views[0], nullptr).record.ipr == 1.0);
    CHECK_THROWS_AS(run_view(tp.ctx, PipelineKind::Imls, nullptr, views[0], nullptr), ConfigError);
    PipelineContext no_net = tp.ctx;
    no_net.recnn = nullptr;
    CHECK_THROWS_AS(run_view(no_net, PipelineKind::RecNNOnly, nullptr, views[0], nullptr), ConfigError);
}

TEST_CASE("run_view: empty mask is flagged low confidence") {
    TinyPipeline tp;
    // A generator whose output is always negative selects nothing.
    for (auto& p : tp.stage.generator->parameters()) p.data().zero_();
    torch::NoGradGuard g;
    for (auto& p : tp.stage.generator->named_parameters())
        if (p.key().find("bias") != std::string::npos) p.value().fill_(-1.0);
    const auto r = run_view(tp.ctx, PipelineKind::Imls, &tp.stage, ViewParams{}, nullptr);
    CHECK(r.record.ipr == 0.0);
    CHECK(r.record.low_confidence);
    CHECK(std::all_of(r.image.data.begin(), r.image.data.end(), [](float v) { return std::isfinite(v); }));
}

TEST_CASE("experiment config: overrides and strict keys") {
    nlohmann::json j = ExperimentConfig{};
    apply_override(j, "train.iml.max_epochs=5");
    apply_override(j, "pattern.kind=foveal");
    apply_override(j, "orp_eps_db=0.5");
    const auto cfg = j.get<ExperimentConfig>();
    CHECK(cfg.train_iml.max_epochs == 5);
    CHECK(cfg.pattern == "foveal");
    CHECK(cfg.orp_eps_db == 0.5);
    CHECK_THROWS_AS(apply_override(j, "train.iml.nope=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "train.iml=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "novalue"), ConfigError);

    j["mystery"] = 1;
    CHECK_THROWS_AS(j.get<ExperimentConfig>(), ConfigError);
}
