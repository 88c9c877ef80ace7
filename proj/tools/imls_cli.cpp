// imls: corpus generation, training, evaluation, ORP search and serving.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "imls/errors.hpp"
#include "imls/log.hpp"
#include "imls/nn/checkpoint.hpp"
#include "imls/nn/experiment.hpp"
#include "imls/service/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imls;

namespace {

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    int threads = -1;
    std::string log_level = "info";
    double mean = 0.2;
    std::string mode = "standalone";
    bool per_only = false;
    std::string pipeline = "all";
    std::string out;
    bool train_missing = false;
    std::string service_config;
    int port = -1;
    std::string synth_kind = "spheres";
    std::vector<int> dims{64, 64, 64};
    std::uint64_t seed = 1;
};

fs::path resolve_config(const std::string& given) {
    const char* env = std::getenv("IMLS_CONFIG_DIR");
    if (given.empty()) {
        if (!env) throw ConfigError("no --config given and IMLS_CONFIG_DIR is unset");
        return fs::path(env) / "desk.json";
    }
    fs::path p(given);
    if (!fs::exists(p) && p.is_relative() && env && fs::exists(fs::path(env) / p)) return fs::path(env) / p;
    return p;
}

ExperimentConfig load_config(const Options& o, json* resolved) {
    const fs::path path = resolve_config(o.config);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    nlohmann::json canonical = j.get<ExperimentConfig>();
    for (const auto& s : o.overrides) apply_override(canonical, s);
    auto cfg = canonical.get<ExperimentConfig>();
    if (cfg.work_dir.is_relative()) cfg.work_dir = fs::absolute(path).parent_path() / cfg.work_dir;
    cfg.work_dir = cfg.work_dir.lexically_normal();
    if (o.threads >= 0) cfg.threads = o.threads;
    cfg.validate();
    if (resolved) *resolved = json(cfg);
    return cfg;
}

void set_threads(int threads) {
    if (threads > 0) torch::set_num_threads(threads);
}

json records_summary(const std::vector<EvalRecord>& recs) {
    return {{"views", recs.size()}, {"psnr_db", mean_psnr(recs)}, {"ipr", mean_ipr(recs)}};
}

int run_verb(const std::string& verb, const Options& o, json& log) {
    if (verb == "synth-volume") {
        if (o.out.empty()) throw ConfigError("synth-volume needs --out <manifest.json>");
        if (o.dims.size() != 3) throw ConfigError("--dims takes three integers");
        const auto vol = generate_synthetic_volume(parse_synthetic_kind(o.synth_kind), {o.dims[0], o.dims[1], o.dims[2]},
                                                   o.seed);
        fs::create_directories(fs::absolute(o.out).parent_path());
        save_volume(vol, o.synth_kind, o.out);
        log["outputs"] = {o.out};
        std::cout << o.out << '\n';
        return 0;
    }
    if (verb == "serve") {
        if (o.service_config.empty()) throw ConfigError("serve needs --service-config <file>");
        auto cfg = load_service_config(o.service_config);
        if (o.port >= 0) cfg.port = o.port;
        set_threads(o.threads > 0 ? o.threads : 1);
        PipelineService service(cfg);
        Server server(service, cfg.host, cfg.port);
        std::cout << "serving on http://" << cfg.host << ':' << server.port() << std::endl;
        server.run();
        return 0;
    }

    json resolved;
    const auto cfg = load_config(o, &resolved);
    log["config_hash"] = strprintf("%016llx", static_cast<unsigned long long>(config_hash(resolved)));
    log["work_dir"] = cfg.work_dir.string();
    set_threads(cfg.threads);
    Experiment ex(cfg);

    if (verb == "gen-data") {
        const auto& corpus = ex.corpus();
        log["outputs"] = {ex.corpus_dir().string()};
        log["corpus_hash"] = strprintf("%016llx", static_cast<unsigned long long>(corpus.content_hash()));
        std::cout << ex.corpus_dir().string() << '\n';
        return 0;
    }
    if (verb == "train-recnn") {
        ex.recnn();
        log["outputs"] = {ex.recnn_checkpoint().string()};
        std::cout << ex.recnn_checkpoint().string() << '\n';
        return 0;
    }
    if (verb == "train-iml") {
        const auto mode = parse_iml_mode(o.mode);
        ex.iml(o.mean, mode);
        log["outputs"] = {ex.iml_checkpoint(o.mean, mode).string()};
        std::cout << ex.iml_checkpoint(o.mean, mode).string() << '\n';
        return 0;
    }
    if (verb == "train-ims") {
        ex.generator(o.mean, !o.per_only);
        log["outputs"] = {ex.generator_checkpoint(o.mean, !o.per_only).string()};
        std::cout << ex.generator_checkpoint(o.mean, !o.per_only).string() << '\n';
        return 0;
    }

    ex.set_allow_training(o.train_missing);
    if (verb == "eval") {
        const fs::path out = o.out.empty() ? ex.report_dir() / "eval" : fs::path(o.out);
        std::vector<std::string> kinds;
        if (o.pipeline == "all")
            kinds = {"gt", "recnn_only", "imls_recnn"};
        else
            kinds = {to_string(parse_pipeline_kind(o.pipeline))};
        std::vector<EvalRecord> all;
        json summary = json::object();
        for (const auto& k : kinds) {
            const auto recs = ex.eval(parse_pipeline_kind(k), o.mean);
            summary[k] = records_summary(recs);
            all.insert(all.end(), recs.begin(), recs.end());
        }
        const auto report = latency_report(all);
        write_latency_report(out, all, report);
        summary["speedup"] = report.speedup ? json(*report.speedup) : json(nullptr);
        log["outputs"] = {out.string()};
        log["summary"] = summary;
        std::cout << summary.dump(2) << '\n';
        return 0;
    }
    if (verb == "orp") {
        const auto r = ex.orp();
        log["outputs"] = {(ex.report_dir() / "orp.json").string()};
        log["summary"] = {{"mean", r.mean}, {"ipr", r.ipr}, {"gap_db", r.gap_db}, {"satisfied", r.satisfied}};
        std::cout << r.to_json().dump(2) << '\n';
        return r.satisfied ? 0 : 1;
    }
    throw ConfigError("unknown verb " + verb);
}

void append_run_log(const json& entry, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / "runs.jsonl", std::ios::app) << entry.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"imls: importance-mask learning and synthesis for volume rendering"};
    app.require_subcommand(1, 1);
    Options o;
    app.add_option("--threads", o.threads, "torch intra-op threads (default: config value)");
    app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error")->capture_default_str();

    auto with_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "experiment config (default: $IMLS_CONFIG_DIR/desk.json)");
        sub->add_option("--set", o.overrides, "override a scalar field, e.g. train.iml.max_epochs=5");
        return sub;
    };
    with_config(app.add_subcommand("gen-data", "render the training corpus"));
    with_config(app.add_subcommand("train-recnn", "train the reconstruction network"));
    auto* iml = with_config(app.add_subcommand("train-iml", "train an importance-mask learning network"));
    iml->add_option("--mean", o.mean, "target mean of the normalized importance map")->capture_default_str();
    iml->add_option("--mode", o.mode, "standalone|end_to_end")->capture_default_str();
    auto* ims = with_config(app.add_subcommand("train-ims", "train the view-to-mask generator"));
    ims->add_option("--mean", o.mean, "bank mean whose IML labels are used")->capture_default_str();
    ims->add_flag("--per-only", o.per_only, "drop the adversarial term");
    auto* ev = with_config(app.add_subcommand("eval", "evaluate pipelines on the exploration trajectory"));
    ev->add_option("--pipeline", o.pipeline, "gt|recnn_only|imls_recnn|iml_encoder|all")->capture_default_str();
    ev->add_option("--mean", o.mean, "bank mean for the full pipeline")->capture_default_str();
    ev->add_option("--out", o.out, "report directory");
    ev->add_flag("--train-missing", o.train_missing, "train absent checkpoints instead of failing");
    auto* orp = with_config(app.add_subcommand("orp", "search the optimal rendering percentage"));
    orp->add_flag("--train-missing", o.train_missing, "train absent checkpoints instead of failing");
    auto* serve = app.add_subcommand("serve", "run the HTTP/WebSocket pipeline service");
    serve->add_option("--service-config", o.service_config, "service config file")->required();
    serve->add_option("--port", o.port, "override the configured port");
    auto* synth = app.add_subcommand("synth-volume", "write a synthetic volume and its manifest");
    synth->add_option("--kind", o.synth_kind, "spheres|turbulence|shell")->capture_default_str();
    synth->add_option("--dims", o.dims, "three grid sizes")->expected(3);
    synth->add_option("--seed", o.seed)->capture_default_str();
    synth->add_option("--out", o.out, "manifest path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "error: " << e.what() << '\n';
        return 2;
    }

    set_log_level(o.log_level);
    const std::string verb = app.get_subcommands().front()->get_name();
    json log = {{"verb", verb}, {"argv", std::vector<std::string>(argv + 1, argv + argc)},
                {"started", std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count()}};
    const auto t0 = std::chrono::steady_clock::now();
    int code = 1;
    try {
        code = run_verb(verb, o, log);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        msg = msg.substr(0, msg.find('\n'));
        std::cerr << "error: " << msg << '\n';
        log["error"] = msg;
        code = 1;
    }
    log["exit_code"] = code;
    log["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    append_run_log(log, log.contains("work_dir") ? fs::path(log["work_dir"].get<std::string>()) : fs::current_path());
    return code;
}
