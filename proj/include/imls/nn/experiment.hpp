#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <json.hpp>
#include <optional>

#include "imls/nn/evaluation.hpp"
#include "imls/nn/training.hpp"

namespace imls {

/// One run configuration: dataset, pattern, network sizes, training options and
/// evaluation settings. Loaded from a single JSON file.
struct ExperimentConfig {
    std::string name = "desk";
    std::filesystem::path work_dir = "work/desk";

    // Dataset: a manifest path, or a synthetic volume when empty.
    std::filesystem::path manifest;
    std::string synthetic = "spheres";
    std::array<int, 3> dims{64, 64, 64};
    std::uint64_t volume_seed = 1;
    std::filesystem::path transfer_function;  // empty: default ramp

    RenderConfig render;
    std::string pattern = "downsample";  // downsample | foveal
    int factor = 2;
    std::array<double, 2> foveal_center{0.0, 0.0};
    std::uint64_t foveal_seed = 3;
    int compact_resolution = 64;

    int views = 300;
    double radius_min = 2.8;
    double radius_max = 3.5;
    std::uint64_t view_seed = 11;
    std::uint64_t split_seed = 12;
    int trajectory = 40;
    std::uint64_t trajectory_seed = 21;

    RecNNConfig recnn;
    IMLConfig iml;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    TrainOptions train_recnn;
    TrainOptions train_iml;
    TrainOptions train_ims;

    std::vector<double> bank{0.05, 0.1, 0.2, 0.4, 0.7, 1.0};
    std::string extractor = "encoder";  // encoder | random
    int extractor_levels = 2;
    double orp_eps_db = 1.0;
    int threads = 1;  // torch intra-op threads for evaluation and training

    void validate() const;
};
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Applies `key=value` overrides to scalar fields addressed by dotted paths
/// (e.g. `train_iml.max_epochs=5`). Unknown keys and non-scalar targets throw.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Lazily builds, trains and caches every artifact of one configuration under
/// `work_dir`. Cached files are keyed by a hash of the settings they depend on.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);

    [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
    /// When false, a missing checkpoint raises ConfigError instead of training.
    void set_allow_training(bool allow) { allow_training_ = allow; }
    [[nodiscard]] const std::filesystem::path& dir() const { return cfg_.work_dir; }

    const Volume& volume();
    const TransferFunction& transfer_function();
    const SamplingPattern& pattern();
    const CompactionMap& map();
    const Corpus& corpus();

    RecNN recnn();
    IMLNet iml(double u, IMLMode mode = IMLMode::Standalone);
    /// RecNN trained jointly with the end-to-end IML at `u`.
    RecNN e2e_recnn(double u);
    std::vector<BoolGrid> labels(double u);
    Generator generator(double u, bool adversarial = true);

    /// Context using the standalone RecNN, or `net` when given.
    PipelineContext context(RecNN net = nullptr);
    /// Full-pipeline stage for a bank mean; 1.0 selects every slot.
    MaskStage stage(double u, bool adversarial = true);
    const Reference& trajectory_reference();

    std::vector<EvalRecord> eval(PipelineKind kind, double u = 1.0);
    /// ORP search over the bank; also records the latency comparison at the result.
    ORPResult orp();

    [[nodiscard]] std::filesystem::path checkpoint_path(const std::string& stem) const;
    [[nodiscard]] std::filesystem::path report_dir() const { return cfg_.work_dir / "reports"; }
    [[nodiscard]] std::string corpus_key() const;
    [[nodiscard]] std::filesystem::path corpus_dir() const;

    // Where each artifact is cached; nothing is trained by these.
    [[nodiscard]] std::filesystem::path recnn_checkpoint() const;
    [[nodiscard]] std::filesystem::path iml_checkpoint(double u, IMLMode mode = IMLMode::Standalone) const;
    [[nodiscard]] std::filesystem::path e2e_recnn_checkpoint(double u) const;
    [[nodiscard]] std::filesystem::path generator_checkpoint(double u, bool adversarial = true) const;

private:
    std::unique_ptr<FeatureExtractor> make_extractor();
    std::string iml_key(double u, IMLMode mode) const;
    std::string recnn_stem() const;
    std::string generator_stem(double u, bool adversarial) const;

    void require_trainable(const std::filesystem::path& missing) const;

    ExperimentConfig cfg_;
    bool allow_training_ = true;
    std::optional<Volume> volume_;
    std::optional<TransferFunction> tf_;
    std::optional<SamplingPattern> pattern_;
    std::optional<CompactionMap> map_;
    std::optional<Corpus> corpus_;
    std::optional<Reference> reference_;
    RecNN recnn_{nullptr};
    std::map<std::string, IMLNet> imls_;
    std::map<std::string, RecNN> e2e_recnns_;
    std::map<std::string, Generator> generators_;
};

}  // namespace imls
