#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>

#include "imls/camera.hpp"
#include "imls/compaction.hpp"
#include "imls/nn/iml.hpp"
#include "imls/nn/ims.hpp"
#include "imls/nn/recnn.hpp"
#include "imls/renderer.hpp"
#include "imls/transfer_function.hpp"
#include "imls/volume.hpp"

namespace imls {

/// Eyes uniform in direction and radius within [radius_min, radius_max], looking
/// at the origin; up is +y perturbed and re-orthogonalized. Deterministic per seed.
std::vector<ViewParams> sample_views(int count, double radius_min, double radius_max, std::uint64_t seed,
                                     double up_jitter = 0.15);

/// Smooth orbit (azimuth sweep with an elevation wobble and a breathing radius)
/// imitating a user exploring the volume.
std::vector<ViewParams> exploration_trajectory(int count, double radius_min, double radius_max,
                                               std::uint64_t seed);

/// Rendered training data for one dataset and sampling pattern.
struct Corpus {
    std::vector<ViewParams> views;
    std::vector<Image> fr;  // m x m, quantized to 8 bits so that PNG storage is lossless
    std::vector<Image> c;   // n x n
    std::vector<int> train;
    std::vector<int> val;
    SamplingPattern pattern;
    CompactionMap map;

    [[nodiscard]] std::size_t size() const { return views.size(); }
    [[nodiscard]] Image pr_image(std::size_t i) const { return decompact(map, c[i]); }
    [[nodiscard]] std::uint64_t content_hash() const;

    /// views.json, fr/####.png, c/####.png, split.json, pattern.png(+json), map.bin, index.json.
    void save(const std::filesystem::path& dir) const;
    static Corpus load(const std::filesystem::path& dir);
};

/// 9:1 train/val split (val gets round(count / 10) views).
void split_indices(int count, std::uint64_t seed, std::vector<int>& train, std::vector<int>& val);

/// Per view: FR render, pattern filter, compaction. Render errors are rethrown
/// with the view index.
Corpus build_corpus(const Volume& volume, const TransferFunction& tf, const RenderConfig& cfg,
                    const std::vector<ViewParams>& views, const SamplingPattern& pattern, const CompactionMap& map,
                    std::uint64_t split_seed);

/// Rounds to the nearest 1/255.
void quantize8(Image& img);

struct TrainOptions {
    int batch_size = 8;
    double lr = 1e-3;
    int patience = 20;
    int max_epochs = 300;
    double min_delta = 0.0;  // improvement must exceed this
    std::uint64_t seed = 1;
    int threads = 0;         // 0 keeps the torch default
    std::function<void(int epoch, double train_loss, double val_loss)> on_epoch;
};
void to_json(nlohmann::json& j, const TrainOptions& o);
void from_json(const nlohmann::json& j, TrainOptions& o);

struct TrainingReport {
    std::string regime;
    int epochs = 0;
    double seconds = 0.0;
    double best_val = 0.0;
    int best_epoch = 0;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    nlohmann::json metrics = nlohmann::json::object();  // regime-specific curves and summaries
    nlohmann::json config = nlohmann::json::object();
    std::vector<std::string> warnings;
    bool diverged = false;

    [[nodiscard]] nlohmann::json to_json() const;
    /// report.json plus a loss-curve PNG.
    void save(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Tracks the best validation loss; `stop()` after `patience` epochs without improvement.
class EarlyStopper {
public:
    EarlyStopper(int patience, double min_delta);
    /// Returns true when `val` improves on the best so far.
    bool update(double val);
    [[nodiscard]] bool stop() const { return since_best_ >= patience_; }
    [[nodiscard]] double best() const { return best_; }
    [[nodiscard]] int best_epoch() const { return best_epoch_; }

private:
    int patience_;
    double min_delta_;
    double best_;
    int best_epoch_ = 0;
    int epoch_ = 0;
    int since_best_ = 0;
};

struct TrainedRecNN {
    RecNN net{nullptr};
    TrainingReport report;
};
TrainedRecNN train_recnn(const Corpus& corpus, const RecNNConfig& cfg, const TrainOptions& opts);

/// Input tensor the RecNN expects for a (reconstructed) C-image batch:
/// the C-image itself for super-resolution, its decompaction for foveated.
torch::Tensor recnn_input(const RecNN& net, const CompactionMap& map, const torch::Tensor& c_batch);
/// B x 1 x m x m pattern mask (foveated) or an undefined tensor.
torch::Tensor recnn_mask(const RecNN& net, const SamplingPattern& pattern, std::int64_t batch);

enum class IMLMode { Standalone, EndToEnd };
std::string to_string(IMLMode m);
IMLMode parse_iml_mode(const std::string& s);

struct TrainedIML {
    IMLNet net{nullptr};
    TrainingReport report;
};
/// End-to-end mode trains `recnn` jointly (in place; its best-epoch state is restored).
TrainedIML train_iml(const Corpus& corpus, const IMLConfig& cfg, const TrainOptions& opts, IMLMode mode,
                     RecNN* recnn = nullptr);

/// Deterministic labels: inference-mode IML masks (fixed P) for every corpus view.
std::vector<BoolGrid> ims_labels(IMLNet& iml, const Corpus& corpus);
/// index.json {views, masks} + masks/####.png.
void save_label_set(const std::filesystem::path& dir, const std::vector<ViewParams>& views,
                    const std::vector<BoolGrid>& labels);
void load_label_set(const std::filesystem::path& dir, std::vector<ViewParams>& views, std::vector<BoolGrid>& labels);

struct IMSData {
    std::vector<ViewParams> views;
    std::vector<BoolGrid> labels;
    std::vector<int> train;
    std::vector<int> val;
    BoolGrid valid;  // non-padding slots
};

struct TrainedIMS {
    Generator generator{nullptr};
    Discriminator discriminator{nullptr};
    TrainingReport report;
};
/// Alternating discriminator / generator steps; generator objective
/// 1 * PER + 0.01 * ADV (ADV dropped when `adversarial` is false). Early stopping
/// on validation PER.
TrainedIMS train_ims(const IMSData& data, const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg,
                     FeatureExtractor& extractor, const TrainOptions& opts, bool adversarial = true);

/// Mean per-pixel variance of generator outputs across the given views.
double output_variance(Generator& gen, const std::vector<ViewParams>& views, double orbit_radius);

/// Probability that a random positive outscores a random negative (ties count half).
double auc(const std::vector<double>& positives, const std::vector<double>& negatives);

}  // namespace imls
