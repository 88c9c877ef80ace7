#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <json.hpp>
#include <optional>

#include "imls/errors.hpp"
#include "imls/nn/experiment.hpp"

namespace imls {

/// Error with an HTTP status: 400 malformed request, 404 unknown dataset,
/// 409 mode unavailable for lack of a checkpoint.
class ServiceError : public Error {
public:
    ServiceError(int status, const std::string& msg) : Error(msg), status_(status) {}
    [[nodiscard]] int status() const { return status_; }

private:
    int status_;
};

struct RenderRequest {
    std::string dataset;
    ViewParams view;
    std::string mode = "imls";  // gt | recnn | imls
    std::optional<std::string> pattern;
    std::optional<double> mean;
    bool mask_overlay = false;
    bool psnr = false;
    std::optional<std::int64_t> seq;  // echoed back, used by streaming clients

    /// Throws ServiceError(400) on malformed input.
    static RenderRequest parse(const nlohmann::json& j);
};

struct RenderTiming {
    double t_mask_ms = 0, t_sr_ms = 0, t_recnn_ms = 0, t_total_ms = 0;
};

struct RenderResponse {
    std::string dataset;
    std::string mode;
    double mean = 1.0;
    double ipr = 1.0;
    bool low_confidence = false;
    RenderTiming timing;
    std::vector<std::uint8_t> image_png;
    std::vector<std::uint8_t> mask_png;  // empty unless requested
    std::optional<double> psnr_vs_gt;
    std::optional<std::int64_t> seq;

    /// With `embed_image` the PNG travels base64-encoded in "image".
    [[nodiscard]] nlohmann::json to_json(bool embed_image = true) const;
};

struct MemberPaths {
    double mean = 0.0;
    std::filesystem::path iml;
    std::filesystem::path generator;
};

struct DatasetEntry {
    std::string id;
    std::filesystem::path experiment;  // experiment config: volume, renderer, pattern
    bool auto_checkpoints = false;     // take cached checkpoints from the experiment work dir
    std::filesystem::path recnn;
    std::vector<MemberPaths> members;
    double default_mean = 0.2;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<DatasetEntry> datasets;
};
/// Relative paths resolve against the config file's directory.
ServiceConfig load_service_config(const std::filesystem::path& path);
ServiceConfig parse_service_config(const nlohmann::json& j, const std::filesystem::path& base);

/// Immutable after construction; handlers may run concurrently.
class PipelineService {
public:
    explicit PipelineService(const ServiceConfig& cfg);
    ~PipelineService();

    [[nodiscard]] nlohmann::json handle_list() const;
    [[nodiscard]] RenderResponse handle_render(const RenderRequest& req) const;

private:
    struct Dataset;
    std::map<std::string, std::unique_ptr<Dataset>> datasets_;
};

}  // namespace imls
