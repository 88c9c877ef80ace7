#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <json.hpp>
#include <optional>

#include "imls/nn/iml.hpp"
#include "imls/nn/ims.hpp"
#include "imls/nn/recnn.hpp"

namespace imls {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Header of the checkpoint container:
/// "IMLSCKPT" | u32 version | u64 json length | json | torch archive.
struct CheckpointMeta {
    std::uint32_t version = kCheckpointVersion;
    std::string kind;  // iml | recnn | generator | discriminator
    nlohmann::json config;
    std::uint64_t config_hash = 0;
    nlohmann::json extra = nlohmann::json::object();  // mode, seed, u, alpha, report summary, ...
};

std::uint64_t config_hash(const nlohmann::json& config);

void save_checkpoint(const std::filesystem::path& path, torch::nn::Module& module, const std::string& kind,
                     const nlohmann::json& config, const nlohmann::json& extra = nlohmann::json::object());
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);
/// Loads weights into `module` after checking the kind and the stored config hash.
/// With `expected_config`, also requires its hash to equal the stored one.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module,
                               const std::string& kind,
                               const std::optional<nlohmann::json>& expected_config = std::nullopt);

/// In-memory snapshot of module state (for best-epoch restore).
std::string snapshot_state(torch::nn::Module& module);
void restore_state(torch::nn::Module& module, const std::string& state);

void save_iml(const std::filesystem::path& path, IMLNet& net, const std::string& mode,
              const nlohmann::json& extra = nlohmann::json::object());
IMLNet load_iml(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);
void save_recnn(const std::filesystem::path& path, RecNN& net, const nlohmann::json& extra = nlohmann::json::object());
RecNN load_recnn(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);
void save_generator(const std::filesystem::path& path, Generator& net,
                    const nlohmann::json& extra = nlohmann::json::object());
Generator load_generator(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace imls
