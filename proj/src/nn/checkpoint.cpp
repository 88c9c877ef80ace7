#include "imls/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "imls/errors.hpp"
#include "imls/hash.hpp"

namespace imls {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'L', 'S', 'C', 'K', 'P', 'T'};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Container {
    CheckpointMeta meta;
    std::string weights;
};

Container parse(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const std::size_t header = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < header || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError(path.string() + " is not a checkpoint");
    std::uint32_t version = 0;
    std::uint64_t json_len = 0;
    std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
    std::memcpy(&json_len, bytes.data() + sizeof(kMagic) + sizeof(version), sizeof(json_len));
    if (version != kCheckpointVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    if (json_len > bytes.size() - header) throw FormatError(path.string() + ": truncated checkpoint header");
    Container c;
    const auto j = nlohmann::json::parse(bytes.substr(header, json_len));
    c.meta.version = version;
    c.meta.kind = j.at("kind").get<std::string>();
    c.meta.config = j.at("config");
    c.meta.config_hash = j.at("config_hash").get<std::uint64_t>();
    c.meta.extra = j.value("extra", nlohmann::json::object());
    c.weights = bytes.substr(header + json_len);
    return c;
}

}  // namespace

std::uint64_t config_hash(const nlohmann::json& config) { return fnv1a(config.dump()); }

void save_checkpoint(const std::filesystem::path& path, torch::nn::Module& module, const std::string& kind,
                     const nlohmann::json& config, const nlohmann::json& extra) {
    const nlohmann::json header = {{"version", kCheckpointVersion}, {"kind", kind}, {"config", config},
                                   {"config_hash", config_hash(config)}, {"extra", extra}};
    const std::string text = header.dump();
    const std::string weights = snapshot_state(module);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t len = text.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(weights.data(), static_cast<std::streamsize>(weights.size()));
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) { return parse(path).meta; }

CheckpointMeta load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module, const std::string& kind,
                               const std::optional<nlohmann::json>& expected_config) {
    auto c = parse(path);
    if (c.meta.kind != kind)
        throw ConfigError(path.string() + " holds a " + c.meta.kind + " checkpoint, expected " + kind);
    if (config_hash(c.meta.config) != c.meta.config_hash)
        throw ConfigError(path.string() + ": stored config does not match its hash");
    if (expected_config && config_hash(*expected_config) != c.meta.config_hash)
        throw ConfigError(path.string() + ": config hash mismatch with the requested configuration");
    restore_state(module, c.weights);
    return c.meta;
}

std::string snapshot_state(torch::nn::Module& module) {
    torch::serialize::OutputArchive archive;
    module.save(archive);
    std::ostringstream ss;
    archive.save_to(ss);
    return ss.str();
}

void restore_state(torch::nn::Module& module, const std::string& state) {
    torch::serialize::InputArchive archive;
    std::istringstream ss(state);
    archive.load_from(ss);
    module.load(archive);
}

void save_iml(const std::filesystem::path& path, IMLNet& net, const std::string& mode, const nlohmann::json& extra) {
    nlohmann::json e = extra;
    e["mode"] = mode;
    e["u"] = net->config().norm.u;
    e["alpha"] = net->config().norm.alpha;
    e["seed"] = net->config().inference_seed;
    save_checkpoint(path, *net, "iml", net->config(), e);
}

IMLNet load_iml(const std::filesystem::path& path, CheckpointMeta* meta) {
    const auto header = read_checkpoint_meta(path);
    if (header.kind != "iml") throw ConfigError(path.string() + " is not an IML checkpoint");
    IMLNet net(header.config.get<IMLConfig>());
    auto m = load_checkpoint(path, *net, "iml");
    net->eval();
    if (meta) *meta = m;
    return net;
}

void save_recnn(const std::filesystem::path& path, RecNN& net, const nlohmann::json& extra) {
    save_checkpoint(path, *net, "recnn", net->config(), extra);
}

RecNN load_recnn(const std::filesystem::path& path, CheckpointMeta* meta) {
    const auto header = read_checkpoint_meta(path);
    if (header.kind != "recnn") throw ConfigError(path.string() + " is not a RecNN checkpoint");
    RecNN net(header.config.get<RecNNConfig>());
    auto m = load_checkpoint(path, *net, "recnn");
    net->eval();
    if (meta) *meta = m;
    return net;
}

void save_generator(const std::filesystem::path& path, Generator& net, const nlohmann::json& extra) {
    save_checkpoint(path, *net, "generator", net->config(), extra);
}

Generator load_generator(const std::filesystem::path& path, CheckpointMeta* meta) {
    const auto header = read_checkpoint_meta(path);
    if (header.kind != "generator") throw ConfigError(path.string() + " is not a generator checkpoint");
    Generator net(header.config.get<GeneratorConfig>());
    auto m = load_checkpoint(path, *net, "generator");
    net->eval();
    if (meta) *meta = m;
    return net;
}

}  // namespace imls
