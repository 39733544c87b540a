#include "bbnas/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "bbnas/common/error.hpp"
#include "bbnas/common/hash.hpp"
#include "bbnas/data/dataset.hpp"
#include "bbnas/train/config.hpp"
#include "json.hpp"

namespace bbnas::train {

namespace {

constexpr char kMagic[8] = {'B', 'B', 'N', 'A', 'S', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
    return v;
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

void put_doubles(std::string& out, std::span<const double> xs) {
    for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

std::string_view as_view(std::span<const std::uint8_t> b) {
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const bbn::BBNModel& model,
                     const CheckpointMeta& meta) {
    nlohmann::json h;
    h["config"] = meta.config_text;
    h["config_hash"] = hex64(meta.config_hash);
    h["epochs_done"] = meta.epochs_done;
    h["model"] = {{"in_channels", meta.in_channels},
                  {"image_size", meta.image_size},
                  {"num_classes", meta.num_classes}};
    h["normalization"] = {{"mean", meta.norm_mean}, {"std", meta.norm_std}};
    h["rng"] = meta.rng_states;
    h["history"] = meta.history.to_json();
    auto& ps = h["params"] = nlohmann::json::array();
    std::string payload;
    const auto& store = model.params();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& p = store[i];
        ps.push_back({{"name", p.name()},
                      {"role", std::string(ad::role_name(p.role()))},
                      {"shape", p.value().shape()}});
        put_doubles(payload, p.value().data());
        std::vector<double> mom = p.momentum();
        if (mom.empty()) mom.assign(p.value().size(), 0.0);
        put_doubles(payload, mom);
    }
    const std::string header = h.dump();

    std::string file(kMagic, sizeof kMagic);
    put_u32(file, kVersion);
    put_u64(file, header.size());
    file += header;
    file += payload;
    put_u64(file, fnv1a(file));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::io, "cannot write checkpoint " + tmp.string());
        out.write(file.data(), static_cast<std::streamsize>(file.size()));
        out.flush();
        require(out.good(), ErrorKind::io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> b) {
    const std::size_t fixed = sizeof kMagic + 4 + 8;
    require(b.size() >= fixed + 8, ErrorKind::format, "checkpoint: truncated file");
    require(std::memcmp(b.data(), kMagic, sizeof kMagic) == 0, ErrorKind::format,
            "checkpoint: bad magic");
    const auto version = get_u32(b, sizeof kMagic);
    require(version == kVersion, ErrorKind::format,
            "checkpoint: unsupported version " + std::to_string(version));
    const auto stored_sum = get_u64(b, b.size() - 8);
    require(fnv1a(as_view(b.first(b.size() - 8))) == stored_sum, ErrorKind::format,
            "checkpoint: checksum mismatch (file corrupted)");
    const auto header_len = get_u64(b, sizeof kMagic + 4);
    require(header_len <= b.size() - fixed - 8, ErrorKind::format, "checkpoint: header overruns file");

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(as_view(b.subspan(fixed, header_len)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("checkpoint: bad header: ") + e.what());
    }

    Checkpoint ck;
    std::size_t at = fixed + header_len;
    const std::size_t payload_end = b.size() - 8;
    try {
        auto& m = ck.meta;
        m.config_text = h.at("config").get<std::string>();
        const auto hash_text = h.at("config_hash").get<std::string>();
        m.config_hash = std::stoull(hash_text, nullptr, 16);
        m.epochs_done = h.at("epochs_done").get<std::size_t>();
        m.in_channels = h.at("model").at("in_channels").get<std::size_t>();
        m.image_size = h.at("model").at("image_size").get<std::size_t>();
        m.num_classes = h.at("model").at("num_classes").get<std::size_t>();
        m.norm_mean = h.at("normalization").at("mean").get<std::vector<double>>();
        m.norm_std = h.at("normalization").at("std").get<std::vector<double>>();
        m.rng_states = h.at("rng").get<std::map<std::string, std::string>>();
        m.history = RunHistory::from_json(h.at("history"));
        for (const auto& jp : h.at("params")) {
            StoredParam p;
            p.name = jp.at("name").get<std::string>();
            p.role = jp.at("role").get<std::string>();
            p.shape = jp.at("shape").get<ad::Shape>();
            const std::size_t n = ad::numel(p.shape);
            require(at + 16 * n <= payload_end, ErrorKind::format,
                    "checkpoint: payload too short for " + p.name);
            p.value.resize(n);
            p.momentum.resize(n);
            for (std::size_t k = 0; k < n; ++k, at += 8) p.value[k] = std::bit_cast<double>(get_u64(b, at));
            for (std::size_t k = 0; k < n; ++k, at += 8) p.momentum[k] = std::bit_cast<double>(get_u64(b, at));
            ck.params.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("checkpoint: bad header: ") + e.what());
    }
    require(at == payload_end, ErrorKind::format, "checkpoint: trailing payload bytes");
    require(fnv1a(ck.meta.config_text) == ck.meta.config_hash, ErrorKind::format,
            "checkpoint: config hash does not match embedded config");
    return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    const auto bytes = data::read_file_bytes(path);
    try {
        return parse_checkpoint(bytes);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

void apply_checkpoint(const Checkpoint& ck, bbn::BBNModel& model) {
    auto& store = model.params();
    require(store.size() == ck.params.size(), ErrorKind::shape_mismatch,
            "checkpoint has " + std::to_string(ck.params.size()) + " parameters, model has " +
                std::to_string(store.size()));
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& p = store[i];
        const auto& s = ck.params[i];
        require(p.name() == s.name && ad::role_name(p.role()) == s.role, ErrorKind::shape_mismatch,
                "checkpoint parameter " + std::to_string(i) + " is " + s.name + " (" + s.role +
                    "), model expects " + p.name());
        require(p.value().shape() == s.shape, ErrorKind::shape_mismatch,
                "checkpoint parameter " + s.name + " has shape " + ad::to_string(s.shape) +
                    ", model expects " + ad::to_string(p.value().shape()));
    }
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& p = store[i];
        const auto& s = ck.params[i];
        auto v = p.value().mutable_data();
        std::copy(s.value.begin(), s.value.end(), v.begin());
        p.momentum() = s.momentum;
        p.value().clear_grad();
    }
}

std::unique_ptr<bbn::BBNModel> model_from_checkpoint(const Checkpoint& ck) {
    const auto cfg = parse_config(ck.meta.config_text);
    auto model = std::make_unique<bbn::BBNModel>(
        model_config(cfg, ck.meta.in_channels, ck.meta.image_size, ck.meta.num_classes));
    apply_checkpoint(ck, *model);
    return model;
}

}  // namespace bbnas::train
