#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bbnas/bbn/model.hpp"
#include "bbnas/train/history.hpp"

namespace bbnas::train {

struct CheckpointMeta {
    std::string config_text;  // dump_config() of the run
    std::uint64_t config_hash = 0;
    std::size_t epochs_done = 0;
    std::size_t in_channels = 0;
    std::size_t image_size = 0;
    std::size_t num_classes = 0;
    std::vector<double> norm_mean;  // per-channel input normalization
    std::vector<double> norm_std;
    std::map<std::string, std::string> rng_states;
    RunHistory history;
};

struct StoredParam {
    std::string name;
    std::string role;
    ad::Shape shape;
    std::vector<double> value;
    std::vector<double> momentum;
};

struct Checkpoint {
    CheckpointMeta meta;
    std::vector<StoredParam> params;
};

// Layout: "BBNASCKP", u32 version, u64 header length, JSON header, raw
// little-endian doubles (value then momentum per parameter), u64 FNV-1a of
// everything before it. Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const bbn::BBNModel& model,
                     const CheckpointMeta& meta);

// Verifies magic, version, checksum and header consistency.
Checkpoint read_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

// Checks every name, role and shape against the model before writing any
// value, so a mismatch leaves the model untouched.
void apply_checkpoint(const Checkpoint& ck, bbn::BBNModel& model);

// Rebuild the model described by the embedded config, then apply.
std::unique_ptr<bbn::BBNModel> model_from_checkpoint(const Checkpoint& ck);

}  // namespace bbnas::train
