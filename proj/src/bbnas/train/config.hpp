#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bbnas/bbn/model.hpp"
#include "bbnas/schedule/schedules.hpp"

namespace bbnas::train {

enum class Mode {
    darts_only,
    darts_resample,
    bbn_naive,
    hls,
    hls_reverse_sigmoid,
    hls_continuous,
    hls_mix_half,
    frozen_backbone,
};

inline constexpr Mode kAllModes[] = {Mode::darts_only,      Mode::darts_resample,
                                     Mode::bbn_naive,       Mode::hls,
                                     Mode::hls_reverse_sigmoid, Mode::hls_continuous,
                                     Mode::hls_mix_half,    Mode::frozen_backbone};

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

enum class ArchOrder { first, second };

std::string_view arch_order_name(ArchOrder order);
ArchOrder parse_arch_order(std::string_view name);

// "synthetic:C,n,H[,channels]" or a CIFAR-10 binary directory. "cifar10"
// alone reads the directory named by BBNAS_DATA_DIR.
struct DataSource {
    bool synthetic = true;
    std::size_t classes = 3;
    std::size_t per_class = 100;
    std::size_t size = 8;
    std::size_t channels = 1;
    std::filesystem::path dir;

    static DataSource parse(std::string_view text);
    std::string to_string() const;
};

inline constexpr const char* kDataDirEnv = "BBNAS_DATA_DIR";

struct TrainConfig {
    Mode mode = Mode::hls;
    std::uint64_t seed = 0;
    std::size_t epochs = 50;
    std::size_t batch_size = 128;

    double lr_weights = 0.02;
    double lr_arch = 0.02;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double hls_tau = 5.0;

    sched::MixingKind mixing_kind = sched::MixingKind::parabolic;
    double mixing_k = 6.0;
    double mixing_c = 0.5;
    double continuation_fraction = 0.5;

    ArchOrder arch_order = ArchOrder::first;
    bbn::LossForm loss_form = bbn::LossForm::mixed_logits;

    std::size_t layers = 8;
    std::size_t width = 16;
    std::size_t nodes = 5;
    std::string opset = "desk";

    std::string data_source = "cifar10";
    std::uint64_t data_seed = 0;
    double data_noise = 0.5;
    double imbalance_ratio = 100.0;
    std::size_t base_count = 5000;
    double train_fraction = 0.8;
    std::size_t test_per_class = 1000;

    std::size_t augment_pad = 4;
    bool augment_flip = true;

    std::string mu_grid = "0:1:0.1";
};

// Keys accepted by set()/parse_config, in canonical dump order.
const std::vector<std::string>& config_keys();

// Assign one key from its text form. Unknown keys and malformed values throw.
void set_key(TrainConfig& cfg, std::string_view key, std::string_view value);
std::string get_key(const TrainConfig& cfg, std::string_view key);

// Flat "key = value" lines; '#' starts a comment. Every bad line is
// collected and reported together.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// Semantic checks on a parsed config; empty when valid.
std::vector<std::string> validate(const TrainConfig& cfg);
// Throws listing every problem.
void require_valid(const TrainConfig& cfg);

// Canonical text, one "key = value" per line in config_keys() order.
std::string dump_config(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

// Comma list "0,0.5,1" or range "a:b:step" (inclusive).
std::vector<double> parse_mu_grid(std::string_view text);

// What a mode switches on. Derived, never set directly.
struct ModePlan {
    bool bilateral = true;  // two heads, mixed loss
    bool instance_sampling = true;  // single-head sampler kind
    bool hls = false;
    sched::MixingKind mixing = sched::MixingKind::parabolic;
    std::size_t continuation_epochs = 0;
    double continuation_mu = 0.0;
    bool continuation_freezes_backbone = false;
};

ModePlan plan_for(const TrainConfig& cfg);

// Dump plus the derived plan as "plan.* = value" lines.
std::string describe_plan(const TrainConfig& cfg);

bbn::ModelConfig model_config(const TrainConfig& cfg, std::size_t in_channels,
                              std::size_t image_size, std::size_t num_classes);

}  // namespace bbnas::train
