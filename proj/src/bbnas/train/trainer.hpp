#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "bbnas/train/checkpoint.hpp"
#include "bbnas/train/evaluate.hpp"
#include "bbnas/train/prepare.hpp"
#include "bbnas/train/steps.hpp"

namespace bbnas::train {

struct TrainOptions {
    std::filesystem::path out_dir;  // empty: nothing written
    bool resume = false;            // continue from out_dir/checkpoint.bin
    // Stop right after this epoch's checkpoint, as if the process died.
    std::optional<std::size_t> stop_after_epoch;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct EpochSchedule {
    std::string phase;
    double mu = 1.0;
    double lr_weights = 0.0;
    double lr_arch_bb = 0.0;
    double lr_arch_head = 0.0;
    bool freeze_backbone = false;
};

// Schedule for the 1-based global epoch e. Main epochs t = 1..T take mu from
// the mixing schedule at t and the cosine weight rate at t - 1; continuation
// epochs restart the cosine over their own length.
EpochSchedule schedule_for(const TrainConfig& cfg, std::size_t epoch);
std::size_t total_epochs(const TrainConfig& cfg);

// The grid evaluated each epoch: the configured grid for two-head modes,
// {1} for single-head modes.
std::vector<double> effective_grid(const TrainConfig& cfg);

struct TrainResult {
    std::unique_ptr<bbn::BBNModel> model;
    RunHistory history;
    Evaluation initial_test;
    Evaluation final_test;
    Evaluation final_val;
    double test_acc_at_val_best_mu = 0.0;
    std::size_t epochs_done = 0;
    bool completed = false;
};

TrainResult train(const TrainConfig& cfg, const PreparedData& data, const TrainOptions& opts);

// Summary JSON of a finished run, as written to summary.json.
std::string summary_json(const TrainConfig& cfg, const TrainResult& r);

std::string evaluation_json(const Evaluation& ev);

}  // namespace bbnas::train
