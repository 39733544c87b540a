#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbnas/train/config.hpp"

namespace bbnas::harness {

namespace fs = std::filesystem;

// Writes manifest.json and counts.csv into out_dir; returns the manifest.
// input is "synthetic:C,n,H[,channels]" or a CIFAR-10 binary directory.
// base_count defaults to the smallest class size of the input.
std::string make_longtail(const std::string& input, double imbalance_ratio,
                          std::optional<std::size_t> base_count, std::uint64_t seed,
                          const fs::path& out_dir);

struct TrainRequest {
    bool resume = false;
    std::optional<std::size_t> stop_after_epoch;
    bool verbose = false;  // per-epoch line on stderr
};

// Runs the trainer into out_dir (history.csv, history.json, genotypes.jsonl,
// checkpoint.bin, config.cfg, summary.json); returns the summary JSON.
std::string train(const train::TrainConfig& cfg, const fs::path& out_dir, const TrainRequest& req);

// "mixed" (at mu, default: the checkpoint's best val mu), "ins" or "cls".
// split is "test", "val" or "train".
std::string eval(const fs::path& checkpoint, std::optional<double> mu, const std::string& head,
                 const std::string& split);

// CSV of (mu, accuracy, per-class accuracy) on the balanced held-out set;
// returns a JSON summary naming the argmax mu.
std::string sweep_mu(const fs::path& checkpoint, const std::string& grid, const fs::path& out_csv);

// Gradient decomposition probe on one fixed bilateral batch drawn from the
// training split. CSV rows per (loss form, mu, role). With clone_heads the
// cls head is a copy of the ins head and both branches see the same batch.
std::string probe_theorem1(const train::TrainConfig& cfg, const std::string& mu_list,
                           bool clone_heads, const fs::path& out_csv);

struct MatrixRow {
    std::string method;
    train::Mode mode;
    double reference;  // published full-scale accuracy (%), not reproduced here
};

// The six method rows of the comparison table, in display order.
const std::vector<MatrixRow>& matrix_rows();

// Every (config, method, seed) cell trained to completion; writes
// matrix.csv and matrix.json into out_dir and returns the CSV.
std::string run_matrix(const std::vector<fs::path>& configs, std::span<const std::uint64_t> seeds,
                       const fs::path& out_dir, bool verbose = false);

struct GradcheckReport {
    double max_rel_err = 0.0;
    std::string text;  // one line per check
};

// Finite-difference check of every operator and of a desk-scale supernet
// loss (20 coordinates x 3 seeds starting at seed).
GradcheckReport gradcheck_suite(std::uint64_t seed);

std::string export_arch(const fs::path& checkpoint, const std::string& format);

}  // namespace bbnas::harness
