#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace bbnas::train {

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based across phases
    std::string phase;      // "main" or "continuation"
    double mu = 0.0;
    double lr_weights = 0.0;
    double lr_arch_bb = 0.0;
    double lr_arch_head = 0.0;
    double train_loss = 0.0;       // mean over the epoch's batches
    double train_batch_acc = 0.0;  // running accuracy on augmented batches
    double train_acc = 0.0;        // clean pass over the train split at mu
    double val_loss = 0.0;         // clean pass over the val split at mu
    double val_acc = 0.0;
    std::vector<double> val_acc_grid;
    double best_mu = 0.0;
    double best_val_acc = 0.0;
    double bb_grad_norm = 0.0;     // mean backbone-weight gradient norm
    double alpha_bb_disp = 0.0;    // ||alpha_bb after - alpha_bb before|| this epoch
    std::string genotype;          // canonical JSON

    bool operator==(const EpochRecord&) const = default;
};

struct RunHistory {
    std::vector<double> mu_grid;
    std::vector<EpochRecord> records;

    // "# config_hash=<hex>" line, header, one row per record.
    std::string to_csv(std::uint64_t config_hash) const;
    // One genotype per line: {"epoch":e,"genotype":{...}}
    std::string genotypes_jsonl() const;

    nlohmann::json to_json() const;
    static RunHistory from_json(const nlohmann::json& j);

    bool operator==(const RunHistory&) const = default;
};

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

// Sum of alpha_bb_disp over the last ceil(fraction * T) main-phase epochs.
double tail_displacement(const RunHistory& h, double fraction = 0.2);

}  // namespace bbnas::train
