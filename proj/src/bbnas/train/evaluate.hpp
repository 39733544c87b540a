#pragma once

#include <span>
#include <vector>

#include "bbnas/bbn/model.hpp"
#include "bbnas/data/longtail.hpp"

namespace bbnas::train {

// Head logits for every sample of a set, row-major [N, C].
struct HeadOutputs {
    std::size_t num_classes = 0;
    std::vector<double> ins;
    std::vector<double> cls;
    std::vector<int> labels;
};

// One backbone pass per chunk, both heads, no graph recorded.
HeadOutputs collect_heads(const bbn::BBNModel& model, const data::LabeledImageSet& set,
                          const data::Normalization& norm, std::size_t chunk = 256);

struct MuRow {
    double mu = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_class;  // NaN for classes absent from the set
};

struct Evaluation {
    std::vector<MuRow> rows;
    std::size_t best = 0;  // highest accuracy, first in grid order on ties

    const MuRow& best_row() const { return rows.at(best); }
    const MuRow* at(double mu) const;
};

Evaluation evaluate_outputs(const HeadOutputs& out, std::span<const double> grid);

Evaluation evaluate(const bbn::BBNModel& model, const data::LabeledImageSet& set,
                    const data::Normalization& norm, std::span<const double> grid);

enum class HeadChoice { ins, cls };

// Accuracy of one head on its own, ignoring the other.
MuRow evaluate_head(const HeadOutputs& out, HeadChoice head);

// Mean cross-entropy of the mu-mixed logits.
double mixed_loss(const HeadOutputs& out, double mu);

}  // namespace bbnas::train
