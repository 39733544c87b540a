#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bbnas/autodiff/parameter.hpp"
#include "bbnas/nas/cell.hpp"
#include "bbnas/nas/genotype.hpp"

namespace bbnas::bbn {

using ad::Parameter;
using ad::ParameterStore;
using ad::Tensor;

struct ModelConfig {
    std::size_t in_channels = 3;
    std::size_t image_size = 32;
    std::size_t num_classes = 10;
    std::size_t layers = 8;  // backbone cells
    std::size_t width = 16;  // initial cell width, doubled at each reduction
    std::size_t n_nodes = 5;
    nas::OpSet ops = nas::OpSet::desk();
    std::uint64_t seed = 0;
};

// Reduction cells sit at floor(L/3) and floor(2L/3).
bool is_reduction_layer(std::size_t layer, std::size_t layers);

struct Logits {
    Tensor o_ins;  // ins head on the instance rows
    Tensor o_cls;  // cls head on the class rows
    Tensor mixed;  // mu * o_ins + (1 - mu) * o_cls
};

struct HeadLogits {
    Tensor ins;
    Tensor cls;
};

// Shared DARTS backbone feeding an instance-sampling head and a
// class-sampling head, each a single normal cell + global pooling + linear
// classifier. Every component has its own architecture parameters.
class BBNModel {
public:
    explicit BBNModel(const ModelConfig& cfg);

    BBNModel(const BBNModel&) = delete;
    BBNModel& operator=(const BBNModel&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& params() { return store_; }
    const ParameterStore& params() const { return store_; }

    Parameter& alpha_bb_normal() { return *alpha_bb_normal_; }
    Parameter& alpha_bb_reduce() { return *alpha_bb_reduce_; }
    Parameter& alpha_ins() { return *alpha_ins_; }
    Parameter& alpha_cls() { return *alpha_cls_; }

    // The backbone runs once on the row-concatenation of both batches; each
    // head then sees only its own rows.
    Logits forward(const Tensor& batch_ins, const Tensor& batch_cls, double mu) const;

    // Backbone + ins head only (single-head training modes).
    Tensor forward_single(const Tensor& batch) const;

    // One backbone pass, both heads on the same features.
    HeadLogits heads(const Tensor& batch) const;

    nas::Genotype genotype() const;

    // Copy every ins-head weight and alpha_ins onto the cls head.
    void clone_ins_head_into_cls();

private:
    struct Features {
        Tensor prev_prev;
        Tensor prev;
    };
    struct Head {
        std::unique_ptr<nas::Cell> cell;
        Parameter* fc_w = nullptr;
        Parameter* fc_b = nullptr;
    };

    Features backbone(const Tensor& x) const;
    Tensor head_forward(const Head& head, const Parameter& alpha, const Features& f) const;

    ModelConfig cfg_;
    ParameterStore store_;
    Parameter* stem_w_ = nullptr;
    Parameter* stem_b_ = nullptr;
    std::vector<nas::Cell> cells_;
    Head ins_;
    Head cls_;
    Parameter* alpha_bb_normal_ = nullptr;
    Parameter* alpha_bb_reduce_ = nullptr;
    Parameter* alpha_ins_ = nullptr;
    Parameter* alpha_cls_ = nullptr;
};

void check_mu(double mu);

// mu * CE(mixed, y_ins) + (1 - mu) * CE(mixed, y_cls), where mixed are the
// logits whose softmax is p.
Tensor bbn_loss(const Tensor& mixed_logits, std::span<const int> y_ins,
                std::span<const int> y_cls, double mu);

// mu * CE(o_ins, y_ins) + (1 - mu) * CE(o_cls, y_cls): each branch scored
// on its own logits.
Tensor decomposed_loss(const Tensor& o_ins, const Tensor& o_cls, std::span<const int> y_ins,
                       std::span<const int> y_cls, double mu);

enum class LossForm { mixed_logits, decomposed };

std::string_view loss_form_name(LossForm form);
LossForm parse_loss_form(std::string_view name);

Tensor training_loss(const Logits& logits, std::span<const int> y_ins,
                     std::span<const int> y_cls, double mu, LossForm form);

struct Prediction {
    int label = 0;
    std::vector<double> probs;
};

// Mix precomputed head logits [N,C] at mu and take the argmax of the
// softmax; ties resolve to the lowest class.
std::vector<Prediction> mix_and_predict(const HeadLogits& logits, double mu);

std::vector<Prediction> inference(const BBNModel& model, const Tensor& x, double mu_test);

}  // namespace bbnas::bbn
