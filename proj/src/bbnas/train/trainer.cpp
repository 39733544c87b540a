#include "bbnas/train/trainer.hpp"

#include <cmath>
#include <fstream>

#include "bbnas/common/error.hpp"
#include "bbnas/common/hash.hpp"
#include "bbnas/data/sampler.hpp"
#include "json.hpp"

namespace bbnas::train {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::io, "cannot write " + tmp.string());
        out << text;
        require(out.good(), ErrorKind::io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<double> alpha_bb_flat(bbn::BBNModel& m) {
    std::vector<double> v;
    for (auto* p : {&m.alpha_bb_normal(), &m.alpha_bb_reduce()}) {
        auto d = p->value().data();
        v.insert(v.end(), d.begin(), d.end());
    }
    return v;
}

struct Streams {
    data::BatchSampler train_ins;
    data::BatchSampler train_cls;
    data::BatchSampler val_ins;
    data::BatchSampler val_cls;
    Rng augment;

    Streams(const TrainConfig& cfg, const ModePlan& plan)
        : train_ins(plan.bilateral || plan.instance_sampling ? data::SamplerKind::instance
                                                             : data::SamplerKind::class_balanced,
                    cfg.batch_size, derive_seed(cfg.seed, 10)),
          train_cls(data::SamplerKind::class_balanced, cfg.batch_size, derive_seed(cfg.seed, 11)),
          val_ins(train_ins.kind(), cfg.batch_size, derive_seed(cfg.seed, 12)),
          val_cls(data::SamplerKind::class_balanced, cfg.batch_size, derive_seed(cfg.seed, 13)),
          augment(derive_seed(cfg.seed, 14)) {}

    std::map<std::string, std::string> states() const {
        return {{"train_ins", train_ins.rng().state()},
                {"train_cls", train_cls.rng().state()},
                {"val_ins", val_ins.rng().state()},
                {"val_cls", val_cls.rng().state()},
                {"augment", augment.state()}};
    }

    void restore(const std::map<std::string, std::string>& s) {
        auto get = [&](const char* k) -> const std::string& {
            auto it = s.find(k);
            require(it != s.end(), ErrorKind::format, std::string("checkpoint: missing rng state ") + k);
            return it->second;
        };
        train_ins.rng().set_state(get("train_ins"));
        train_cls.rng().set_state(get("train_cls"));
        val_ins.rng().set_state(get("val_ins"));
        val_cls.rng().set_state(get("val_cls"));
        augment.set_state(get("augment"));
    }
};

BilateralBatch draw(data::BatchSampler& ins, data::BatchSampler& cls, bool bilateral,
                    const data::LabeledImageSet& set, const data::AugmentOptions& aug,
                    const data::Normalization& norm, Rng& rng) {
    BilateralBatch b;
    auto bi = ins.sample(set);
    b.x_ins = data::augment(bi.images, aug, norm, rng);
    b.y_ins = std::move(bi.labels);
    if (bilateral) {
        auto bc = cls.sample(set);
        b.x_cls = data::augment(bc.images, aug, norm, rng);
        b.y_cls = std::move(bc.labels);
    }
    return b;
}

}  // namespace

std::size_t total_epochs(const TrainConfig& cfg) {
    return cfg.epochs + plan_for(cfg).continuation_epochs;
}

EpochSchedule schedule_for(const TrainConfig& cfg, std::size_t epoch) {
    const auto plan = plan_for(cfg);
    require(epoch >= 1 && epoch <= total_epochs(cfg), ErrorKind::invalid_argument,
            "epoch " + std::to_string(epoch) + " outside the run");
    const sched::HlsConfig hls{cfg.lr_arch, cfg.hls_tau};
    EpochSchedule s;
    s.lr_arch_head = cfg.lr_arch;
    const double T = static_cast<double>(cfg.epochs);
    if (epoch <= cfg.epochs) {
        s.phase = "main";
        const double t = static_cast<double>(epoch);
        if (plan.bilateral) {
            sched::MixingSchedule m{plan.mixing, T, cfg.mixing_k, cfg.mixing_c};
            s.mu = m(t);
        }
        s.lr_weights = sched::cosine_anneal(cfg.lr_weights, t - 1.0, T);
    } else {
        s.phase = "continuation";
        const double tc = static_cast<double>(plan.continuation_epochs);
        s.mu = plan.continuation_mu;
        s.lr_weights =
            sched::cosine_anneal(cfg.lr_weights, static_cast<double>(epoch - cfg.epochs - 1), tc);
        s.freeze_backbone = plan.continuation_freezes_backbone;
    }
    s.lr_arch_bb = plan.hls ? sched::hls_scale(hls, s.mu) : cfg.lr_arch;
    if (s.freeze_backbone) s.lr_arch_bb = 0.0;
    return s;
}

std::vector<double> effective_grid(const TrainConfig& cfg) {
    if (!plan_for(cfg).bilateral) return {1.0};
    return parse_mu_grid(cfg.mu_grid);
}

TrainResult train(const TrainConfig& cfg, const PreparedData& data, const TrainOptions& opts) {
    require_valid(cfg);
    const auto plan = plan_for(cfg);
    const auto& train_set = data.split.train;
    const auto& val_set = data.split.val;
    const auto grid = effective_grid(cfg);
    const auto hash = config_hash(cfg);
    const auto total = total_epochs(cfg);

    TrainResult res;
    res.model = std::make_unique<bbn::BBNModel>(
        model_config(cfg, train_set.channels, train_set.height, train_set.num_classes));
    auto& model = *res.model;
    res.history.mu_grid = grid;
    Streams streams(cfg, plan);

    data::AugmentOptions aug;
    aug.pad = cfg.augment_pad;
    aug.flip = cfg.augment_flip;

    res.initial_test = evaluate(model, data.test, data.norm, grid);

    const fs::path ck_path = opts.out_dir.empty() ? fs::path() : opts.out_dir / "checkpoint.bin";
    std::size_t start = 1;
    if (opts.resume) {
        require(!ck_path.empty() && fs::exists(ck_path), ErrorKind::state,
                "resume requested but no checkpoint at " + ck_path.string());
        const auto ck = read_checkpoint(ck_path);
        require(ck.meta.config_hash == hash, ErrorKind::state,
                "checkpoint config hash " + hex64(ck.meta.config_hash) + " does not match run config " +
                    hex64(hash));
        apply_checkpoint(ck, model);
        streams.restore(ck.meta.rng_states);
        res.history = ck.meta.history;
        start = ck.meta.epochs_done + 1;
    }
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        write_text(opts.out_dir / "config.cfg", dump_config(cfg));
    }

    const std::size_t batches =
        (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;

    for (std::size_t epoch = start; epoch <= total; ++epoch) {
        const auto s = schedule_for(cfg, epoch);
        const StepContext ctx{plan.bilateral, s.mu, cfg.loss_form};
        const ArchLrs lrs{s.lr_arch_bb, s.lr_arch_head, s.lr_arch_head};
        const ad::SgdOptions wopt{s.lr_weights, cfg.momentum, cfg.weight_decay};
        const auto alpha_before = alpha_bb_flat(model);

        double loss_sum = 0.0, acc_sum = 0.0, gnorm_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const auto tb = draw(streams.train_ins, streams.train_cls, plan.bilateral, train_set,
                                 aug, data.norm, streams.augment);
            const auto vb = draw(streams.val_ins, streams.val_cls, plan.bilateral, val_set, aug,
                                 data.norm, streams.augment);
            try {
                arch_step(model, tb, vb, ctx, cfg.arch_order, s.lr_weights, lrs, cfg.momentum);
                const auto w = weight_step(model, tb, ctx, wopt, s.freeze_backbone);
                loss_sum += w.loss;
                acc_sum += w.correct;
                gnorm_sum += w.backbone_grad_norm;
            } catch (const Error& e) {
                fail(e.kind(), "epoch " + std::to_string(epoch) + " batch " + std::to_string(b + 1) +
                                   " (mu=" + format_double(s.mu) + ", lr_w=" +
                                   format_double(s.lr_weights) + "): " + e.what());
            }
        }

        EpochRecord r;
        r.epoch = epoch;
        r.phase = s.phase;
        r.mu = s.mu;
        r.lr_weights = s.lr_weights;
        r.lr_arch_bb = s.lr_arch_bb;
        r.lr_arch_head = s.lr_arch_head;
        const double nb = static_cast<double>(batches);
        r.train_loss = loss_sum / nb;
        r.train_batch_acc = acc_sum / nb;
        r.bb_grad_norm = gnorm_sum / nb;

        const auto train_out = collect_heads(model, train_set, data.norm);
        const double mu_eval = plan.bilateral ? s.mu : 1.0;
        const std::array<double, 1> at_mu{mu_eval};
        r.train_acc = evaluate_outputs(train_out, at_mu).rows[0].accuracy;
        const auto val_out = collect_heads(model, val_set, data.norm);
        r.val_loss = mixed_loss(val_out, mu_eval);
        r.val_acc = evaluate_outputs(val_out, at_mu).rows[0].accuracy;
        const auto val_ev = evaluate_outputs(val_out, grid);
        for (const auto& row : val_ev.rows) r.val_acc_grid.push_back(row.accuracy);
        r.best_mu = val_ev.best_row().mu;
        r.best_val_acc = val_ev.best_row().accuracy;

        const auto alpha_after = alpha_bb_flat(model);
        double sq = 0.0;
        for (std::size_t i = 0; i < alpha_after.size(); ++i) {
            const double d = alpha_after[i] - alpha_before[i];
            sq += d * d;
        }
        r.alpha_bb_disp = std::sqrt(sq);
        r.genotype = nas::to_json(model.genotype());
        res.history.records.push_back(r);

        if (!opts.out_dir.empty()) {
            CheckpointMeta meta;
            meta.config_text = dump_config(cfg);
            meta.config_hash = hash;
            meta.epochs_done = epoch;
            meta.in_channels = train_set.channels;
            meta.image_size = train_set.height;
            meta.num_classes = train_set.num_classes;
            meta.norm_mean = data.norm.mean;
            meta.norm_std = data.norm.stddev;
            meta.rng_states = streams.states();
            meta.history = res.history;
            save_checkpoint(ck_path, model, meta);
            write_text(opts.out_dir / "history.csv", res.history.to_csv(hash));
            write_text(opts.out_dir / "history.json", res.history.to_json().dump(1) + "\n");
            write_text(opts.out_dir / "genotypes.jsonl", res.history.genotypes_jsonl());
        }
        if (opts.on_epoch) opts.on_epoch(r);
        res.epochs_done = epoch;
        if (opts.stop_after_epoch && epoch >= *opts.stop_after_epoch && epoch < total) return res;
    }

    res.epochs_done = total;
    res.completed = true;
    res.final_test = evaluate(model, data.test, data.norm, grid);
    res.final_val = evaluate(model, val_set, data.norm, grid);
    const double val_best = res.final_val.best_row().mu;
    res.test_acc_at_val_best_mu = res.final_test.at(val_best)->accuracy;
    if (!opts.out_dir.empty()) write_text(opts.out_dir / "summary.json", summary_json(cfg, res));
    return res;
}

std::string evaluation_json(const Evaluation& ev) {
    nlohmann::json j;
    j["best_mu"] = ev.best_row().mu;
    j["best_accuracy"] = ev.best_row().accuracy;
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : ev.rows) {
        nlohmann::json pc = nlohmann::json::array();
        for (double v : r.per_class) pc.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
        rows.push_back({{"mu", r.mu}, {"accuracy", r.accuracy}, {"per_class", pc}});
    }
    return j.dump();
}

std::string summary_json(const TrainConfig& cfg, const TrainResult& r) {
    nlohmann::json j;
    j["mode"] = std::string(mode_name(cfg.mode));
    j["seed"] = cfg.seed;
    j["config_hash"] = hex64(config_hash(cfg));
    j["epochs"] = r.epochs_done;
    j["completed"] = r.completed;
    j["initial_test"] = nlohmann::json::parse(evaluation_json(r.initial_test));
    if (r.completed) {
        j["final_test"] = nlohmann::json::parse(evaluation_json(r.final_test));
        j["final_val"] = nlohmann::json::parse(evaluation_json(r.final_val));
        j["val_best_mu"] = r.final_val.best_row().mu;
        j["test_acc_at_val_best_mu"] = r.test_acc_at_val_best_mu;
    }
    if (!r.history.records.empty()) {
        j["final_train_acc"] = r.history.records.back().train_acc;
        j["tail_alpha_bb_displacement"] = tail_displacement(r.history);
    }
    j["genotype"] = nlohmann::json::parse(nas::to_json(r.model->genotype()));
    return j.dump(1) + "\n";
}

}  // namespace bbnas::train
