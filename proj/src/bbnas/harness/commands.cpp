#include "bbnas/harness/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "bbnas/bbn/probe.hpp"
#include "bbnas/common/error.hpp"
#include "bbnas/common/hash.hpp"
#include "bbnas/data/sampler.hpp"
#include "bbnas/train/trainer.hpp"
#include "json.hpp"

namespace bbnas::harness {

using train::format_double;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot write " + path.string());
    out << text;
    require(out.good(), ErrorKind::io, "short write to " + path.string());
}

struct LoadedRun {
    train::Checkpoint ck;
    train::TrainConfig cfg;
    std::unique_ptr<bbn::BBNModel> model;
};

LoadedRun load_run(const fs::path& checkpoint) {
    LoadedRun r;
    r.ck = train::read_checkpoint(checkpoint);
    r.cfg = train::parse_config(r.ck.meta.config_text);
    r.model = train::model_from_checkpoint(r.ck);
    return r;
}

// Best mu on the final record's val grid, or 1 for single-head runs.
double checkpoint_best_mu(const LoadedRun& r) {
    const auto& recs = r.ck.meta.history.records;
    return recs.empty() ? 1.0 : recs.back().best_mu;
}

std::string nullable(double v) { return std::isnan(v) ? "" : format_double(v); }

}  // namespace

std::string make_longtail(const std::string& input, double imbalance_ratio,
                          std::optional<std::size_t> base_count, std::uint64_t seed,
                          const fs::path& out_dir) {
    const auto src = train::DataSource::parse(input);
    data::LabeledImageSet raw;
    if (src.synthetic) {
        data::SyntheticSpec s;
        s.classes = src.classes;
        s.per_class = src.per_class;
        s.size = src.size;
        s.channels = src.channels;
        s.seed = seed;
        raw = data::make_synthetic(s);
    } else {
        require(!src.dir.empty(), ErrorKind::invalid_argument,
                std::string("no CIFAR-10 directory given and ") + train::kDataDirEnv + " is unset");
        raw = data::load_cifar10_dir(src.dir).train;
    }
    data::LongTailSpec spec;
    spec.imbalance_ratio = imbalance_ratio;
    spec.num_classes = raw.num_classes;
    if (base_count) {
        spec.base_count = *base_count;
    } else {
        const auto counts = raw.class_counts();
        spec.base_count = *std::min_element(counts.begin(), counts.end());
    }
    const auto lt = data::build_longtail(raw, spec, seed);
    const auto manifest = data::longtail_manifest_json(lt, spec, seed);
    fs::create_directories(out_dir);
    write_file(out_dir / "manifest.json", manifest);
    std::string counts = "# source=" + input + " imbalance_ratio=" + format_double(imbalance_ratio) +
                         " seed=" + std::to_string(seed) + "\nclass,count\n";
    for (std::size_t c = 0; c < lt.retained.size(); ++c)
        counts += std::to_string(c) + "," + std::to_string(lt.retained[c].size()) + "\n";
    write_file(out_dir / "counts.csv", counts);
    return manifest;
}

std::string train(const train::TrainConfig& cfg, const fs::path& out_dir, const TrainRequest& req) {
    train::require_valid(cfg);
    const auto data = train::prepare_data(cfg);
    train::TrainOptions opts;
    opts.out_dir = out_dir;
    opts.resume = req.resume;
    opts.stop_after_epoch = req.stop_after_epoch;
    if (req.verbose)
        opts.on_epoch = [](const train::EpochRecord& r) {
            std::fprintf(stderr,
                         "epoch %zu %s mu=%.4f lr_w=%.5f lr_arch_bb=%.5f loss=%.4f train_acc=%.4f "
                         "val_acc=%.4f best_val=%.4f@%.2f\n",
                         r.epoch, r.phase.c_str(), r.mu, r.lr_weights, r.lr_arch_bb, r.train_loss,
                         r.train_acc, r.val_acc, r.best_val_acc, r.best_mu);
        };
    const auto res = train::train(cfg, data, opts);
    return train::summary_json(cfg, res);
}

std::string eval(const fs::path& checkpoint, std::optional<double> mu, const std::string& head,
                 const std::string& split) {
    const auto run = load_run(checkpoint);
    const auto data = train::prepare_data(run.cfg);
    const data::LabeledImageSet* set = nullptr;
    if (split == "test") set = &data.test;
    else if (split == "val") set = &data.split.val;
    else if (split == "train") set = &data.split.train;
    else fail(ErrorKind::invalid_argument, "split must be test, val or train, got '" + split + "'");

    const auto out = train::collect_heads(*run.model, *set, data.norm);
    train::MuRow row;
    if (head == "mixed") {
        const double m = mu.value_or(checkpoint_best_mu(run));
        const std::array<double, 1> g{m};
        row = train::evaluate_outputs(out, g).rows[0];
    } else if (head == "ins") {
        row = train::evaluate_head(out, train::HeadChoice::ins);
    } else if (head == "cls") {
        row = train::evaluate_head(out, train::HeadChoice::cls);
    } else {
        fail(ErrorKind::invalid_argument, "head must be mixed, ins or cls, got '" + head + "'");
    }
    nlohmann::json j;
    j["split"] = split;
    j["head"] = head;
    j["mu"] = row.mu;
    j["samples"] = set->size();
    j["accuracy"] = row.accuracy;
    nlohmann::json pc = nlohmann::json::array();
    for (double v : row.per_class) pc.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
    j["per_class"] = pc;
    j["config_hash"] = hex64(run.ck.meta.config_hash);
    return j.dump() + "\n";
}

std::string sweep_mu(const fs::path& checkpoint, const std::string& grid, const fs::path& out_csv) {
    const auto mus = train::parse_mu_grid(grid);
    const auto run = load_run(checkpoint);
    const auto data = train::prepare_data(run.cfg);
    const auto ev = train::evaluate(*run.model, data.test, data.norm, mus);
    std::string csv = "# config_hash=" + hex64(run.ck.meta.config_hash) + "\nmu,accuracy";
    const std::size_t C = run.model->config().num_classes;
    for (std::size_t c = 0; c < C; ++c) csv += ",acc_class" + std::to_string(c);
    csv += "\n";
    for (const auto& r : ev.rows) {
        csv += format_double(r.mu) + "," + format_double(r.accuracy);
        for (double v : r.per_class) csv += "," + nullable(v);
        csv += "\n";
    }
    write_file(out_csv, csv);
    nlohmann::json j;
    j["rows"] = ev.rows.size();
    j["best_mu"] = ev.best_row().mu;
    j["best_accuracy"] = ev.best_row().accuracy;
    return j.dump() + "\n";
}

std::string probe_theorem1(const train::TrainConfig& cfg, const std::string& mu_list,
                           bool clone_heads, const fs::path& out_csv) {
    const auto mus = train::parse_mu_grid(mu_list);
    const auto data = train::prepare_data(cfg);
    const auto& set = data.split.train;
    bbn::BBNModel model(train::model_config(cfg, set.channels, set.height, set.num_classes));

    data::BatchSampler ins(data::SamplerKind::instance, cfg.batch_size, derive_seed(cfg.seed, 20));
    data::BatchSampler cls(data::SamplerKind::class_balanced, cfg.batch_size, derive_seed(cfg.seed, 21));
    bbn::ProbeBatch batch;
    auto bi = ins.sample(set);
    batch.x_ins = data::normalize(bi.images, data.norm);
    batch.y_ins = bi.labels;
    if (clone_heads) {
        model.clone_ins_head_into_cls();
        batch.x_cls = batch.x_ins;
        batch.y_cls = batch.y_ins;
    } else {
        auto bc = cls.sample(set);
        batch.x_cls = data::normalize(bc.images, data.norm);
        batch.y_cls = bc.labels;
    }

    std::string csv = "# config_hash=" + hex64(train::config_hash(cfg)) +
                      " clone_heads=" + (clone_heads ? "true" : "false") +
                      "\nform,mu,role,grad_norm,linearity_residual\n";
    nlohmann::json summary;
    summary["clone_heads"] = clone_heads;
    for (auto form : {bbn::LossForm::decomposed, bbn::LossForm::mixed_logits}) {
        const auto rep = bbn::gradient_probe(model, batch, mus, form);
        const std::string fname(bbn::loss_form_name(form));
        for (std::size_t i = 0; i < rep.mus.size(); ++i)
            for (auto role : ad::kAllRoles) {
                const auto r = static_cast<std::size_t>(role);
                csv += fname + "," + format_double(rep.mus[i]) + "," + std::string(ad::role_name(role)) +
                       "," + format_double(rep.at_mu[i].norm[r]) + "," +
                       format_double(rep.linearity_residual[i][r]) + "\n";
            }
        auto& s = summary[fname];
        s["max_linearity_residual"] = rep.max_linearity_residual();
        s["backbone_norm_ratio"] = rep.backbone_norm_ratio();
        s["backbone_mu_spread"] = rep.backbone_mu_spread();
    }
    write_file(out_csv, csv);
    return summary.dump() + "\n";
}

const std::vector<MatrixRow>& matrix_rows() {
    static const std::vector<MatrixRow> rows = {
        {"DARTS", train::Mode::darts_only, 64.56},
        {"DARTS+Re-sampling", train::Mode::darts_resample, 61.20},
        {"DARTS+BBN", train::Mode::bbn_naive, 52.14},
        {"HLS", train::Mode::hls, 65.12},
        {"HLS+Reverse-Sigmoid", train::Mode::hls_reverse_sigmoid, 61.85},
        {"HLS+Continuous", train::Mode::hls_continuous, 63.12},
    };
    return rows;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    const double sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
    return {m, sd};
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string run_matrix(const std::vector<fs::path>& configs, std::span<const std::uint64_t> seeds,
                       const fs::path& out_dir, bool verbose) {
    require(!configs.empty(), ErrorKind::invalid_argument, "matrix: no config given");
    require(!seeds.empty(), ErrorKind::invalid_argument, "matrix: no seeds given");
    std::vector<std::pair<std::string, train::TrainConfig>> bases;
    for (const auto& p : configs) {
        auto cfg = train::load_config(p);
        train::require_valid(cfg);
        bases.emplace_back(configs.size() == 1 ? std::string() : p.stem().string(), cfg);
    }

    std::string csv = "# matrix over " + std::to_string(seeds.size()) +
                      " seeds; accuracy in percent on the balanced held-out set; "
                      "reference_full_scale is the published long-tailed CIFAR-10 figure and is not "
                      "reproduced at this scale\n";
    csv += "config,method,mode,seeds,best_mu_acc_mean,best_mu_acc_std,val_mu_acc_mean,val_mu_acc_std,"
           "reference_full_scale,reference_reproduced\n";
    nlohmann::json j;
    j["seeds"] = std::vector<std::uint64_t>(seeds.begin(), seeds.end());
    j["reference"] = {{"table", "Table II, long-tailed CIFAR-10, 8-layer supernet, 50 epochs"},
                      {"reproduced", false}};
    auto& cells = j["rows"] = nlohmann::json::array();

    for (const auto& [label, base] : bases) {
        for (const auto& row : matrix_rows()) {
            std::vector<double> best, at_val;
            nlohmann::json per_seed = nlohmann::json::array();
            for (auto seed : seeds) {
                auto cfg = base;
                cfg.mode = row.mode;
                cfg.seed = seed;
                fs::path dir = out_dir;
                if (!label.empty()) dir /= label;
                dir /= std::string(train::mode_name(row.mode));
                dir /= "seed" + std::to_string(seed);
                const auto data = train::prepare_data(cfg);
                train::TrainOptions opts;
                opts.out_dir = dir;
                const auto res = train::train(cfg, data, opts);
                best.push_back(100.0 * res.final_test.best_row().accuracy);
                at_val.push_back(100.0 * res.test_acc_at_val_best_mu);
                per_seed.push_back({{"seed", seed},
                                    {"best_mu", res.final_test.best_row().mu},
                                    {"best_mu_acc", best.back()},
                                    {"val_mu", res.final_val.best_row().mu},
                                    {"val_mu_acc", at_val.back()}});
                if (verbose)
                    std::fprintf(stderr, "matrix %s seed %llu: best %.2f%% at mu=%.2f\n",
                                 row.method.c_str(), static_cast<unsigned long long>(seed),
                                 best.back(), res.final_test.best_row().mu);
            }
            const auto [bm, bs] = mean_std(best);
            const auto [vm, vs] = mean_std(at_val);
            csv += label + "," + row.method + "," + std::string(train::mode_name(row.mode)) + "," +
                   std::to_string(seeds.size()) + "," + pct(bm) + "," + pct(bs) + "," + pct(vm) + "," +
                   pct(vs) + "," + pct(row.reference) + ",false\n";
            cells.push_back({{"config", label},
                             {"method", row.method},
                             {"mode", std::string(train::mode_name(row.mode))},
                             {"best_mu_acc_mean", bm},
                             {"best_mu_acc_std", bs},
                             {"val_mu_acc_mean", vm},
                             {"val_mu_acc_std", vs},
                             {"reference_full_scale", row.reference},
                             {"per_seed", per_seed}});
        }
    }
    fs::create_directories(out_dir);
    write_file(out_dir / "matrix.csv", csv);
    write_file(out_dir / "matrix.json", j.dump(1) + "\n");
    return csv;
}

std::string export_arch(const fs::path& checkpoint, const std::string& format) {
    const auto fmt = nas::parse_export_format(format);
    const auto run = load_run(checkpoint);
    return nas::export_genotype(run.model->genotype(), fmt);
}

}  // namespace bbnas::harness
