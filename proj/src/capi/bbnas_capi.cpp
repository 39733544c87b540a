#include "bbnas/bbnas.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "bbnas/bbn/model.hpp"
#include "bbnas/common/error.hpp"
#include "bbnas/common/hash.hpp"
#include "bbnas/data/sampler.hpp"
#include "bbnas/harness/commands.hpp"
#include "bbnas/train/checkpoint.hpp"
#include "bbnas/train/config.hpp"

struct bbnas_config {
    bbnas::train::TrainConfig cfg;
};

struct bbnas_model {
    std::unique_ptr<bbnas::bbn::BBNModel> model;
    bbnas::data::Normalization norm;
};

namespace {

thread_local std::string g_last_error;

bbnas_status status_of(bbnas::ErrorKind k) {
    using bbnas::ErrorKind;
    switch (k) {
        case ErrorKind::invalid_argument: return BBNAS_ERR_INVALID_ARGUMENT;
        case ErrorKind::shape_mismatch: return BBNAS_ERR_SHAPE;
        case ErrorKind::io: return BBNAS_ERR_IO;
        case ErrorKind::format: return BBNAS_ERR_FORMAT;
        case ErrorKind::numeric: return BBNAS_ERR_NUMERIC;
        case ErrorKind::state: return BBNAS_ERR_STATE;
    }
    return BBNAS_ERR_INTERNAL;
}

template <typename F>
bbnas_status guarded(F&& f) {
    g_last_error.clear();
    try {
        return f();
    } catch (const bbnas::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return BBNAS_ERR_IO;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return BBNAS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BBNAS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return BBNAS_ERR_INTERNAL;
    }
}

bbnas_status null_arg(const char* what) {
    g_last_error = std::string(what) + " must not be NULL";
    return BBNAS_ERR_INVALID_ARGUMENT;
}

bbnas_status emit(const std::string& text, char* buf, size_t cap, size_t* len) {
    if (len) *len = text.size();
    if (cap < text.size() + 1) {
        g_last_error = "buffer of " + std::to_string(cap) + " bytes is too small; need " +
                       std::to_string(text.size() + 1);
        return BBNAS_ERR_BUFFER_TOO_SMALL;
    }
    std::memcpy(buf, text.data(), text.size());
    buf[text.size()] = '\0';
    return BBNAS_OK;
}

}  // namespace

extern "C" {

const char* bbnas_version(void) { return "0.1.0"; }

const char* bbnas_status_name(bbnas_status s) {
    switch (s) {
        case BBNAS_OK: return "ok";
        case BBNAS_ERR_INVALID_ARGUMENT: return "invalid argument";
        case BBNAS_ERR_SHAPE: return "shape mismatch";
        case BBNAS_ERR_IO: return "i/o error";
        case BBNAS_ERR_FORMAT: return "format error";
        case BBNAS_ERR_NUMERIC: return "numeric error";
        case BBNAS_ERR_STATE: return "state error";
        case BBNAS_ERR_BUFFER_TOO_SMALL: return "buffer too small";
        case BBNAS_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* bbnas_last_error(void) { return g_last_error.c_str(); }

bbnas_status bbnas_config_new(bbnas_config** out) {
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = new bbnas_config{};
        return BBNAS_OK;
    });
}

bbnas_status bbnas_config_parse(const char* text, bbnas_config** out) {
    if (!text) return null_arg("text");
    if (!out) return null_arg("out");
    return guarded([&] {
        auto cfg = bbnas::train::parse_config(text);
        *out = new bbnas_config{std::move(cfg)};
        return BBNAS_OK;
    });
}

bbnas_status bbnas_config_load(const char* path, bbnas_config** out) {
    if (!path) return null_arg("path");
    if (!out) return null_arg("out");
    return guarded([&] {
        auto cfg = bbnas::train::load_config(path);
        *out = new bbnas_config{std::move(cfg)};
        return BBNAS_OK;
    });
}

void bbnas_config_free(bbnas_config* cfg) { delete cfg; }

bbnas_status bbnas_config_set(bbnas_config* cfg, const char* key, const char* value) {
    if (!cfg) return null_arg("cfg");
    if (!key) return null_arg("key");
    if (!value) return null_arg("value");
    return guarded([&] {
        bbnas::train::set_key(cfg->cfg, key, value);
        return BBNAS_OK;
    });
}

bbnas_status bbnas_config_get(const bbnas_config* cfg, const char* key, char* buf, size_t cap,
                              size_t* len) {
    if (!cfg) return null_arg("cfg");
    if (!key) return null_arg("key");
    return guarded([&] { return emit(bbnas::train::get_key(cfg->cfg, key), buf, cap, len); });
}

bbnas_status bbnas_config_dump(const bbnas_config* cfg, char* buf, size_t cap, size_t* len) {
    if (!cfg) return null_arg("cfg");
    return guarded([&] { return emit(bbnas::train::dump_config(cfg->cfg), buf, cap, len); });
}

bbnas_status bbnas_config_plan(const bbnas_config* cfg, char* buf, size_t cap, size_t* len) {
    if (!cfg) return null_arg("cfg");
    return guarded([&] { return emit(bbnas::train::describe_plan(cfg->cfg), buf, cap, len); });
}

bbnas_status bbnas_config_validate(const bbnas_config* cfg) {
    if (!cfg) return null_arg("cfg");
    return guarded([&] {
        bbnas::train::require_valid(cfg->cfg);
        return BBNAS_OK;
    });
}

bbnas_status bbnas_config_hash(const bbnas_config* cfg, uint64_t* out) {
    if (!cfg) return null_arg("cfg");
    if (!out) return null_arg("out");
    return guarded([&] {
        *out = bbnas::train::config_hash(cfg->cfg);
        return BBNAS_OK;
    });
}

bbnas_status bbnas_train(const bbnas_config* cfg, const char* out_dir,
                         const bbnas_train_options* opts, char* buf, size_t cap, size_t* len) {
    if (!cfg) return null_arg("cfg");
    if (!out_dir) return null_arg("out_dir");
    return guarded([&] {
        bbnas::harness::TrainRequest req;
        if (opts) {
            req.resume = opts->resume != 0;
            if (opts->stop_after_epoch > 0)
                req.stop_after_epoch = static_cast<std::size_t>(opts->stop_after_epoch);
            req.verbose = opts->verbose != 0;
        }
        return emit(bbnas::harness::train(cfg->cfg, out_dir, req), buf, cap, len);
    });
}

bbnas_status bbnas_eval(const char* checkpoint, int has_mu, double mu, const char* head,
                        const char* split, char* buf, size_t cap, size_t* len) {
    if (!checkpoint) return null_arg("checkpoint");
    return guarded([&] {
        std::optional<double> m;
        if (has_mu) m = mu;
        return emit(bbnas::harness::eval(checkpoint, m, head ? head : "mixed", split ? split : "test"),
                    buf, cap, len);
    });
}

bbnas_status bbnas_sweep_mu(const char* checkpoint, const char* grid, const char* out_csv,
                            char* buf, size_t cap, size_t* len) {
    if (!checkpoint) return null_arg("checkpoint");
    if (!out_csv) return null_arg("out_csv");
    return guarded([&] {
        return emit(bbnas::harness::sweep_mu(checkpoint, grid ? grid : "0:1:0.1", out_csv), buf, cap,
                    len);
    });
}

bbnas_status bbnas_probe_theorem1(const bbnas_config* cfg, const char* mu_list, int clone_heads,
                                  const char* out_csv, char* buf, size_t cap, size_t* len) {
    if (!cfg) return null_arg("cfg");
    if (!out_csv) return null_arg("out_csv");
    return guarded([&] {
        return emit(bbnas::harness::probe_theorem1(cfg->cfg, mu_list ? mu_list : "0,0.3,0.7,1",
                                                   clone_heads != 0, out_csv),
                    buf, cap, len);
    });
}

bbnas_status bbnas_run_matrix(const char* const* config_paths, size_t n_configs,
                              const uint64_t* seeds, size_t n_seeds, const char* out_dir,
                              int verbose, char* buf, size_t cap, size_t* len) {
    if (!config_paths && n_configs) return null_arg("config_paths");
    if (!seeds && n_seeds) return null_arg("seeds");
    if (!out_dir) return null_arg("out_dir");
    return guarded([&] {
        std::vector<std::filesystem::path> paths;
        for (size_t i = 0; i < n_configs; ++i) {
            if (!config_paths[i]) return null_arg("config path");
            paths.emplace_back(config_paths[i]);
        }
        return emit(bbnas::harness::run_matrix(paths, std::span<const uint64_t>(seeds, n_seeds),
                                               out_dir, verbose != 0),
                    buf, cap, len);
    });
}

bbnas_status bbnas_gradcheck(uint64_t seed, double* max_rel_err, char* buf, size_t cap,
                             size_t* len) {
    return guarded([&] {
        const auto r = bbnas::harness::gradcheck_suite(seed);
        if (max_rel_err) *max_rel_err = r.max_rel_err;
        return emit(r.text, buf, cap, len);
    });
}

bbnas_status bbnas_export_genotype(const char* checkpoint, const char* format, char* buf,
                                   size_t cap, size_t* len) {
    if (!checkpoint) return null_arg("checkpoint");
    if (!format) return null_arg("format");
    return guarded([&] { return emit(bbnas::harness::export_arch(checkpoint, format), buf, cap, len); });
}

bbnas_status bbnas_make_longtail(const char* input, double imbalance_ratio, size_t base_count,
                                 uint64_t seed, const char* out_dir, char* buf, size_t cap,
                                 size_t* len) {
    if (!input) return null_arg("input");
    if (!out_dir) return null_arg("out_dir");
    return guarded([&] {
        std::optional<std::size_t> base;
        if (base_count > 0) base = base_count;
        return emit(bbnas::harness::make_longtail(input, imbalance_ratio, base, seed, out_dir), buf,
                    cap, len);
    });
}

bbnas_status bbnas_model_load(const char* checkpoint, bbnas_model** out) {
    if (!checkpoint) return null_arg("checkpoint");
    if (!out) return null_arg("out");
    return guarded([&] {
        const auto ck = bbnas::train::read_checkpoint(checkpoint);
        auto m = std::make_unique<bbnas_model>();
        m->model = bbnas::train::model_from_checkpoint(ck);
        m->norm.mean = ck.meta.norm_mean;
        m->norm.stddev = ck.meta.norm_std;
        bbnas::require(m->norm.mean.size() == ck.meta.in_channels, bbnas::ErrorKind::format,
                       "checkpoint normalization does not match its channel count");
        *out = m.release();
        return BBNAS_OK;
    });
}

void bbnas_model_free(bbnas_model* model) { delete model; }

bbnas_status bbnas_model_shape(const bbnas_model* model, size_t* channels, size_t* size,
                               size_t* classes) {
    if (!model) return null_arg("model");
    const auto& c = model->model->config();
    if (channels) *channels = c.in_channels;
    if (size) *size = c.image_size;
    if (classes) *classes = c.num_classes;
    return BBNAS_OK;
}

bbnas_status bbnas_model_predict(const bbnas_model* model, const double* images, size_t n,
                                 double mu, int* labels, double* probs) {
    if (!model) return null_arg("model");
    if (!images && n) return null_arg("images");
    if (!labels && n) return null_arg("labels");
    return guarded([&] {
        if (n == 0) return BBNAS_OK;
        const auto& c = model->model->config();
        const std::size_t per = c.in_channels * c.image_size * c.image_size;
        std::vector<double> px(images, images + n * per);
        auto x = bbnas::data::normalize(
            bbnas::ad::Tensor::from({n, c.in_channels, c.image_size, c.image_size}, std::move(px)),
            model->norm);
        const auto preds = bbnas::bbn::inference(*model->model, x, mu);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = preds[i].label;
            if (probs)
                std::copy(preds[i].probs.begin(), preds[i].probs.end(), probs + i * c.num_classes);
        }
        return BBNAS_OK;
    });
}

}  // extern "C"
