// bbnas command-line front end. Talks to libbbnas through the C API only.
#include <bbnas/bbnas.h>

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
    bbnas_status status;
    std::string message;
};

int exit_code(bbnas_status s) {
    if (s == BBNAS_OK) return kExitOk;
    return s == BBNAS_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

void check(bbnas_status s) {
    if (s != BBNAS_OK) throw Failure{s, bbnas_last_error()};
}

// Output is usually small; a second call is made only when the first buffer overflows.
std::string fetch(const std::function<bbnas_status(char*, size_t, size_t*)>& fn) {
    std::string out(1 << 16, '\0');
    size_t len = 0;
    bbnas_status s = fn(out.data(), out.size(), &len);
    if (s == BBNAS_ERR_BUFFER_TOO_SMALL) {
        out.assign(len + 1, '\0');
        s = fn(out.data(), out.size(), &len);
    }
    check(s);
    out.resize(len);
    return out;
}

void print(const std::string& text) {
    std::fputs(text.c_str(), stdout);
    if (!text.empty() && text.back() != '\n') std::fputc('\n', stdout);
}

class Config {
public:
    explicit Config(const std::string& path) {
        if (path.empty())
            check(bbnas_config_new(&cfg_));
        else
            check(bbnas_config_load(path.c_str(), &cfg_));
    }
    Config(const Config&) = delete;
    Config& operator=(const Config&) = delete;
    ~Config() { bbnas_config_free(cfg_); }

    void set(const std::string& key, const std::string& value) {
        check(bbnas_config_set(cfg_, key.c_str(), value.c_str()));
    }

    // "key=value"
    void apply(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Failure{BBNAS_ERR_INVALID_ARGUMENT,
                          "--set expects key=value, got '" + assignment + "'"};
        set(assignment.substr(0, eq), assignment.substr(eq + 1));
    }

    // Applies every override, then validates; all problems are reported together.
    void apply_all(const std::vector<std::string>& assignments) {
        std::string problems;
        for (const auto& a : assignments) {
            try {
                apply(a);
            } catch (const Failure& f) {
                problems += f.message + "\n";
            }
        }
        if (bbnas_config_validate(cfg_) != BBNAS_OK) problems += bbnas_last_error();
        if (!problems.empty()) {
            while (!problems.empty() && problems.back() == '\n') problems.pop_back();
            throw Failure{BBNAS_ERR_INVALID_ARGUMENT, problems};
        }
    }

    const bbnas_config* get() const { return cfg_; }
private:
    bbnas_config* cfg_ = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bbnas: architecture search on a bilateral-branch network for long-tailed data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(bbnas_version()));

    std::function<void()> action;

    // make-longtail
    std::string lt_input, lt_out;
    double lt_ratio = 100.0;
    size_t lt_base = 0;
    uint64_t lt_seed = 0;
    auto* lt = app.add_subcommand("make-longtail", "Build a long-tailed subset manifest");
    lt->add_option("--input", lt_input, "CIFAR-10 binary directory or synthetic:C,n,H[,ch]")
        ->required();
    lt->add_option("--imbalance-ratio", lt_ratio, "largest / smallest class count")
        ->check(CLI::PositiveNumber);
    lt->add_option("--base-count", lt_base, "count kept for class 0 (default: smallest class)");
    lt->add_option("--seed", lt_seed);
    lt->add_option("--out", lt_out, "output directory")->required();
    lt->callback([&] {
        action = [&] {
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_make_longtail(lt_input.c_str(), lt_ratio, lt_base, lt_seed,
                                           lt_out.c_str(), b, c, l);
            }));
        };
    });

    // train
    std::string tr_config, tr_mode, tr_out;
    std::optional<uint64_t> tr_seed;
    std::vector<std::string> tr_sets;
    bool tr_dry = false, tr_resume = false, tr_verbose = false;
    int tr_stop = 0;
    auto* tr = app.add_subcommand("train", "Run the search");
    tr->add_option("--config", tr_config, "config file");
    tr->add_option("--mode", tr_mode, "overrides the config's mode");
    tr->add_option("--seed", tr_seed, "overrides the config's seed");
    tr->add_option("--set", tr_sets, "key=value override (repeatable)");
    tr->add_option("--out", tr_out, "run directory");
    tr->add_flag("--dry-run", tr_dry, "print the resolved config and plan, then exit");
    tr->add_flag("--resume", tr_resume, "continue from <out>/checkpoint.bin");
    tr->add_option("--stop-after-epoch", tr_stop, "stop once this epoch is checkpointed")
        ->check(CLI::NonNegativeNumber);
    tr->add_flag("-v,--verbose", tr_verbose, "per-epoch progress on stderr");
    tr->callback([&] {
        action = [&] {
            Config cfg(tr_config);
            if (!tr_mode.empty()) cfg.set("mode", tr_mode);
            if (tr_seed) cfg.set("seed", std::to_string(*tr_seed));
            cfg.apply_all(tr_sets);
            if (tr_dry) {
                print(fetch([&](char* b, size_t c, size_t* l) {
                    return bbnas_config_plan(cfg.get(), b, c, l);
                }));
                return;
            }
            if (tr_out.empty())
                throw Failure{BBNAS_ERR_INVALID_ARGUMENT, "train: --out is required"};
            bbnas_train_options opts{tr_resume ? 1 : 0, tr_stop, tr_verbose ? 1 : 0};
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_train(cfg.get(), tr_out.c_str(), &opts, b, c, l);
            }));
        };
    });

    // eval
    std::string ev_ck, ev_head = "mixed", ev_split = "test";
    std::optional<double> ev_mu;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("--checkpoint", ev_ck)->required();
    ev->add_option("--mu", ev_mu, "mixing ratio (default: best validation mu)")
        ->check(CLI::Range(0.0, 1.0));
    ev->add_option("--head", ev_head)->check(CLI::IsMember({"mixed", "ins", "cls"}));
    ev->add_option("--split", ev_split)->check(CLI::IsMember({"test", "val", "train"}));
    ev->callback([&] {
        action = [&] {
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_eval(ev_ck.c_str(), ev_mu ? 1 : 0, ev_mu.value_or(0.0),
                                  ev_head.c_str(), ev_split.c_str(), b, c, l);
            }));
        };
    });

    // sweep-mu
    std::string sw_ck, sw_grid = "0:1:0.1", sw_out;
    auto* sw = app.add_subcommand("sweep-mu", "Accuracy across test-time mixing ratios");
    sw->add_option("--checkpoint", sw_ck)->required();
    sw->add_option("--grid", sw_grid, "a:b:step or comma list");
    sw->add_option("--out", sw_out, "CSV path")->required();
    sw->callback([&] {
        action = [&] {
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_sweep_mu(sw_ck.c_str(), sw_grid.c_str(), sw_out.c_str(), b, c, l);
            }));
        };
    });

    // probe-theorem1
    std::string pr_config, pr_mus = "0,0.25,0.5,0.75,1", pr_out;
    std::vector<std::string> pr_sets;
    bool pr_clone = false;
    auto* pr = app.add_subcommand("probe-theorem1", "Per-role gradient norms across mu");
    pr->add_option("--config", pr_config);
    pr->add_option("--mu-list", pr_mus);
    pr->add_flag("--clone-heads", pr_clone, "cls head mirrors the ins head");
    pr->add_option("--set", pr_sets, "key=value override (repeatable)");
    pr->add_option("--out", pr_out, "CSV path")->required();
    pr->callback([&] {
        action = [&] {
            Config cfg(pr_config);
            cfg.apply_all(pr_sets);
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_probe_theorem1(cfg.get(), pr_mus.c_str(), pr_clone ? 1 : 0,
                                            pr_out.c_str(), b, c, l);
            }));
        };
    });

    // matrix
    std::vector<std::string> mx_configs;
    std::vector<uint64_t> mx_seeds{1, 2, 3, 4, 5};
    std::string mx_out;
    bool mx_verbose = false;
    auto* mx = app.add_subcommand("matrix", "Six-method comparison across seeds");
    mx->add_option("--configs", mx_configs)->required();
    mx->add_option("--seeds", mx_seeds)->delimiter(',');
    mx->add_option("--out", mx_out)->required();
    mx->add_flag("-v,--verbose", mx_verbose);
    mx->callback([&] {
        action = [&] {
            std::vector<const char*> paths;
            for (const auto& p : mx_configs) paths.push_back(p.c_str());
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_run_matrix(paths.data(), paths.size(), mx_seeds.data(),
                                        mx_seeds.size(), mx_out.c_str(), mx_verbose ? 1 : 0, b,
                                        c, l);
            }));
        };
    });

    // gradcheck
    uint64_t gc_seed = 0;
    int gc_exit = kExitOk;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    gc->add_option("--seed", gc_seed);
    gc->callback([&] {
        action = [&] {
            double max_rel = 0.0;
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_gradcheck(gc_seed, &max_rel, b, c, l);
            }));
            if (!(max_rel < 1e-4)) gc_exit = kExitRuntime;
        };
    });

    // export-arch
    std::string ex_ck, ex_format = "json";
    auto* ex = app.add_subcommand("export-arch", "Print the derived genotype");
    ex->add_option("--checkpoint", ex_ck)->required();
    ex->add_option("--format", ex_format)->check(CLI::IsMember({"json", "dot"}));
    ex->callback([&] {
        action = [&] {
            print(fetch([&](char* b, size_t c, size_t* l) {
                return bbnas_export_genotype(ex_ck.c_str(), ex_format.c_str(), b, c, l);
            }));
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        action();
    } catch (const Failure& f) {
        std::fprintf(stderr, "bbnas: %s: %s\n", bbnas_status_name(f.status), f.message.c_str());
        return exit_code(f.status);
    }
    return gc_exit;
}
