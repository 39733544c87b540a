#include "bbnas/train/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "bbnas/common/error.hpp"
#include "bbnas/common/hash.hpp"

namespace bbnas::train {

namespace {

constexpr std::pair<Mode, std::string_view> kModeNames[] = {
    {Mode::darts_only, "darts-only"},
    {Mode::darts_resample, "darts-resample"},
    {Mode::bbn_naive, "bbn-naive"},
    {Mode::hls, "hls"},
    {Mode::hls_reverse_sigmoid, "hls-reverse-sigmoid"},
    {Mode::hls_continuous, "hls-continuous"},
    {Mode::hls_mix_half, "hls-mix-half"},
    {Mode::frozen_backbone, "frozen-backbone"},
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    require(r.ec == std::errc() && r.ptr == v.data() + v.size() && std::isfinite(out),
            ErrorKind::invalid_argument,
            std::string(key) + ": expected a number, got '" + std::string(v) + "'");
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    require(r.ec == std::errc() && r.ptr == v.data() + v.size() && !v.empty(),
            ErrorKind::invalid_argument,
            std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    fail(ErrorKind::invalid_argument,
         std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct KeyDef {
    std::string key;
    std::function<void(TrainConfig&, std::string_view)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
KeyDef size_key(std::string key, T TrainConfig::*field) {
    return {key,
            [key, field](TrainConfig& c, std::string_view v) {
                c.*field = static_cast<T>(to_u64(key, v));
            },
            [field](const TrainConfig& c) { return std::to_string(c.*field); }};
}

KeyDef real_key(std::string key, double TrainConfig::*field) {
    return {key, [key, field](TrainConfig& c, std::string_view v) { c.*field = to_double(key, v); },
            [field](const TrainConfig& c) { return fmt(c.*field); }};
}

const std::vector<KeyDef>& key_defs() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> d;
        d.push_back({"mode", [](TrainConfig& c, std::string_view v) { c.mode = parse_mode(v); },
                     [](const TrainConfig& c) { return std::string(mode_name(c.mode)); }});
        d.push_back(size_key("seed", &TrainConfig::seed));
        d.push_back(size_key("epochs", &TrainConfig::epochs));
        d.push_back(size_key("batch_size", &TrainConfig::batch_size));
        d.push_back(real_key("lr.weights", &TrainConfig::lr_weights));
        d.push_back(real_key("lr.arch", &TrainConfig::lr_arch));
        d.push_back(real_key("lr.momentum", &TrainConfig::momentum));
        d.push_back(real_key("weight_decay", &TrainConfig::weight_decay));
        d.push_back(real_key("hls.tau", &TrainConfig::hls_tau));
        d.push_back({"mixing.kind",
                     [](TrainConfig& c, std::string_view v) {
                         c.mixing_kind = sched::parse_mixing_kind(v);
                     },
                     [](const TrainConfig& c) {
                         return std::string(sched::mixing_kind_name(c.mixing_kind));
                     }});
        d.push_back(real_key("mixing.k", &TrainConfig::mixing_k));
        d.push_back(real_key("mixing.c", &TrainConfig::mixing_c));
        d.push_back(real_key("continuation.fraction", &TrainConfig::continuation_fraction));
        d.push_back({"arch.order",
                     [](TrainConfig& c, std::string_view v) { c.arch_order = parse_arch_order(v); },
                     [](const TrainConfig& c) { return std::string(arch_order_name(c.arch_order)); }});
        d.push_back({"loss.form",
                     [](TrainConfig& c, std::string_view v) { c.loss_form = bbn::parse_loss_form(v); },
                     [](const TrainConfig& c) { return std::string(bbn::loss_form_name(c.loss_form)); }});
        d.push_back(size_key("model.layers", &TrainConfig::layers));
        d.push_back(size_key("model.width", &TrainConfig::width));
        d.push_back(size_key("model.nodes", &TrainConfig::nodes));
        d.push_back({"model.opset",
                     [](TrainConfig& c, std::string_view v) {
                         nas::OpSet::by_name(v);
                         c.opset = std::string(v);
                     },
                     [](const TrainConfig& c) { return c.opset; }});
        d.push_back({"data.source",
                     [](TrainConfig& c, std::string_view v) {
                         DataSource::parse(v);
                         c.data_source = std::string(v);
                     },
                     [](const TrainConfig& c) { return c.data_source; }});
        d.push_back(size_key("data.seed", &TrainConfig::data_seed));
        d.push_back(real_key("data.noise", &TrainConfig::data_noise));
        d.push_back(real_key("data.imbalance_ratio", &TrainConfig::imbalance_ratio));
        d.push_back(size_key("data.base_count", &TrainConfig::base_count));
        d.push_back(real_key("data.train_fraction", &TrainConfig::train_fraction));
        d.push_back(size_key("data.test_per_class", &TrainConfig::test_per_class));
        d.push_back(size_key("augment.pad", &TrainConfig::augment_pad));
        d.push_back({"augment.flip",
                     [](TrainConfig& c, std::string_view v) { c.augment_flip = to_bool("augment.flip", v); },
                     [](const TrainConfig& c) { return std::string(c.augment_flip ? "true" : "false"); }});
        d.push_back({"eval.mu_grid",
                     [](TrainConfig& c, std::string_view v) {
                         parse_mu_grid(v);
                         c.mu_grid = std::string(v);
                     },
                     [](const TrainConfig& c) { return c.mu_grid; }});
        return d;
    }();
    return defs;
}

const KeyDef& find_key(std::string_view key) {
    for (const auto& d : key_defs())
        if (d.key == key) return d;
    fail(ErrorKind::invalid_argument, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::string_view mode_name(Mode mode) {
    for (const auto& [m, n] : kModeNames)
        if (m == mode) return n;
    return "?";
}

Mode parse_mode(std::string_view name) {
    for (const auto& [m, n] : kModeNames)
        if (n == name) return m;
    std::string known;
    for (const auto& [m, n] : kModeNames) known += (known.empty() ? "" : ", ") + std::string(n);
    fail(ErrorKind::invalid_argument, "unknown mode '" + std::string(name) + "' (known: " + known + ")");
}

std::string_view arch_order_name(ArchOrder order) {
    return order == ArchOrder::first ? "first" : "second";
}

ArchOrder parse_arch_order(std::string_view name) {
    if (name == "first") return ArchOrder::first;
    if (name == "second") return ArchOrder::second;
    fail(ErrorKind::invalid_argument, "arch.order must be first or second, got '" + std::string(name) + "'");
}

DataSource DataSource::parse(std::string_view text) {
    DataSource s;
    constexpr std::string_view prefix = "synthetic:";
    if (text.substr(0, prefix.size()) == prefix) {
        std::vector<std::size_t> parts;
        std::string_view rest = text.substr(prefix.size());
        while (true) {
            const auto comma = rest.find(',');
            parts.push_back(to_u64("data.source", trim(rest.substr(0, comma))));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        require(parts.size() == 3 || parts.size() == 4, ErrorKind::invalid_argument,
                "data.source: expected synthetic:C,n,H[,channels], got '" + std::string(text) + "'");
        s.classes = parts[0];
        s.per_class = parts[1];
        s.size = parts[2];
        s.channels = parts.size() == 4 ? parts[3] : 1;
        require(s.classes >= 2 && s.per_class >= 1 && s.size >= 1 && s.channels >= 1,
                ErrorKind::invalid_argument, "data.source: synthetic needs C >= 2 and positive n, H, channels");
        return s;
    }
    s.synthetic = false;
    s.classes = 10;
    s.channels = 3;
    s.size = 32;
    s.per_class = 5000;
    if (text == "cifar10") {
        const char* env = std::getenv(kDataDirEnv);
        s.dir = env ? env : "";
    } else {
        s.dir = std::filesystem::path(std::string(text));
    }
    return s;
}

std::string DataSource::to_string() const {
    if (synthetic)
        return "synthetic:" + std::to_string(classes) + "," + std::to_string(per_class) + "," +
               std::to_string(size) + (channels != 1 ? "," + std::to_string(channels) : "");
    return dir.string();
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& d : key_defs()) k.push_back(d.key);
        return k;
    }();
    return keys;
}

void set_key(TrainConfig& cfg, std::string_view key, std::string_view value) {
    find_key(key).set(cfg, trim(value));
}

std::string get_key(const TrainConfig& cfg, std::string_view key) { return find_key(key).get(cfg); }

TrainConfig parse_config(std::string_view text) {
    TrainConfig cfg;
    std::vector<std::string> errors;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        try {
            set_key(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const Error& e) {
            errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!errors.empty()) {
        std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" +
                          (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  " + e;
        fail(ErrorKind::invalid_argument, msg);
    }
    return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::string> validate(const TrainConfig& c) {
    std::vector<std::string> e;
    auto check = [&](bool ok, std::string msg) {
        if (!ok) e.push_back(std::move(msg));
    };
    check(c.epochs >= 1, "epochs must be >= 1");
    check(c.batch_size >= 1, "batch_size must be >= 1");
    check(c.lr_weights >= 0.0, "lr.weights must be >= 0");
    check(c.lr_arch >= 0.0, "lr.arch must be >= 0");
    check(c.momentum >= 0.0 && c.momentum < 1.0, "lr.momentum must lie in [0,1)");
    check(c.weight_decay >= 0.0, "weight_decay must be >= 0");
    check(c.hls_tau > 0.0, "hls.tau must be > 0");
    check(c.mixing_k > 0.0, "mixing.k must be > 0");
    check(c.mixing_c >= 0.0 && c.mixing_c <= 1.0, "mixing.c must lie in [0,1]");
    check(c.continuation_fraction >= 0.0, "continuation.fraction must be >= 0");
    check(c.layers >= 1, "model.layers must be >= 1");
    check(c.width >= 1, "model.width must be >= 1");
    check(c.nodes >= 4, "model.nodes must be >= 4");
    check(c.imbalance_ratio >= 1.0, "data.imbalance_ratio must be >= 1");
    check(c.base_count >= 2, "data.base_count must be >= 2");
    check(c.train_fraction > 0.0 && c.train_fraction < 1.0, "data.train_fraction must lie in (0,1)");
    check(c.test_per_class >= 1, "data.test_per_class must be >= 1");
    check(c.data_noise >= 0.0, "data.noise must be >= 0");
    try {
        const auto src = DataSource::parse(c.data_source);
        if (src.synthetic)
            check(src.per_class >= c.base_count,
                  "data.source provides " + std::to_string(src.per_class) +
                      " samples per class but data.base_count is " + std::to_string(c.base_count));
        else
            check(!src.dir.empty(), std::string("data.source is cifar10 but ") + kDataDirEnv + " is not set");
        const auto counts_tail = static_cast<double>(c.base_count) / c.imbalance_ratio;
        check(std::floor(counts_tail + 1e-9) >= 2,
              "data.base_count / data.imbalance_ratio leaves fewer than 2 samples in the last class");
    } catch (const Error& ex) {
        e.push_back(ex.what());
    }
    return e;
}

void require_valid(const TrainConfig& cfg) {
    const auto errors = validate(cfg);
    if (errors.empty()) return;
    std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    fail(ErrorKind::invalid_argument, msg);
}

std::string dump_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& d : key_defs()) out += d.key + " = " + d.get(cfg) + "\n";
    return out;
}

std::uint64_t config_hash(const TrainConfig& cfg) { return fnv1a(dump_config(cfg)); }

std::vector<double> parse_mu_grid(std::string_view text) {
    text = trim(text);
    std::vector<double> out;
    if (text.find(':') != std::string_view::npos) {
        const auto c1 = text.find(':');
        const auto c2 = text.find(':', c1 + 1);
        require(c2 != std::string_view::npos, ErrorKind::invalid_argument,
                "mu grid: expected a:b:step, got '" + std::string(text) + "'");
        const double a = to_double("mu grid", trim(text.substr(0, c1)));
        const double b = to_double("mu grid", trim(text.substr(c1 + 1, c2 - c1 - 1)));
        const double step = to_double("mu grid", trim(text.substr(c2 + 1)));
        require(step > 0.0 && b >= a, ErrorKind::invalid_argument,
                "mu grid: need step > 0 and b >= a in '" + std::string(text) + "'");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            // snap to 12 decimals so 0.1 steps print as written
            const double v = std::round((a + static_cast<double>(i) * step) * 1e12) / 1e12;
            out.push_back(v);
        }
    } else {
        while (!text.empty()) {
            const auto comma = text.find(',');
            out.push_back(to_double("mu grid", trim(text.substr(0, comma))));
            if (comma == std::string_view::npos) break;
            text = text.substr(comma + 1);
        }
    }
    require(!out.empty(), ErrorKind::invalid_argument, "mu grid is empty");
    for (double m : out)
        require(m >= 0.0 && m <= 1.0, ErrorKind::invalid_argument,
                "mu grid value " + fmt(m) + " outside [0,1]");
    return out;
}

ModePlan plan_for(const TrainConfig& cfg) {
    ModePlan p;
    p.mixing = cfg.mixing_kind;
    const auto cont = static_cast<std::size_t>(
        std::floor(static_cast<double>(cfg.epochs) * cfg.continuation_fraction + 1e-9));
    switch (cfg.mode) {
        case Mode::darts_only:
            p.bilateral = false;
            break;
        case Mode::darts_resample:
            p.bilateral = false;
            p.instance_sampling = false;
            break;
        case Mode::bbn_naive:
            break;
        case Mode::hls:
            p.hls = true;
            break;
        case Mode::hls_reverse_sigmoid:
            p.hls = true;
            p.mixing = sched::MixingKind::reverse_sigmoid;
            break;
        case Mode::hls_continuous:
            p.hls = true;
            p.continuation_epochs = cont;
            p.continuation_mu = 0.0;
            break;
        case Mode::hls_mix_half:
            p.hls = true;
            p.continuation_epochs = cont;
            p.continuation_mu = 0.5;
            break;
        case Mode::frozen_backbone:
            p.hls = true;
            p.continuation_epochs = cont;
            p.continuation_mu = 0.0;
            p.continuation_freezes_backbone = true;
            break;
    }
    return p;
}

std::string describe_plan(const TrainConfig& cfg) {
    const auto p = plan_for(cfg);
    std::string out = dump_config(cfg);
    out += "plan.heads = " + std::string(p.bilateral ? "2" : "1") + "\n";
    out += "plan.sampling = " +
           std::string(p.bilateral ? "instance+class-balanced"
                                   : (p.instance_sampling ? "instance" : "class-balanced")) +
           "\n";
    out += "plan.mixing = " +
           std::string(p.bilateral ? sched::mixing_kind_name(p.mixing) : "constant:1") + "\n";
    out += "plan.hls = " + std::string(p.hls ? "on" : "off") + "\n";
    out += "plan.continuation_epochs = " + std::to_string(p.continuation_epochs) + "\n";
    out += "plan.continuation_mu = " + fmt(p.continuation_mu) + "\n";
    out += "plan.continuation_frozen_backbone = " +
           std::string(p.continuation_freezes_backbone ? "true" : "false") + "\n";
    return out;
}

bbn::ModelConfig model_config(const TrainConfig& cfg, std::size_t in_channels,
                              std::size_t image_size, std::size_t num_classes) {
    bbn::ModelConfig m;
    m.in_channels = in_channels;
    m.image_size = image_size;
    m.num_classes = num_classes;
    m.layers = cfg.layers;
    m.width = cfg.width;
    m.n_nodes = cfg.nodes;
    m.ops = nas::OpSet::by_name(cfg.opset);
    m.seed = derive_seed(cfg.seed, 1);
    return m;
}

}  // namespace bbnas::train
