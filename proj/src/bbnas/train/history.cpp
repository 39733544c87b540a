#include "bbnas/train/history.hpp"

#include <charconv>
#include <cmath>

#include "bbnas/common/hash.hpp"

namespace bbnas::train {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string RunHistory::to_csv(std::uint64_t config_hash) const {
    std::string out = "# config_hash=" + hex64(config_hash) + "\n";
    out += "epoch,phase,mu,lr_weights,lr_arch_bb,lr_arch_head,train_loss,train_batch_acc,"
           "train_acc,val_loss,val_acc";
    for (double m : mu_grid) out += ",val_acc_mu" + format_double(m);
    out += ",best_mu,best_val_acc,bb_grad_norm,alpha_bb_disp\n";
    for (const auto& r : records) {
        out += std::to_string(r.epoch) + "," + r.phase;
        for (double v : {r.mu, r.lr_weights, r.lr_arch_bb, r.lr_arch_head, r.train_loss,
                         r.train_batch_acc, r.train_acc, r.val_loss, r.val_acc})
            out += "," + format_double(v);
        for (double v : r.val_acc_grid) out += "," + format_double(v);
        for (double v : {r.best_mu, r.best_val_acc, r.bb_grad_norm, r.alpha_bb_disp})
            out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

std::string RunHistory::genotypes_jsonl() const {
    std::string out;
    for (const auto& r : records)
        out += "{\"epoch\":" + std::to_string(r.epoch) + ",\"genotype\":" + r.genotype + "}\n";
    return out;
}

nlohmann::json RunHistory::to_json() const {
    nlohmann::json j;
    j["mu_grid"] = mu_grid;
    auto& rs = j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
        rs.push_back({{"epoch", r.epoch},
                      {"phase", r.phase},
                      {"mu", r.mu},
                      {"lr_weights", r.lr_weights},
                      {"lr_arch_bb", r.lr_arch_bb},
                      {"lr_arch_head", r.lr_arch_head},
                      {"train_loss", r.train_loss},
                      {"train_batch_acc", r.train_batch_acc},
                      {"train_acc", r.train_acc},
                      {"val_loss", r.val_loss},
                      {"val_acc", r.val_acc},
                      {"val_acc_grid", r.val_acc_grid},
                      {"best_mu", r.best_mu},
                      {"best_val_acc", r.best_val_acc},
                      {"bb_grad_norm", r.bb_grad_norm},
                      {"alpha_bb_disp", r.alpha_bb_disp},
                      {"genotype", r.genotype}});
    }
    return j;
}

RunHistory RunHistory::from_json(const nlohmann::json& j) {
    RunHistory h;
    h.mu_grid = j.at("mu_grid").get<std::vector<double>>();
    for (const auto& x : j.at("records")) {
        EpochRecord r;
        r.epoch = x.at("epoch").get<std::size_t>();
        r.phase = x.at("phase").get<std::string>();
        r.mu = x.at("mu").get<double>();
        r.lr_weights = x.at("lr_weights").get<double>();
        r.lr_arch_bb = x.at("lr_arch_bb").get<double>();
        r.lr_arch_head = x.at("lr_arch_head").get<double>();
        r.train_loss = x.at("train_loss").get<double>();
        r.train_batch_acc = x.at("train_batch_acc").get<double>();
        r.train_acc = x.at("train_acc").get<double>();
        r.val_loss = x.at("val_loss").get<double>();
        r.val_acc = x.at("val_acc").get<double>();
        r.val_acc_grid = x.at("val_acc_grid").get<std::vector<double>>();
        r.best_mu = x.at("best_mu").get<double>();
        r.best_val_acc = x.at("best_val_acc").get<double>();
        r.bb_grad_norm = x.at("bb_grad_norm").get<double>();
        r.alpha_bb_disp = x.at("alpha_bb_disp").get<double>();
        r.genotype = x.at("genotype").get<std::string>();
        h.records.push_back(std::move(r));
    }
    return h;
}

double tail_displacement(const RunHistory& h, double fraction) {
    std::size_t main_epochs = 0;
    for (const auto& r : h.records)
        if (r.phase == "main") ++main_epochs;
    const auto tail = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(main_epochs) - 1e-9));
    double total = 0.0;
    for (const auto& r : h.records)
        if (r.phase == "main" && r.epoch + tail > main_epochs) total += r.alpha_bb_disp;
    return total;
}

}  // namespace bbnas::train
