#include "bbnas/schedule/schedules.hpp"

#include <cmath>
#include <numbers>

#include "bbnas/common/error.hpp"

namespace bbnas::sched {

namespace {

void check_epoch(double t, double T, const char* who) {
    require(T > 0, ErrorKind::invalid_argument, std::string(who) + ": T must be positive");
    require(t >= 0 && t <= T, ErrorKind::invalid_argument,
            std::string(who) + ": epoch " + std::to_string(t) + " outside [0, " +
                std::to_string(T) + "]");
}

}  // namespace

double parabolic_mu(double t, double T) {
    check_epoch(t, T, "parabolic_mu");
    const double r = t / T;
    return 1.0 - r * r;
}

double reverse_sigmoid_mu(double t, double T, double k) {
    check_epoch(t, T, "reverse_sigmoid_mu");
    require(k > 0, ErrorKind::invalid_argument, "reverse_sigmoid_mu: k must be positive");
    const double half = T / 2.0;
    const double x = (t - half) / half * k;
    // 1 - sigmoid(x) == sigmoid(-x)
    return 1.0 / (1.0 + std::exp(x));
}

double hls_scale(const HlsConfig& cfg, double mu) {
    require(mu >= 0.0 && mu <= 1.0, ErrorKind::invalid_argument,
            "hls_scale: mu " + std::to_string(mu) + " outside [0,1]");
    return cfg.xi0 * (1.0 - std::exp(-cfg.tau * mu));
}

double cosine_anneal(double lr0, double t, double T) {
    check_epoch(t, T, "cosine_anneal");
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t / T));
}

std::string_view mixing_kind_name(MixingKind kind) {
    switch (kind) {
        case MixingKind::parabolic: return "parabolic";
        case MixingKind::reverse_sigmoid: return "reverse-sigmoid";
        case MixingKind::constant: return "constant";
    }
    return "parabolic";
}

MixingKind parse_mixing_kind(std::string_view name) {
    if (name == "parabolic") return MixingKind::parabolic;
    if (name == "reverse-sigmoid") return MixingKind::reverse_sigmoid;
    if (name == "constant") return MixingKind::constant;
    fail(ErrorKind::invalid_argument, "unknown mixing kind '" + std::string(name) + "'");
}

double MixingSchedule::operator()(double t) const {
    switch (kind) {
        case MixingKind::parabolic: return parabolic_mu(t, T);
        case MixingKind::reverse_sigmoid: return reverse_sigmoid_mu(t, T, k);
        case MixingKind::constant:
            require(c >= 0.0 && c <= 1.0, ErrorKind::invalid_argument,
                    "constant mixing ratio outside [0,1]");
            return c;
    }
    return 1.0;
}

}  // namespace bbnas::sched
