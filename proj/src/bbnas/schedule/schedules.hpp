#pragma once

#include <string>
#include <string_view>

namespace bbnas::sched {

// mu = 1 - (t/T)^2, for 0 <= t <= T.
double parabolic_mu(double t, double T);

// mu = 1 - sigmoid(((t - T/2) / (T/2)) * k). Centrally symmetric about
// (T/2, 0.5).
double reverse_sigmoid_mu(double t, double T, double k);

struct HlsConfig {
    double xi0 = 0.02;
    double tau = 5.0;
};

// Backbone architecture learning rate xi0 * (1 - exp(-tau * mu)).
double hls_scale(const HlsConfig& cfg, double mu);

// lr0 * 0.5 * (1 + cos(pi * t / T)).
double cosine_anneal(double lr0, double t, double T);

enum class MixingKind { parabolic, reverse_sigmoid, constant };

std::string_view mixing_kind_name(MixingKind kind);
MixingKind parse_mixing_kind(std::string_view name);

struct MixingSchedule {
    MixingKind kind = MixingKind::parabolic;
    double T = 50;
    double k = 6.0;
    double c = 1.0;

    double operator()(double t) const;
};

}  // namespace bbnas::sched
