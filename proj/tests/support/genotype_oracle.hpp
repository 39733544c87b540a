#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "bbnas/nas/genotype.hpp"
#include "bbnas/nas/primitives.hpp"

namespace oracle {

namespace nas = bbnas::nas;

// Exhaustive oracle: every pair of incoming edges and every non-zero op on
// each, scored by the sum of the chosen ops' softmax weights.
inline nas::CellGenotype brute_force_genotype(const std::vector<double>& alphas, std::size_t n_internal,
                         const nas::OpSet& ops) {
    const std::size_t K = ops.size();
    auto weight = [&](std::size_t e, std::size_t k) {
        double z = 0.0;
        for (std::size_t q = 0; q < K; ++q) z += std::exp(alphas[e * K + q]);
        return std::exp(alphas[e * K + k]) / z;
    };
    nas::CellGenotype g;
    std::size_t base = 0;
    for (std::size_t j = 0; j < n_internal; ++j) {
        const std::size_t n_in = j + 2;
        double best = -1.0;
        std::array<nas::GenotypeEdge, 2> pick{};
        for (std::size_t a = 0; a < n_in; ++a)
            for (std::size_t b = a + 1; b < n_in; ++b)
                for (std::size_t oa = 0; oa < K; ++oa)
                    for (std::size_t ob = 0; ob < K; ++ob) {
                        if (ops.name(oa) == "zero" || ops.name(ob) == "zero") continue;
                        const double s = weight(base + a, oa) + weight(base + b, ob);
                        if (s > best) {
                            best = s;
                            pick = {nas::GenotypeEdge{int(a), ops.name(oa)}, nas::GenotypeEdge{int(b), ops.name(ob)}};
                        }
                    }
        g.nodes.push_back(pick);
        base += n_in;
    }
    return g;
}

}  // namespace oracle
