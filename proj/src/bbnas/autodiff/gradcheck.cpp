#include "bbnas/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "bbnas/common/error.hpp"

namespace bbnas::ad {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

GradcheckResult gradcheck(const std::string& name, const std::function<Tensor()>& loss,
                          const std::vector<Tensor>& leaves, std::size_t max_coords, double h,
                          Rng& rng) {
    std::vector<Tensor> ls = leaves;
    for (auto& t : ls) {
        require(t.is_leaf() && t.requires_grad(), ErrorKind::invalid_argument,
                "gradcheck " + name + ": inputs must be grad-requiring leaves");
        t.clear_grad();
    }
    backward(loss());

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    std::size_t total = 0;
    for (const auto& t : ls) total += t.size();
    if (max_coords == 0 || max_coords >= total) {
        for (std::size_t i = 0; i < ls.size(); ++i)
            for (std::size_t k = 0; k < ls[i].size(); ++k) coords.emplace_back(i, k);
    } else {
        for (std::size_t n = 0; n < max_coords; ++n) {
            std::size_t flat = rng.below(total);
            std::size_t i = 0;
            while (flat >= ls[i].size()) flat -= ls[i++].size();
            coords.emplace_back(i, flat);
        }
    }

    GradcheckResult res;
    res.name = name;
    NoGradGuard guard;
    for (auto [i, k] : coords) {
        const double analytic = ls[i].has_grad() ? ls[i].grad()[k] : 0.0;
        auto v = ls[i].mutable_data();
        const double orig = v[k];
        v[k] = orig + h;
        const double fp = loss().item();
        v[k] = orig - h;
        const double fm = loss().item();
        v[k] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        res.max_rel_err = std::max(res.max_rel_err, relative_error(analytic, numeric));
        res.max_abs_err = std::max(res.max_abs_err, std::abs(analytic - numeric));
        ++res.coords;
    }
    for (auto& t : ls) t.clear_grad();
    return res;
}

}  // namespace bbnas::ad
