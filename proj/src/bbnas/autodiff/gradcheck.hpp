#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bbnas/autodiff/tensor.hpp"
#include "bbnas/common/rng.hpp"

namespace bbnas::ad {

struct GradcheckResult {
    std::string name;
    std::size_t coords = 0;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Compare backward() against central differences (f(x+h) - f(x-h)) / 2h on
// coordinates of the given leaves. loss() must rebuild the graph from the
// current leaf values. With max_coords == 0 every coordinate is checked;
// otherwise that many are drawn uniformly over the concatenated leaves.
GradcheckResult gradcheck(const std::string& name, const std::function<Tensor()>& loss,
                          const std::vector<Tensor>& leaves, std::size_t max_coords, double h,
                          Rng& rng);

}  // namespace bbnas::ad
