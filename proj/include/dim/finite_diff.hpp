#pragma once

#include <functional>

#include "dim/tensor.hpp"

namespace dim {

// Central-difference gradient of a scalar function, (f(x+eps*e_i) -
// f(x-eps*e_i)) / (2 eps) per coordinate. This is the independent oracle
// every analytic adjoint in the repo is checked against; it must never call
// into the backward passes it validates.
//
// eps must lie in [1e-6, 1e-3]. A non-finite f evaluation throws, naming the
// offending coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps);

// max_i |a_i - n_i| / max(|n_i|, floor); the usual relative-error summary for
// gradient checks.
double max_rel_error(const Tensor& analytic, const Tensor& numeric,
                     double floor = 1e-8);

}  // namespace dim
