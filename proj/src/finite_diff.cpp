#include "dim/finite_diff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dim {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) {
        throw std::invalid_argument("finite_diff_grad: eps " +
                                    std::to_string(eps) +
                                    " outside [1e-6, 1e-3]");
    }
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        double fp = f(probe);
        probe[i] = orig - eps;
        double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error(
                "finite_diff_grad: non-finite f at coordinate " +
                std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

double max_rel_error(const Tensor& analytic, const Tensor& numeric,
                     double floor) {
    if (!analytic.same_shape(numeric)) {
        throw std::invalid_argument("max_rel_error: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double denom = std::max(std::fabs(numeric[i]), floor);
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

}  // namespace dim
