#include "dim/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dim {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape) {
    if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension");
    }
    shape_ = std::move(shape);
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) {
    if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension");
    }
    if (shape_product(shape) != data.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                    " does not match data length " +
                                    std::to_string(data.size()));
    }
    shape_ = std::move(shape);
    data_ = std::move(data);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.vec()) x = v;
    return t;
}

void require_finite(const Tensor& t, const char* what) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) {
            throw std::runtime_error(std::string(what) +
                                     ": non-finite value at flat index " +
                                     std::to_string(i));
        }
    }
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw std::runtime_error(std::string(what) + ": non-finite value");
    }
}

static void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    require_finite(out, "add");
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    require_finite(out, "sub");
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    require_finite(out, "mul");
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    require_finite(out, "scale");
    return out;
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double silu_scalar(double x) { return x * sigmoid_scalar(x); }

double silu_grad_scalar(double x) {
    double s = sigmoid_scalar(x);
    return s * (1.0 + x * (1.0 - s));
}

double softplus_scalar(double x) {
    if (x > 20.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

Tensor silu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = silu_scalar(x[i]);
    require_finite(out, "silu");
    return out;
}

Tensor softplus(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = softplus_scalar(x[i]);
    require_finite(out, "softplus");
    return out;
}

double sum(const Tensor& t) {
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
    return s;
}

double mean(const Tensor& t) { return sum(t) / static_cast<double>(t.size()); }

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const Tensor& t) {
    double m = 0;
    for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::fabs(t[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

void linear_forward(const double* x, const double* w, const double* b,
                    double* out, std::size_t rows, std::size_t in_dim,
                    std::size_t out_dim) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * in_dim;
        double* or_ = out + r * out_dim;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* wo = w + o * in_dim;
            double acc = b ? b[o] : 0.0;
            for (std::size_t k = 0; k < in_dim; ++k) acc += xr[k] * wo[k];
            or_[o] = acc;
        }
    }
}

void linear_backward(const double* x, const double* w, const double* gout,
                     double* gx, double* gw, double* gb, std::size_t rows,
                     std::size_t in_dim, std::size_t out_dim) {
    if (gx) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = gout + r * out_dim;
            double* gxr = gx + r * in_dim;
            for (std::size_t k = 0; k < in_dim; ++k) gxr[k] = 0.0;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double g = gr[o];
                const double* wo = w + o * in_dim;
                for (std::size_t k = 0; k < in_dim; ++k) gxr[k] += g * wo[k];
            }
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = gout + r * out_dim;
        const double* xr = x + r * in_dim;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = gr[o];
            if (gb) gb[o] += g;
            double* gwo = gw + o * in_dim;
            for (std::size_t k = 0; k < in_dim; ++k) gwo[k] += g * xr[k];
        }
    }
}

Tensor Linear::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != in_dim()) {
        throw std::invalid_argument("linear: input " + shape_str(x.shape()) +
                                    " does not match weight " +
                                    shape_str(w.shape()));
    }
    Tensor out({x.dim(0), out_dim()});
    linear_forward(x.data(), w.data(), has_bias() ? b.data() : nullptr,
                   out.data(), x.dim(0), in_dim(), out_dim());
    return out;
}

}  // namespace dim
