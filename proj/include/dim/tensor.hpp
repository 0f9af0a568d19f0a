#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace dim {

// Dense row-major array of 64-bit reals. Immutable by convention once an
// operation has returned it; ops hand back fresh tensors. Checkpoints may
// store a 32-bit copy (see serialize.hpp), in memory everything is double.
class Tensor {
public:
    Tensor() = default;
    // Zero-filled. Throws std::invalid_argument on an empty shape list or a
    // zero dimension.
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::vector<double>& vec() noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const char* what);
void require_finite(double v, const char* what);

// Elementwise; shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// silu(x) = x * sigmoid(x)
Tensor silu(const Tensor& x);
// ln(1 + e^x), overflow-safe: x + ln(1 + e^-x) for x > 20
Tensor softplus(const Tensor& x);

double silu_scalar(double x);
double silu_grad_scalar(double x);
double softplus_scalar(double x);
double sigmoid_scalar(double x);

double sum(const Tensor& t);
double mean(const Tensor& t);
double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

// out[r,o] = sum_k x[r,k] * w[o,k] + b[o]; w is [out_dim x in_dim] row-major,
// b may be null. The layout matches how Linear stores its weight.
void linear_forward(const double* x, const double* w, const double* b,
                    double* out, std::size_t rows, std::size_t in_dim,
                    std::size_t out_dim);

// Accumulates into gw/gb (callers zero them once per step); writes gx if
// non-null (overwrites).
void linear_backward(const double* x, const double* w, const double* gout,
                     double* gx, double* gw, double* gb, std::size_t rows,
                     std::size_t in_dim, std::size_t out_dim);

struct Linear {
    Tensor w;  // [out_dim x in_dim]
    Tensor b;  // [out_dim] or empty (no bias)

    std::size_t in_dim() const { return w.dim(1); }
    std::size_t out_dim() const { return w.dim(0); }
    bool has_bias() const { return b.size() > 0; }

    // x: [rows x in_dim] -> [rows x out_dim]
    Tensor forward(const Tensor& x) const;
};

}  // namespace dim
