#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace advaug {

// Extents of a dense row-major array. An empty shape denotes a scalar
// (rank 0, exactly one element).
using Shape = std::vector<std::size_t>;

std::string format_shape(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense n-dimensional array of doubles, row-major. Construction from data
// rejects NaN/Inf so every live tensor holds finite values only.
class Tensor {
public:
    Tensor() : shape_{0} {}

    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
    static Tensor from(Shape shape, std::vector<double> data);
    static Tensor vector(std::vector<double> data);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    bool is_scalar() const { return shape_.empty(); }

    std::size_t rows() const;
    std::size_t cols() const;

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    // Scalar payload; throws unless rank 0 or single-element.
    double item() const;

    std::span<const double> data() const { return data_; }
    std::span<double> data_mut() { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {}

    Shape shape_;
    std::vector<double> data_;
};

// Value-level arithmetic. Operands must share a shape, or one side may be
// a scalar tensor (shape-{} broadcast). No other broadcasting.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);
Tensor operator+(const Tensor& a, double s);
Tensor vmax(const Tensor& a, const Tensor& b);
Tensor vmin(const Tensor& a, const Tensor& b);
Tensor vclamp(const Tensor& x, double lo, double hi);
Tensor vclamp(const Tensor& x, const Tensor& lo, const Tensor& hi);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transposed(const Tensor& m);

double sum(const Tensor& x);
double mean(const Tensor& x);
double l2_norm(const Tensor& x);
double linf_norm(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace advaug
