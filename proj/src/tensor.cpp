#include "advaug/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "advaug/errors.hpp"

namespace advaug {

std::string format_shape(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
    if (!std::isfinite(v)) throw NumericalError("tensor fill value is not finite");
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("tensor shape " + format_shape(shape) + " expects " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(data.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw NumericalError("non-finite tensor value at flat index " + std::to_string(i));
        }
    }
    return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::vector(std::vector<double> data) {
    Shape shape{data.size()};
    return from(std::move(shape), std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return from({rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("rows(): tensor is not a matrix, shape " + format_shape(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("cols(): tensor is not a matrix, shape " + format_shape(shape_));
    return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
double& Tensor::at(std::size_t r, std::size_t c) {
    std::size_t w = cols();
    return data_[r * w + c];
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw std::invalid_argument("item(): tensor has " + std::to_string(data_.size()) +
                                    " elements, expected 1");
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + format_shape(a.shape()) +
                                    " vs " + format_shape(b.shape()));
    }
}

namespace {

template <typename F>
Tensor elementwise(const Tensor& a, const Tensor& b, const char* op, F f) {
    if (a.is_scalar() && !b.is_scalar()) {
        double s = a.item();
        std::vector<double> out(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) out[i] = f(s, b[i]);
        return Tensor::from(b.shape(), std::move(out));
    }
    if (b.is_scalar() && !a.is_scalar()) {
        double s = b.item();
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], s);
        return Tensor::from(a.shape(), std::move(out));
    }
    check_same_shape(a, b, op);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return Tensor::from(a.shape(), std::move(out));
}

} // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor operator-(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor operator*(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor operator/(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, "div", [](double x, double y) { return x / y; });
}
Tensor operator*(const Tensor& a, double s) { return a * Tensor::scalar(s); }
Tensor operator+(const Tensor& a, double s) { return a + Tensor::scalar(s); }

Tensor vmax(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, "max", [](double x, double y) { return x >= y ? x : y; });
}
Tensor vmin(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, "min", [](double x, double y) { return x <= y ? x : y; });
}

Tensor vclamp(const Tensor& x, double lo, double hi) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lo, hi);
    return Tensor::from(x.shape(), std::move(out));
}

Tensor vclamp(const Tensor& x, const Tensor& lo, const Tensor& hi) {
    check_same_shape(x, lo, "clamp");
    check_same_shape(x, hi, "clamp");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lo[i], hi[i]);
    return Tensor::from(x.shape(), std::move(out));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw std::invalid_argument("matmul: operands must be matrices, got " +
                                    format_shape(a.shape()) + " and " + format_shape(b.shape()));
    }
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner extents disagree, " + format_shape(a.shape()) +
                                    " x " + format_shape(b.shape()));
    }
    std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            const std::size_t brow = p * m;
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += av * b[brow + j];
        }
    }
    return Tensor::from({n, m}, std::move(out));
}

Tensor transposed(const Tensor& m) {
    std::size_t r = m.rows(), c = m.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m[i * c + j];
    return Tensor::from({c, r}, std::move(out));
}

double sum(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
    return s;
}

double mean(const Tensor& x) {
    if (x.size() == 0) throw std::invalid_argument("mean of empty tensor");
    return sum(x) / static_cast<double>(x.size());
}

double l2_norm(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

double linf_norm(const Tensor& x) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace advaug
