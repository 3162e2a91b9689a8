#pragma once

// Test-only reference implementations, kept independent of the library paths
// they check.

#include <cmath>
#include <cstddef>
#include <vector>

#include "advaug/tensor.hpp"

namespace oracles {

// Largest singular value via cyclic Jacobi on W^T W (exact to machine
// precision for the small matrices used in tests).
inline double largest_singular_value(const advaug::Tensor& w) {
    std::size_t n = w.cols(), r = w.rows();
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < r; ++k) s += w[k * n + i] * w[k * n + j];
            a[i * n + j] = s;
        }
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    double lmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) lmax = std::max(lmax, a[i * n + i]);
    return std::sqrt(std::max(lmax, 0.0));
}

// KL(N(mu,sigma^2) || N(0,1)) by Simpson quadrature of p*(ln p - ln q).
inline double gaussian_kl_quadrature(double mu, double sigma) {
    auto integrand = [&](double x) {
        double lp = -0.5 * std::log(2.0 * M_PI) - std::log(sigma) -
                    0.5 * (x - mu) * (x - mu) / (sigma * sigma);
        double lq = -0.5 * std::log(2.0 * M_PI) - 0.5 * x * x;
        return std::exp(lp) * (lp - lq);
    };
    double lo = mu - 12.0 * sigma, hi = mu + 12.0 * sigma;
    const std::size_t n = 40000; // even
    double h = (hi - lo) / static_cast<double>(n);
    double acc = integrand(lo) + integrand(hi);
    for (std::size_t i = 1; i < n; ++i) {
        acc += integrand(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

} // namespace oracles
