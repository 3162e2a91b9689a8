#include "advaug/special.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace advaug {

double digamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("digamma: argument must be > 0, got " + std::to_string(x));
    double r = 0.0;
    while (x < 8.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    // ln x - 1/(2x) - sum B_2n / (2n x^2n)
    r += std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 -
                 inv2 * (1.0 / 120.0 -
                         inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return r;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("trigamma: argument must be > 0, got " + std::to_string(x));
    double r = 0.0;
    while (x < 8.0) {
        r += 1.0 / (x * x);
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_2n / x^(2n+1)
    r += inv + 0.5 * inv2 +
         inv * inv2 * (1.0 / 6.0 -
                       inv2 * (1.0 / 30.0 -
                               inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    return r;
}

} // namespace advaug
