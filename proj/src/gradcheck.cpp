#include "advaug/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace advaug {

double eval_scalar(const TapeFn& f, const Tensor& x) {
    Tape tape;
    Var loss = f(tape, tape.leaf(x, false));
    return tape.value(loss).item();
}

Tensor analytic_gradient(const TapeFn& f, const Tensor& x) {
    Tape tape;
    Var xv = tape.leaf(x, true);
    Var loss = f(tape, xv);
    tape.backward(loss);
    return tape.grad(xv);
}

double finite_difference_check(const TapeFn& f, const Tensor& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be > 0");
    Tensor analytic = analytic_gradient(f, x);
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double orig = probe[i];
        probe[i] = orig + h;
        double fp = eval_scalar(f, probe);
        probe[i] = orig - h;
        double fm = eval_scalar(f, probe);
        probe[i] = orig;
        double numeric = (fp - fm) / (2.0 * h);
        double denom = std::abs(analytic[i]) + std::abs(numeric) + 1e-12;
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

} // namespace advaug
