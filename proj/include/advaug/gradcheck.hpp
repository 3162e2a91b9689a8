#pragma once

#include <functional>

#include "advaug/tape.hpp"

namespace advaug {

// Scalar-valued function of one tensor, built on a caller-provided tape.
using TapeFn = std::function<Var(Tape&, Var)>;

// Max over coordinates of |analytic - central difference| normalized by
// (|analytic| + |numeric| + 1e-12). h is the central-difference step.
double finite_difference_check(const TapeFn& f, const Tensor& x, double h);

// Function value at x (records a throwaway tape).
double eval_scalar(const TapeFn& f, const Tensor& x);

// Analytic gradient at x.
Tensor analytic_gradient(const TapeFn& f, const Tensor& x);

} // namespace advaug
