#pragma once

namespace advaug {

// Digamma / trigamma for strictly positive arguments, via upward recurrence
// into the asymptotic region. Good to ~1e-12, which is plenty for the
// evidence-loss gradients they feed.
double digamma(double x);
double trigamma(double x);

} // namespace advaug
