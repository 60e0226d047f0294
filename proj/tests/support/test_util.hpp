#pragma once

// Shared helpers for the unit and acceptance suites: deterministic tensor
// fills and the central-finite-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dilam/rng.hpp"
#include "dilam/tensor.hpp"

namespace dilam::testutil {

template <typename T>
void fill_uniform(TensorT<T>& t, Rng& rng, double lo, double hi) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void fill_normal(TensorT<T>& t, Rng& rng, double mean, double stddev) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal(mean, stddev));
}

/// Keeps values away from zero so ReLU kinks do not break finite differences.
template <typename T>
void fill_uniform_away_from_zero(TensorT<T>& t, Rng& rng, double margin, double span) {
    for (int64_t i = 0; i < t.numel(); ++i) {
        double mag = margin + rng.u01() * span;
        t[i] = static_cast<T>(rng.u01() < 0.5 ? -mag : mag);
    }
}

inline double rel_err(double a, double b, double floor = 1e-3) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central finite differences against already-computed analytic gradients.
/// `forward_loss` must rebuild the forward pass from current parameter values;
/// parameter grads must already hold the analytic gradient. Returns the worst
/// relative error over every scalar of every listed parameter.
template <typename F>
double max_fd_rel_err(const std::vector<ParameterT<double>*>& params, F forward_loss,
                      double h = 1e-5) {
    double worst = 0.0;
    for (ParameterT<double>* p : params) {
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const double keep = p->value[i];
            p->value[i] = keep + h;
            const double lp = forward_loss();
            p->value[i] = keep - h;
            const double lm = forward_loss();
            p->value[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            worst = std::max(worst, rel_err(p->grad[i], fd));
        }
    }
    return worst;
}

}  // namespace dilam::testutil
