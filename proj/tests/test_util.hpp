#ifndef AFFECT_TESTS_UTIL_HPP
#define AFFECT_TESTS_UTIL_HPP

#include <cmath>
#include <random>
#include <vector>

#include "affect/tensor.hpp"

namespace testutil {

inline affect::Tensor random_tensor(std::vector<std::size_t> shape,
                                    std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    affect::Tensor t = affect::Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

inline std::vector<double> random_series(std::size_t n, std::mt19937_64& rng,
                                         double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> s(n);
    for (double& v : s) v = dist(rng);
    return s;
}

// relative error with absolute floor, as used by all gradient checks
inline bool grad_close(double analytic, double numeric, double rel = 1e-4,
                       double abs = 1e-6) {
    const double diff = std::fabs(analytic - numeric);
    if (diff <= abs) return true;
    return diff <= rel * std::max(std::fabs(analytic), std::fabs(numeric));
}

// Central finite difference of f with respect to element i of t.
template <typename F>
double fd_element(affect::Tensor& t, std::size_t i, F&& f, double h = 1e-5) {
    const double saved = t.data[i];
    t.data[i] = saved + h;
    const double up = f();
    t.data[i] = saved - h;
    const double down = f();
    t.data[i] = saved;
    return (up - down) / (2.0 * h);
}

}  // namespace testutil

#endif
