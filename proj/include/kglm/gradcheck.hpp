#pragma once
// Finite-difference gradient checker: fourth-order central differences
// against an analytic gradient, reporting the worst relative error. The
// five-point stencil keeps truncation error at O(eps^4), so eps = 1e-3
// leaves roundoff (~1e-13/eps on O(1) losses) as the only meaningful noise
// source while truncation stays far below it.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/rng.hpp"

namespace kglm {

namespace detail {

// [f(x-2e) - 8 f(x-e) + 8 f(x+e) - f(x+2e)] / (12 e), evaluated along
// coordinate i. The numerator groups paired differences so coordinates the
// function ignores yield exactly zero. params is restored before returning.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double>& params, std::size_t i, double eps) {
    const double keep = params[i];
    auto eval = [&](double offset) {
        params[i] = keep + offset;
        double v = f(params);
        if (!std::isfinite(v))
            throw Error("grad_check: non-finite value at coordinate " + std::to_string(i));
        return v;
    };
    double m2 = eval(-2.0 * eps);
    double m1 = eval(-eps);
    double p1 = eval(eps);
    double p2 = eval(2.0 * eps);
    params[i] = keep;
    return (8.0 * (p1 - m1) + (m2 - p2)) / (12.0 * eps);
}

inline double rel_err(double analytic, double numeric) {
    if (!std::isfinite(analytic)) throw Error("grad_check: non-finite analytic gradient");
    return std::fabs(analytic - numeric) /
           std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
}

}  // namespace detail

// f maps a flat parameter vector to a scalar. rel err per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> params, const std::vector<double>& analytic,
                         double eps = 1e-3) {
    if (params.size() != analytic.size()) throw Error("grad_check: gradient size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i)
        worst = std::max(worst, detail::rel_err(analytic[i], detail::central_diff(f, params, i, eps)));
    return worst;
}

// Same check restricted to `probes` coordinates drawn without replacement,
// for parameter vectors too large to sweep.
inline double grad_check_sampled(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& params, const std::vector<double>& analytic,
                                 std::size_t probes, Rng& rng, double eps = 1e-3) {
    if (params.size() != analytic.size()) throw Error("grad_check: gradient size mismatch");
    if (params.empty()) return 0.0;
    std::vector<std::size_t> idx(params.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
    if (probes < idx.size()) idx.resize(probes);

    std::vector<double> p = params;
    double worst = 0.0;
    for (std::size_t i : idx)
        worst = std::max(worst, detail::rel_err(analytic[i], detail::central_diff(f, p, i, eps)));
    return worst;
}

}  // namespace kglm
