#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace delaysim {

/// Real branches of the Lambert W function.
enum class LambertBranch { principal = 0, lower = -1 };

namespace detail {

template <typename Scalar>
Scalar lambert_w_initial_guess(LambertBranch branch, Scalar x)
{
    using std::log;
    using std::sqrt;
    const Scalar e = std::numbers::e_v<Scalar>;
    // Expansion about the branch point x = -1/e in p = sqrt(2(ex + 1)).
    const Scalar p = sqrt(std::max(Scalar(0), Scalar(2) * (e * x + Scalar(1))));
    if (branch == LambertBranch::principal) {
        if (x < Scalar(-0.32))
            return Scalar(-1) + p - p * p / Scalar(3) + Scalar(11) / Scalar(72) * p * p * p;
        if (x < Scalar(3)) {
            const Scalar l = log(Scalar(1) + x);
            return l * (Scalar(1) - log(Scalar(1) + l) / (Scalar(2) + l));
        }
        const Scalar l1 = log(x);
        const Scalar l2 = log(l1);
        return l1 - l2 + l2 / l1;
    }
    if (x < Scalar(-0.25))
        return Scalar(-1) - p - p * p / Scalar(3) - Scalar(11) / Scalar(72) * p * p * p;
    const Scalar l1 = log(-x);
    const Scalar l2 = log(-l1);
    return l1 - l2 + l2 / l1;
}

} // namespace detail

/// Solves w * exp(w) = x on the requested real branch by Halley iteration.
/// The principal branch covers x >= -1/e; the lower branch covers [-1/e, 0).
template <typename Scalar>
Scalar lambert_w(LambertBranch branch, Scalar x)
{
    using std::abs;
    using std::exp;
    const Scalar inv_e = Scalar(1) / std::numbers::e_v<Scalar>;
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();

    if (!std::isfinite(x))
        throw std::domain_error("lambert_w: argument must be finite");
    // Tolerate arguments that round a hair below -1/e.
    if (x < -inv_e - Scalar(4) * eps)
        throw std::domain_error("lambert_w: argument below -1/e");
    if (branch == LambertBranch::lower && x >= Scalar(0))
        throw std::domain_error("lambert_w: lower branch requires x < 0");

    if (x <= -inv_e)
        return Scalar(-1);
    if (x == Scalar(0))
        return Scalar(0);

    Scalar w = detail::lambert_w_initial_guess(branch, x);
    const Scalar stop = std::max(Scalar(1e-14), Scalar(4) * eps);
    for (int iter = 0; iter < 64; ++iter) {
        const Scalar ew = exp(w);
        const Scalar f = w * ew - x;
        // relative to |x| so tiny arguments on the lower branch converge too
        if (abs(f) <= stop * abs(x))
            break;
        const Scalar wp1 = w + Scalar(1);
        if (wp1 == Scalar(0))
            break;
        const Scalar denom = ew * wp1 - (w + Scalar(2)) * f / (Scalar(2) * wp1);
        const Scalar step = f / denom;
        Scalar next = w - step;
        // Keep iterates on their branch: principal stays >= -1, lower stays <= -1.
        if (branch == LambertBranch::principal && next < Scalar(-1))
            next = (w + Scalar(-1)) / Scalar(2);
        if (branch == LambertBranch::lower && next > Scalar(-1))
            next = (w + Scalar(-1)) / Scalar(2);
        const bool settled = abs(next - w) <= Scalar(2) * eps * abs(w);
        w = next;
        if (settled)
            break;
    }
    return w;
}

} // namespace delaysim
