#include "delaysim/dde.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace delaysim {

namespace {

double hermite(double y0, double m0, double y1, double m1, double h, double s)
{
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * h * m1;
}

/// Gradient of a rate law with respect to the state.
void add_rate_gradient(const RateLaw& law, const Eigen::VectorXd& y, double sign, Eigen::Index row,
                       Eigen::MatrixXd& jac)
{
    const double c = law.coefficient * sign;
    const auto& ops = law.operands;
    switch (law.kind) {
    case RateKind::constant_influx:
        break;
    case RateKind::per_capita:
        jac(row, static_cast<Eigen::Index>(ops[0])) += c;
        break;
    case RateKind::mass_action: {
        const auto a = static_cast<Eigen::Index>(ops[0]);
        const auto b = static_cast<Eigen::Index>(ops[1]);
        jac(row, a) += c * y(b);
        jac(row, b) += c * y(a);
        break;
    }
    case RateKind::population_birth:
        for (const auto op : ops)
            jac(row, static_cast<Eigen::Index>(op)) += c;
        break;
    }
}

} // namespace

DdeSystem build_dde(const ModelSpec& spec)
{
    require_valid(spec);
    DdeSystem sys;
    for (const auto& c : spec.compartments)
        sys.names_.push_back(c.name);
    sys.markov_ = spec.markov;
    sys.initial_ = Eigen::VectorXd(static_cast<Eigen::Index>(spec.size()));
    for (std::size_t i = 0; i < spec.size(); ++i)
        sys.initial_(static_cast<Eigen::Index>(i)) = static_cast<double>(spec.initial_counts[i]);

    for (const auto& d : spec.delays) {
        double omega = 0.0;
        for (const auto& m : spec.markov) {
            if (m.source != d.source)
                continue;
            if (m.law.kind != RateKind::per_capita)
                throw std::invalid_argument(
                    "build_dde: compartment '" + spec.compartments[d.source].name +
                    "' has a delay process and a state-dependent Markovian removal ('" + m.label +
                    "'); only constant per-capita removal is supported there");
            omega += m.law.coefficient;
        }
        const double mu = d.params.mu;
        const double tau = d.params.tau;
        sys.delayed_.push_back({d.source, d.target, mu, tau, omega, mu * std::exp(-omega * tau)});
    }
    return sys;
}

Eigen::VectorXd DdeSystem::derivative(const Eigen::VectorXd& y, const Eigen::VectorXd& lagged) const
{
    Eigen::VectorXd dy = Eigen::VectorXd::Zero(y.size());
    for (const auto& m : markov_) {
        const double r = evaluate_rate(m.law, y);
        if (m.source)
            dy(static_cast<Eigen::Index>(*m.source)) -= r;
        if (m.target)
            dy(static_cast<Eigen::Index>(*m.target)) += r;
    }
    for (std::size_t k = 0; k < delayed_.size(); ++k) {
        const auto& d = delayed_[k];
        const auto src = static_cast<Eigen::Index>(d.source);
        const double flux = d.coefficient * (d.tau == 0.0 ? y(src) : lagged(static_cast<Eigen::Index>(k)));
        dy(src) -= flux;
        if (d.target)
            dy(static_cast<Eigen::Index>(*d.target)) += flux;
    }
    return dy;
}

Eigen::VectorXd DdeSystem::undelayed_derivative(const Eigen::VectorXd& y) const
{
    Eigen::VectorXd lagged(static_cast<Eigen::Index>(delayed_.size()));
    for (std::size_t k = 0; k < delayed_.size(); ++k)
        lagged(static_cast<Eigen::Index>(k)) = y(static_cast<Eigen::Index>(delayed_[k].source));
    return derivative(y, lagged);
}

Eigen::MatrixXd DdeSystem::undelayed_jacobian(const Eigen::VectorXd& y) const
{
    const auto n = y.size();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : markov_) {
        if (m.source)
            add_rate_gradient(m.law, y, -1.0, static_cast<Eigen::Index>(*m.source), jac);
        if (m.target)
            add_rate_gradient(m.law, y, 1.0, static_cast<Eigen::Index>(*m.target), jac);
    }
    for (const auto& d : delayed_) {
        const auto src = static_cast<Eigen::Index>(d.source);
        jac(src, src) -= d.coefficient;
        if (d.target)
            jac(static_cast<Eigen::Index>(*d.target), src) += d.coefficient;
    }
    return jac;
}

DdeSolution::DdeSolution(double step, Eigen::MatrixXd values, Eigen::MatrixXd right_slopes,
                         Eigen::MatrixXd left_slopes)
    : step_(step), values_(std::move(values)), right_(std::move(right_slopes)), left_(std::move(left_slopes))
{
}

Eigen::VectorXd DdeSolution::on_segment(std::size_t segment, double frac) const
{
    const auto a = static_cast<Eigen::Index>(segment);
    if (frac == 0.0)
        return values_.col(a);
    if (frac == 1.0)
        return values_.col(a + 1);
    Eigen::VectorXd out(values_.rows());
    for (Eigen::Index i = 0; i < values_.rows(); ++i)
        out(i) = hermite(values_(i, a), right_(i, a), values_(i, a + 1), left_(i, a + 1), step_, frac);
    return out;
}

Eigen::VectorXd DdeSolution::operator()(double t) const
{
    if (t < 0.0)
        return Eigen::VectorXd::Zero(values_.rows());
    if (t > end_time() * (1.0 + 1e-12))
        throw std::out_of_range("DdeSolution: time beyond the integrated range");
    if (nodes() == 1)
        return values_.col(0);
    const double pos = t / step_;
    auto seg = static_cast<std::size_t>(std::floor(pos));
    if (seg >= nodes() - 1)
        seg = nodes() - 2;
    const double frac = std::min(1.0, pos - static_cast<double>(seg));
    return on_segment(seg, frac);
}

Eigen::MatrixXd DdeSolution::sample(std::span<const double> grid) const
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), values_.rows());
    for (std::size_t j = 0; j < grid.size(); ++j)
        out.row(static_cast<Eigen::Index>(j)) = (*this)(grid[j]).transpose();
    return out;
}

DdeSolution solve(const DdeSystem& sys, double horizon, double step)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("solve: horizon must be positive");
    if (!(step > 0.0) || !std::isfinite(step))
        throw std::invalid_argument("solve: step must be positive");

    const auto& terms = sys.delayed_terms();
    double tau_min = 0.0;
    for (const auto& d : terms)
        if (d.tau > 0.0 && (tau_min == 0.0 || d.tau < tau_min))
            tau_min = d.tau;

    double h = step;
    if (tau_min > 0.0) {
        if (step > tau_min / 4.0 * (1.0 + 1e-12))
            throw std::invalid_argument("solve: step must not exceed a quarter of the smallest delay");
        h = tau_min / std::ceil(tau_min / step - 1e-9);
    }

    // Lag of each delayed term in mesh steps; integral lags keep every
    // lagged stage on a mesh segment boundary or midpoint.
    struct Lag {
        double steps;
        bool aligned;
        long whole;
    };
    std::vector<Lag> lags;
    for (const auto& d : terms) {
        const double m = d.tau / h;
        const double r = std::round(m);
        const bool aligned = std::abs(m - r) <= 1e-9 * std::max(1.0, m);
        lags.push_back({m, aligned, static_cast<long>(r)});
    }

    const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / h - 1e-9));
    const auto dim = static_cast<Eigen::Index>(sys.dimension());
    const auto cols = static_cast<Eigen::Index>(n_steps + 1);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(dim, cols);
    Eigen::MatrixXd FR = Eigen::MatrixXd::Zero(dim, cols);
    Eigen::MatrixXd FL = Eigen::MatrixXd::Zero(dim, cols);
    Y.col(0) = sys.initial();

    const auto history = [&](std::size_t comp, long seg, double frac) {
        if (seg < 0)
            return 0.0;
        const auto i = static_cast<Eigen::Index>(comp);
        const auto a = static_cast<Eigen::Index>(seg);
        if (frac == 0.0)
            return Y(i, a);
        if (frac == 1.0)
            return Y(i, a + 1);
        return hermite(Y(i, a), FR(i, a), Y(i, a + 1), FL(i, a + 1), h, frac);
    };

    // Lagged values seen from stage fraction c of step n; c = 1 takes the
    // left limit at the step end.
    const auto lagged_at = [&](std::size_t n, double c) {
        Eigen::VectorXd lagged = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(terms.size()));
        for (std::size_t k = 0; k < terms.size(); ++k) {
            if (terms[k].tau == 0.0)
                continue;
            long seg;
            double frac;
            if (lags[k].aligned) {
                seg = static_cast<long>(n) - lags[k].whole;
                frac = c;
            } else {
                const double pos = static_cast<double>(n) + c - lags[k].steps;
                seg = static_cast<long>(std::floor(pos));
                frac = pos - static_cast<double>(seg);
            }
            lagged(static_cast<Eigen::Index>(k)) = history(terms[k].source, seg, frac);
        }
        return lagged;
    };

    for (std::size_t n = 0; n < n_steps; ++n) {
        const auto col = static_cast<Eigen::Index>(n);
        const Eigen::VectorXd y = Y.col(col);
        const Eigen::VectorXd k1 = sys.derivative(y, lagged_at(n, 0.0));
        const Eigen::VectorXd mid = lagged_at(n, 0.5);
        const Eigen::VectorXd k2 = sys.derivative(y + 0.5 * h * k1, mid);
        const Eigen::VectorXd k3 = sys.derivative(y + 0.5 * h * k2, mid);
        const Eigen::VectorXd end = lagged_at(n, 1.0);
        const Eigen::VectorXd k4 = sys.derivative(y + h * k3, end);
        const Eigen::VectorXd next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        FR.col(col) = k1;
        Y.col(col + 1) = next;
        FL.col(col + 1) = sys.derivative(next, end);
    }
    FR.col(cols - 1) = sys.derivative(Y.col(cols - 1), lagged_at(n_steps, 0.0));
    FL.col(0) = FR.col(0);
    return DdeSolution(h, std::move(Y), std::move(FR), std::move(FL));
}

std::vector<SteadyState> steady_states(const DdeSystem& sys, std::span<const Eigen::VectorXd> starts,
                                       std::span<const LinearConstraint> constraints, double tolerance)
{
    const auto dim = static_cast<Eigen::Index>(sys.dimension());
    const auto rows = dim + static_cast<Eigen::Index>(constraints.size());
    for (const auto& c : constraints)
        if (c.weights.size() != dim)
            throw std::invalid_argument("steady_states: constraint weights have the wrong length");

    const auto residual = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd f(rows);
        f.head(dim) = sys.undelayed_derivative(y);
        for (std::size_t c = 0; c < constraints.size(); ++c)
            f(dim + static_cast<Eigen::Index>(c)) = constraints[c].weights.dot(y) - constraints[c].value;
        return f;
    };
    const auto jacobian = [&](const Eigen::VectorXd& y) {
        Eigen::MatrixXd j(rows, dim);
        j.topRows(dim) = sys.undelayed_jacobian(y);
        for (std::size_t c = 0; c < constraints.size(); ++c)
            j.row(dim + static_cast<Eigen::Index>(c)) = constraints[c].weights.transpose();
        return j;
    };

    std::vector<SteadyState> out;
    for (const auto& start : starts) {
        if (start.size() != dim)
            throw std::invalid_argument("steady_states: start has the wrong dimension");
        SteadyState s;
        s.state = start;
        Eigen::VectorXd f = residual(s.state);
        s.residual = f.lpNorm<Eigen::Infinity>();
        for (; s.iterations < 100 && s.residual > tolerance; ++s.iterations) {
            const Eigen::VectorXd delta = jacobian(s.state).completeOrthogonalDecomposition().solve(-f);
            double alpha = 1.0;
            bool improved = false;
            for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
                const Eigen::VectorXd trial = s.state + alpha * delta;
                const Eigen::VectorXd ft = residual(trial);
                if (ft.norm() < f.norm()) {
                    s.state = trial;
                    f = ft;
                    improved = true;
                    break;
                }
            }
            s.residual = f.lpNorm<Eigen::Infinity>();
            if (!improved)
                break;
        }
        s.converged = s.residual <= tolerance;
        if (!s.converged)
            s.message = "no convergence: residual " + std::to_string(s.residual) + " after " +
                        std::to_string(s.iterations) + " iterations";
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace delaysim
