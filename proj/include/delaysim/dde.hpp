#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "delaysim/model.hpp"

namespace delaysim {

/// Delayed removal term -coefficient * rho_source(t - tau), re-entering
/// `target` when one is set. coefficient = mu exp(-omega tau) where omega is
/// the constant per-capita Markovian removal rate of the source.
struct DelayedTerm {
    std::size_t source;
    std::optional<std::size_t> target;
    double mu;
    double tau;
    double omega;
    double coefficient;
};

/// Deterministic delay master equations of a ModelSpec:
///
///   d rho_i/dt = q_i^+(t) - omega_i rho_i(t) - mu_i e^{-omega_i tau_i} rho_i(t - tau_i)
///
/// with rho_i(t) = 0 for t < 0 and rho_i(0) the initial count.
class DdeSystem {
public:
    std::size_t dimension() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<DelayedTerm>& delayed_terms() const { return delayed_; }
    const std::vector<MarkovianProcess>& markov() const { return markov_; }
    const Eigen::VectorXd& initial() const { return initial_; }

    /// Right-hand side given the current state and, for each delayed term,
    /// the source value at t - tau (terms with tau = 0 read `y` instead).
    Eigen::VectorXd derivative(const Eigen::VectorXd& y, const Eigen::VectorXd& lagged) const;

    /// Right-hand side with every lagged argument equal to the current state.
    Eigen::VectorXd undelayed_derivative(const Eigen::VectorXd& y) const;
    Eigen::MatrixXd undelayed_jacobian(const Eigen::VectorXd& y) const;

private:
    friend DdeSystem build_dde(const ModelSpec& spec);

    std::vector<std::string> names_;
    std::vector<MarkovianProcess> markov_;
    std::vector<DelayedTerm> delayed_;
    Eigen::VectorXd initial_;
};

/// Requires every compartment owning a delay process to lose particles only
/// through per-capita Markovian laws (constant omega).
DdeSystem build_dde(const ModelSpec& spec);

/// Mesh solution with cubic Hermite interpolation between nodes.
class DdeSolution {
public:
    DdeSolution(double step, Eigen::MatrixXd values, Eigen::MatrixXd right_slopes,
                Eigen::MatrixXd left_slopes);

    double step() const { return step_; }
    std::size_t nodes() const { return static_cast<std::size_t>(values_.cols()); }
    double time(std::size_t node) const { return step_ * static_cast<double>(node); }
    double end_time() const { return time(nodes() - 1); }

    /// dimension x nodes.
    const Eigen::MatrixXd& values() const { return values_; }

    /// Dense evaluation on [0, end_time()]; zero before 0.
    Eigen::VectorXd operator()(double t) const;

    /// grid.size() x dimension matrix of dense evaluations.
    Eigen::MatrixXd sample(std::span<const double> grid) const;

    /// Interpolant on mesh segment `segment` at fraction `frac` in [0, 1].
    Eigen::VectorXd on_segment(std::size_t segment, double frac) const;

private:
    double step_;
    Eigen::MatrixXd values_;
    Eigen::MatrixXd right_;
    Eigen::MatrixXd left_;
};

/// Method of steps with classical RK4. The step is shrunk so the smallest
/// positive delay is an integer number of steps; it must not exceed a
/// quarter of that delay.
DdeSolution solve(const DdeSystem& sys, double horizon, double step);

struct LinearConstraint {
    Eigen::VectorXd weights;
    double value;
};

struct SteadyState {
    Eigen::VectorXd state;
    bool converged = false;
    double residual = 0.0;
    int iterations = 0;
    std::string message;
};

/// Equilibria of the undelayed right-hand side by damped Newton from each
/// starting point. Linear constraints pin otherwise free directions (e.g.
/// total population when births balance deaths); steps use the
/// minimum-norm least-squares solution.
std::vector<SteadyState> steady_states(const DdeSystem& sys, std::span<const Eigen::VectorXd> starts,
                                       std::span<const LinearConstraint> constraints = {},
                                       double tolerance = 1e-10);

} // namespace delaysim
