#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) for small dense problems, with an
// optional projection onto a feasible set after every trial step.

#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace kerrsim {

struct LsqProblem {
    // Weighted residual vector r(x); the objective is |r|^2.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
    // d r / d x. When empty, forward differences with step fd_step * max(1, |x_i|) are used.
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
    // Maps a trial point onto the feasible set. Identity when empty.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;
};

struct LsqOptions {
    double relative_tolerance = 1e-10;  // on the relative objective decrease
    int max_iterations = 500;
    double initial_damping = 1e-3;
    double fd_step = 1e-7;
};

struct LsqResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    double cost = 0.0;  // |r|^2
    int iterations = 0;
    bool converged = false;
};

LsqResult levenberg_marquardt(const LsqProblem& problem, Eigen::VectorXd x0,
                              const LsqOptions& options = {});

Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double step = 1e-7);

struct CovarianceEstimate {
    Eigen::MatrixXd covariance;
    bool singular = false;
    // Unit vector in parameter space along the least-determined direction
    // (right singular vector of the column-scaled Jacobian with the smallest singular value).
    Eigen::VectorXd weakest_direction;
    double condition = 0.0;  // s_min / s_max after column scaling
};

// (J^T J)^-1 * scale, via SVD. Columns are normalized before the condition test so
// that parameters of very different magnitude compare fairly; a zero column or a
// relative singular value below `rcond` marks the problem singular, in which case
// the covariance is the pseudo-inverse.
CovarianceEstimate covariance_from_jacobian(const Eigen::MatrixXd& jacobian, double scale = 1.0,
                                            double rcond = 1e-8);

}  // namespace kerrsim
