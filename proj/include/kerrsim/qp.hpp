#pragma once

// Dense convex quadratic programs of a few dozen variables:
//     minimize 1/2 z^T H z - f^T z   subject to   G z <= h,
// solved by a primal active-set method from a feasible starting point.

#include <Eigen/Dense>

namespace kerrsim {

struct QpResult {
    Eigen::VectorXd z;
    int iterations = 0;
    bool converged = false;
};

// H must be positive semidefinite and z0 feasible. A tiny ridge keeps the
// equality-constrained subproblems solvable when H is singular.
QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& G,
                  const Eigen::VectorXd& h, Eigen::VectorXd z0, int max_iterations = 2000);

}  // namespace kerrsim
