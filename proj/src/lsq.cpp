#include "kerrsim/lsq.hpp"

#include <algorithm>
#include <cmath>

#include "kerrsim/error.hpp"

namespace kerrsim {

Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double step) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd jac(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd xp = x;
        const double h = step * std::max(1.0, std::abs(x(j)));
        xp(j) += h;
        jac.col(j) = (f(xp) - f0) / h;
    }
    return jac;
}

LsqResult levenberg_marquardt(const LsqProblem& problem, Eigen::VectorXd x0,
                              const LsqOptions& options) {
    if (!problem.residuals) {
        throw InputError("levenberg_marquardt: residual function missing");
    }
    auto project = [&](const Eigen::VectorXd& x) {
        return problem.project ? problem.project(x) : x;
    };
    auto jacobian = [&](const Eigen::VectorXd& x) {
        return problem.jacobian ? problem.jacobian(x)
                                : finite_difference_jacobian(problem.residuals, x, options.fd_step);
    };

    LsqResult out;
    out.x = project(x0);
    out.residuals = problem.residuals(out.x);
    out.cost = out.residuals.squaredNorm();
    out.jacobian = jacobian(out.x);

    double lambda = options.initial_damping;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        out.iterations = iter + 1;
        if (out.cost == 0.0) {
            out.converged = true;
            break;
        }
        const Eigen::MatrixXd& jac = out.jacobian;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * out.residuals;
        Eigen::VectorXd scaling = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));

        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * scaling;
            const Eigen::VectorXd step = damped.ldlt().solve(-grad);
            const Eigen::VectorXd trial = project(out.x + step);
            const Eigen::VectorXd r = problem.residuals(trial);
            const double cost = r.squaredNorm();
            if (std::isfinite(cost) && cost < out.cost) {
                const double decrease = (out.cost - cost) / out.cost;
                const bool tiny_step = (trial - out.x).norm() <= 1e-14 * (1.0 + out.x.norm());
                out.x = trial;
                out.residuals = r;
                out.cost = cost;
                out.jacobian = jacobian(out.x);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (decrease < options.relative_tolerance || tiny_step) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No descent direction left at machine precision: a (projected) stationary point.
            out.converged = true;
            break;
        }
        if (out.converged) {
            break;
        }
    }
    return out;
}

CovarianceEstimate covariance_from_jacobian(const Eigen::MatrixXd& jacobian, double scale,
                                            double rcond) {
    const Eigen::Index p = jacobian.cols();
    CovarianceEstimate est;
    est.covariance = Eigen::MatrixXd::Zero(p, p);
    est.weakest_direction = Eigen::VectorXd::Zero(p);
    if (p == 0) {
        return est;
    }
    Eigen::VectorXd norms = jacobian.colwise().norm().transpose();
    Eigen::VectorXd inv_norms(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        inv_norms(j) = norms(j) > 0.0 ? 1.0 / norms(j) : 0.0;
    }
    const Eigen::MatrixXd scaled = jacobian * inv_norms.asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::MatrixXd v = svd.matrixV();
    const double smax = s.size() > 0 ? s(0) : 0.0;

    Eigen::Index weakest = s.size() - 1;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (norms(j) == 0.0) {
            est.singular = true;
            est.weakest_direction = Eigen::VectorXd::Unit(p, j);
            weakest = -1;
            break;
        }
    }
    est.condition = (smax > 0.0 && s.size() == p) ? s(s.size() - 1) / smax : 0.0;
    if (s.size() < p || est.condition < rcond) {
        est.singular = true;
    }
    if (weakest >= 0 && s.size() == p) {
        // Direction in original units: undo the column scaling, then normalize.
        Eigen::VectorXd dir = inv_norms.asDiagonal() * v.col(weakest);
        if (dir.norm() > 0.0) {
            dir.normalize();
        }
        est.weakest_direction = dir;
    }

    // Pseudo-inverse of the scaled normal matrix, mapped back to original units.
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) > rcond * smax) {
            inner += v.col(k) * v.col(k).transpose() / (s(k) * s(k));
        }
    }
    est.covariance = scale * inv_norms.asDiagonal() * inner * inv_norms.asDiagonal();
    return est;
}

}  // namespace kerrsim
