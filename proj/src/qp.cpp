#include "kerrsim/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "kerrsim/error.hpp"

namespace kerrsim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

QpResult solve_qp(const MatrixXd& H, const VectorXd& f, const MatrixXd& G, const VectorXd& h,
                  VectorXd z0, int max_iterations) {
    const Index n = H.rows();
    const Index m = G.rows();
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    const MatrixXd Hr = H + 1e-13 * scale * MatrixXd::Identity(n, n);
    const double feas_tol = 1e-12;
    if (m > 0 && ((G * z0 - h).array() > feas_tol).any()) {
        throw NumericalError("solve_qp: starting point is infeasible");
    }

    std::vector<bool> active(static_cast<std::size_t>(m), false);
    for (Index i = 0; i < m; ++i) {
        if (std::abs(G.row(i).dot(z0) - h(i)) <= feas_tol) {
            active[i] = true;
        }
    }
    // Drop rows that are linearly dependent on earlier active rows.
    auto prune = [&]() {
        MatrixXd rows(0, n);
        for (Index i = 0; i < m; ++i) {
            if (!active[i]) {
                continue;
            }
            MatrixXd trial(rows.rows() + 1, n);
            trial << rows, G.row(i);
            Eigen::FullPivLU<MatrixXd> lu(trial);
            lu.setThreshold(1e-10);
            if (lu.rank() == trial.rows()) {
                rows = trial;
            } else {
                active[i] = false;
            }
        }
    };
    prune();

    QpResult out;
    VectorXd z = std::move(z0);
    for (int it = 0; it < max_iterations; ++it) {
        out.iterations = it + 1;
        std::vector<Index> w;
        for (Index i = 0; i < m; ++i) {
            if (active[i]) {
                w.push_back(i);
            }
        }
        const Index k = static_cast<Index>(w.size());
        MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
        VectorXd rhs = VectorXd::Zero(n + k);
        kkt.topLeftCorner(n, n) = Hr;
        for (Index j = 0; j < k; ++j) {
            kkt.block(0, n + j, n, 1) = G.row(w[j]).transpose();
            kkt.block(n + j, 0, 1, n) = G.row(w[j]);
        }
        rhs.head(n) = f - H * z;
        const VectorXd sol = kkt.fullPivLu().solve(rhs);
        const VectorXd p = sol.head(n);
        const double step_scale = std::max(1.0, z.cwiseAbs().maxCoeff());

        if (p.cwiseAbs().maxCoeff() <= 1e-13 * step_scale) {
            // Stationary on the working set: release the most negative multiplier.
            Index worst = -1;
            double most_negative = -1e-12 * scale;
            for (Index j = 0; j < k; ++j) {
                if (sol(n + j) < most_negative) {
                    most_negative = sol(n + j);
                    worst = j;
                }
            }
            if (worst < 0) {
                out.converged = true;
                break;
            }
            active[w[worst]] = false;
            continue;
        }

        double alpha = 1.0;
        Index blocking = -1;
        for (Index i = 0; i < m; ++i) {
            if (active[i]) {
                continue;
            }
            const double gp = G.row(i).dot(p);
            if (gp > 1e-15) {
                const double room = std::max(0.0, h(i) - G.row(i).dot(z));
                if (room / gp < alpha) {
                    alpha = room / gp;
                    blocking = i;
                }
            }
        }
        z += alpha * p;
        if (blocking >= 0) {
            active[blocking] = true;
            prune();
        }
    }
    out.z = z;
    return out;
}

}  // namespace kerrsim
