#include "kerrsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "kerrsim/error.hpp"
#include "kerrsim/lsq.hpp"
#include "kerrsim/parallel.hpp"

namespace kerrsim {

void CoupledModeParams::validate() const {
    cutoff.validate();
    if (!(xi >= 0.0) || !std::isfinite(xi)) {
        throw InputError("CoupledModeParams: xi must be finite and >= 0");
    }
    if (!std::isfinite(delta)) {
        throw InputError("CoupledModeParams: delta must be finite");
    }
}

CoupledModeParams params_from_trap(const TrapConfig& cfg, const FockCutoff& cutoff) {
    const ModePair modes = derive_modes(cfg);
    return {modes.delta, modes.xi, cutoff};
}

FockOperator build_hamiltonian(const CoupledModeParams& p, double frame_offset) {
    p.validate();
    const FockCutoff& c = p.cutoff;
    const Matrix a = annihilation_op(c, Mode::axial).matrix();
    const Matrix b = annihilation_op(c, Mode::radial).matrix();
    const Matrix na = a.adjoint() * a;
    const Matrix nb = b.adjoint() * b;
    const Matrix coupling = a.adjoint() * b * b;
    Matrix h = frame_offset * na + 0.5 * (p.delta + frame_offset) * nb +
               p.xi * (coupling + Matrix(coupling.adjoint()));
    // Exact symmetrization; the products above are already Hermitian up to round-off.
    h = 0.5 * (h + Matrix(h.adjoint()));
    return FockOperator::hermitian(std::move(h));
}

FockOperator conserved_charge(const FockCutoff& cutoff) {
    const Matrix na = number_op(cutoff, Mode::axial).matrix();
    const Matrix nb = number_op(cutoff, Mode::radial).matrix();
    return FockOperator::hermitian(2.0 * na + nb);
}

ManifoldBlock manifold_block(const CoupledModeParams& p, int charge, double frame_offset) {
    p.validate();
    if (charge < 0) {
        throw InputError("manifold_block: charge must be >= 0");
    }
    ManifoldBlock block;
    block.charge = charge;
    for (int n_a = std::min(charge / 2, p.cutoff.n_a_max); n_a >= 0; --n_a) {
        const int n_b = charge - 2 * n_a;
        if (n_b <= p.cutoff.n_b_max) {
            block.basis.emplace_back(n_a, n_b);
        }
    }
    const auto dim = static_cast<Eigen::Index>(block.basis.size());
    block.hamiltonian = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto [n_a, n_b] = block.basis[i];
        block.hamiltonian(i, i) = frame_offset * n_a + 0.5 * (p.delta + frame_offset) * n_b;
        if (i + 1 < dim) {
            // basis[i + 1] = (n_a - 1, n_b + 2): <n_a, n_b| a^dag b^2 |n_a - 1, n_b + 2>.
            const auto [m_a, m_b] = block.basis[i + 1];
            if (m_a == n_a - 1 && m_b == n_b + 2) {
                const double element = p.xi * std::sqrt(static_cast<double>(n_a)) *
                                       std::sqrt(static_cast<double>(m_b) * (m_b - 1));
                block.hamiltonian(i, i + 1) = element;
                block.hamiltonian(i + 1, i) = element;
            }
        }
    }
    return block;
}

ManifoldSpectrum diagonalize_manifold(const CoupledModeParams& p, int charge, double frame_offset) {
    ManifoldSpectrum out;
    out.block = manifold_block(p, charge, frame_offset);
    if (out.block.basis.empty()) {
        out.energies.resize(0);
        out.vectors.resize(0, 0);
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(out.block.hamiltonian);
    out.energies = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
    return out;
}

DressedLevel dressed_level(const CoupledModeParams& p, int n_a, int n_b) {
    p.validate();
    if (n_a < 0 || n_a > p.cutoff.n_a_max || n_b < 0 || n_b > p.cutoff.n_b_max) {
        throw InputError("dressed_level: |" + std::to_string(n_a) + "," + std::to_string(n_b) +
                         "> outside the cutoff");
    }
    if (p.delta == 0.0 && p.xi > 0.0) {
        throw InputError("dressed_level: delta = 0, the bare state |" + std::to_string(n_a) + "," +
                         std::to_string(n_b) + "> is resonantly mixed in manifold N = " +
                         std::to_string(2 * n_a + n_b) + "; no dispersive assignment exists");
    }
    ManifoldSpectrum spec = diagonalize_manifold(p, 2 * n_a + n_b);
    const auto& basis = spec.block.basis;
    const auto k = static_cast<Eigen::Index>(
        std::find(basis.begin(), basis.end(), std::make_pair(n_a, n_b)) - basis.begin());
    const auto size = static_cast<Eigen::Index>(basis.size());
    // Bare levels are ordered by n_b, ascending in energy for delta > 0.
    const Eigen::Index rank = p.delta >= 0.0 ? k : size - 1 - k;
    DressedLevel level;
    level.energy = spec.energies(rank);
    level.amplitudes = spec.vectors.col(rank);
    level.bare_overlap = level.amplitudes(k) * level.amplitudes(k);
    level.block = std::move(spec.block);
    return level;
}

FockState dressed_state(const CoupledModeParams& p, int n_a, int n_b) {
    const DressedLevel level = dressed_level(p, n_a, n_b);
    const auto& basis = level.block.basis;
    const auto k = std::find(basis.begin(), basis.end(), std::make_pair(n_a, n_b)) - basis.begin();
    // Phase convention: positive amplitude on the bare component.
    const double sign = level.amplitudes(k) < 0.0 ? -1.0 : 1.0;
    FockCutoff motional = p.cutoff;
    motional.with_qubit = false;
    Vector psi = Vector::Zero(motional.dim());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        psi(tensor_basis_index(basis[i].first, basis[i].second, motional)) =
            sign * level.amplitudes(static_cast<Eigen::Index>(i));
    }
    return renormalized(psi);
}

PopulationTrace exchange_trace(const CoupledModeParams& p, const FockState& initial,
                               std::span<const double> times,
                               std::vector<std::pair<int, int>> watched) {
    FockCutoff motional = p.cutoff;
    motional.with_qubit = false;
    const CoupledModeParams mp{p.delta, p.xi, motional};
    const FockOperator h = build_hamiltonian(mp);
    if (initial.dim() != h.dim()) {
        throw InputError("exchange_trace: initial state dimension " + std::to_string(initial.dim()) +
                         " does not match two-mode dimension " + std::to_string(h.dim()));
    }
    std::vector<Index> indices;
    for (const auto& [n_a, n_b] : watched) {
        indices.push_back(tensor_basis_index(n_a, n_b, motional));
    }
    const Eigensystem eig = eigh(h);
    PopulationTrace trace;
    trace.times.assign(times.begin(), times.end());
    trace.watched = std::move(watched);
    trace.populations.resize(static_cast<Eigen::Index>(times.size()),
                             static_cast<Eigen::Index>(indices.size()));
    parallel_for(times.size(), [&](std::size_t i) {
        const RealVector pops = evolve(initial, eig, times[i]).populations();
        for (std::size_t j = 0; j < indices.size(); ++j) {
            trace.populations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                pops(indices[j]);
        }
    });
    return trace;
}

OscillationFit fit_oscillation(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size() || times.size() < 5) {
        throw InputError("fit_oscillation: need at least 5 matching samples");
    }
    const auto n = static_cast<Eigen::Index>(times.size());
    const Eigen::Map<const Eigen::VectorXd> t(times.data(), n);
    const Eigen::Map<const Eigen::VectorXd> y(values.data(), n);
    const double span = t.maxCoeff() - t.minCoeff();
    if (!(span > 0.0)) {
        throw InputError("fit_oscillation: time grid has zero span");
    }

    // Linear model c + a cos(w t) + b sin(w t) for fixed w.
    auto design = [&](double w) {
        Eigen::MatrixXd m(n, 3);
        m.col(0).setOnes();
        m.col(1) = (w * t).array().cos().matrix();
        m.col(2) = (w * t).array().sin().matrix();
        return m;
    };
    // Coarse scan from one period per span up to the Nyquist rate of the mean spacing.
    const double w_min = kTwoPi / span;
    const double w_max = kPi * static_cast<double>(n - 1) / span;
    const int scan_points = 20 * static_cast<int>(n);
    double best_w = w_min;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int k = 0; k < scan_points; ++k) {
        const double w = w_min + (w_max - w_min) * k / (scan_points - 1);
        const Eigen::MatrixXd m = design(w);
        const Eigen::VectorXd coef = m.colPivHouseholderQr().solve(y);
        const double cost = (m * coef - y).squaredNorm();
        if (cost < best_cost) {
            best_cost = cost;
            best_w = w;
        }
    }
    const Eigen::VectorXd lin = design(best_w).colPivHouseholderQr().solve(y);
    Eigen::VectorXd x0(4);
    x0 << lin(0), lin(1), lin(2), best_w;

    LsqProblem problem;
    problem.residuals = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return (x(0) + x(1) * (x(3) * t).array().cos() + x(2) * (x(3) * t).array().sin()).matrix() - y;
    };
    problem.jacobian = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        Eigen::MatrixXd jac(n, 4);
        const Eigen::ArrayXd c = (x(3) * t).array().cos();
        const Eigen::ArrayXd s = (x(3) * t).array().sin();
        jac.col(0).setOnes();
        jac.col(1) = c.matrix();
        jac.col(2) = s.matrix();
        jac.col(3) = (t.array() * (-x(1) * s + x(2) * c)).matrix();
        return jac;
    };
    const LsqResult res = levenberg_marquardt(problem, x0);

    OscillationFit fit;
    fit.offset = res.x(0);
    fit.amplitude = std::hypot(res.x(1), res.x(2));
    fit.phase = std::atan2(-res.x(2), res.x(1));
    fit.omega = std::abs(res.x(3));
    fit.converged = res.converged;
    const double dof = std::max<double>(1.0, static_cast<double>(n - 4));
    const auto cov = covariance_from_jacobian(res.jacobian, res.cost / dof);
    fit.omega_sigma = std::sqrt(std::max(0.0, cov.covariance(3, 3)));
    return fit;
}

CrossingMap crossing_map(const TrapConfig& cfg, std::span<const double> delta_grid,
                         int manifold_n_max, std::pair<int, int> reference, int order) {
    if (manifold_n_max < 0) {
        throw InputError("crossing_map: manifold_n_max must be >= 0");
    }
    if (order != 1 && order != 2) {
        throw InputError("crossing_map: sideband order must be 1 or 2");
    }
    const std::pair<int, int> target{reference.first + order, reference.second};
    FockCutoff cutoff;
    cutoff.n_a_max = std::max(1, manifold_n_max / 2);
    cutoff.n_b_max = std::max(2, manifold_n_max);

    Eigen::Index branches = 0;
    for (int n = 0; n <= manifold_n_max; ++n) {
        branches += n / 2 + 1;
    }
    CrossingMap map;
    map.delta_grid.assign(delta_grid.begin(), delta_grid.end());
    map.xi.assign(delta_grid.size(), 0.0);
    const auto rows = static_cast<Eigen::Index>(delta_grid.size());
    map.energies.resize(rows, branches);
    map.weights.resize(rows, branches);
    map.charges.resize(rows, branches);

    parallel_for(delta_grid.size(), [&](std::size_t i) {
        const TrapConfig tuned = detune_to(cfg, delta_grid[i]);
        const ModePair modes = derive_modes(tuned);
        const CoupledModeParams p{delta_grid[i], modes.xi, cutoff};
        map.xi[i] = modes.xi;

        struct Branch {
            double energy;
            double weight;
            int charge;
        };
        std::vector<Branch> all;
        for (int n = 0; n <= manifold_n_max; ++n) {
            const ManifoldSpectrum spec = diagonalize_manifold(p, n);
            const auto& basis = spec.block.basis;
            const auto it = std::find(basis.begin(), basis.end(), target);
            for (Eigen::Index k = 0; k < spec.energies.size(); ++k) {
                double weight = 0.0;
                if (it != basis.end()) {
                    const double amp = spec.vectors(it - basis.begin(), k);
                    weight = amp * amp;
                }
                all.push_back({spec.energies(k), std::clamp(weight, 0.0, 1.0), n});
            }
        }
        std::stable_sort(all.begin(), all.end(),
                         [](const Branch& x, const Branch& y) { return x.energy < y.energy; });
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index k = 0; k < branches; ++k) {
            map.energies(r, k) = all[k].energy;
            map.weights(r, k) = all[k].weight;
            map.charges(r, k) = all[k].charge;
        }
    });
    return map;
}

ShiftTable dispersive_shift_table(const CoupledModeParams& params, int n_b_max_report) {
    params.validate();
    if (params.delta == 0.0) {
        throw InputError("dispersive_shift_table: delta must be non-zero");
    }
    if (n_b_max_report < 0) {
        throw InputError("dispersive_shift_table: n_b_max_report must be >= 0");
    }
    // |1,n> lives in the N = n + 2 manifold, which reaches n_a = (n + 2) / 2; every
    // block must be complete or the |2, n-2> partner (and beyond) goes missing.
    CoupledModeParams p = params;
    p.cutoff.n_a_max = std::max(p.cutoff.n_a_max, (n_b_max_report + 2) / 2);
    p.cutoff.n_b_max = std::max(p.cutoff.n_b_max, n_b_max_report + 2);
    const auto rows = static_cast<Eigen::Index>(n_b_max_report + 1);
    ShiftTable table;
    table.n_b.resize(static_cast<std::size_t>(rows));
    std::iota(table.n_b.begin(), table.n_b.end(), 0);
    table.shift_exact.resize(rows);
    table.shift_perturbative.resize(rows);
    table.sideband_exact.resize(rows);
    table.bare_overlap.resize(rows);
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t i) {
        const int n = static_cast<int>(i);
        const DressedLevel upper = dressed_level(p, 1, n);
        const DressedLevel lower = dressed_level(p, 0, n);
        table.sideband_exact(n) = upper.energy - lower.energy;
        table.bare_overlap(n) = upper.bare_overlap;
        table.shift_perturbative(n) = -4.0 * p.xi * p.xi * n / p.delta;
    });
    table.shift_exact = table.sideband_exact.array() - table.sideband_exact(0);
    return table;
}

}  // namespace kerrsim
