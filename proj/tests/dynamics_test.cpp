#include "kerrsim/dynamics.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "kerrsim/error.hpp"
#include "kerrsim/parallel.hpp"

using namespace kerrsim;

namespace {

const double kXi = hz_to_rad(1104.7);

double element(const FockOperator& h, const FockCutoff& c, int a1, int b1, int a2, int b2) {
    return std::abs(h.matrix()(tensor_basis_index(a1, b1, c), tensor_basis_index(a2, b2, c)));
}

}  // namespace

TEST(BuildHamiltonian, DecoupledLimitIsDiagonal) {
    const FockCutoff c{3, 6, false};
    const double delta = hz_to_rad(14.3e3);
    const FockOperator h = build_hamiltonian({delta, 0.0, c});
    Matrix expected = Matrix::Zero(c.dim(), c.dim());
    for (Index k = 0; k < c.dim(); ++k) {
        expected(k, k) = 0.5 * delta * basis_label(k, c).n_b;
    }
    EXPECT_LT(max_abs(h.matrix() - expected), 1e-9);
    EXPECT_TRUE(h.is_hermitian());
}

TEST(BuildHamiltonian, ResonantManifoldMatrixElements) {
    const FockCutoff c{3, 6, false};
    const FockOperator h = build_hamiltonian({0.0, kXi, c});
    // <0,2| a b^dag^2 |1,0> = sqrt(1) sqrt(1 * 2).
    EXPECT_NEAR(element(h, c, 0, 2, 1, 0), std::sqrt(2.0) * kXi, 1e-9 * kXi);
    EXPECT_NEAR(element(h, c, 1, 2, 2, 0), 2.0 * kXi, 1e-9 * kXi);
    EXPECT_NEAR(element(h, c, 0, 4, 1, 2), 2.0 * std::sqrt(3.0) * kXi, 1e-9 * kXi);

    // Hand-built 2x2 block at delta = 0 has eigenvalues -/+ sqrt(2) xi.
    Eigen::Matrix2d two;
    two << 0.0, std::sqrt(2.0) * kXi, std::sqrt(2.0) * kXi, 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(two);
    EXPECT_NEAR(es.eigenvalues()(1) - es.eigenvalues()(0), 2.0 * std::sqrt(2.0) * kXi, 1e-9 * kXi);
    const ManifoldSpectrum n2 = diagonalize_manifold({0.0, kXi, c}, 2);
    EXPECT_NEAR(n2.energies(1) - n2.energies(0), 2.0 * std::sqrt(2.0) * kXi, 1e-9 * kXi);
}

TEST(BuildHamiltonian, ThreeStateManifoldEigenvalues) {
    // Oracle: tridiagonal [[0, 2, 0], [2, 0, 2 sqrt 3], [0, 2 sqrt 3, 0]] xi,
    // characteristic polynomial -l (l^2 - 16 xi^2).
    Eigen::Matrix3d m;
    const double s = 2.0 * std::sqrt(3.0);
    m << 0, 2, 0, 2, 0, s, 0, s, 0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> oracle(m * kXi);
    const ManifoldSpectrum n4 = diagonalize_manifold({0.0, kXi, FockCutoff{3, 8, false}}, 4);
    ASSERT_EQ(n4.energies.size(), 3);
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(n4.energies(k), oracle.eigenvalues()(k), 1e-10 * kXi);
        EXPECT_NEAR(n4.energies(k), (k - 1) * 4.0 * kXi, 1e-10 * kXi);
    }
}

TEST(ConservedCharge, CommutesWithHamiltonian) {
    const FockCutoff c{4, 10, false};
    const FockOperator n = conserved_charge(c);
    EXPECT_NEAR(n.matrix()(tensor_basis_index(1, 0, c), tensor_basis_index(1, 0, c)).real(), 2.0, 1e-12);
    EXPECT_NEAR(n.matrix()(tensor_basis_index(0, 2, c), tensor_basis_index(0, 2, c)).real(), 2.0, 1e-12);
    EXPECT_NEAR(n.matrix()(tensor_basis_index(1, 1, c), tensor_basis_index(1, 1, c)).real(), 3.0, 1e-12);
    EXPECT_NEAR(n.matrix()(tensor_basis_index(0, 3, c), tensor_basis_index(0, 3, c)).real(), 3.0, 1e-12);

    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int draw = 0; draw < 20; ++draw) {
        const CoupledModeParams p{hz_to_rad(50e3 * u(gen)), hz_to_rad(2e3 * (1.0 + u(gen))), c};
        const FockOperator h = build_hamiltonian(p, hz_to_rad(10e3 * u(gen)));
        EXPECT_LT(max_abs(commutator(h, n).matrix()), 1e-12 * max_abs(h.matrix()));
    }
}

TEST(ManifoldBlock, MatchesFullHamiltonian) {
    const FockCutoff c{3, 9, false};
    const CoupledModeParams p{hz_to_rad(7e3), kXi, c};
    const double offset = hz_to_rad(-1.3e3);
    const FockOperator h = build_hamiltonian(p, offset);
    for (int charge = 0; charge <= 12; ++charge) {
        const ManifoldBlock block = manifold_block(p, charge, offset);
        for (std::size_t i = 0; i < block.basis.size(); ++i) {
            for (std::size_t j = 0; j < block.basis.size(); ++j) {
                const auto [ai, bi] = block.basis[i];
                const auto [aj, bj] = block.basis[j];
                EXPECT_NEAR(block.hamiltonian(i, j),
                            h.matrix()(tensor_basis_index(ai, bi, c), tensor_basis_index(aj, bj, c)).real(),
                            1e-9 * kXi);
            }
        }
    }
}

TEST(ExchangeTrace, ResonantTwoLevelRabi) {
    const CoupledModeParams p{0.0, kXi, FockCutoff{3, 8, false}};
    const FockState start = FockState::basis(p.cutoff.dim(), tensor_basis_index(1, 0, p.cutoff));
    std::vector<double> times;
    for (int k = 0; k <= 200; ++k) {
        times.push_back(k * 2e-6);
    }
    const PopulationTrace tr = exchange_trace(p, start, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double c = std::cos(std::sqrt(2.0) * kXi * times[i]);
        EXPECT_NEAR(tr.populations(i, 0), c * c, 1e-9);
        EXPECT_NEAR(tr.populations(i, 0) + tr.populations(i, 1), 1.0, 1e-9);
    }

    const OscillationFit fit = fit_oscillation(times, std::vector<double>(tr.populations.col(0).data(),
                                                                          tr.populations.col(0).data() +
                                                                              times.size()));
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.omega, 2.0 * std::sqrt(2.0) * kXi, 1e-6 * kXi);
    EXPECT_NEAR(fit.amplitude, 0.5, 1e-6);
}

TEST(ExchangeTrace, VacuumIsStationary) {
    const CoupledModeParams p{0.0, kXi, FockCutoff{2, 6, false}};
    const FockState vac = FockState::basis(p.cutoff.dim(), 0);
    const std::vector<double> times = {0.0, 1e-4, 3e-3, 0.1};
    const PopulationTrace tr = exchange_trace(p, vac, times, {{0, 0}});
    for (Index i = 0; i < tr.populations.rows(); ++i) {
        EXPECT_NEAR(tr.populations(i, 0), 1.0, 1e-12);
    }
}

TEST(ExchangeTrace, FarDetunedTransferBounded) {
    const double delta = hz_to_rad(88e3);
    const CoupledModeParams p{delta, kXi, FockCutoff{3, 8, false}};
    const FockState start = FockState::basis(p.cutoff.dim(), tensor_basis_index(1, 0, p.cutoff));
    // Off-resonant Rabi: coupling g = sqrt(2) xi, detuning delta, max transfer 4 g^2 / (4 g^2 + delta^2).
    const double g = std::sqrt(2.0) * kXi;
    const double oracle_max = 4.0 * g * g / (4.0 * g * g + delta * delta);
    std::vector<double> times;
    const double period = kTwoPi / std::sqrt(4.0 * g * g + delta * delta);
    for (int k = 0; k <= 2000; ++k) {
        times.push_back(k * period / 1000.0);
    }
    const PopulationTrace tr = exchange_trace(p, start, times);
    const double max_transfer = 1.0 - tr.populations.col(0).minCoeff();
    EXPECT_NEAR(max_transfer, oracle_max, 1e-6);
    EXPECT_LT(max_transfer, 8.0 * kXi * kXi / (delta * delta));
    EXPECT_LT(max_transfer, 0.002);
}

TEST(CrossingMap, GapsAtResonance) {
    const TrapConfig cfg;
    const std::vector<double> grid = {hz_to_rad(-5e3), 0.0, hz_to_rad(5e3)};
    const CrossingMap map = crossing_map(cfg, grid, 4);
    ASSERT_EQ(map.energies.cols(), 1 + 1 + 2 + 2 + 3);
    const double xi = map.xi[1];

    auto gap = [&](int row, int charge) {
        std::vector<double> e;
        for (Index k = 0; k < map.energies.cols(); ++k) {
            if (map.charges(row, k) == charge) {
                e.push_back(map.energies(row, k));
            }
        }
        return e.back() - e.front();
    };
    EXPECT_NEAR(gap(1, 2), 2.0 * std::sqrt(2.0) * xi, 1e-9 * xi);
    EXPECT_NEAR(gap(1, 3), 2.0 * std::sqrt(6.0) * xi, 1e-9 * xi);
    EXPECT_NEAR(gap(1, 3) / gap(1, 2), std::sqrt(3.0), 1e-10);
    EXPECT_NEAR(gap(1, 4), 8.0 * xi, 1e-9 * xi);

    for (Index r = 0; r < map.energies.rows(); ++r) {
        for (Index k = 1; k < map.energies.cols(); ++k) {
            EXPECT_LE(map.energies(r, k - 1), map.energies(r, k));
        }
        EXPECT_GE(map.weights.row(r).minCoeff(), 0.0);
        EXPECT_LE(map.weights.row(r).maxCoeff(), 1.0);
        // Only the N = 2 manifold holds |1,0>; its weights sum to one.
        double sum = 0.0;
        for (Index k = 0; k < map.energies.cols(); ++k) {
            sum += map.charges(r, k) == 2 ? map.weights(r, k) : 0.0;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(CrossingMap, FarDetunedBranchesNearBare) {
    const TrapConfig cfg;
    for (double d_hz : {88e3, -88e3}) {
        const double delta = hz_to_rad(d_hz);
        const CrossingMap map = crossing_map(cfg, std::vector<double>{delta}, 5);
        // Bare energies delta/2 * n_b over all manifolds N <= 5, sorted.
        std::vector<double> bare;
        for (int n = 0; n <= 5; ++n) {
            for (int na = n / 2; na >= 0; --na) {
                bare.push_back(0.5 * delta * (n - 2 * na));
            }
        }
        std::sort(bare.begin(), bare.end());
        for (std::size_t k = 0; k < bare.size(); ++k) {
            EXPECT_LT(std::abs(map.energies(0, k) - bare[k]), 0.01 * std::abs(delta));
        }
    }
}

TEST(CrossingMap, SerialAndParallelIdentical) {
    const TrapConfig cfg;
    std::vector<double> grid;
    for (int k = 0; k < 41; ++k) {
        grid.push_back(hz_to_rad(-20e3 + k * 3.5e3));
    }
    set_max_threads(1);
    const CrossingMap serial = crossing_map(cfg, grid, 5, {0, 1}, 1);
    set_max_threads(4);
    const CrossingMap parallel = crossing_map(cfg, grid, 5, {0, 1}, 1);
    set_max_threads(1);
    EXPECT_TRUE(serial.energies == parallel.energies);
    EXPECT_TRUE(serial.weights == parallel.weights);
}

TEST(DispersiveShift, ReferenceTrapSlope) {
    const CoupledModeParams p{hz_to_rad(14.3e3), hz_to_rad(1.10e3), FockCutoff{}};
    const ShiftTable t = dispersive_shift_table(p, 10);
    const double slope_hz = rad_to_hz(t.shift_perturbative(1));
    // -4 xi^2 / delta = -4 (1.10 kHz)^2 / 14.3 kHz = -338.5 Hz.
    EXPECT_NEAR(slope_hz, -4.0 * 1.10e3 * 1.10e3 / 14.3e3, 1e-6);
    EXPECT_GT(std::abs(slope_hz), 250.0);
    EXPECT_LT(std::abs(slope_hz), 400.0);
    EXPECT_EQ(t.shift_exact(0), 0.0);
    for (int n = 1; n <= 10; ++n) {
        EXPECT_LT(t.shift_exact(n), t.shift_exact(n - 1)) << "n_b = " << n;
    }
}

TEST(DispersiveShift, DecoupledLimitHasNoShift) {
    const ShiftTable t = dispersive_shift_table({hz_to_rad(14.3e3), 0.0, FockCutoff{}}, 8);
    EXPECT_LT(t.shift_exact.cwiseAbs().maxCoeff(), 1e-9 * hz_to_rad(14.3e3));
    EXPECT_EQ(t.shift_perturbative.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DispersiveShift, ClosedFormSidebandIncludesLambTerm) {
    // Second-order perturbation theory gives E(1,n) - E(0,n) = -2 (2n + 1) xi^2 / delta.
    const double delta = hz_to_rad(200e3);
    const ShiftTable t = dispersive_shift_table({delta, kXi, FockCutoff{}}, 4);
    for (int n = 0; n <= 4; ++n) {
        const double pert = -2.0 * (2 * n + 1) * kXi * kXi / delta;
        EXPECT_NEAR(t.sideband_exact(n), pert, 0.02 * std::abs(pert));
    }
}

TEST(DispersiveShift, PerturbativeAgreementInDispersiveRegime) {
    for (int n = 1; n <= 10; ++n) {
        const double delta = 10.0 * kXi * std::sqrt(n + 2.0);
        const ShiftTable t = dispersive_shift_table({delta, kXi, FockCutoff{}}, n);
        const double rel = std::abs(t.shift_exact(n) - t.shift_perturbative(n)) /
                           std::abs(t.shift_perturbative(n));
        EXPECT_LT(rel, 0.15) << "n_b = " << n;
    }
}

TEST(DispersiveShift, MonotonicAcrossDetunings) {
    const double xi = hz_to_rad(1.1e3);
    for (double d_khz = 5.0; d_khz <= 100.0; d_khz += 5.0) {
        const ShiftTable t = dispersive_shift_table({hz_to_rad(d_khz * 1e3), xi, FockCutoff{}}, 10);
        for (int n = 1; n <= 10; ++n) {
            EXPECT_LT(t.shift_exact(n), t.shift_exact(n - 1)) << d_khz << " kHz, n_b = " << n;
        }
    }
}

TEST(DispersiveShift, OddInDetuning) {
    const double delta = hz_to_rad(40e3);
    const ShiftTable pos = dispersive_shift_table({delta, kXi, FockCutoff{}}, 6);
    const ShiftTable neg = dispersive_shift_table({-delta, kXi, FockCutoff{}}, 6);
    for (int n = 0; n <= 6; ++n) {
        EXPECT_DOUBLE_EQ(pos.shift_perturbative(n), -neg.shift_perturbative(n));
        EXPECT_NEAR(pos.shift_exact(n), -neg.shift_exact(n), 1e-9 * kXi);
    }
}

TEST(DispersiveShift, BlockEnergiesAreFullSpectrumEigenvalues) {
    const CoupledModeParams p{hz_to_rad(14.3e3), kXi, FockCutoff{3, 12, false}};
    const Eigensystem full = eigh(build_hamiltonian(p));
    for (int n = 0; n <= 6; ++n) {
        for (int na : {0, 1}) {
            const double e = dressed_level(p, na, n).energy;
            const double closest = (full.values.array() - e).abs().minCoeff();
            EXPECT_LT(closest, 1e-9 * kXi);
        }
    }
}

TEST(DispersiveShift, Errors) {
    EXPECT_THROW(dispersive_shift_table({0.0, kXi, FockCutoff{}}, 3), InputError);
    EXPECT_THROW(dispersive_shift_table({hz_to_rad(14.3e3), kXi, FockCutoff{}}, -1), InputError);
    EXPECT_THROW(dressed_level({0.0, kXi, FockCutoff{}}, 1, 0), InputError);
}

TEST(DispersiveShift, SecondPhononAgainstBlockOracle) {
    // |1,2> sits in N = 4 with |2,0> and |0,4>; truncating n_a at 1 would drop |2,0>.
    const double d = hz_to_rad(14.3e3);
    Eigen::Matrix3d n4;
    n4 << 0.0, 2.0 * kXi, 0.0,
          2.0 * kXi, d, 2.0 * std::sqrt(3.0) * kXi,
          0.0, 2.0 * std::sqrt(3.0) * kXi, 2.0 * d;
    const double e12 = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(n4).eigenvalues()(1);
    const double root = std::sqrt(d * d / 4.0 + 2.0 * kXi * kXi);
    const double e02 = d / 2.0 + root;
    const double e10 = d / 2.0 - root;
    const double oracle = (e12 - e02) - e10;

    const ShiftTable narrow = dispersive_shift_table({d, kXi, FockCutoff{1, 4, false}}, 2);
    const ShiftTable wide = dispersive_shift_table({d, kXi, FockCutoff{6, 25, false}}, 2);
    EXPECT_NEAR(narrow.shift_exact(2), oracle, 1e-9 * std::abs(oracle));
    EXPECT_NEAR(wide.shift_exact(2), oracle, 1e-9 * std::abs(oracle));
}

TEST(DressedState, NormalizedAndConnectedToBareLevel) {
    const CoupledModeParams p{hz_to_rad(14.3e3), kXi, FockCutoff{2, 10, false}};
    const FockState s = dressed_state(p, 0, 3);
    EXPECT_NEAR(s.vector().norm(), 1.0, 1e-12);
    EXPECT_GT(s.populations()(tensor_basis_index(0, 3, p.cutoff)), 0.95);
    EXPECT_GT(s.vector()(tensor_basis_index(0, 3, p.cutoff)).real(), 0.0);
}
