#pragma once

// Coupled axial/radial mode dynamics in the rotating frame:
//
//     H/hbar = D a^dag a + ((delta + D)/2) b^dag b + xi (a^dag b^2 + a b^dag^2)
//
// where D is a caller-chosen frame offset (0 by default). The coupling conserves
// N = 2 n_a + n_b, so the spectrum splits into finite manifold blocks
// {|n_a, N - 2 n_a>}. Energies are reported relative to the bare |0,0> state.

#include <span>
#include <utility>
#include <vector>

#include "kerrsim/fock.hpp"
#include "kerrsim/trap.hpp"

namespace kerrsim {

struct CoupledModeParams {
    double delta = 0.0;  // rad/s
    double xi = 0.0;     // rad/s, >= 0
    FockCutoff cutoff;

    void validate() const;
};

CoupledModeParams params_from_trap(const TrapConfig& cfg, const FockCutoff& cutoff = {});

FockOperator build_hamiltonian(const CoupledModeParams& p, double frame_offset = 0.0);

// 2 a^dag a + b^dag b.
FockOperator conserved_charge(const FockCutoff& cutoff);

// One conserved block, truncated by the cutoff. Basis ordered by ascending n_b
// (descending n_a). The matrix is real symmetric tridiagonal.
struct ManifoldBlock {
    int charge = 0;
    std::vector<std::pair<int, int>> basis;  // (n_a, n_b)
    Eigen::MatrixXd hamiltonian;
};

ManifoldBlock manifold_block(const CoupledModeParams& p, int charge, double frame_offset = 0.0);

struct ManifoldSpectrum {
    ManifoldBlock block;
    Eigen::VectorXd energies;  // ascending
    Eigen::MatrixXd vectors;   // columns in block basis
};

ManifoldSpectrum diagonalize_manifold(const CoupledModeParams& p, int charge,
                                      double frame_offset = 0.0);

// Dressed eigenstate adiabatically connected to the bare |n_a, n_b> from |delta| -> inf
// at fixed sign of delta. Inside a block the branches never cross for xi > 0, so the
// connected state is the one whose energy rank equals the rank of the bare level.
struct DressedLevel {
    double energy = 0.0;        // rad/s
    double bare_overlap = 0.0;  // |<n_a, n_b|dressed>|^2
    Eigen::VectorXd amplitudes; // in ManifoldBlock basis
    ManifoldBlock block;
};

// Throws InputError when delta == 0 and xi > 0 (no dispersive continuation).
DressedLevel dressed_level(const CoupledModeParams& p, int n_a, int n_b);

// Dressed state embedded in the full two-mode space of p.cutoff.
FockState dressed_state(const CoupledModeParams& p, int n_a, int n_b);

struct PopulationTrace {
    std::vector<double> times;
    std::vector<std::pair<int, int>> watched;  // (n_a, n_b)
    Eigen::MatrixXd populations;               // rows: times, cols: watched states
};

PopulationTrace exchange_trace(const CoupledModeParams& p, const FockState& initial,
                               std::span<const double> times,
                               std::vector<std::pair<int, int>> watched = {{1, 0}, {0, 2}});

// Least-squares fit of y(t) = c + A cos(omega t + phi).
struct OscillationFit {
    double omega = 0.0;  // rad/s
    double amplitude = 0.0;
    double offset = 0.0;
    double phase = 0.0;
    double omega_sigma = 0.0;
    bool converged = false;
};

OscillationFit fit_oscillation(std::span<const double> times, std::span<const double> values);

struct CrossingMap {
    std::vector<double> delta_grid;  // rad/s
    std::vector<double> xi;          // coupling at each grid point
    Eigen::MatrixXd energies;        // rows: grid, cols: branch, ascending
    Eigen::MatrixXd weights;         // overlap with the sideband target state
    Eigen::MatrixXi charges;         // manifold of each branch
};

// For every detuning, the trap is re-tuned with detune_to and xi recomputed at the
// actual omega_b. Branches cover all manifolds N <= manifold_n_max (untruncated).
// The weight of a branch is |<reference_a + order, reference_b|branch>|^2, i.e. the
// visibility of that branch in an order-k axial blue sideband scan starting from
// |reference_a, reference_b>.
CrossingMap crossing_map(const TrapConfig& cfg, std::span<const double> delta_grid,
                         int manifold_n_max, std::pair<int, int> reference = {0, 0},
                         int order = 1);

struct ShiftTable {
    std::vector<int> n_b;
    Eigen::VectorXd shift_exact;         // rad/s, relative to n_b = 0
    Eigen::VectorXd shift_perturbative;  // -4 xi^2 n_b / delta
    Eigen::VectorXd sideband_exact;      // E(1, n_b) - E(0, n_b), absolute
    Eigen::VectorXd bare_overlap;        // of the dressed |1, n_b>
};

// Requires delta != 0. Manifolds are diagonalized complete: the cutoff is widened as
// needed, so the result does not depend on p.cutoff.
ShiftTable dispersive_shift_table(const CoupledModeParams& p, int n_b_max_report);

}  // namespace kerrsim
