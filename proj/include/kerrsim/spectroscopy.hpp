#pragma once

// Axial blue-sideband spectra: the effective multi-peak model
//
//     p_up(w) = g + eta * sum_n p_n f(w - w_n),
//     f(D) = (W/W_D)^2 sin^2(pi W_D / (2 W)),  W_D = sqrt(W^2 + D^2),  W = pi / t_pi,
//
// the full driven qubit + two-mode simulation it approximates, and binomial shot noise.
// Detunings are drive detunings from the n_b = 0 sideband, in rad/s.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kerrsim/dynamics.hpp"
#include "kerrsim/state_prep.hpp"

namespace kerrsim {

struct DriveParams {
    double t_pi = 8e-3;  // s, pi time on the bare first-order sideband
    int order = 1;       // sideband order k
    // Rabi frequency of the bare |0_a> -> |2_a> transition for order 2; defaults to rabi().
    std::optional<double> rabi2;

    double rabi() const { return kPi / t_pi; }
    // Rabi frequency of the bare |0_a> -> |k_a> transition for the configured order.
    double order_rabi() const { return order == 1 ? rabi() : rabi2.value_or(rabi()); }
    void validate() const;
};

struct Spectrum {
    std::vector<double> detuning;  // rad/s, strictly increasing
    std::vector<double> p_up;
    std::optional<int> shots;  // empty for noiseless data
    std::optional<std::uint64_t> seed;

    std::size_t size() const { return detuning.size(); }
    void validate() const;
};

double lineshape(double delta_n, const DriveParams& drive);
double lineshape_derivative(double delta_n, const DriveParams& drive);
// Full width at half maximum of f, about 1.60 W.
double lineshape_fwhm(const DriveParams& drive);

// w_n for n = 0..n_max from the exact dressed sideband, relative to n = 0. Blocks are
// diagonalized untruncated regardless of p.cutoff.
std::vector<double> peak_positions(const CoupledModeParams& p, int n_max);

// Evenly spaced grid of `points` detunings on [lo, hi] (rad/s).
std::vector<double> linear_grid(double lo, double hi, int points);
// 161 points on [-2 pi 4.5 kHz, +2 pi 1.5 kHz] (or mirrored when delta < 0), where
// the sidebands of n_b = 0..10 sit for the reference trap.
std::vector<double> default_scan_grid(double delta);

// Noiseless model. Peaks beyond centers.size() or dist.size() are omitted.
Spectrum model_spectrum(const PhononDistribution& dist, std::span<const double> centers,
                        const DriveParams& drive, std::span<const double> grid, double eta,
                        double g);
Spectrum model_spectrum(const PhononDistribution& dist, const CoupledModeParams& p,
                        const DriveParams& drive, std::span<const double> grid, double eta,
                        double g);

enum class SidebandReference {
    bare,     // detuning 0 is the bare axial sideband
    dressed,  // detuning 0 is the dressed n_b = 0 sideband, matching peak_positions
};

// For each grid detuning D: evolve |down> (x) initial for t_pi under
//   H = -(D/k) a^dag a + ((delta - D/k)/2) b^dag b + xi (a^dag b^2 + a b^dag^2)
//       + (W_k / (2 sqrt(k!))) (s+ a^dag^k + s- a^k)
// and report P(up). `initial` lives in the motional space of `cutoff` (without qubit).
Spectrum driven_scan(const FockState& initial, const CoupledModeParams& p, const DriveParams& drive,
                     std::span<const double> grid,
                     SidebandReference reference = SidebandReference::dressed);
Spectrum driven_scan(const FockState& initial, const TrapConfig& cfg, const FockCutoff& cutoff,
                     const DriveParams& drive, std::span<const double> grid,
                     SidebandReference reference = SidebandReference::dressed);

// Binomial(shots, p) / shots per point; point i draws from Rng(seed, i).
Spectrum add_shot_noise(const Spectrum& spectrum, int shots, std::uint64_t seed);

// CSV with header detuning_hz,p_up,shots (shots = 0 for noiseless rows).
void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);
Spectrum read_spectrum_csv(std::istream& in);
Spectrum load_spectrum_csv(const std::string& path);

}  // namespace kerrsim
