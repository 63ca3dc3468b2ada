#pragma once

// Least-squares inversion of sideband spectra: single-peak centers, parametric
// state families and free phonon distributions. Peak centers are inputs (from
// peak_positions or a calibration scan), never fitted per peak.
//
// With known shot counts, residuals are weighted by the binomial variance of the
// current model, max(p (1 - p) / shots, 1e-4), re-evaluated until the weights settle;
// otherwise weights are unity and uncertainties are rescaled by the residual variance.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "kerrsim/spectroscopy.hpp"

namespace kerrsim {

inline constexpr double kVarianceFloor = 1e-4;
inline constexpr double kMaxBackground = 0.5;

struct PeakFit {
    double center = 0.0;  // rad/s
    double sigma = 0.0;   // rad/s
    double eta = 0.0;
    double g = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Fits g + eta f(w - c) to the points with detuning in [lo, hi]. Requires >= 7 points;
// throws InputError on flat data. A center pinned to the window edge is reported
// with converged = false.
PeakFit fit_peak_center(const Spectrum& spectrum, const DriveParams& drive, double lo, double hi);

struct FitResult {
    std::string family;  // family name or "free"
    std::vector<std::string> names;  // fitted parameters, in covariance order
    std::vector<double> values;
    std::vector<double> sigma;
    Eigen::MatrixXd covariance;
    PhononDistribution p_hat;
    std::vector<double> p_sigma;
    double eta_hat = 0.0;
    double eta_sigma = 0.0;
    double g_hat = 0.0;
    double g_sigma = 0.0;
    double residual_rms = 0.0;
    std::vector<double> residuals;  // data - model, unweighted
    bool converged = false;
    int iterations = 0;
    bool singular = false;
    std::vector<double> degenerate_direction;  // unit vector over `names` when singular
    std::vector<std::string> warnings;

    // Value and 1 sigma of a named parameter; throws InputError for unknown names.
    double value(const std::string& name) const;
    double sigma_of(const std::string& name) const;
};

struct DetectionOptions {
    double eta0 = 0.7;
    double g0 = 0.01;
    std::optional<double> fixed_eta;  // fit eta when empty
};

// Parameters per family: coherent {alpha}, thermal {nbar}, squeezed_vacuum {r},
// squeezed_thermal {nbar, r}, squeezed_fock {r} (n fixed from params0), followed by
// eta (unless fixed) and g. Initial values come from params0.
FitResult fit_parametric(const Spectrum& spectrum, const StateSpec& params0,
                         std::span<const double> centers, const DriveParams& drive,
                         const DetectionOptions& detection = {});

// Free p_0..p_n_max on the simplex. With eta free, sum p = 1 is enforced (otherwise
// eta and the overall scale of p are the same direction); with eta fixed, sum p <= 1
// and the remainder is attributed to n > n_max.
FitResult fit_free_distribution(const Spectrum& spectrum, std::span<const double> centers,
                                const DriveParams& drive, int n_max,
                                const DetectionOptions& detection = {});

// Euclidean projection onto {p >= 0, sum p = 1} (or sum p <= 1 when `capped`).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& p, bool capped);

nlohmann::json to_json(const FitResult& fit);

}  // namespace kerrsim
