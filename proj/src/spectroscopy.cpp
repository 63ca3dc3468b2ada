#include "kerrsim/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "kerrsim/error.hpp"
#include "kerrsim/io.hpp"
#include "kerrsim/parallel.hpp"

namespace kerrsim {

void DriveParams::validate() const {
    if (!(t_pi > 0.0) || !std::isfinite(t_pi)) {
        throw InputError("drive: t_pi must be > 0");
    }
    if (order != 1 && order != 2) {
        throw InputError("drive: sideband order must be 1 or 2, got " + std::to_string(order));
    }
    if (rabi2 && !(*rabi2 > 0.0)) {
        throw InputError("drive: second-order Rabi frequency must be > 0");
    }
}

void Spectrum::validate() const {
    if (detuning.size() != p_up.size()) {
        throw InputError("spectrum: detuning and p_up lengths differ");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        if (i > 0 && !(detuning[i] > detuning[i - 1])) {
            throw InputError("spectrum: detuning grid must be strictly increasing (row " +
                             std::to_string(i + 1) + ")");
        }
        if (!(p_up[i] >= 0.0 && p_up[i] <= 1.0)) {
            throw InputError("spectrum: p_up outside [0, 1] at row " + std::to_string(i + 1));
        }
    }
    if (shots && *shots < 1) {
        throw InputError("spectrum: shots must be >= 1");
    }
}

double lineshape(double delta_n, const DriveParams& drive) {
    const double w = drive.rabi();
    const double wn = std::hypot(w, delta_n);
    const double s = std::sin(kPi * wn / (2.0 * w));
    return (w / wn) * (w / wn) * s * s;
}

double lineshape_derivative(double delta_n, const DriveParams& drive) {
    const double w = drive.rabi();
    const double wn = std::hypot(w, delta_n);
    const double x = kPi * wn / (2.0 * w);
    const double s = std::sin(x);
    const double u = (w * w) / (wn * wn);
    // d/dW_n of u sin^2(x), times dW_n/dD = D / W_n.
    const double d_wn = -2.0 * u / wn * s * s + u * std::sin(2.0 * x) * kPi / (2.0 * w);
    return d_wn * delta_n / wn;
}

double lineshape_fwhm(const DriveParams& drive) {
    double lo = 0.0;
    double hi = std::sqrt(3.0) * drive.rabi();
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (lineshape(mid, drive) > 0.5 ? lo : hi) = mid;
    }
    return lo + hi;
}

std::vector<double> peak_positions(const CoupledModeParams& p, int n_max) {
    p.validate();
    if (n_max < 0) {
        throw InputError("peak_positions: n_max must be >= 0");
    }
    if (p.xi == 0.0) {
        return std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0);
    }
    const ShiftTable table = dispersive_shift_table(p, n_max);
    return std::vector<double>(table.shift_exact.data(), table.shift_exact.data() + table.shift_exact.size());
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) {
        throw InputError("grid: need at least 2 points and hi > lo");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[i] = lo + (hi - lo) * i / (points - 1);
    }
    return grid;
}

std::vector<double> default_scan_grid(double delta) {
    const double near = hz_to_rad(1.5e3);
    const double far = hz_to_rad(4.5e3);
    return delta >= 0.0 ? linear_grid(-far, near, 161) : linear_grid(-near, far, 161);
}

namespace {

void check_detection(double eta, double g) {
    if (!(eta >= 0.0 && eta <= 1.0) || !(g >= 0.0) || g + eta > 1.0 + 1e-12) {
        throw InputError("detection parameters need 0 <= eta <= 1, g >= 0, g + eta <= 1 (eta = " +
                         format_number(eta) + ", g = " + format_number(g) + ")");
    }
}

}  // namespace

Spectrum model_spectrum(const PhononDistribution& dist, std::span<const double> centers,
                        const DriveParams& drive, std::span<const double> grid, double eta,
                        double g) {
    drive.validate();
    check_detection(eta, g);
    const std::size_t peaks = std::min(centers.size(), static_cast<std::size_t>(dist.size()));
    Spectrum out;
    out.detuning.assign(grid.begin(), grid.end());
    out.p_up.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double sum = 0.0;
        for (std::size_t n = 0; n < peaks; ++n) {
            sum += dist[static_cast<Index>(n)] * lineshape(grid[i] - centers[n], drive);
        }
        out.p_up[i] = std::clamp(g + eta * sum, 0.0, 1.0);
    }
    out.validate();
    return out;
}

Spectrum model_spectrum(const PhononDistribution& dist, const CoupledModeParams& p,
                        const DriveParams& drive, std::span<const double> grid, double eta,
                        double g) {
    const std::vector<double> centers = peak_positions(p, dist.n_max());
    return model_spectrum(dist, centers, drive, grid, eta, g);
}

Spectrum driven_scan(const FockState& initial, const CoupledModeParams& p, const DriveParams& drive,
                     std::span<const double> grid, SidebandReference reference) {
    p.validate();
    drive.validate();
    const FockCutoff& c = p.cutoff;
    if (!c.with_qubit) {
        throw InputError("driven_scan: the cutoff must include the qubit");
    }
    const int k = drive.order;
    if (c.n_a_max < k) {
        throw InputError("driven_scan: n_a_max must be >= sideband order " + std::to_string(k));
    }
    const FockCutoff motional{c.n_a_max, c.n_b_max, false};
    if (initial.dim() != motional.dim()) {
        throw InputError("driven_scan: initial state dimension " + std::to_string(initial.dim()) +
                         " does not match motional dimension " + std::to_string(motional.dim()));
    }

    double offset = 0.0;
    if (reference == SidebandReference::dressed && p.xi > 0.0) {
        if (p.delta == 0.0) {
            throw InputError(
                "driven_scan: no dressed sideband reference at delta = 0; use the bare reference");
        }
        CoupledModeParams exact = p;
        exact.cutoff = FockCutoff{k + 1, 2 * k + 2, false};
        offset = dressed_level(exact, k, 0).energy - dressed_level(exact, 0, 0).energy;
    }

    const Index half = motional.dim();
    FockState start = [&] {
        if (initial.is_pure()) {
            Vector v = Vector::Zero(c.dim());
            v.head(half) = initial.vector();
            return FockState::pure(v);
        }
        Matrix rho = Matrix::Zero(c.dim(), c.dim());
        rho.topLeftCorner(half, half) = initial.density();
        return FockState::mixed(rho);
    }();

    Matrix ak = Matrix::Identity(c.dim(), c.dim());
    const Matrix a = annihilation_op(c, Mode::axial).matrix();
    for (int i = 0; i < k; ++i) {
        ak = ak * a;
    }
    const Matrix sp = sigma_plus(c).matrix();
    const double coef = drive.order_rabi() / (2.0 * std::sqrt(std::tgamma(k + 1.0)));
    const Matrix up_term = sp * Matrix(ak.adjoint());
    const Matrix drive_term = coef * (up_term + Matrix(up_term.adjoint()));

    Spectrum out;
    out.detuning.assign(grid.begin(), grid.end());
    out.p_up.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const double frame = -(grid[i] + offset) / k;
        const FockOperator h = build_hamiltonian(p, frame) + FockOperator(drive_term);
        const RealVector pops = evolve(start, FockOperator::hermitian(h.matrix()), drive.t_pi).populations();
        out.p_up[i] = std::clamp(pops.tail(c.dim() - half).sum(), 0.0, 1.0);
    });
    out.validate();
    return out;
}

Spectrum driven_scan(const FockState& initial, const TrapConfig& cfg, const FockCutoff& cutoff,
                     const DriveParams& drive, std::span<const double> grid,
                     SidebandReference reference) {
    return driven_scan(initial, params_from_trap(cfg, cutoff), drive, grid, reference);
}

Spectrum add_shot_noise(const Spectrum& spectrum, int shots, std::uint64_t seed) {
    spectrum.validate();
    if (shots < 1) {
        throw InputError("add_shot_noise: shots must be >= 1");
    }
    Spectrum out = spectrum;
    out.shots = shots;
    out.seed = seed;
    parallel_for(out.size(), [&](std::size_t i) {
        Rng rng(seed, i);
        out.p_up[i] = static_cast<double>(rng.binomial(shots, spectrum.p_up[i])) / shots;
    });
    return out;
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum) {
    spectrum.validate();
    out << "detuning_hz,p_up,shots\n";
    const std::string shots = std::to_string(spectrum.shots.value_or(0));
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        write_csv_row(out, {format_number(rad_to_hz(spectrum.detuning[i])),
                            format_number(spectrum.p_up[i]), shots});
    }
}

Spectrum read_spectrum_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "detuning_hz,p_up,shots") {
        throw InputError("spectrum CSV: expected header 'detuning_hz,p_up,shots'");
    }
    Spectrum s;
    std::optional<long long> shots;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line, ',');
        const std::string where = "spectrum CSV line " + std::to_string(row);
        if (cells.size() != 3) {
            throw InputError(where + ": expected 3 columns, got " + std::to_string(cells.size()));
        }
        s.detuning.push_back(hz_to_rad(parse_number(cells[0], where + " detuning_hz")));
        s.p_up.push_back(parse_number(cells[1], where + " p_up"));
        const long long n = parse_integer(cells[2], where + " shots");
        if (shots && *shots != n) {
            throw InputError(where + ": shots must be the same on every row");
        }
        shots = n;
    }
    if (s.size() == 0) {
        throw InputError("spectrum CSV: no data rows");
    }
    if (shots && *shots > 0) {
        s.shots = static_cast<int>(*shots);
    } else if (shots && *shots < 0) {
        throw InputError("spectrum CSV: shots must be >= 0");
    }
    s.validate();
    return s;
}

Spectrum load_spectrum_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open spectrum CSV '" + path + "'");
    }
    return read_spectrum_csv(in);
}

}  // namespace kerrsim
