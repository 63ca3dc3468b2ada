// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit status
// is nonzero when any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "kerrsim/dynamics.hpp"
#include "kerrsim/measurement.hpp"
#include "kerrsim/parallel.hpp"
#include "kerrsim/reconstruction.hpp"
#include "kerrsim/spectroscopy.hpp"
#include "kerrsim/state_prep.hpp"
#include "kerrsim/trap.hpp"

using namespace kerrsim;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("violated: ") + what;
        }
    }
    void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string num(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

const double kReferenceDelta = hz_to_rad(14.3e3);

CoupledModeParams reference_params(const FockCutoff& cutoff = {}) {
    return params_from_trap(detune_to(TrapConfig{}, kReferenceDelta), cutoff);
}

// 1 ------------------------------------------------------------------------
Verdict coupling_strength_reproduction() {
    Verdict v;
    const ModePair m = derive_modes(TrapConfig{});
    const double exchange_hz = rad_to_hz(2.0 * std::sqrt(2.0) * m.xi);
    v.note("2 sqrt2 xi/2pi = " + num(exchange_hz, 6) + " Hz");
    v.require(std::abs(exchange_hz - 3110.0) <= 0.01 * 3110.0, "within 1% of 3.11 kHz");
    return v;
}

// 2 ------------------------------------------------------------------------
Verdict exchange_oscillation() {
    Verdict v;
    const FockCutoff cut{3, 8, false};
    const CoupledModeParams p = params_from_trap(detune_to(TrapConfig{}, 0.0), cut);
    const FockState init = FockState::basis(cut.dim(), tensor_basis_index(1, 0, cut));
    const std::vector<double> t = linear_grid(0.0, 2e-3, 801);
    const PopulationTrace trace = exchange_trace(p, init, t, {{1, 0}});
    const Eigen::VectorXd y = trace.populations.col(0);
    const OscillationFit fit = fit_oscillation(t, std::span<const double>(y.data(), std::size_t(y.size())));
    const double expected = 2.0 * std::sqrt(2.0) * p.xi;
    const double sim_hz = rad_to_hz(fit.omega);
    v.note("fit " + num(sim_hz, 6) + " Hz vs 2 sqrt2 xi " + num(rad_to_hz(expected), 6) + " Hz");
    v.require(fit.converged, "fit converged");
    v.require(std::abs(fit.omega - expected) <= 0.005 * expected, "fit within 0.5% of 2 sqrt2 xi");
    const double gap = std::abs(3060.0 - sim_hz) / sim_hz;
    v.note("measured 3.06 kHz differs by " + num(100.0 * gap, 3) + "%");
    v.require(gap <= 0.025, "3.06 kHz within 2.5% of simulation");
    return v;
}

// 3 ------------------------------------------------------------------------
Verdict splitting_ratio() {
    Verdict v;
    const CoupledModeParams p = params_from_trap(detune_to(TrapConfig{}, 0.0), FockCutoff{3, 8, false});
    const ManifoldSpectrum n2 = diagonalize_manifold(p, 2);
    const ManifoldSpectrum n3 = diagonalize_manifold(p, 3);
    const ManifoldSpectrum n4 = diagonalize_manifold(p, 4);
    const double ratio = (n3.energies(1) - n3.energies(0)) / (n2.energies(1) - n2.energies(0));
    v.note("ratio - sqrt3 = " + num(ratio - std::sqrt(3.0), 3));
    v.require(std::abs(ratio - std::sqrt(3.0)) < 1e-10, "N=3/N=2 gap ratio sqrt3 to 1e-10");
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        worst = std::max(worst, std::abs(n4.energies(k) / p.xi - 4.0 * (k - 1)));
    }
    v.note("N=4 max |E/xi - (-4,0,4)| = " + num(worst, 3));
    v.require(n4.energies.size() == 3 && worst < 1e-10, "N=4 eigenvalues (-4,0,4) xi to 1e-10");
    return v;
}

// 4 ------------------------------------------------------------------------
Verdict dispersive_shift() {
    Verdict v;
    const CoupledModeParams p = reference_params(FockCutoff{1, 12, false});
    const ShiftTable s = dispersive_shift_table(p, 10);
    std::string steps;
    for (int n = 1; n <= 3; ++n) {
        const double step = std::abs(rad_to_hz(s.shift_exact(n) - s.shift_exact(n - 1)));
        steps += (n > 1 ? "," : "") + num(step, 4);
        v.require(step >= 250.0 && step <= 400.0, "per-phonon shift in [250,400] Hz at n_b=" + std::to_string(n));
    }
    v.note("per-phonon |shift| n_b=1..3: " + steps + " Hz");
    const double slope = -4.0 * p.xi * p.xi / p.delta;
    const double rel = std::abs(slope - s.shift_exact(1)) / std::abs(s.shift_exact(1));
    v.note("perturbative vs exact at n_b=1: " + num(100.0 * rel, 3) + "%");
    v.require(rel <= 0.15, "perturbative slope within 15%");
    for (int n = 1; n <= 10; ++n) {
        v.require(s.shift_exact(n) < s.shift_exact(n - 1), "strictly monotonic at n_b=" + std::to_string(n));
    }
    return v;
}

// 5 ------------------------------------------------------------------------
Verdict conservation() {
    Verdict v;
    double worst = 0.0;
    for (std::uint64_t draw = 0; draw < 100; ++draw) {
        Rng rng(2024, draw);
        const FockCutoff c{1 + int(rng.uniform() * 6), 2 + int(rng.uniform() * 24), false};
        const CoupledModeParams p{hz_to_rad(60e3 * (rng.uniform() - 0.5)), hz_to_rad(3e3 * rng.uniform()), c};
        const FockOperator h = build_hamiltonian(p, hz_to_rad(20e3 * (rng.uniform() - 0.5)));
        const double r = max_abs(commutator(h, conserved_charge(c)).matrix()) / max_abs(h.matrix());
        worst = std::max(worst, r);
    }
    v.note("max ||[H,N]|| / ||H|| over 100 draws = " + num(worst, 3));
    v.require(worst < 1e-12, "below 1e-12");
    return v;
}

// 6 ------------------------------------------------------------------------
Verdict lineshape_identities() {
    Verdict v;
    const DriveParams d;
    const double w = d.rabi();
    const double at0 = std::abs(lineshape(0.0, d) - 1.0);
    const double zero = std::abs(lineshape(std::sqrt(3.0) * w, d));
    double asym = 0.0;
    for (int i = 1; i <= 200; ++i) {
        const double x = 0.05 * i * w;
        asym = std::max(asym, std::abs(lineshape(x, d) - lineshape(-x, d)));
    }
    bool earlier_zero = false;
    for (int i = 1; i < 1000; ++i) {
        earlier_zero = earlier_zero || lineshape(std::sqrt(3.0) * w * i / 1000.0, d) <= 1e-12;
    }
    v.note("|f(0)-1| = " + num(at0, 2) + ", f(sqrt3 W) = " + num(zero, 2) + ", max asym = " + num(asym, 2));
    v.require(at0 <= 1e-12 && zero <= 1e-12 && asym <= 1e-12, "identities to 1e-12");
    v.require(!earlier_zero, "no zero before sqrt3 W");
    return v;
}

// 7 ------------------------------------------------------------------------
Verdict effective_model_validity() {
    Verdict v;
    const DriveParams d;
    const CoupledModeParams base = reference_params();
    const std::vector<double> centers = peak_positions(base, 4);
    const double spacing = std::abs(centers[1] - centers[0]);
    double worst_center = 0.0;
    double worst_height = 0.0;
    for (int n = 0; n <= 3; ++n) {
        CoupledModeParams p = base;
        p.cutoff = FockCutoff{2, n + 8, true};
        const FockCutoff motional{2, n + 8, false};
        const FockState start = FockState::basis(motional.dim(), tensor_basis_index(0, n, motional));
        const std::vector<double> grid =
            linear_grid(centers[n] - hz_to_rad(150.0), centers[n] + hz_to_rad(150.0), 61);
        const Spectrum driven = driven_scan(start, p, d, grid);
        const PeakFit fit = fit_peak_center(driven, d, grid.front(), grid.back());
        const std::vector<double> at_peak = {fit.center};
        const double driven_height = driven_scan(start, p, d, at_peak).p_up[0];
        const PhononDistribution fock(Eigen::VectorXd::Unit(n + 1, n), 0.0);
        const double model_height = model_spectrum(fock, centers, d, std::vector<double>{centers[n]}, 1.0, 0.0).p_up[0];
        worst_center = std::max(worst_center, std::abs(fit.center - centers[n]) / spacing);
        worst_height = std::max(worst_height, std::abs(driven_height - model_height));
        v.require(fit.converged, "driven peak fit converged for n=" + std::to_string(n));
    }
    v.note("max center offset " + num(100.0 * worst_center, 3) + "% of spacing, max height diff " +
           num(worst_height, 3));
    v.require(worst_center < 0.10, "center discrepancy < 10% of spacing");
    v.require(worst_height < 0.05, "height discrepancy < 0.05");
    return v;
}

// 8 ------------------------------------------------------------------------
Verdict reconstruction_round_trips() {
    Verdict v;
    const CoupledModeParams p = reference_params();
    const DriveParams d;
    const std::vector<double> centers = peak_positions(p, 10);
    const std::vector<double> grid = default_scan_grid(p.delta);
    const double eta = 0.7;
    const double g = 0.02;
    auto spectrum = [&](const StateSpec& s) {
        return model_spectrum(expected_populations(s, 10), centers, d, grid, eta, g);
    };

    struct Family {
        StateSpec truth;
        StateSpec start;
        std::vector<std::pair<std::string, double>> params;
    };
    const std::vector<Family> noiseless = {
        {StateSpec::coherent(Complex(std::sqrt(2.0), 0.0)), StateSpec::coherent(Complex(1.0, 0.0)),
         {{"alpha", std::sqrt(2.0)}}},
        {StateSpec::thermal(1.5), StateSpec::thermal(1.0), {{"nbar", 1.5}}},
        {StateSpec::squeezed_vacuum(Complex(0.6, 0.0)), StateSpec::squeezed_vacuum(Complex(0.3, 0.0)), {{"r", 0.6}}},
        {StateSpec::squeezed_thermal(0.5, Complex(0.6, 0.0)), StateSpec::squeezed_thermal(0.8, Complex(0.4, 0.0)),
         {{"nbar", 0.5}, {"r", 0.6}}},
        {StateSpec::squeezed_fock(1, Complex(0.6, 0.0)), StateSpec::squeezed_fock(1, Complex(0.4, 0.0)), {{"r", 0.6}}},
    };
    double worst_noiseless = 0.0;
    for (const Family& f : noiseless) {
        const FitResult fit = fit_parametric(spectrum(f.truth), f.start, centers, d);
        for (const auto& [name, truth] : f.params) {
            worst_noiseless = std::max(worst_noiseless, std::abs(fit.value(name) - truth) / truth);
        }
        worst_noiseless = std::max(worst_noiseless, std::abs(fit.eta_hat - eta) / eta);
    }
    v.note("noiseless worst relative error " + num(worst_noiseless, 2));
    v.require(worst_noiseless <= 1e-4, "noiseless round trip to 1e-4");

    // Noisy: the estimate is the mean over the 10 seeds; single-seed spread is reported.
    struct Noisy {
        std::string label;
        StateSpec truth;
        StateSpec start;
        double target;
        std::function<double(const FitResult&)> estimate;
    };
    const std::vector<Noisy> noisy = {
        {"|alpha|^2", StateSpec::coherent(Complex(std::sqrt(2.0), 0.0)), StateSpec::coherent(Complex(1.0, 0.0)), 2.0,
         [](const FitResult& f) { return f.value("alpha") * f.value("alpha"); }},
        {"nbar", StateSpec::thermal(1.5), StateSpec::thermal(1.0), 1.5,
         [](const FitResult& f) { return f.value("nbar"); }},
        {"|r|", StateSpec::squeezed_vacuum(Complex(0.6, 0.0)), StateSpec::squeezed_vacuum(Complex(0.3, 0.0)), 0.6,
         [](const FitResult& f) { return f.value("r"); }},
    };
    for (const Noisy& n : noisy) {
        const Spectrum clean = spectrum(n.truth);
        double mean = 0.0;
        double mean_eta = 0.0;
        double worst_seed = 0.0;
        double worst_eta = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const FitResult fit = fit_parametric(add_shot_noise(clean, 200, seed), n.start, centers, d);
            const double est = n.estimate(fit);
            mean += est / 10.0;
            mean_eta += fit.eta_hat / 10.0;
            worst_seed = std::max(worst_seed, std::abs(est - n.target) / n.target);
            worst_eta = std::max(worst_eta, std::abs(fit.eta_hat - eta));
        }
        const double rel = std::abs(mean - n.target) / n.target;
        v.note(n.label + " mean " + num(mean, 5) + " (" + num(100.0 * rel, 3) + "%, worst seed " +
               num(100.0 * worst_seed, 3) + "%), eta mean " + num(mean_eta, 4) + " (worst seed |d| " +
               num(worst_eta, 3) + ")");
        v.require(rel <= 0.10, n.label + " 10-seed mean within 10%");
        v.require(std::abs(mean_eta - eta) <= 0.05, n.label + " fit: 10-seed mean eta within 0.05");
    }
    return v;
}

// 9 ------------------------------------------------------------------------
Verdict fock_preset_recovery() {
    Verdict v;
    const CoupledModeParams p = reference_params();
    const DriveParams d;
    const std::vector<double> centers = peak_positions(p, 10);
    const Spectrum clean = model_spectrum(expected_populations(StateSpec::fock(10, true), 10), centers, d,
                                          default_scan_grid(p.delta), 0.7, 0.02);
    const FitResult fit = fit_free_distribution(add_shot_noise(clean, 200, 42), centers, d, 10);
    const int idx[3] = {10, 9, 8};
    const double truth[3] = {0.80, 0.06, 0.06};
    Eigen::Vector3d r;
    Eigen::Matrix3d c;
    for (int i = 0; i < 3; ++i) {
        r(i) = fit.p_hat[idx[i]] - truth[i];
        for (int j = 0; j < 3; ++j) {
            c(i, j) = fit.covariance(idx[i], idx[j]);
        }
    }
    const double d2 = r.dot(c.ldlt().solve(r));
    v.note("p10,p9,p8 = " + num(fit.p_hat[10], 3) + "+-" + num(std::sqrt(c(0, 0)), 2) + ", " +
           num(fit.p_hat[9], 3) + "+-" + num(std::sqrt(c(1, 1)), 2) + ", " + num(fit.p_hat[8], 3) + "+-" +
           num(std::sqrt(c(2, 2)), 2) + "; Mahalanobis d^2 = " + num(d2, 3));
    v.require(fit.converged, "fit converged");
    v.require(d2 <= 8.02, "joint 2 sigma (d^2 <= 8.02, 3 dof)");
    return v;
}

// 10 -----------------------------------------------------------------------
Verdict thermal_random_walk() {
    Verdict v;
    const int pulses = 18;
    const double nbar = 1.0;
    const PhononDistribution walk = random_walk_thermal(pulses, std::sqrt(nbar / pulses), 7, 10000, 30);
    const double tvd = total_variation(walk, thermal_populations(nbar, 30));
    v.note("TVD = " + num(tvd, 3) + ", mean = " + num(walk.mean(), 4));
    v.require(tvd < 0.05, "TVD < 0.05");
    return v;
}

// 11 -----------------------------------------------------------------------
Verdict measurement_statistics() {
    Verdict v;
    const DetectionParams det{0.7, 0.03, false};
    const FockState thermal = prepare(StateSpec::thermal(1.0), 30).state;
    const int shots = 10000;
    const std::vector<ShotRecord> log = shot_batch(thermal, 1, det, 11, shots);
    const double bright = double(std::count_if(log.begin(), log.end(),
                                               [](const ShotRecord& s) { return s.outcome == Outcome::bright; }));
    const double p = det.g + det.eta * thermal.populations()(1);
    const double se = std::sqrt(p * (1.0 - p) / shots);
    const double z = (bright / shots - p) / se;
    v.note("bright rate z = " + num(z, 3));
    v.require(std::abs(z) <= 3.0, "bright rate within 3 SE");

    const DetectionParams ideal{1.0, 0.0, false};
    const RealVector before = thermal.populations();
    const RealVector after = dark_update(thermal, 1, ideal).populations();
    double defect = std::abs(after(1));
    for (Index n = 0; n < before.size(); ++n) {
        if (n != 1) {
            defect = std::max(defect, std::abs(after(n) - before(n) / (1.0 - before(1))));
        }
    }
    v.note("dark-update defect " + num(defect, 2));
    v.require(defect <= 1e-14, "ideal dark update zeroes and renormalizes");

    int repeats = 0;
    bool invariant = true;
    const FockState coherent = prepare(StateSpec::coherent(Complex(1.2, 0.0)), 30).state;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        TrackedState s(coherent);
        Rng rng(seed);
        if (single_shot(s, 1, ideal, rng).outcome == Outcome::dark) {
            ++repeats;
            invariant = invariant && single_shot(s, 1, ideal, rng).outcome == Outcome::dark;
        }
    }
    v.note("repeat-dark " + std::to_string(repeats) + "/" + std::to_string(repeats));
    v.require(invariant, "repeat-dark at eta = 1");
    return v;
}

// 12 -----------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

Verdict determinism() {
    namespace fs = std::filesystem;
    Verdict v;
    const fs::path root = fs::temp_directory_path() / "kerrsim_acceptance";
    fs::remove_all(root);
    const std::vector<std::vector<std::string>> commands = {
        {"modes"},
        {"exchange", "--points", "101"},
        {"crossing", "--points", "9", "--driven", "--raman-points", "21"},
        {"shift", "--sweep", "--sweep-points", "6"},
        {"scan", "--seed", "3", "--state", "coherent:1.41"},
        {"scan", "--seed", "3", "--driven", "--state", "thermal:0.5", "--grid-min-hz", "-1200", "--grid-max-hz",
         "300", "--grid-points", "31"},
        {"shots", "--seed", "3", "--state", "thermal:1", "--target", "1", "--count", "3000"},
        {"shots", "--seed", "3", "--state", "thermal:1", "--schedule", "0,1,2,3", "--count", "500", "--eta", "1"},
        {"walk", "--seed", "3", "--trajectories", "2000"},
    };
    int compared = 0;
    for (std::size_t k = 0; k < commands.size(); ++k) {
        std::vector<fs::path> dirs;
        for (const char* threads : {"1", "1", "4"}) {
            const fs::path dir = root / (std::to_string(k) + "_" + std::to_string(dirs.size()));
            auto args = commands[k];
            args.insert(args.end(), {"--threads", threads, "--out", dir.string()});
            std::ostringstream out;
            std::ostringstream err;
            const int code = cli::run(args, out, err);
            v.require(code == 0, commands[k][0] + " exited " + std::to_string(code) + " " + err.str());
            dirs.push_back(dir);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            if (entry.path().extension() != ".csv") {
                continue;
            }
            const std::string body = slurp(entry.path());
            const std::string name = entry.path().filename().string();
            v.require(!body.empty(), name + " empty");
            v.require(body == slurp(dirs[1] / name), commands[k][0] + "/" + name + " differs across runs");
            v.require(body == slurp(dirs[2] / name), commands[k][0] + "/" + name + " differs serial vs parallel");
            ++compared;
        }
    }
    // Seeded fit input: fit output must also repeat.
    const std::string scan = (root / "4_0" / "scan.csv").string();
    std::vector<std::string> bodies;
    for (const char* threads : {"1", "4"}) {
        const fs::path dir = root / (std::string("fit_") + threads);
        std::ostringstream out;
        std::ostringstream err;
        cli::run({"fit", "--input", scan, "--family", "coherent", "--threads", threads, "--out", dir.string()}, out,
                 err);
        bodies.push_back(slurp(dir / "fit_populations.csv"));
        ++compared;
    }
    v.require(!bodies[0].empty() && bodies[0] == bodies[1], "fit output differs serial vs parallel");
    v.note(std::to_string(compared) + " CSV bodies identical across 2 runs and 1 vs 4 threads");
    fs::remove_all(root);
    return v;
}

}  // namespace

int main() {
    set_max_threads(1);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"coupling strength reproduction", coupling_strength_reproduction},
        {"exchange oscillation", exchange_oscillation},
        {"splitting ratio", splitting_ratio},
        {"dispersive shift", dispersive_shift},
        {"conservation", conservation},
        {"lineshape identities", lineshape_identities},
        {"effective-model validity", effective_model_validity},
        {"reconstruction round trips", reconstruction_round_trips},
        {"fock-preset recovery", fock_preset_recovery},
        {"thermal random walk", thermal_random_walk},
        {"projective measurement statistics", measurement_statistics},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failures += v.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
