#include "commands.hpp"

#include <cmath>
#include <cstdint>
#include <ctime>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "kerrsim/dynamics.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/io.hpp"
#include "kerrsim/measurement.hpp"
#include "kerrsim/parallel.hpp"
#include "kerrsim/reconstruction.hpp"
#include "kerrsim/spectroscopy.hpp"
#include "kerrsim/state_prep.hpp"
#include "kerrsim/trap.hpp"

#ifndef KERRSIM_VERSION
#define KERRSIM_VERSION "unknown"
#endif

namespace kerrsim::cli {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Same values as TrapConfig{}; hashed when no --config is given.
constexpr const char* kBuiltinConfig =
    "[trap]\nomega_x_hz = 1042e3\nomega_y_hz = 979e3\nomega_z_hz = 587e3\n";

const char* kFooter = R"(Generating commands for figure-like outputs:
  exchange   population exchange trace |1,0> <-> |0,2> at resonance
  crossing   avoided-crossing energies and sideband weights vs two-mode detuning;
             --driven adds the bright-ion P(up) map vs Raman and two-mode detuning
  shift      dispersive shift table per radial phonon (--sweep: vs detuning)
  scan       axial blue-sideband spectra of prepared radial states
  fit        phonon-distribution reconstruction from a scan CSV
  shots      single-shot phonon-number measurement statistics
  walk       thermal state from random displacement kicks

Exit codes: 0 success, 1 fit did not converge (outputs still written), 2 input error.)";

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
};

std::string cell_text(const json& v) {
    if (v.is_number_integer()) {
        return std::to_string(v.get<long long>());
    }
    if (v.is_number()) {
        return format_number(v.get<double>());
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_null()) {
        return "";
    }
    return v.get<std::string>();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fixed(double x, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

struct Context {
    std::string command;
    std::string config_text = kBuiltinConfig;
    std::string canonical_args;
    std::optional<std::uint64_t> seed;
    std::string format = "csv";
    fs::path out_dir = ".";
    TrapConfig trap;
    json outputs = json::array();
    std::ostream* report = nullptr;

    std::uint64_t require_seed() const {
        if (!seed) {
            throw InputError("this command is stochastic; pass --seed N");
        }
        return *seed;
    }

    void write(const std::string& name, const std::string& body) {
        fs::create_directories(out_dir);
        const fs::path path = out_dir / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw InputError("cannot write '" + path.string() + "'");
        }
        f << body;
        outputs.push_back({{"path", name}, {"bytes", body.size()}, {"fnv1a64", fnv1a_hex(body)}});
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    // stem.csv or stem.json according to --format.
    void write_table(const std::string& stem, const Table& t) {
        if (format == "json") {
            json rows = json::array();
            for (const auto& r : t.rows) {
                json obj = json::object();
                for (std::size_t c = 0; c < t.columns.size(); ++c) {
                    obj[t.columns[c]] = r[c];
                }
                rows.push_back(std::move(obj));
            }
            write_json(stem + ".json", rows);
            return;
        }
        std::ostringstream s;
        write_csv_row(s, t.columns);
        for (const auto& r : t.rows) {
            std::vector<std::string> cells;
            cells.reserve(r.size());
            for (const json& v : r) {
                cells.push_back(cell_text(v));
            }
            write_csv_row(s, cells);
        }
        write(stem + ".csv", s.str());
    }

    void write_manifest(int status) {
        json m = {{"command", command},
                  {"config_hash", fnv1a_hex(config_text + '\0' + canonical_args)},
                  {"seed", seed ? json(*seed) : json(nullptr)},
                  {"tool_version", KERRSIM_VERSION},
                  {"timestamp", utc_timestamp()},
                  {"exit_code", status},
                  {"outputs", outputs}};
        fs::create_directories(out_dir);
        std::ofstream f(out_dir / "manifest.json", std::ios::binary);
        f << m.dump(2) << "\n";
    }
};

std::pair<int, int> parse_pair(const std::string& text, const std::string& what) {
    const auto parts = split(text, ',');
    if (parts.size() != 2) {
        throw InputError(what + ": expected 'n_a,n_b', got '" + text + "'");
    }
    return {static_cast<int>(parse_integer(trim(parts[0]), what)),
            static_cast<int>(parse_integer(trim(parts[1]), what))};
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    for (auto part : split(text, ',')) {
        out.push_back(static_cast<int>(parse_integer(trim(part), what)));
    }
    return out;
}

std::vector<double> hz_grid(double lo_hz, double hi_hz, int points) {
    return linear_grid(hz_to_rad(lo_hz), hz_to_rad(hi_hz), points);
}

// |0_a> (x) state_b in the motional space of `cut`.
FockState with_axial_vacuum(const FockState& b, const FockCutoff& cut) {
    const Index nb = b.dim();
    if (nb != cut.n_b_max + 1 || tensor_basis_index(0, cut.n_b_max, cut) != nb - 1) {
        throw InputError("radial state dimension does not match the cutoff");
    }
    if (b.is_pure()) {
        Vector v = Vector::Zero(cut.mode_block());
        v.head(nb) = b.vector();
        return FockState::pure(v);
    }
    Matrix rho = Matrix::Zero(cut.mode_block(), cut.mode_block());
    rho.topLeftCorner(nb, nb) = b.density();
    return FockState::mixed(rho);
}

// ---------------------------------------------------------------------------

struct ModesOpts {
    std::optional<double> delta_hz;
};

int cmd_modes(Context& ctx, const ModesOpts& o) {
    const TrapConfig cfg = o.delta_hz ? detune_to(ctx.trap, hz_to_rad(*o.delta_hz)) : ctx.trap;
    const ModePair m = derive_modes(cfg);
    const double xi_res = coupling_strength(cfg, m, CouplingFrequency::resonance);
    const double exchange = 2.0 * std::sqrt(2.0) * m.xi;
    Table t{{"quantity", "value", "unit"}, {}};
    t.rows = {{"omega_x", rad_to_hz(cfg.omega_x), "Hz"},
              {"omega_z", rad_to_hz(cfg.omega_z), "Hz"},
              {"omega_a", rad_to_hz(m.omega_a), "Hz"},
              {"omega_b", rad_to_hz(m.omega_b), "Hz"},
              {"delta", rad_to_hz(m.delta), "Hz"},
              {"xi", rad_to_hz(m.xi), "Hz"},
              {"xi_at_resonance", rad_to_hz(xi_res), "Hz"},
              {"exchange_frequency", rad_to_hz(exchange), "Hz"},
              {"x0", m.x0 * 1e6, "um"}};
    ctx.write_table("modes", t);
    std::ostream& r = *ctx.report;
    r << "omega_a/2pi (axial breathing) = " << fixed(rad_to_hz(m.omega_a) / 1e3, 3) << " kHz\n"
      << "omega_b/2pi (radial zigzag)   = " << fixed(rad_to_hz(m.omega_b) / 1e3, 3) << " kHz\n"
      << "delta/2pi = 2 omega_b - omega_a = " << fixed(rad_to_hz(m.delta) / 1e3, 3) << " kHz\n"
      << "xi/2pi                        = " << fixed(rad_to_hz(m.xi), 2) << " Hz\n"
      << "2 sqrt(2) xi/2pi              = " << fixed(rad_to_hz(exchange) / 1e3, 3) << " kHz\n"
      << "x0                            = " << fixed(m.x0 * 1e6, 4) << " um\n";
    return kSuccess;
}

struct ExchangeOpts {
    double delta_hz = 0.0;
    double t_max_us = 1000.0;
    int points = 401;
    std::string initial = "1,0";
    int n_a_max = 3;
    int n_b_max = 8;
};

int cmd_exchange(Context& ctx, const ExchangeOpts& o) {
    const TrapConfig cfg = detune_to(ctx.trap, hz_to_rad(o.delta_hz));
    const FockCutoff cut{o.n_a_max, o.n_b_max, false};
    const CoupledModeParams p = params_from_trap(cfg, cut);
    const auto [na, nb] = parse_pair(o.initial, "--initial");
    if (na < 0 || nb < 0 || na > o.n_a_max || nb > o.n_b_max) {
        throw InputError("--initial " + o.initial + " lies outside the cutoff");
    }
    // |n_a, n_b> exchanges with |n_a - 1, n_b + 2>.
    std::vector<std::pair<int, int>> watched = {{na, nb}};
    double element = 0.0;
    if (na >= 1 && nb + 2 <= o.n_b_max) {
        watched.emplace_back(na - 1, nb + 2);
        element = p.xi * std::sqrt(double(na) * (nb + 1) * (nb + 2));
    } else if (nb >= 2 && na + 1 <= o.n_a_max) {
        watched.emplace_back(na + 1, nb - 2);
        element = p.xi * std::sqrt(double(na + 1) * nb * (nb - 1));
    }
    const FockState init = FockState::basis(cut.dim(), tensor_basis_index(na, nb, cut));
    const std::vector<double> times = linear_grid(0.0, o.t_max_us * 1e-6, o.points);
    const PopulationTrace trace = exchange_trace(p, init, times, watched);

    Table t{{"t_us"}, {}};
    for (const auto& [a, b] : watched) {
        t.columns.push_back("p_" + std::to_string(a) + "_" + std::to_string(b));
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<json> row = {times[i] * 1e6};
        for (Index c = 0; c < trace.populations.cols(); ++c) {
            row.emplace_back(trace.populations(Index(i), c));
        }
        t.rows.push_back(std::move(row));
    }
    ctx.write_table("exchange", t);

    const Eigen::VectorXd col = trace.populations.col(0);
    const OscillationFit fit =
        fit_oscillation(times, std::span<const double>(col.data(), std::size_t(col.size())));
    const double predicted = std::sqrt(p.delta * p.delta + 4.0 * element * element);
    ctx.write_json("exchange_fit.json",
                   {{"initial", {na, nb}},
                    {"delta_hz", rad_to_hz(p.delta)},
                    {"xi_hz", rad_to_hz(p.xi)},
                    {"fitted_frequency_hz", rad_to_hz(fit.omega)},
                    {"fitted_frequency_sigma_hz", rad_to_hz(fit.omega_sigma)},
                    {"amplitude", fit.amplitude},
                    {"predicted_frequency_hz", rad_to_hz(predicted)},
                    {"converged", fit.converged}});
    *ctx.report << "fitted exchange frequency = " << fixed(rad_to_hz(fit.omega), 2) << " Hz ("
                << "two-level prediction " << fixed(rad_to_hz(predicted), 2) << " Hz)\n";
    return fit.converged ? kSuccess : kNotConverged;
}

struct CrossingOpts {
    double delta_min_hz = -8e3;
    double delta_max_hz = 8e3;
    int points = 161;
    int manifold_max = 4;
    int order = 1;
    std::string reference = "0,0";
    bool driven = false;
    double raman_min_hz = -6e3;
    double raman_max_hz = 6e3;
    int raman_points = 121;
    double t_pi_ms = 8.0;
    int n_b_max = 8;
};

int cmd_crossing(Context& ctx, const CrossingOpts& o) {
    const std::vector<double> grid = hz_grid(o.delta_min_hz, o.delta_max_hz, o.points);
    const auto ref = parse_pair(o.reference, "--reference");
    const CrossingMap m = crossing_map(ctx.trap, grid, o.manifold_max, ref, o.order);
    Table t{{"delta_hz", "xi_hz", "branch", "charge", "energy_hz", "weight"}, {}};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (Index b = 0; b < m.energies.cols(); ++b) {
            t.rows.push_back({rad_to_hz(grid[i]), rad_to_hz(m.xi[i]), b, m.charges(Index(i), b),
                              rad_to_hz(m.energies(Index(i), b)), m.weights(Index(i), b)});
        }
    }
    ctx.write_table("crossing", t);

    if (o.driven) {
        DriveParams drive;
        drive.t_pi = o.t_pi_ms * 1e-3;
        drive.order = o.order;
        drive.validate();
        const FockCutoff cut{ref.first + o.order + 1, o.n_b_max, true};
        const FockCutoff motional{cut.n_a_max, cut.n_b_max, false};
        if (ref.second > o.n_b_max) {
            throw InputError("--reference lies outside --n-b-max");
        }
        const FockState init =
            FockState::basis(motional.dim(), tensor_basis_index(ref.first, ref.second, motional));
        const std::vector<double> raman = hz_grid(o.raman_min_hz, o.raman_max_hz, o.raman_points);
        Table d{{"delta_hz", "raman_hz", "p_up"}, {}};
        for (double delta : grid) {
            const Spectrum s = driven_scan(init, detune_to(ctx.trap, delta), cut, drive, raman,
                                           SidebandReference::bare);
            for (std::size_t j = 0; j < raman.size(); ++j) {
                d.rows.push_back({rad_to_hz(delta), rad_to_hz(raman[j]), s.p_up[j]});
            }
        }
        ctx.write_table("crossing_driven", d);
    }
    *ctx.report << "crossing map: " << grid.size() << " detunings x " << m.energies.cols()
                << " branches\n";
    return kSuccess;
}

struct ShiftOpts {
    double delta_hz = 14.3e3;
    int n_b_max = 10;
    bool sweep = false;
    double sweep_min_hz = 5e3;
    double sweep_max_hz = 30e3;
    int sweep_points = 51;
};

ShiftTable shift_at(const TrapConfig& trap, double delta, int n_b_max) {
    const CoupledModeParams p =
        params_from_trap(detune_to(trap, delta), FockCutoff{1, n_b_max + 2, false});
    return dispersive_shift_table(p, n_b_max);
}

int cmd_shift(Context& ctx, const ShiftOpts& o) {
    const ShiftTable s = shift_at(ctx.trap, hz_to_rad(o.delta_hz), o.n_b_max);
    Table t{{"n_b", "shift_exact_hz", "shift_perturbative_hz", "sideband_hz", "bare_overlap"}, {}};
    for (std::size_t i = 0; i < s.n_b.size(); ++i) {
        const Index k = Index(i);
        t.rows.push_back({s.n_b[i], rad_to_hz(s.shift_exact(k)), rad_to_hz(s.shift_perturbative(k)),
                          rad_to_hz(s.sideband_exact(k)), s.bare_overlap(k)});
    }
    ctx.write_table("shift", t);
    if (o.sweep) {
        Table w{{"delta_hz", "n_b", "shift_exact_hz", "shift_perturbative_hz"}, {}};
        for (double delta : hz_grid(o.sweep_min_hz, o.sweep_max_hz, o.sweep_points)) {
            const ShiftTable row = shift_at(ctx.trap, delta, o.n_b_max);
            for (std::size_t i = 0; i < row.n_b.size(); ++i) {
                w.rows.push_back({rad_to_hz(delta), row.n_b[i], rad_to_hz(row.shift_exact(Index(i))),
                                  rad_to_hz(row.shift_perturbative(Index(i)))});
            }
        }
        ctx.write_table("shift_sweep", w);
    }
    if (s.n_b.size() > 1) {
        *ctx.report << "shift per phonon at n_b = 1: " << fixed(rad_to_hz(s.shift_exact(1)), 2)
                    << " Hz (perturbative " << fixed(rad_to_hz(s.shift_perturbative(1)), 2) << " Hz)\n";
    }
    return kSuccess;
}

struct ScanOpts {
    std::string state = "thermal:1.5";
    int n_max = 10;
    double delta_hz = 14.3e3;
    double t_pi_ms = 8.0;
    double eta = 0.7;
    double g = 0.02;
    int shots = 200;
    std::optional<double> grid_min_hz;
    std::optional<double> grid_max_hz;
    int grid_points = 161;
    bool driven = false;
    int order = 1;
    int n_a_max = 4;
    int n_b_max = 20;
    std::string reference = "dressed";
};

int cmd_scan(Context& ctx, const ScanOpts& o) {
    const TrapConfig cfg = detune_to(ctx.trap, hz_to_rad(o.delta_hz));
    const StateSpec spec = parse_state_spec(o.state);
    DriveParams drive;
    drive.t_pi = o.t_pi_ms * 1e-3;
    drive.order = o.order;
    drive.validate();
    const CoupledModeParams p = params_from_trap(cfg);
    std::vector<double> grid;
    if (o.grid_min_hz || o.grid_max_hz) {
        if (!o.grid_min_hz || !o.grid_max_hz) {
            throw InputError("--grid-min-hz and --grid-max-hz must be given together");
        }
        grid = hz_grid(*o.grid_min_hz, *o.grid_max_hz, o.grid_points);
    } else {
        grid = default_scan_grid(p.delta);
    }
    if (!(o.eta >= 0.0 && o.g >= 0.0 && o.eta + o.g <= 1.0)) {
        throw InputError("detection needs eta, g >= 0 and eta + g <= 1");
    }

    Spectrum s;
    json info = {{"state", format_state_spec(spec)}, {"driven", o.driven}};
    if (!o.driven) {
        if (o.order != 1) {
            throw InputError("the effective model covers first-order scans; use --driven for --order 2");
        }
        const PhononDistribution dist = expected_populations(spec, o.n_max);
        info["tail_beyond_n_max"] = dist.tail();
        // Peaks above n_max are left out of the model (and of any fit with the same
        // n_max); beyond 1% that omission visibly distorts the spectrum.
        if (dist.tail() > 1e-2) {
            throw TruncationError(format_number(dist.tail()) +
                                      " of the population lies beyond --n-max " +
                                      std::to_string(o.n_max) + "; raise --n-max",
                                  o.n_max + 10);
        }
        s = model_spectrum(dist, p, drive, grid, o.eta, o.g);
    } else {
        if (o.reference != "bare" && o.reference != "dressed") {
            throw InputError("--reference must be bare or dressed");
        }
        if (o.n_a_max < o.order + 1) {
            throw InputError("--n-a-max must be at least --order + 1");
        }
        const FockCutoff cut{o.n_a_max, o.n_b_max, true};
        const FockCutoff motional{cut.n_a_max, cut.n_b_max, false};
        const FockState init = with_axial_vacuum(prepare(spec, o.n_b_max).state, motional);
        s = driven_scan(init, cfg, cut, drive, grid,
                        o.reference == "bare" ? SidebandReference::bare : SidebandReference::dressed);
        for (double& v : s.p_up) {
            v = o.g + o.eta * v;
        }
    }
    if (o.shots > 0) {
        s = add_shot_noise(s, o.shots, ctx.require_seed());
    } else if (o.shots < 0) {
        throw InputError("--shots must be >= 0");
    }

    if (ctx.format == "json") {
        Table t{{"detuning_hz", "p_up", "shots"}, {}};
        for (std::size_t i = 0; i < s.size(); ++i) {
            t.rows.push_back({rad_to_hz(s.detuning[i]), s.p_up[i], s.shots.value_or(0)});
        }
        ctx.write_table("scan", t);
    } else {
        std::ostringstream body;
        write_spectrum_csv(body, s);
        ctx.write("scan.csv", body.str());
    }
    const std::vector<double> centers = peak_positions(p, o.n_max);
    json c = json::array();
    for (double w : centers) {
        c.push_back(rad_to_hz(w));
    }
    info["peak_centers_hz"] = c;
    info["delta_hz"] = rad_to_hz(p.delta);
    info["fwhm_hz"] = rad_to_hz(lineshape_fwhm(drive));
    ctx.write_json("scan_info.json", info);
    *ctx.report << "scan: " << s.size() << " points, " << (o.shots > 0 ? std::to_string(o.shots) : "no")
                << " shots per point\n";
    return kSuccess;
}

struct FitOpts {
    std::string input;
    std::string family = "free";
    std::optional<std::string> start;
    int n_max = 10;
    double delta_hz = 14.3e3;
    double t_pi_ms = 8.0;
    std::optional<double> fixed_eta;
    double eta0 = 0.7;
    double g0 = 0.01;
};

StateSpec default_start(StateFamily family) {
    switch (family) {
        case StateFamily::coherent:
            return StateSpec::coherent(Complex(1.0, 0.0));
        case StateFamily::thermal:
            return StateSpec::thermal(1.0);
        case StateFamily::squeezed_vacuum:
            return StateSpec::squeezed_vacuum(Complex(0.3, 0.0));
        case StateFamily::squeezed_thermal:
            return StateSpec::squeezed_thermal(0.5, Complex(0.3, 0.0));
        default:
            throw InputError("family " + std::string(family_name(family)) +
                             " needs an explicit --start, e.g. squeezed_fock:n=1,r=0.3");
    }
}

int cmd_fit(Context& ctx, const FitOpts& o) {
    const Spectrum s = load_spectrum_csv(o.input);
    const CoupledModeParams p = params_from_trap(detune_to(ctx.trap, hz_to_rad(o.delta_hz)));
    const std::vector<double> centers = peak_positions(p, o.n_max);
    DriveParams drive;
    drive.t_pi = o.t_pi_ms * 1e-3;
    drive.validate();
    DetectionOptions det{o.eta0, o.g0, o.fixed_eta};

    FitResult fit;
    if (o.family == "free") {
        fit = fit_free_distribution(s, centers, drive, o.n_max, det);
    } else {
        const StateFamily family = parse_family(o.family);
        const StateSpec start = o.start ? parse_state_spec(*o.start) : default_start(family);
        if (start.family != family) {
            throw InputError("--start family does not match --family " + o.family);
        }
        fit = fit_parametric(s, start, centers, drive, det);
    }
    json j = to_json(fit);
    j["input"] = fs::path(o.input).filename().string();
    ctx.write_json("fit.json", j);

    Table t{{"n", "p", "sigma"}, {}};
    for (Index n = 0; n < fit.p_hat.size(); ++n) {
        t.rows.push_back({n, fit.p_hat[n],
                          std::size_t(n) < fit.p_sigma.size() ? json(fit.p_sigma[std::size_t(n)]) : json(nullptr)});
    }
    ctx.write_table("fit_populations", t);

    std::ostream& r = *ctx.report;
    r << "fit (" << fit.family << "):";
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        r << " " << fit.names[i] << " = " << fit.values[i] << " +- " << fit.sigma[i] << ";";
    }
    r << " rms residual " << fit.residual_rms << "\n";
    for (const auto& w : fit.warnings) {
        r << "warning: " << w << "\n";
    }
    if (!fit.converged) {
        r << "warning: fit did not converge\n";
    }
    return fit.converged ? kSuccess : kNotConverged;
}

struct ShotsOpts {
    std::string state = "fock:3";
    int n_max = 20;
    int target = 3;
    std::optional<std::string> schedule;
    int count = 10000;
    double eta = 0.7;
    double g = 0.0;
    bool reprepare = false;
};

int cmd_shots(Context& ctx, const ShotsOpts& o) {
    const FockState state = prepare(parse_state_spec(o.state), o.n_max).state;
    const DetectionParams det{o.eta, o.g, o.reprepare};
    det.validate();
    const std::uint64_t seed = ctx.require_seed();
    if (o.count < 1) {
        throw InputError("--count must be >= 1");
    }
    if (!o.schedule) {
        const std::vector<ShotRecord> log = shot_batch(state, o.target, det, seed, o.count);
        if (ctx.format == "json") {
            Table t{{"shot", "target_n", "outcome", "cumulative_dark"}, {}};
            long dark = 0;
            for (std::size_t i = 0; i < log.size(); ++i) {
                dark += log[i].outcome == Outcome::dark ? 1 : 0;
                t.rows.push_back({i, log[i].target_n, std::string(outcome_name(log[i].outcome)), dark});
            }
            ctx.write_table("shots", t);
        } else {
            std::ostringstream body;
            write_shot_log(body, log);
            ctx.write("shots.csv", body.str());
        }
        const json summary = shot_summary(log);
        ctx.write_json("shots_summary.json", summary);
        const json& tgt = summary["targets"][0];
        *ctx.report << "target n = " << o.target << ": bright frequency "
                    << tgt["bright_frequency"].get<double>() << " (expected "
                    << tgt["expected_bright_probability"].get<double>() << " +- "
                    << tgt["standard_error"].get<double>() << ")\n";
        return kSuccess;
    }

    const std::vector<int> schedule = parse_int_list(*o.schedule, "--schedule");
    std::vector<std::optional<Interrogation>> runs(static_cast<std::size_t>(o.count));
    parallel_for(runs.size(), [&](std::size_t j) {
        runs[j] = repeated_interrogation(state, schedule, det, stream_seed(seed, j));
    });
    Table t{{"run", "identified_n", "shots_used"}, {}};
    std::map<int, long> histogram;
    for (std::size_t j = 0; j < runs.size(); ++j) {
        const int id = runs[j]->identified.value_or(-1);
        histogram[id] += 1;
        t.rows.push_back({j, id, runs[j]->shots.size()});
    }
    ctx.write_table("interrogation", t);
    json h = json::array();
    for (const auto& [n, c] : histogram) {
        h.push_back({{"identified_n", n}, {"runs", c}, {"fraction", double(c) / o.count}});
    }
    ctx.write_json("interrogation_summary.json", {{"runs", o.count}, {"schedule", schedule}, {"histogram", h}});
    *ctx.report << "interrogation: " << o.count << " runs, " << histogram.size() << " outcomes\n";
    return kSuccess;
}

struct WalkOpts {
    int pulses = 18;
    double nbar = 1.0;
    std::optional<double> step_alpha;
    int trajectories = 10000;
    int n_max = 30;
};

int cmd_walk(Context& ctx, const WalkOpts& o) {
    if (o.pulses < 1 || !(o.nbar > 0.0)) {
        throw InputError("walk needs --pulses >= 1 and --nbar > 0");
    }
    const double step = o.step_alpha.value_or(std::sqrt(o.nbar / o.pulses));
    const double nbar = o.pulses * step * step;
    const PhononDistribution walk =
        random_walk_thermal(o.pulses, step, ctx.require_seed(), o.trajectories, o.n_max);
    const PhononDistribution thermal = thermal_populations(nbar, o.n_max);
    Table t{{"n", "p_walk", "p_thermal"}, {}};
    for (int n = 0; n <= o.n_max; ++n) {
        t.rows.push_back({n, walk[n], thermal[n]});
    }
    ctx.write_table("walk", t);
    const double tvd = total_variation(walk, thermal);
    ctx.write_json("walk_summary.json", {{"pulses", o.pulses},
                                         {"step_alpha", step},
                                         {"nbar", nbar},
                                         {"trajectories", o.trajectories},
                                         {"mean", walk.mean()},
                                         {"tail", walk.tail()},
                                         {"total_variation_to_thermal", tvd}});
    *ctx.report << "walk: mean " << fixed(walk.mean(), 4) << ", total variation to thermal("
                << fixed(nbar, 3) << ") = " << fixed(tvd, 4) << "\n";
    return kSuccess;
}

// Arguments that do not change results are left out of the config hash.
std::string canonical_args(const std::vector<std::string>& args) {
    static const std::vector<std::string> skip = {"--out", "--threads", "--config"};
    std::string joined;
    for (std::size_t i = 0; i < args.size(); ++i) {
        bool drop = false;
        for (const auto& s : skip) {
            if (args[i] == s) {
                drop = true;
                ++i;
                break;
            }
            if (args[i].rfind(s + "=", 0) == 0) {
                drop = true;
                break;
            }
        }
        if (!drop) {
            joined += args[i];
            joined += '\n';
        }
    }
    return joined;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulator for coupled axial/radial motional modes of a three-ion crystal", "kerrsim"};
    app.footer(kFooter);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string format = "csv";
    unsigned threads = 0;
    app.add_option("--config", config_path, "trap config (key = value, [trap] section)");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "seed for every random draw");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--format", format, "table format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

    ModesOpts modes;
    auto* s_modes = app.add_subcommand("modes", "derived mode frequencies, detuning and coupling");
    s_modes->add_option("--delta-hz", modes.delta_hz, "retune omega_x to this two-mode detuning");

    ExchangeOpts ex;
    auto* s_ex = app.add_subcommand("exchange", "population exchange trace");
    s_ex->add_option("--delta-hz", ex.delta_hz, "two-mode detuning")->capture_default_str();
    s_ex->add_option("--t-max-us", ex.t_max_us)->capture_default_str();
    s_ex->add_option("--points", ex.points)->capture_default_str();
    s_ex->add_option("--initial", ex.initial, "initial Fock state n_a,n_b")->capture_default_str();
    s_ex->add_option("--n-a-max", ex.n_a_max)->capture_default_str();
    s_ex->add_option("--n-b-max", ex.n_b_max)->capture_default_str();

    CrossingOpts cr;
    auto* s_cr = app.add_subcommand("crossing", "avoided crossings vs two-mode detuning");
    s_cr->add_option("--delta-min-hz", cr.delta_min_hz)->capture_default_str();
    s_cr->add_option("--delta-max-hz", cr.delta_max_hz)->capture_default_str();
    s_cr->add_option("--points", cr.points)->capture_default_str();
    s_cr->add_option("--manifold-max", cr.manifold_max, "largest N = 2 n_a + n_b")->capture_default_str();
    s_cr->add_option("--order", cr.order, "sideband order 1 or 2")->capture_default_str();
    s_cr->add_option("--reference", cr.reference, "scan start state n_a,n_b")->capture_default_str();
    s_cr->add_flag("--driven", cr.driven, "also write the driven P(up) map");
    s_cr->add_option("--raman-min-hz", cr.raman_min_hz)->capture_default_str();
    s_cr->add_option("--raman-max-hz", cr.raman_max_hz)->capture_default_str();
    s_cr->add_option("--raman-points", cr.raman_points)->capture_default_str();
    s_cr->add_option("--t-pi-ms", cr.t_pi_ms)->capture_default_str();
    s_cr->add_option("--n-b-max", cr.n_b_max)->capture_default_str();

    ShiftOpts sh;
    auto* s_sh = app.add_subcommand("shift", "dispersive sideband shift per radial phonon");
    s_sh->add_option("--delta-hz", sh.delta_hz)->capture_default_str();
    s_sh->add_option("--n-b-max", sh.n_b_max)->capture_default_str();
    s_sh->add_flag("--sweep", sh.sweep, "also tabulate shifts over a detuning range");
    s_sh->add_option("--sweep-min-hz", sh.sweep_min_hz)->capture_default_str();
    s_sh->add_option("--sweep-max-hz", sh.sweep_max_hz)->capture_default_str();
    s_sh->add_option("--sweep-points", sh.sweep_points)->capture_default_str();

    ScanOpts sc;
    auto* s_sc = app.add_subcommand("scan", "axial blue-sideband spectrum of a radial state");
    s_sc->add_option("--state", sc.state, "e.g. thermal:1.5, coherent:1.41, fock:n=10,preset=imperfect")
        ->capture_default_str();
    s_sc->add_option("--n-max", sc.n_max, "highest resolved peak")->capture_default_str();
    s_sc->add_option("--delta-hz", sc.delta_hz)->capture_default_str();
    s_sc->add_option("--t-pi-ms", sc.t_pi_ms)->capture_default_str();
    s_sc->add_option("--eta", sc.eta, "detection efficiency")->capture_default_str();
    s_sc->add_option("--g", sc.g, "background bright probability")->capture_default_str();
    s_sc->add_option("--shots", sc.shots, "shots per point, 0 for the noiseless curve")->capture_default_str();
    s_sc->add_option("--grid-min-hz", sc.grid_min_hz);
    s_sc->add_option("--grid-max-hz", sc.grid_max_hz);
    s_sc->add_option("--grid-points", sc.grid_points)->capture_default_str();
    s_sc->add_flag("--driven", sc.driven, "full qubit + two-mode simulation instead of the peak model");
    s_sc->add_option("--order", sc.order)->capture_default_str();
    s_sc->add_option("--n-a-max", sc.n_a_max, "axial cutoff for --driven")->capture_default_str();
    s_sc->add_option("--n-b-max", sc.n_b_max, "radial cutoff for --driven")->capture_default_str();
    s_sc->add_option("--reference", sc.reference, "bare or dressed (--driven)")->capture_default_str();

    FitOpts fo;
    auto* s_fit = app.add_subcommand("fit", "reconstruct the phonon distribution from a scan CSV");
    s_fit->add_option("--input", fo.input, "scan CSV (detuning_hz,p_up,shots)")->required();
    s_fit->add_option("--family", fo.family, "free or a state family")->capture_default_str();
    s_fit->add_option("--start", fo.start, "initial state spec for parametric fits");
    s_fit->add_option("--n-max", fo.n_max)->capture_default_str();
    s_fit->add_option("--delta-hz", fo.delta_hz)->capture_default_str();
    s_fit->add_option("--t-pi-ms", fo.t_pi_ms)->capture_default_str();
    s_fit->add_option("--fixed-eta", fo.fixed_eta, "hold eta at this value");
    s_fit->add_option("--eta0", fo.eta0)->capture_default_str();
    s_fit->add_option("--g0", fo.g0)->capture_default_str();

    ShotsOpts so;
    auto* s_shots = app.add_subcommand("shots", "single-shot phonon-number measurements");
    s_shots->add_option("--state", so.state)->capture_default_str();
    s_shots->add_option("--n-max", so.n_max)->capture_default_str();
    s_shots->add_option("--target", so.target)->capture_default_str();
    s_shots->add_option("--schedule", so.schedule, "comma list of targets, interrogated until bright");
    s_shots->add_option("--count", so.count, "shots (or interrogation runs)")->capture_default_str();
    s_shots->add_option("--eta", so.eta)->capture_default_str();
    s_shots->add_option("--g", so.g)->capture_default_str();
    s_shots->add_flag("--reprepare", so.reprepare, "re-prepare |n> after a bright outcome");

    WalkOpts wo;
    auto* s_walk = app.add_subcommand("walk", "thermal state from random displacement kicks");
    s_walk->add_option("--pulses", wo.pulses)->capture_default_str();
    s_walk->add_option("--nbar", wo.nbar, "target mean; sets step_alpha = sqrt(nbar / pulses)")
        ->capture_default_str();
    s_walk->add_option("--step-alpha", wo.step_alpha, "kick amplitude (overrides --nbar)");
    s_walk->add_option("--trajectories", wo.trajectories)->capture_default_str();
    s_walk->add_option("--n-max", wo.n_max)->capture_default_str();

    std::vector<std::string> argv_store = {"kerrsim"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInputError;
    }

    Context ctx;
    ctx.report = &out;
    ctx.format = format;
    ctx.out_dir = out_dir;
    ctx.canonical_args = canonical_args(args);
    if (seed_opt->count() > 0) {
        ctx.seed = seed;
    }
    set_max_threads(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads);

    const CLI::App* sub = app.get_subcommands().front();
    ctx.command = sub->get_name();
    int status = kSuccess;
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path, std::ios::binary);
            if (!f) {
                throw InputError("cannot open config '" + config_path + "'");
            }
            std::ostringstream text;
            text << f.rdbuf();
            ctx.config_text = text.str();
        }
        std::istringstream cfg(ctx.config_text);
        ctx.trap = parse_trap_config(cfg);

        if (sub == s_modes) {
            status = cmd_modes(ctx, modes);
        } else if (sub == s_ex) {
            status = cmd_exchange(ctx, ex);
        } else if (sub == s_cr) {
            status = cmd_crossing(ctx, cr);
        } else if (sub == s_sh) {
            status = cmd_shift(ctx, sh);
        } else if (sub == s_sc) {
            status = cmd_scan(ctx, sc);
        } else if (sub == s_fit) {
            status = cmd_fit(ctx, fo);
        } else if (sub == s_shots) {
            status = cmd_shots(ctx, so);
        } else {
            status = cmd_walk(ctx, wo);
        }
    } catch (const TruncationError& e) {
        err << "kerrsim " << ctx.command << ": " << e.what() << " (suggested cutoff "
            << e.suggested_cutoff() << ")\n";
        return kInputError;
    } catch (const InputError& e) {
        err << "kerrsim " << ctx.command << ": " << e.what() << "\n";
        return kInputError;
    } catch (const NumericalError& e) {
        err << "kerrsim " << ctx.command << ": numerical failure: " << e.what() << "\n";
        return kNotConverged;
    } catch (const fs::filesystem_error& e) {
        err << "kerrsim " << ctx.command << ": " << e.what() << "\n";
        return kInputError;
    }
    ctx.write_manifest(status);
    return status;
}

}  // namespace kerrsim::cli
