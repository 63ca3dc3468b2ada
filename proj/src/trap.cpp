#include "kerrsim/trap.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "kerrsim/error.hpp"

namespace kerrsim {

double ytterbium171_ion_mass() {
    return 170.9363258 * kCodata.atomic_mass_unit - kCodata.electron_mass;
}

void TrapConfig::validate() const {
    if (!(omega_x > 0.0) || !(omega_y > 0.0) || !(omega_z > 0.0)) {
        throw InputError("TrapConfig: secular frequencies must be positive");
    }
    if (!(ion_mass > 0.0)) {
        throw InputError("TrapConfig: ion mass must be positive");
    }
    if (!(ion_charge != 0.0)) {
        throw InputError("TrapConfig: ion charge must be non-zero");
    }
    const double floor = 12.0 * omega_z * omega_z / 5.0;
    if (!(omega_x * omega_x > floor)) {
        std::ostringstream msg;
        msg << "TrapConfig: zigzag mode is unstable, omega_x/2pi = " << rad_to_hz(omega_x)
            << " Hz must exceed sqrt(12/5) omega_z/2pi = " << rad_to_hz(std::sqrt(floor))
            << " Hz; increase omega_x";
        throw InputError(msg.str());
    }
}

ModePair mode_frequencies(const TrapConfig& cfg) {
    cfg.validate();
    const PhysicalConstants& c = kCodata;
    ModePair m;
    m.omega_a = std::sqrt(3.0) * cfg.omega_z;
    m.omega_b = std::sqrt(cfg.omega_x * cfg.omega_x - 12.0 * cfg.omega_z * cfg.omega_z / 5.0);
    m.x0 = std::cbrt(5.0 * cfg.ion_charge * cfg.ion_charge /
                     (16.0 * kPi * c.epsilon_0 * cfg.ion_mass * cfg.omega_z * cfg.omega_z));
    m.delta = 2.0 * m.omega_b - m.omega_a;
    return m;
}

double coupling_strength(const TrapConfig& cfg, const ModePair& modes, CouplingFrequency which,
                         const PhysicalConstants& constants) {
    const double omega_b = which == CouplingFrequency::resonance ? modes.omega_a / 2.0 : modes.omega_b;
    const double wz2 = cfg.omega_z * cfg.omega_z;
    return 9.0 * wz2 * std::sqrt(constants.hbar / (cfg.ion_mass * modes.omega_a * omega_b * omega_b)) /
           (10.0 * modes.x0);
}

ModePair derive_modes(const TrapConfig& cfg, CouplingFrequency which) {
    ModePair m = mode_frequencies(cfg);
    m.xi = coupling_strength(cfg, m, which);
    return m;
}

TrapConfig detune_to(const TrapConfig& cfg, double target_delta) {
    cfg.validate();
    const double omega_a = std::sqrt(3.0) * cfg.omega_z;
    if (!(target_delta > -omega_a) || !std::isfinite(target_delta)) {
        std::ostringstream msg;
        msg << "detune_to: target delta/2pi = " << rad_to_hz(target_delta)
            << " Hz is unreachable; feasible range is (" << rad_to_hz(-omega_a) << ", inf) Hz";
        throw InputError(msg.str());
    }
    const double omega_b = 0.5 * (omega_a + target_delta);
    TrapConfig out = cfg;
    out.omega_x = std::sqrt(omega_b * omega_b + 12.0 * cfg.omega_z * cfg.omega_z / 5.0);
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& key, int line) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw InputError("trap config line " + std::to_string(line) + ": value for '" + key +
                         "' is not a number: '" + text + "'");
    }
    return value;
}

}  // namespace

TrapConfig parse_trap_config(std::istream& in) {
    TrapConfig cfg;
    std::map<std::string, double*> hz_keys = {
        {"omega_x_hz", &cfg.omega_x}, {"omega_y_hz", &cfg.omega_y}, {"omega_z_hz", &cfg.omega_z}};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string text = trim(raw.substr(0, raw.find('#')));
        if (text.empty()) {
            continue;
        }
        if (text.front() == '[') {
            if (text != "[trap]") {
                throw InputError("trap config line " + std::to_string(line) + ": unknown section " +
                                 text);
            }
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw InputError("trap config line " + std::to_string(line) + ": expected key = value");
        }
        const std::string key = trim(text.substr(0, eq));
        const double value = parse_number(trim(text.substr(eq + 1)), key, line);
        if (auto it = hz_keys.find(key); it != hz_keys.end()) {
            *it->second = hz_to_rad(value);
        } else if (key == "ion_mass_u") {
            cfg.ion_mass = value * kCodata.atomic_mass_unit - kCodata.electron_mass;
        } else if (key == "ion_charge_e") {
            cfg.ion_charge = value * kCodata.elementary_charge;
        } else {
            throw InputError("trap config line " + std::to_string(line) + ": unknown key '" + key +
                             "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrapConfig load_trap_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open trap config '" + path + "'");
    }
    return parse_trap_config(in);
}

}  // namespace kerrsim
