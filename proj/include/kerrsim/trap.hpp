#pragma once

// Three-ion trap parameters and the closed-form coupled-mode quantities derived
// from them. All frequencies are angular (rad/s); config files use ordinary Hz
// and are converted once at parse time.

#include <istream>
#include <string>

namespace kerrsim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
inline constexpr double rad_to_hz(double rad_per_s) { return rad_per_s / kTwoPi; }

// CODATA 2018.
struct PhysicalConstants {
    double hbar = 1.054571817e-34;            // J s
    double epsilon_0 = 8.8541878128e-12;      // F/m
    double elementary_charge = 1.602176634e-19;  // C
    double atomic_mass_unit = 1.66053906660e-27;  // kg
    double electron_mass = 9.1093837015e-31;      // kg
};

inline constexpr PhysicalConstants kCodata{};

// Mass of a singly charged 171Yb ion: atomic mass minus one electron.
double ytterbium171_ion_mass();

struct TrapConfig {
    double omega_x = hz_to_rad(1042e3);
    double omega_y = hz_to_rad(979e3);  // carried along; enters no formula
    double omega_z = hz_to_rad(587e3);
    double ion_mass = ytterbium171_ion_mass();
    double ion_charge = kCodata.elementary_charge;

    // Throws InputError on non-positive values or an imaginary zigzag frequency.
    void validate() const;
};

// Normal-mode eigenvectors over the three ions; documentation constants only.
namespace mode_vectors {
inline constexpr double kBreathing[3] = {0.70710678118654752, 0.0, -0.70710678118654752};
inline constexpr double kZigzag[3] = {0.40824829046386302, -0.81649658092772603,
                                      0.40824829046386302};
}  // namespace mode_vectors

struct ModePair {
    double omega_a = 0.0;  // axial breathing
    double omega_b = 0.0;  // radial zigzag
    double xi = 0.0;       // coupling strength
    double x0 = 0.0;       // m, neighbouring-ion spacing
    double delta = 0.0;    // 2 omega_b - omega_a
};

// Which radial frequency enters the coupling formula.
enum class CouplingFrequency {
    actual,     // omega_b of the given configuration
    resonance,  // omega_a / 2, the resonance-condition prediction
};

// Frequencies, spacing and detuning; xi is left at zero.
ModePair mode_frequencies(const TrapConfig& cfg);

double coupling_strength(const TrapConfig& cfg, const ModePair& modes,
                         CouplingFrequency which = CouplingFrequency::actual,
                         const PhysicalConstants& constants = kCodata);

// mode_frequencies plus coupling_strength.
ModePair derive_modes(const TrapConfig& cfg,
                      CouplingFrequency which = CouplingFrequency::actual);

// Adjusts omega_x so that 2 omega_b - omega_a equals target_delta; omega_z is unchanged.
// Throws InputError when target_delta <= -omega_a (no real zigzag frequency).
TrapConfig detune_to(const TrapConfig& cfg, double target_delta);

// key = value text with an optional [trap] section header and '#' comments.
// Keys: omega_x_hz, omega_y_hz, omega_z_hz, ion_mass_u, ion_charge_e. Unknown keys are rejected.
TrapConfig parse_trap_config(std::istream& in);
TrapConfig load_trap_config(const std::string& path);

}  // namespace kerrsim
