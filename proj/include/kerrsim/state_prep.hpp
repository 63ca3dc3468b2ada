#pragma once

// Radial-mode motional states: Fock, coherent, thermal (analytic and random-walk
// Monte Carlo), squeezed vacuum, squeezed thermal and squeezed Fock.
//
// States live on a single oscillator with levels 0..n_max. Displacement and
// squeezing are exponentiated in a larger working space (n_max + guard levels)
// and truncated back, so that truncation only affects the reported tail.

#include <cstdint>
#include <string>
#include <string_view>

#include "kerrsim/fock.hpp"

namespace kerrsim {

inline constexpr double kTruncationTolerance = 1e-4;
inline constexpr double kWalkTruncationTolerance = 1e-3;

// Probability vector over n = 0..n_max. `tail` is the mass that falls beyond n_max;
// sum(p) lies in [1 - tail - eps, 1]. Renormalization only happens via normalized().
class PhononDistribution {
public:
    PhononDistribution() = default;
    // Throws InputError on negative entries or sum(p) > 1 + 1e-9.
    PhononDistribution(RealVector p, double tail);

    const RealVector& p() const { return p_; }
    double operator[](Index n) const { return n < p_.size() ? p_(n) : 0.0; }
    Index size() const { return p_.size(); }
    int n_max() const { return static_cast<int>(p_.size()) - 1; }
    double tail() const { return tail_; }
    double total() const { return p_.sum(); }

    double mean() const;
    double variance() const;
    PhononDistribution normalized() const;

private:
    RealVector p_;
    double tail_ = 0.0;
};

// 1/2 sum |p_n - q_n| over the union of supports.
double total_variation(const PhononDistribution& x, const PhononDistribution& y);

enum class StateFamily { fock, coherent, thermal, squeezed_vacuum, squeezed_thermal, squeezed_fock };

std::string_view family_name(StateFamily family);
StateFamily parse_family(std::string_view name);

struct StateSpec {
    StateFamily family = StateFamily::fock;
    int n = 0;              // fock, squeezed_fock
    Complex alpha{0.0, 0.0};  // coherent
    double nbar = 0.0;      // thermal, squeezed_thermal
    Complex r{0.0, 0.0};    // squeezed_*
    // fock only: p_n = 0.80, p_{n-1} = p_{n-2} = 0.06, remaining 0.08 spread
    // uniformly over the levels below n - 2 (or onto n - 1 and n - 2 when n < 3).
    bool imperfect = false;

    static StateSpec fock(int n, bool imperfect = false);
    static StateSpec coherent(Complex alpha);
    static StateSpec thermal(double nbar);
    static StateSpec squeezed_vacuum(Complex r);
    static StateSpec squeezed_thermal(double nbar, Complex r);
    static StateSpec squeezed_fock(int n, Complex r);

    void validate() const;
    // Expected phonon number of the ideal (untruncated) state.
    double mean_phonons() const;
};

// Compact text form, e.g. "fock:3", "fock:n=10,preset=imperfect", "coherent:1.2+0.0i",
// "thermal:1.5", "squeezed_vacuum:0.6", "squeezed_thermal:nbar=0.5,r=0.6",
// "squeezed_fock:n=1,r=0.6".
StateSpec parse_state_spec(std::string_view text);
std::string format_state_spec(const StateSpec& spec);

// D(alpha) = exp(alpha b^dag - alpha^* b) on levels 0..n_max.
// Throws TruncationError when the Poisson tail of D|0> beyond n_max exceeds 1e-4.
FockOperator displacement_op(Complex alpha, int n_max);

// S(r) = exp((r^* b^2 - r b^dag^2) / 2) on levels 0..n_max.
// Throws TruncationError when the squeezed-vacuum tail beyond n_max exceeds 1e-4.
FockOperator squeeze_op(Complex r, int n_max);

// Diagonal density matrix with weights nbar^n / (1 + nbar)^(n+1), renormalized on
// 0..n_max (the cut-off tail is reported by thermal_populations).
FockState thermal_state(double nbar, int n_max);

// Closed-form populations on 0..n_max with the cut-off tail.
PhononDistribution poisson_populations(double mean, int n_max);
PhononDistribution thermal_populations(double nbar, int n_max);
PhononDistribution squeezed_vacuum_populations(double r_abs, int n_max);

// Monte Carlo average of |D(a e^{i phi_k}) ... D(a e^{i phi_1})|0>|^2 with phases
// uniform on [0, 2 pi). Trajectory j draws its phases from Rng(seed, j).
// Throws TruncationError when the averaged tail beyond n_max exceeds 1e-3.
PhononDistribution random_walk_thermal(int pulses, double step_alpha, std::uint64_t seed,
                                       int trajectories, int n_max);

struct PreparedState {
    FockState state;  // renormalized on 0..n_max
    PhononDistribution distribution;
};

PreparedState prepare(const StateSpec& spec, int n_max);

// Populations of spec on 0..n_max without truncation checks; used inside fits where
// trial parameters may wander. Closed forms where available, guarded matrix
// construction otherwise.
PhononDistribution expected_populations(const StateSpec& spec, int n_max);

}  // namespace kerrsim
