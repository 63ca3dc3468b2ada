#pragma once

// Single-shot phonon-number measurement: a pi pulse on the n-th sideband peak maps
// |n> to the bright qubit state, then fluorescence detection.
//
// Imperfect detection is the two-outcome POVM
//     E_bright = g 1 + eta |n><n|,   E_dark = 1 - E_bright,
// with the square-root instrument M_dark = sqrt(E_dark) for the dark update. At
// eta = 1, g = 0 this is the projector 1 - |n><n|. A bright shot destroys the
// motional state; it is replaced by |n> only when re-preparation is requested.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kerrsim/fock.hpp"
#include "kerrsim/parallel.hpp"

namespace kerrsim {

enum class Outcome { dark, bright };
std::string_view outcome_name(Outcome o);

struct DetectionParams {
    double eta = 0.7;
    double g = 0.0;
    bool reprepare = false;
    void validate() const;
};

// A single-mode motional state (levels 0..n_max) with bookkeeping for shot records.
struct TrackedState {
    FockState state;
    std::uint64_t id = 0;
    bool destroyed = false;          // true after a bright shot without re-preparation
    std::optional<int> known_fock;   // set by a bright shot

    explicit TrackedState(FockState s) : state(std::move(s)) {}
};

struct ShotRecord {
    int target_n = 0;
    Outcome outcome = Outcome::dark;
    std::uint64_t pre_state_id = 0;
    std::uint64_t post_state_id = 0;
    std::uint64_t seed = 0;
    double p_bright = 0.0;
};

double bright_probability(const FockState& state, int target_n, const DetectionParams& det);

// Post-measurement state for a dark outcome. Throws InputError when the dark
// outcome has zero probability (the state is exactly |n> with perfect detection).
FockState dark_update(const FockState& state, int target_n, const DetectionParams& det);

ShotRecord single_shot(TrackedState& state, int target_n, const DetectionParams& det, Rng& rng);
ShotRecord single_shot(TrackedState& state, int target_n, const DetectionParams& det,
                       std::uint64_t seed);

struct Interrogation {
    std::vector<ShotRecord> shots;
    std::optional<int> identified;  // target of the bright shot that ended the run
    TrackedState final_state;
};

// Shots in schedule order, shot k drawing from Rng(seed, k); stops at the first bright.
Interrogation repeated_interrogation(const FockState& state, std::span<const int> schedule,
                                     const DetectionParams& det, std::uint64_t seed);

// `count` independent single shots on fresh copies of `state`; shot j uses Rng(seed, j).
std::vector<ShotRecord> shot_batch(const FockState& state, int target_n, const DetectionParams& det,
                                   std::uint64_t seed, int count);

// Line records: shot,target_n,outcome,cumulative_dark.
void write_shot_log(std::ostream& out, std::span<const ShotRecord> shots);

// Empirical bright frequency per target with the expected rate and standard error.
nlohmann::json shot_summary(std::span<const ShotRecord> shots);

}  // namespace kerrsim
