#include "kerrsim/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "kerrsim/error.hpp"
#include "kerrsim/io.hpp"

namespace kerrsim {

std::string_view outcome_name(Outcome o) { return o == Outcome::bright ? "bright" : "dark"; }

void DetectionParams::validate() const {
    if (!(eta >= 0.0 && eta <= 1.0) || !(g >= 0.0) || g + eta > 1.0 + 1e-12) {
        throw InputError("detection needs 0 <= eta <= 1, g >= 0 and g + eta <= 1 (eta = " +
                         format_number(eta) + ", g = " + format_number(g) + ")");
    }
}

namespace {

void check_target(const FockState& state, int target_n) {
    if (target_n < 0 || target_n >= state.dim()) {
        throw InputError("measurement target n = " + std::to_string(target_n) +
                         " outside the state's levels 0.." + std::to_string(state.dim() - 1));
    }
}

}  // namespace

double bright_probability(const FockState& state, int target_n, const DetectionParams& det) {
    det.validate();
    check_target(state, target_n);
    return std::clamp(det.g + det.eta * state.populations()(target_n), 0.0, 1.0);
}

FockState dark_update(const FockState& state, int target_n, const DetectionParams& det) {
    det.validate();
    check_target(state, target_n);
    const double p_dark = 1.0 - bright_probability(state, target_n, det);
    if (p_dark <= 1e-15) {
        throw InputError("dark outcome impossible: the state is |" + std::to_string(target_n) +
                         "> and detection is perfect");
    }
    RealVector m = RealVector::Constant(state.dim(), std::sqrt(1.0 - det.g));
    m(target_n) = std::sqrt(std::max(0.0, 1.0 - det.g - det.eta));
    if (state.is_pure()) {
        return renormalized(Vector(m.cast<Complex>().cwiseProduct(state.vector())));
    }
    const Matrix rho = m.cast<Complex>().asDiagonal() * state.density() * m.cast<Complex>().asDiagonal();
    return renormalized(rho);
}

ShotRecord single_shot(TrackedState& s, int target_n, const DetectionParams& det, Rng& rng) {
    if (s.destroyed) {
        throw InputError("single_shot: the motional state was destroyed by a bright shot; "
                         "enable re-preparation to continue");
    }
    ShotRecord rec;
    rec.target_n = target_n;
    rec.pre_state_id = s.id;
    rec.p_bright = bright_probability(s.state, target_n, det);
    rec.outcome = rng.uniform() < rec.p_bright ? Outcome::bright : Outcome::dark;
    if (rec.outcome == Outcome::dark) {
        s.state = dark_update(s.state, target_n, det);
    } else {
        s.known_fock = target_n;
        if (det.reprepare) {
            s.state = FockState::basis(s.state.dim(), target_n);
        } else {
            s.destroyed = true;
        }
    }
    s.id += 1;
    rec.post_state_id = s.id;
    return rec;
}

ShotRecord single_shot(TrackedState& state, int target_n, const DetectionParams& det,
                       std::uint64_t seed) {
    Rng rng(seed);
    ShotRecord rec = single_shot(state, target_n, det, rng);
    rec.seed = seed;
    return rec;
}

Interrogation repeated_interrogation(const FockState& state, std::span<const int> schedule,
                                     const DetectionParams& det, std::uint64_t seed) {
    Interrogation run{{}, std::nullopt, TrackedState(state)};
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        Rng rng(seed, k);
        ShotRecord rec = single_shot(run.final_state, schedule[k], det, rng);
        rec.seed = seed;
        run.shots.push_back(rec);
        if (rec.outcome == Outcome::bright) {
            run.identified = schedule[k];
            break;
        }
    }
    return run;
}

std::vector<ShotRecord> shot_batch(const FockState& state, int target_n, const DetectionParams& det,
                                   std::uint64_t seed, int count) {
    if (count < 1) {
        throw InputError("shot_batch: count must be >= 1");
    }
    det.validate();
    check_target(state, target_n);
    std::vector<ShotRecord> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t j) {
        TrackedState s(state);
        Rng rng(seed, j);
        out[j] = single_shot(s, target_n, det, rng);
        out[j].seed = seed;
    });
    return out;
}

void write_shot_log(std::ostream& out, std::span<const ShotRecord> shots) {
    out << "shot,target_n,outcome,cumulative_dark\n";
    long dark = 0;
    for (std::size_t i = 0; i < shots.size(); ++i) {
        dark += shots[i].outcome == Outcome::dark ? 1 : 0;
        write_csv_row(out, {std::to_string(i), std::to_string(shots[i].target_n),
                            std::string(outcome_name(shots[i].outcome)), std::to_string(dark)});
    }
}

nlohmann::json shot_summary(std::span<const ShotRecord> shots) {
    struct Tally {
        long shots = 0;
        long bright = 0;
        double expected = 0.0;
    };
    std::map<int, Tally> by_target;
    for (const ShotRecord& r : shots) {
        Tally& t = by_target[r.target_n];
        t.shots += 1;
        t.bright += r.outcome == Outcome::bright ? 1 : 0;
        t.expected += r.p_bright;
    }
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& [n, t] : by_target) {
        const double expected = t.expected / static_cast<double>(t.shots);
        targets.push_back({{"target_n", n},
                           {"shots", t.shots},
                           {"bright", t.bright},
                           {"bright_frequency", static_cast<double>(t.bright) / t.shots},
                           {"expected_bright_probability", expected},
                           {"standard_error", std::sqrt(expected * (1.0 - expected) / t.shots)}});
    }
    return {{"total_shots", shots.size()}, {"targets", targets}};
}

}  // namespace kerrsim
