#include "kerrsim/state_prep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "kerrsim/error.hpp"
#include "kerrsim/parallel.hpp"
#include "kerrsim/trap.hpp"

namespace kerrsim {

PhononDistribution::PhononDistribution(RealVector p, double tail) : p_(std::move(p)), tail_(tail) {
    if (p_.size() == 0) {
        throw InputError("PhononDistribution: empty probability vector");
    }
    if (p_.minCoeff() < 0.0) {
        throw InputError("PhononDistribution: negative probability " + std::to_string(p_.minCoeff()));
    }
    if (p_.sum() > 1.0 + 1e-9) {
        throw InputError("PhononDistribution: probabilities sum to " + std::to_string(p_.sum()));
    }
    if (!(tail_ >= 0.0)) {
        throw InputError("PhononDistribution: negative tail");
    }
}

double PhononDistribution::mean() const {
    double m = 0.0;
    for (Index n = 0; n < p_.size(); ++n) {
        m += static_cast<double>(n) * p_(n);
    }
    return m;
}

double PhononDistribution::variance() const {
    const double m = mean();
    double v = 0.0;
    for (Index n = 0; n < p_.size(); ++n) {
        v += (static_cast<double>(n) - m) * (static_cast<double>(n) - m) * p_(n);
    }
    return v;
}

PhononDistribution PhononDistribution::normalized() const {
    const double s = p_.sum();
    if (!(s > 0.0)) {
        throw NumericalError("PhononDistribution::normalized: zero total probability");
    }
    return PhononDistribution(p_ / s, 0.0);
}

double total_variation(const PhononDistribution& x, const PhononDistribution& y) {
    const Index n = std::max(x.size(), y.size());
    double sum = 0.0;
    for (Index k = 0; k < n; ++k) {
        sum += std::abs(x[k] - y[k]);
    }
    return 0.5 * sum;
}

namespace {

const std::map<std::string_view, StateFamily>& family_table() {
    static const std::map<std::string_view, StateFamily> table = {
        {"fock", StateFamily::fock},
        {"coherent", StateFamily::coherent},
        {"thermal", StateFamily::thermal},
        {"squeezed_vacuum", StateFamily::squeezed_vacuum},
        {"squeezed_thermal", StateFamily::squeezed_thermal},
        {"squeezed_fock", StateFamily::squeezed_fock},
    };
    return table;
}

}  // namespace

std::string_view family_name(StateFamily family) {
    for (const auto& [name, f] : family_table()) {
        if (f == family) {
            return name;
        }
    }
    return "unknown";
}

StateFamily parse_family(std::string_view name) {
    const auto& table = family_table();
    if (auto it = table.find(name); it != table.end()) {
        return it->second;
    }
    throw InputError("unknown state family '" + std::string(name) + "'");
}

StateSpec StateSpec::fock(int n, bool imperfect) {
    StateSpec s;
    s.family = StateFamily::fock;
    s.n = n;
    s.imperfect = imperfect;
    return s;
}

StateSpec StateSpec::coherent(Complex alpha) {
    StateSpec s;
    s.family = StateFamily::coherent;
    s.alpha = alpha;
    return s;
}

StateSpec StateSpec::thermal(double nbar) {
    StateSpec s;
    s.family = StateFamily::thermal;
    s.nbar = nbar;
    return s;
}

StateSpec StateSpec::squeezed_vacuum(Complex r) {
    StateSpec s;
    s.family = StateFamily::squeezed_vacuum;
    s.r = r;
    return s;
}

StateSpec StateSpec::squeezed_thermal(double nbar, Complex r) {
    StateSpec s;
    s.family = StateFamily::squeezed_thermal;
    s.nbar = nbar;
    s.r = r;
    return s;
}

StateSpec StateSpec::squeezed_fock(int n, Complex r) {
    StateSpec s;
    s.family = StateFamily::squeezed_fock;
    s.n = n;
    s.r = r;
    return s;
}

void StateSpec::validate() const {
    if (n < 0) {
        throw InputError("StateSpec: Fock number must be >= 0");
    }
    if (imperfect && (family != StateFamily::fock || n < 3)) {
        throw InputError("StateSpec: the imperfect preset needs a Fock state with n >= 3");
    }
    if (!(nbar >= 0.0) || !std::isfinite(nbar)) {
        throw InputError("StateSpec: nbar must be finite and >= 0");
    }
    if (!std::isfinite(std::abs(alpha)) || !std::isfinite(std::abs(r))) {
        throw InputError("StateSpec: alpha and r must be finite");
    }
}

double StateSpec::mean_phonons() const {
    const double c2 = std::cosh(2.0 * std::abs(r));
    switch (family) {
        case StateFamily::fock:
            return n;
        case StateFamily::coherent:
            return std::norm(alpha);
        case StateFamily::thermal:
            return nbar;
        case StateFamily::squeezed_vacuum:
            return std::pow(std::sinh(std::abs(r)), 2);
        case StateFamily::squeezed_thermal:
            return (nbar + 0.5) * c2 - 0.5;
        case StateFamily::squeezed_fock:
            return (n + 0.5) * c2 - 0.5;
    }
    return 0.0;
}

namespace {

double parse_real(std::string_view text, std::string_view what) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw InputError("state spec: cannot parse " + std::string(what) + " from '" +
                         std::string(text) + "'");
    }
    return value;
}

int parse_int(std::string_view text, std::string_view what) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw InputError("state spec: cannot parse integer " + std::string(what) + " from '" +
                         std::string(text) + "'");
    }
    return value;
}

// "1.2", "1.2+0.3i", "-0.5-1e-2i", "0.3i".
Complex parse_complex(std::string_view text, std::string_view what) {
    if (text.empty() || text.back() != 'i') {
        return {parse_real(text, what), 0.0};
    }
    const std::string_view body = text.substr(0, text.size() - 1);
    std::size_t split = std::string_view::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    if (split == std::string_view::npos) {
        return {0.0, parse_real(body, what)};
    }
    std::string_view imag = body.substr(split);
    if (imag.front() == '+') {
        imag.remove_prefix(1);
    }
    return {parse_real(body.substr(0, split), what), parse_real(imag, what)};
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_complex(Complex z) {
    std::string out = format_double(z.real());
    if (!std::signbit(z.imag())) {
        out += "+";
    }
    return out + format_double(z.imag()) + "i";
}

}  // namespace

StateSpec parse_state_spec(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    StateSpec spec;
    spec.family = parse_family(name);
    if (colon == std::string_view::npos) {
        throw InputError("state spec '" + std::string(text) + "': missing ':' and parameters");
    }
    std::string_view args = text.substr(colon + 1);

    std::map<std::string, std::string_view> kv;
    std::vector<std::string_view> positional;
    while (!args.empty()) {
        const auto comma = args.find(',');
        const std::string_view item = args.substr(0, comma);
        if (const auto eq = item.find('='); eq != std::string_view::npos) {
            kv[std::string(item.substr(0, eq))] = item.substr(eq + 1);
        } else {
            positional.push_back(item);
        }
        args = comma == std::string_view::npos ? std::string_view{} : args.substr(comma + 1);
    }
    auto take = [&](const std::string& key) -> std::optional<std::string_view> {
        if (auto it = kv.find(key); it != kv.end()) {
            const auto v = it->second;
            kv.erase(it);
            return v;
        }
        if (!positional.empty()) {
            const auto v = positional.front();
            positional.erase(positional.begin());
            return v;
        }
        return std::nullopt;
    };
    auto require = [&](const std::string& key) {
        auto v = take(key);
        if (!v) {
            throw InputError("state spec '" + std::string(text) + "': missing parameter " + key);
        }
        return *v;
    };

    switch (spec.family) {
        case StateFamily::fock:
            spec.n = parse_int(require("n"), "n");
            if (auto preset = kv.find("preset"); preset != kv.end()) {
                if (preset->second != "imperfect" && preset->second != "ideal") {
                    throw InputError("state spec: unknown Fock preset '" +
                                     std::string(preset->second) + "'");
                }
                spec.imperfect = preset->second == "imperfect";
                kv.erase(preset);
            }
            break;
        case StateFamily::coherent:
            spec.alpha = parse_complex(require("alpha"), "alpha");
            break;
        case StateFamily::thermal:
            spec.nbar = parse_real(require("nbar"), "nbar");
            break;
        case StateFamily::squeezed_vacuum:
            spec.r = parse_complex(require("r"), "r");
            break;
        case StateFamily::squeezed_thermal:
            spec.nbar = parse_real(require("nbar"), "nbar");
            spec.r = parse_complex(require("r"), "r");
            break;
        case StateFamily::squeezed_fock:
            spec.n = parse_int(require("n"), "n");
            spec.r = parse_complex(require("r"), "r");
            break;
    }
    if (!kv.empty() || !positional.empty()) {
        throw InputError("state spec '" + std::string(text) + "': unexpected extra parameters");
    }
    spec.validate();
    return spec;
}

std::string format_state_spec(const StateSpec& spec) {
    std::ostringstream out;
    out << family_name(spec.family) << ':';
    switch (spec.family) {
        case StateFamily::fock:
            out << "n=" << spec.n;
            if (spec.imperfect) {
                out << ",preset=imperfect";
            }
            break;
        case StateFamily::coherent:
            out << "alpha=" << format_complex(spec.alpha);
            break;
        case StateFamily::thermal:
            out << "nbar=" << format_double(spec.nbar);
            break;
        case StateFamily::squeezed_vacuum:
            out << "r=" << format_complex(spec.r);
            break;
        case StateFamily::squeezed_thermal:
            out << "nbar=" << format_double(spec.nbar) << ",r=" << format_complex(spec.r);
            break;
        case StateFamily::squeezed_fock:
            out << "n=" << spec.n << ",r=" << format_complex(spec.r);
            break;
    }
    return out.str();
}

namespace {

int guard_levels(double mean) { return std::max(10, static_cast<int>(std::ceil(4.0 * mean))); }

Matrix displacement_matrix(Complex alpha, int dim_max) {
    const Matrix b = single_mode_annihilation(dim_max).matrix();
    const Matrix generator = alpha * b.adjoint() - std::conj(alpha) * b;
    return generator.exp();
}

Matrix squeeze_matrix(Complex r, int dim_max) {
    const Matrix b = single_mode_annihilation(dim_max).matrix();
    const Matrix b2 = b * b;
    const Matrix generator = 0.5 * (std::conj(r) * b2 - r * Matrix(b2.adjoint()));
    return generator.exp();
}

double log_poisson(double mean, int n) {
    if (mean == 0.0) {
        return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    return -mean + n * std::log(mean) - std::lgamma(n + 1.0);
}

int cutoff_for_tail(const std::function<double(int)>& tail, int start) {
    int n = std::max(start, 1);
    while (tail(n) > kTruncationTolerance && n < 100000) {
        n += std::max(1, n / 8);
    }
    return n;
}

void check_n_max(int n_max, const char* where) {
    if (n_max < 0) {
        throw InputError(std::string(where) + ": n_max must be >= 0");
    }
}

}  // namespace

PhononDistribution poisson_populations(double mean, int n_max) {
    check_n_max(n_max, "poisson_populations");
    RealVector p(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        p(n) = std::exp(log_poisson(mean, n));
    }
    return PhononDistribution(p, std::max(0.0, 1.0 - p.sum()));
}

PhononDistribution thermal_populations(double nbar, int n_max) {
    check_n_max(n_max, "thermal_populations");
    if (!(nbar >= 0.0)) {
        throw InputError("thermal_populations: nbar must be >= 0");
    }
    RealVector p(n_max + 1);
    const double ratio = nbar / (1.0 + nbar);
    for (int n = 0; n <= n_max; ++n) {
        p(n) = std::pow(ratio, n) / (1.0 + nbar);
    }
    return PhononDistribution(p, std::pow(ratio, n_max + 1));
}

PhononDistribution squeezed_vacuum_populations(double r_abs, int n_max) {
    check_n_max(n_max, "squeezed_vacuum_populations");
    r_abs = std::abs(r_abs);
    RealVector p = RealVector::Zero(n_max + 1);
    const double t = std::tanh(r_abs);
    const double c = std::cosh(r_abs);
    for (int k = 0; 2 * k <= n_max; ++k) {
        if (k == 0) {
            p(0) = 1.0 / c;
            continue;
        }
        // (2k)! / (2^{2k} (k!)^2) tanh^{2k} / cosh
        const double log_central = std::lgamma(2.0 * k + 1.0) - 2.0 * k * std::log(2.0) -
                                   2.0 * std::lgamma(k + 1.0);
        p(2 * k) = t == 0.0 ? 0.0 : std::exp(log_central + 2.0 * k * std::log(t)) / c;
    }
    return PhononDistribution(p, std::max(0.0, 1.0 - p.sum()));
}

FockOperator displacement_op(Complex alpha, int n_max) {
    check_n_max(n_max, "displacement_op");
    const double mean = std::norm(alpha);
    const double tail = poisson_populations(mean, n_max).tail();
    if (tail > kTruncationTolerance) {
        const int suggested = cutoff_for_tail(
            [&](int n) { return poisson_populations(mean, n).tail(); }, n_max);
        throw TruncationError("displacement_op: |alpha|^2 = " + std::to_string(mean) +
                                  " leaves tail " + std::to_string(tail) + " beyond n_max = " +
                                  std::to_string(n_max) + "; use n_max >= " +
                                  std::to_string(suggested),
                              suggested);
    }
    const int work = n_max + guard_levels(mean);
    return FockOperator(Matrix(displacement_matrix(alpha, work).topLeftCorner(n_max + 1, n_max + 1)));
}

FockOperator squeeze_op(Complex r, int n_max) {
    check_n_max(n_max, "squeeze_op");
    const double tail = squeezed_vacuum_populations(std::abs(r), n_max).tail();
    if (tail > kTruncationTolerance) {
        const int suggested = cutoff_for_tail(
            [&](int n) { return squeezed_vacuum_populations(std::abs(r), n).tail(); }, n_max);
        throw TruncationError("squeeze_op: |r| = " + std::to_string(std::abs(r)) + " leaves tail " +
                                  std::to_string(tail) + " beyond n_max = " + std::to_string(n_max) +
                                  "; use n_max >= " + std::to_string(suggested),
                              suggested);
    }
    const int work = n_max + guard_levels(std::pow(std::sinh(std::abs(r)), 2));
    return FockOperator(Matrix(squeeze_matrix(r, work).topLeftCorner(n_max + 1, n_max + 1)));
}

FockState thermal_state(double nbar, int n_max) {
    const PhononDistribution dist = thermal_populations(nbar, n_max);
    const RealVector p = dist.p() / dist.total();
    return FockState::mixed(Matrix(p.cast<Complex>().asDiagonal()));
}

PhononDistribution random_walk_thermal(int pulses, double step_alpha, std::uint64_t seed,
                                       int trajectories, int n_max) {
    if (pulses < 1 || trajectories < 1) {
        throw InputError("random_walk_thermal: pulses and trajectories must be >= 1");
    }
    check_n_max(n_max, "random_walk_thermal");
    const double expected_mean = pulses * step_alpha * step_alpha;
    const int work = n_max + guard_levels(expected_mean);
    const Matrix step = displacement_matrix(Complex(step_alpha, 0.0), work);
    const RealVector levels = RealVector::LinSpaced(work + 1, 0.0, work);

    // D(a e^{i phi}) = R(phi) D(a) R(phi)^dag with R(phi) = exp(i phi n).
    std::vector<RealVector> per_traj(static_cast<std::size_t>(trajectories));
    parallel_for(per_traj.size(), [&](std::size_t j) {
        Rng rng(seed, j);
        Vector psi = Vector::Zero(work + 1);
        psi(0) = 1.0;
        for (int k = 0; k < pulses; ++k) {
            const double phi = kTwoPi * rng.uniform();
            const Vector rot = (levels * Complex(0.0, phi)).array().exp().matrix();
            psi = rot.cwiseProduct(step * rot.conjugate().cwiseProduct(psi));
        }
        per_traj[j] = psi.cwiseAbs2();
    });
    RealVector mean = RealVector::Zero(work + 1);
    for (const auto& p : per_traj) {
        mean += p;
    }
    mean /= static_cast<double>(trajectories);
    const RealVector kept = mean.head(n_max + 1);
    const double tail = std::max(0.0, 1.0 - kept.sum());
    if (tail > kWalkTruncationTolerance) {
        throw TruncationError("random_walk_thermal: averaged tail " + std::to_string(tail) +
                                  " beyond n_max = " + std::to_string(n_max) +
                                  " exceeds 1e-3; increase n_max",
                              n_max + guard_levels(expected_mean));
    }
    return PhononDistribution(kept, tail);
}

namespace {

// Populations of S(r) rho S(r)^dag for a diagonal input rho (weights on 0..work).
RealVector squeezed_diagonal(const RealVector& weights, Complex r, int work) {
    const Matrix s = squeeze_matrix(r, work);
    RealVector out = RealVector::Zero(work + 1);
    for (Index k = 0; k < weights.size(); ++k) {
        if (weights(k) > 0.0) {
            out += weights(k) * s.col(k).cwiseAbs2();
        }
    }
    return out;
}

void fock_imperfect(RealVector& p, int n) {
    p(n) = 0.80;
    p(n - 1) = 0.06;
    p(n - 2) = 0.06;
    const int rest = n - 2;
    if (rest > 0) {
        for (int k = 0; k < rest; ++k) {
            p(k) = 0.08 / rest;
        }
    } else {
        p(n - 1) += 0.04;
        p(n - 2) += 0.04;
    }
}

}  // namespace

PhononDistribution expected_populations(const StateSpec& spec, int n_max) {
    spec.validate();
    check_n_max(n_max, "expected_populations");
    const double r_abs = std::abs(spec.r);
    switch (spec.family) {
        case StateFamily::fock: {
            RealVector p = RealVector::Zero(n_max + 1);
            double tail = 0.0;
            if (spec.imperfect) {
                RealVector full = RealVector::Zero(spec.n + 1);
                fock_imperfect(full, spec.n);
                const int keep = std::min(n_max, spec.n);
                p.head(keep + 1) = full.head(keep + 1);
                tail = full.sum() - p.sum();
            } else if (spec.n <= n_max) {
                p(spec.n) = 1.0;
            } else {
                tail = 1.0;
            }
            return PhononDistribution(p, tail);
        }
        case StateFamily::coherent:
            return poisson_populations(std::norm(spec.alpha), n_max);
        case StateFamily::thermal:
            return thermal_populations(spec.nbar, n_max);
        case StateFamily::squeezed_vacuum:
            return squeezed_vacuum_populations(r_abs, n_max);
        case StateFamily::squeezed_thermal: {
            const int work = n_max + guard_levels(spec.mean_phonons());
            const RealVector weights = thermal_populations(spec.nbar, work).p();
            const RealVector full = squeezed_diagonal(weights, Complex(r_abs, 0.0), work);
            RealVector p = full.head(n_max + 1).cwiseMax(0.0);
            return PhononDistribution(p, std::max(0.0, 1.0 - p.sum()));
        }
        case StateFamily::squeezed_fock: {
            const int work = std::max(n_max, spec.n) + guard_levels(spec.mean_phonons());
            RealVector weights = RealVector::Zero(work + 1);
            weights(spec.n) = 1.0;
            const RealVector full = squeezed_diagonal(weights, Complex(r_abs, 0.0), work);
            RealVector p = full.head(n_max + 1).cwiseMax(0.0);
            return PhononDistribution(p, std::max(0.0, 1.0 - p.sum()));
        }
    }
    throw InputError("expected_populations: unknown family");
}

PreparedState prepare(const StateSpec& spec, int n_max) {
    spec.validate();
    check_n_max(n_max, "prepare");
    auto require_tail = [&](const PhononDistribution& dist) {
        if (dist.tail() > kTruncationTolerance) {
            const int suggested = n_max + guard_levels(spec.mean_phonons());
            throw TruncationError("prepare(" + format_state_spec(spec) + "): tail " +
                                      std::to_string(dist.tail()) + " beyond n_max = " +
                                      std::to_string(n_max) + "; use n_max >= " +
                                      std::to_string(suggested),
                                  suggested);
        }
    };
    switch (spec.family) {
        case StateFamily::fock: {
            if (spec.n > n_max) {
                throw TruncationError("prepare: Fock state |" + std::to_string(spec.n) +
                                          "> outside n_max = " + std::to_string(n_max),
                                      spec.n);
            }
            PhononDistribution dist = expected_populations(spec, n_max);
            if (spec.imperfect) {
                return {FockState::mixed(Matrix(dist.p().cast<Complex>().asDiagonal())), dist};
            }
            return {FockState::basis(n_max + 1, spec.n), dist};
        }
        case StateFamily::coherent: {
            const FockOperator d = displacement_op(spec.alpha, n_max);
            PhononDistribution dist = poisson_populations(std::norm(spec.alpha), n_max);
            return {renormalized(Vector(d.matrix().col(0))), dist};
        }
        case StateFamily::thermal: {
            PhononDistribution dist = thermal_populations(spec.nbar, n_max);
            require_tail(dist);
            return {thermal_state(spec.nbar, n_max), dist};
        }
        case StateFamily::squeezed_vacuum: {
            const FockOperator s = squeeze_op(spec.r, n_max);
            PhononDistribution dist = squeezed_vacuum_populations(std::abs(spec.r), n_max);
            return {renormalized(Vector(s.matrix().col(0))), dist};
        }
        case StateFamily::squeezed_thermal: {
            const int work = n_max + guard_levels(spec.mean_phonons());
            const Matrix s = squeeze_matrix(spec.r, work);
            const RealVector weights = thermal_populations(spec.nbar, work).p();
            const Matrix rho = s * weights.cast<Complex>().asDiagonal() * s.adjoint();
            Matrix kept = rho.topLeftCorner(n_max + 1, n_max + 1);
            kept = 0.5 * (kept + Matrix(kept.adjoint()));
            const RealVector p = kept.diagonal().real().cwiseMax(0.0);
            PhononDistribution dist(p, std::max(0.0, 1.0 - p.sum()));
            require_tail(dist);
            return {renormalized(kept), dist};
        }
        case StateFamily::squeezed_fock: {
            if (spec.n > n_max) {
                throw TruncationError("prepare: Fock state |" + std::to_string(spec.n) +
                                          "> outside n_max = " + std::to_string(n_max),
                                      spec.n);
            }
            const int work = n_max + guard_levels(spec.mean_phonons());
            const Matrix s = squeeze_matrix(spec.r, work);
            const Vector psi = s.col(spec.n).head(n_max + 1);
            const RealVector p = psi.cwiseAbs2();
            PhononDistribution dist(p, std::max(0.0, 1.0 - p.sum()));
            require_tail(dist);
            return {renormalized(psi), dist};
        }
    }
    throw InputError("prepare: unknown family");
}

}  // namespace kerrsim
