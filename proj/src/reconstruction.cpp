#include "kerrsim/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "kerrsim/error.hpp"
#include "kerrsim/lsq.hpp"
#include "kerrsim/qp.hpp"

namespace kerrsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double FitResult::value(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw InputError("fit result has no parameter '" + name + "'");
    }
    return values[static_cast<std::size_t>(it - names.begin())];
}

double FitResult::sigma_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw InputError("fit result has no parameter '" + name + "'");
    }
    return sigma[static_cast<std::size_t>(it - names.begin())];
}

VectorXd project_to_simplex(const VectorXd& p, bool capped) {
    if (capped) {
        VectorXd clipped = p.cwiseMax(0.0);
        if (clipped.sum() <= 1.0) {
            return clipped;
        }
    }
    // Sort-based projection onto {x >= 0, sum x = 1}.
    std::vector<double> u(p.data(), p.data() + p.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) {
            theta = t;
        }
    }
    return (p.array() - theta).cwiseMax(0.0).matrix();
}

namespace {

VectorXd as_vector(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

MatrixXd peak_matrix(std::span<const double> grid, std::span<const double> centers,
                     const DriveParams& drive) {
    MatrixXd f(static_cast<Index>(grid.size()), static_cast<Index>(centers.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t n = 0; n < centers.size(); ++n) {
            f(i, n) = lineshape(grid[i] - centers[n], drive);
        }
    }
    return f;
}

// Columns of peaks whose maximum is not sampled (no grid point within half a
// linewidth) are zeroed; what remains is what the data can actually identify.
MatrixXd visible_part(const MatrixXd& f, std::vector<int>* hidden) {
    MatrixXd vis = f;
    for (Index n = 0; n < f.cols(); ++n) {
        if (f.rows() == 0 || f.col(n).maxCoeff() < 0.5) {
            vis.col(n).setZero();
            if (hidden) {
                hidden->push_back(static_cast<int>(n));
            }
        }
    }
    return vis;
}

VectorXd shot_weights(const VectorXd& model, std::optional<int> shots) {
    if (!shots) {
        return VectorXd::Ones(model.size());
    }
    VectorXd w(model.size());
    for (Index i = 0; i < model.size(); ++i) {
        const double p = std::clamp(model(i), 0.0, 1.0);
        w(i) = 1.0 / std::sqrt(std::max(p * (1.0 - p) / *shots, kVarianceFloor));
    }
    return w;
}

struct Model {
    std::function<VectorXd(const VectorXd&)> predict;
    std::function<MatrixXd(const VectorXd&)> jacobian;  // of predict
    std::function<VectorXd(const VectorXd&)> project;
};

struct WeightedFit {
    LsqResult lsq;
    VectorXd weights;
    int iterations = 0;
};

// Iteratively reweighted least squares: weights follow the current model prediction.
WeightedFit weighted_fit(const Model& m, const VectorXd& y, std::optional<int> shots, VectorXd x) {
    WeightedFit out;
    out.weights = shot_weights(y, shots);
    const int passes = shots ? 10 : 1;
    for (int pass = 0; pass < passes; ++pass) {
        const VectorXd w = out.weights;
        LsqProblem problem;
        problem.residuals = [&](const VectorXd& v) -> VectorXd {
            return (m.predict(v) - y).cwiseProduct(w);
        };
        problem.jacobian = [&](const VectorXd& v) -> MatrixXd { return w.asDiagonal() * m.jacobian(v); };
        problem.project = m.project;
        out.lsq = levenberg_marquardt(problem, x, {});
        out.iterations += out.lsq.iterations;
        x = out.lsq.x;
        if (!shots) {
            break;
        }
        const VectorXd next = shot_weights(m.predict(x), shots);
        const double change = ((next - w).cwiseAbs().array() / w.array()).maxCoeff();
        out.weights = next;
        if (change < 1e-8) {
            break;
        }
    }
    return out;
}

double residual_scale(const LsqResult& r, std::optional<int> shots) {
    if (shots) {
        return 1.0;
    }
    const Index dof = r.residuals.size() - r.x.size();
    return dof > 0 ? r.cost / static_cast<double>(dof) : 1.0;
}

// Orthonormal basis of the subspace orthogonal to the rows of `constraints`.
MatrixXd tangent_basis(const MatrixXd& constraints, Index dim) {
    if (constraints.rows() == 0) {
        return MatrixXd::Identity(dim, dim);
    }
    Eigen::JacobiSVD<MatrixXd> svd(constraints, Eigen::ComputeFullV);
    const Index rank = svd.rank();
    return svd.matrixV().rightCols(dim - rank);
}

struct Uncertainty {
    MatrixXd covariance;
    bool singular = false;
    VectorXd direction;
};

Uncertainty constrained_covariance(const MatrixXd& jac, const MatrixXd& jac_visible,
                                   const MatrixXd& tangent, double scale) {
    Uncertainty u;
    const CovarianceEstimate full = covariance_from_jacobian(jac * tangent, scale);
    u.covariance = tangent * full.covariance * tangent.transpose();
    const CovarianceEstimate vis = covariance_from_jacobian(jac_visible * tangent, scale);
    u.singular = full.singular || vis.singular;
    if (u.singular) {
        const VectorXd& dz = full.singular ? full.weakest_direction : vis.weakest_direction;
        u.direction = tangent * dz;
        u.direction.normalize();
    }
    return u;
}

void check_centers(std::span<const double> centers) {
    if (centers.empty()) {
        throw InputError("fit: at least one peak center is required");
    }
}

void fill_common(FitResult& out, const Spectrum& s, const VectorXd& model, const WeightedFit& wf) {
    const VectorXd resid = as_vector(s.p_up) - model;
    out.residuals.assign(resid.data(), resid.data() + resid.size());
    out.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
    out.iterations = wf.iterations;
    out.converged = wf.lsq.converged;
    if (!out.converged) {
        out.warnings.push_back("optimizer stopped after " + std::to_string(wf.iterations) +
                               " iterations without meeting the tolerance");
    }
}

void fill_sigma(FitResult& out, const Uncertainty& u) {
    out.covariance = u.covariance;
    out.sigma.resize(out.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.sigma[i] = std::sqrt(std::max(0.0, u.covariance(i, i)));
    }
    out.singular = u.singular;
    if (u.singular) {
        out.degenerate_direction.assign(u.direction.data(), u.direction.data() + u.direction.size());
        std::string msg = "unidentifiable direction:";
        for (std::size_t i = 0; i < out.names.size(); ++i) {
            if (std::abs(u.direction(static_cast<Index>(i))) > 1e-3) {
                msg += " " + out.names[i] + "=" + std::to_string(u.direction(static_cast<Index>(i)));
            }
        }
        out.warnings.push_back(msg);
    }
}

void warn_unresolved(FitResult& out, std::span<const double> centers, const DriveParams& drive) {
    const double fwhm = lineshape_fwhm(drive);
    for (std::size_t n = 1; n < centers.size(); ++n) {
        const double spacing = std::abs(centers[n] - centers[n - 1]);
        if (spacing < fwhm) {
            out.warnings.push_back("peaks " + std::to_string(n - 1) + " and " + std::to_string(n) +
                                   " are closer (" + std::to_string(rad_to_hz(spacing)) +
                                   " Hz) than the lineshape FWHM (" +
                                   std::to_string(rad_to_hz(fwhm)) + " Hz)");
        }
    }
}

}  // namespace

PeakFit fit_peak_center(const Spectrum& spectrum, const DriveParams& drive, double lo, double hi) {
    spectrum.validate();
    drive.validate();
    std::vector<double> grid;
    std::vector<double> data;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        if (spectrum.detuning[i] >= lo && spectrum.detuning[i] <= hi) {
            grid.push_back(spectrum.detuning[i]);
            data.push_back(spectrum.p_up[i]);
        }
    }
    if (grid.size() < 7) {
        throw InputError("fit_peak_center: window holds " + std::to_string(grid.size()) +
                         " points; at least 7 are required");
    }
    const VectorXd y = as_vector(data);
    if (y.maxCoeff() - y.minCoeff() < 1e-12) {
        throw InputError("fit_peak_center: data in the window are flat; no peak to fit");
    }
    Index peak = 0;
    y.maxCoeff(&peak);

    Model m;
    m.predict = [&](const VectorXd& x) {
        VectorXd out(y.size());
        for (Index i = 0; i < y.size(); ++i) {
            out(i) = x(2) + x(1) * lineshape(grid[i] - x(0), drive);
        }
        return out;
    };
    m.jacobian = [&](const VectorXd& x) {
        MatrixXd j(y.size(), 3);
        for (Index i = 0; i < y.size(); ++i) {
            j(i, 0) = -x(1) * lineshape_derivative(grid[i] - x(0), drive);
            j(i, 1) = lineshape(grid[i] - x(0), drive);
            j(i, 2) = 1.0;
        }
        return j;
    };
    m.project = [&](const VectorXd& x) {
        VectorXd v = x;
        v(0) = std::clamp(v(0), lo, hi);
        v(2) = std::clamp(v(2), 0.0, kMaxBackground);
        v(1) = std::clamp(v(1), 0.0, 1.0 - v(2));
        return v;
    };
    VectorXd x0(3);
    x0 << grid[peak], y.maxCoeff() - y.minCoeff(), y.minCoeff();
    const WeightedFit wf = weighted_fit(m, y, spectrum.shots, m.project(x0));

    PeakFit out;
    out.center = wf.lsq.x(0);
    out.eta = wf.lsq.x(1);
    out.g = wf.lsq.x(2);
    out.iterations = wf.iterations;
    const double edge = 1e-6 * (hi - lo);
    const bool pinned = out.center - lo < edge || hi - out.center < edge;
    out.converged = wf.lsq.converged && !pinned;
    const CovarianceEstimate cov =
        covariance_from_jacobian(wf.lsq.jacobian, residual_scale(wf.lsq, spectrum.shots));
    out.sigma = std::sqrt(std::max(0.0, cov.covariance(0, 0)));
    if (cov.singular) {
        out.converged = false;
    }
    return out;
}

namespace {

struct FamilyLayout {
    std::vector<std::string> names;
    std::vector<double> lower;
    std::vector<double> upper;
};

FamilyLayout family_layout(StateFamily f) {
    switch (f) {
        case StateFamily::coherent:
            return {{"alpha"}, {0.0}, {10.0}};
        case StateFamily::thermal:
            return {{"nbar"}, {0.0}, {50.0}};
        case StateFamily::squeezed_vacuum:
        case StateFamily::squeezed_fock:
            return {{"r"}, {0.0}, {2.5}};
        case StateFamily::squeezed_thermal:
            return {{"nbar", "r"}, {0.0, 0.0}, {50.0, 2.5}};
        case StateFamily::fock:
            break;
    }
    throw InputError("fit_parametric: family '" + std::string(family_name(f)) +
                     "' has no continuous parameters; use the free-distribution fit");
}

VectorXd family_values(const StateSpec& s) {
    switch (s.family) {
        case StateFamily::coherent:
            return VectorXd::Constant(1, std::abs(s.alpha));
        case StateFamily::thermal:
            return VectorXd::Constant(1, s.nbar);
        case StateFamily::squeezed_vacuum:
        case StateFamily::squeezed_fock:
            return VectorXd::Constant(1, std::abs(s.r));
        case StateFamily::squeezed_thermal: {
            VectorXd v(2);
            v << s.nbar, std::abs(s.r);
            return v;
        }
        case StateFamily::fock:
            break;
    }
    return {};
}

StateSpec with_values(const StateSpec& base, const VectorXd& theta) {
    switch (base.family) {
        case StateFamily::coherent:
            return StateSpec::coherent(Complex(theta(0), 0.0));
        case StateFamily::thermal:
            return StateSpec::thermal(theta(0));
        case StateFamily::squeezed_vacuum:
            return StateSpec::squeezed_vacuum(Complex(theta(0), 0.0));
        case StateFamily::squeezed_fock:
            return StateSpec::squeezed_fock(base.n, Complex(theta(0), 0.0));
        case StateFamily::squeezed_thermal:
            return StateSpec::squeezed_thermal(theta(0), Complex(theta(1), 0.0));
        case StateFamily::fock:
            break;
    }
    return base;
}

}  // namespace

FitResult fit_parametric(const Spectrum& spectrum, const StateSpec& params0,
                         std::span<const double> centers, const DriveParams& drive,
                         const DetectionOptions& detection) {
    spectrum.validate();
    drive.validate();
    params0.validate();
    check_centers(centers);
    const FamilyLayout layout = family_layout(params0.family);
    const Index k = static_cast<Index>(layout.names.size());
    const bool eta_free = !detection.fixed_eta;
    const Index dim = k + (eta_free ? 1 : 0) + 1;
    const int n_max = static_cast<int>(centers.size()) - 1;

    const VectorXd y = as_vector(spectrum.p_up);
    const MatrixXd f = peak_matrix(spectrum.detuning, centers, drive);
    std::vector<int> hidden;
    const MatrixXd f_vis = visible_part(f, &hidden);

    auto populations = [&](const VectorXd& theta) -> VectorXd {
        return expected_populations(with_values(params0, theta), n_max).p();
    };
    auto eta_of = [&](const VectorXd& x) { return eta_free ? x(k) : *detection.fixed_eta; };
    auto pop_jacobian = [&](const VectorXd& theta) {
        MatrixXd dp(n_max + 1, k);
        for (Index j = 0; j < k; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
            VectorXd up = theta;
            VectorXd down = theta;
            up(j) += h;
            down(j) -= h;
            double span = 2.0 * h;
            if (down(j) < layout.lower[j]) {
                down(j) = theta(j);
                span = h;
            }
            dp.col(j) = (populations(up) - populations(down)) / span;
        }
        return dp;
    };
    auto make_jacobian = [&](const MatrixXd& peaks) {
        return [&, peaks](const VectorXd& x) {
            const VectorXd theta = x.head(k);
            MatrixXd j(y.size(), dim);
            j.leftCols(k) = eta_of(x) * peaks * pop_jacobian(theta);
            if (eta_free) {
                j.col(k) = peaks * populations(theta);
            }
            j.col(dim - 1).setOnes();
            return j;
        };
    };

    Model m;
    m.predict = [&](const VectorXd& x) -> VectorXd {
        return (x(dim - 1) + eta_of(x) * (f * populations(x.head(k))).array()).matrix();
    };
    m.jacobian = make_jacobian(f);
    m.project = [&](const VectorXd& x) {
        VectorXd v = x;
        for (Index j = 0; j < k; ++j) {
            v(j) = std::clamp(v(j), layout.lower[j], layout.upper[j]);
        }
        v(dim - 1) = std::clamp(v(dim - 1), 0.0, kMaxBackground);
        if (eta_free) {
            v(k) = std::clamp(v(k), 0.0, 1.0 - v(dim - 1));
        }
        return v;
    };

    VectorXd x0(dim);
    x0.head(k) = family_values(params0);
    if (eta_free) {
        x0(k) = detection.eta0;
    }
    x0(dim - 1) = detection.g0;
    const WeightedFit wf = weighted_fit(m, y, spectrum.shots, m.project(x0));
    const VectorXd& x = wf.lsq.x;

    FitResult out;
    out.family = std::string(family_name(params0.family));
    out.names = layout.names;
    if (eta_free) {
        out.names.push_back("eta");
    }
    out.names.push_back("g");
    out.values.assign(x.data(), x.data() + x.size());
    fill_common(out, spectrum, m.predict(x), wf);

    const MatrixXd jw = wf.weights.asDiagonal() * m.jacobian(x);
    const MatrixXd jw_vis = wf.weights.asDiagonal() * make_jacobian(f_vis)(x);
    const Uncertainty u = constrained_covariance(jw, jw_vis, MatrixXd::Identity(dim, dim),
                                                 residual_scale(wf.lsq, spectrum.shots));
    fill_sigma(out, u);

    out.eta_hat = eta_of(x);
    out.eta_sigma = eta_free ? out.sigma[static_cast<std::size_t>(k)] : 0.0;
    out.g_hat = x(dim - 1);
    out.g_sigma = out.sigma.back();
    out.p_hat = expected_populations(with_values(params0, x.head(k)), n_max);
    const MatrixXd dp = pop_jacobian(x.head(k));
    const MatrixXd p_cov = dp * u.covariance.topLeftCorner(k, k) * dp.transpose();
    for (Index n = 0; n <= n_max; ++n) {
        out.p_sigma.push_back(std::sqrt(std::max(0.0, p_cov(n, n))));
    }
    for (int n : hidden) {
        out.warnings.push_back("peak " + std::to_string(n) + " is outside the scanned range");
    }
    warn_unresolved(out, centers, drive);
    return out;
}

FitResult fit_free_distribution(const Spectrum& spectrum, std::span<const double> centers,
                                const DriveParams& drive, int n_max,
                                const DetectionOptions& detection) {
    spectrum.validate();
    drive.validate();
    check_centers(centers);
    if (n_max < 0 || static_cast<std::size_t>(n_max) >= centers.size()) {
        throw InputError("fit_free_distribution: n_max = " + std::to_string(n_max) + " needs " +
                         std::to_string(n_max + 1) + " peak centers, got " +
                         std::to_string(centers.size()));
    }
    const bool eta_free = !detection.fixed_eta;
    if (!eta_free && !(*detection.fixed_eta > 0.0 && *detection.fixed_eta <= 1.0)) {
        throw InputError("fit_free_distribution: a fixed eta must lie in (0, 1]");
    }
    const std::span<const double> used = centers.first(static_cast<std::size_t>(n_max) + 1);
    const Index np = n_max + 1;
    const Index dim = np + (eta_free ? 1 : 0) + 1;

    const VectorXd y = as_vector(spectrum.p_up);
    const MatrixXd f = peak_matrix(spectrum.detuning, used, drive);
    std::vector<int> hidden;
    const MatrixXd f_vis = visible_part(f, &hidden);

    // With q = eta p the model g + F q is linear, and every constraint is linear:
    // q >= 0, 0 <= g <= 1/2, and sum q + g <= 1 (eta free) or sum q <= eta (eta fixed).
    MatrixXd a(y.size(), np + 1);
    a << f, VectorXd::Ones(y.size());
    MatrixXd G = MatrixXd::Zero(np + 3, np + 1);
    VectorXd h = VectorXd::Zero(np + 3);
    for (Index n = 0; n <= np; ++n) {
        G(n, n) = -1.0;
    }
    G(np + 1, np) = 1.0;
    h(np + 1) = kMaxBackground;
    G.row(np + 2).head(np).setOnes();
    if (eta_free) {
        G(np + 2, np) = 1.0;
        h(np + 2) = 1.0;
    } else {
        h(np + 2) = *detection.fixed_eta;
    }

    VectorXd z = VectorXd::Zero(np + 1);
    VectorXd w = shot_weights(y, spectrum.shots);
    int iterations = 0;
    bool converged = false;
    const int passes = spectrum.shots ? 10 : 1;
    for (int pass = 0; pass < passes; ++pass) {
        const MatrixXd aw = w.asDiagonal() * a;
        const QpResult qp = solve_qp(aw.transpose() * aw, aw.transpose() * w.cwiseProduct(y), G, h,
                                     VectorXd::Zero(np + 1));
        z = qp.z;
        iterations += qp.iterations;
        converged = qp.converged;
        if (!spectrum.shots) {
            break;
        }
        const VectorXd next = shot_weights(a * z, spectrum.shots);
        const double change = ((next - w).cwiseAbs().array() / w.array()).maxCoeff();
        w = next;
        if (change < 1e-8) {
            break;
        }
    }

    const double eta = eta_free ? z.head(np).sum() : *detection.fixed_eta;
    const double g = z(np);
    VectorXd p = VectorXd::Zero(np);
    FitResult out;
    if (eta > 1e-12) {
        p = (z.head(np) / eta).cwiseMax(0.0);
        if (eta_free) {
            p /= p.sum();
        }
    } else {
        out.warnings.push_back("no sideband signal: eta and the distribution are undetermined");
    }

    out.family = "free";
    for (Index n = 0; n < np; ++n) {
        out.names.push_back("p" + std::to_string(n));
    }
    if (eta_free) {
        out.names.push_back("eta");
    }
    out.names.push_back("g");
    VectorXd x(dim);
    x.head(np) = p;
    if (eta_free) {
        x(np) = eta;
    }
    x(dim - 1) = g;
    out.values.assign(x.data(), x.data() + x.size());

    const VectorXd model = a * z;
    const VectorXd resid = y - model;
    out.residuals.assign(resid.data(), resid.data() + resid.size());
    out.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
    out.iterations = iterations;
    out.converged = converged;
    if (!converged) {
        out.warnings.push_back("active-set solver stopped after " + std::to_string(iterations) +
                               " iterations");
    }

    auto jacobian = [&](const MatrixXd& peaks) {
        MatrixXd j(y.size(), dim);
        j.leftCols(np) = eta * peaks;
        if (eta_free) {
            j.col(np) = peaks * p;
        }
        j.col(dim - 1).setOnes();
        return MatrixXd(w.asDiagonal() * j);
    };
    MatrixXd constraints(eta_free ? 1 : 0, dim);
    if (eta_free) {
        constraints.setZero();
        constraints.leftCols(np).setOnes();
    }
    const MatrixXd tangent = tangent_basis(constraints, dim);
    double scale = 1.0;
    if (!spectrum.shots) {
        const Index dof = y.size() - tangent.cols();
        scale = dof > 0 ? resid.cwiseProduct(w).squaredNorm() / static_cast<double>(dof) : 1.0;
    }
    const Uncertainty u = constrained_covariance(jacobian(f), jacobian(f_vis), tangent, scale);
    fill_sigma(out, u);

    out.eta_hat = eta;
    out.eta_sigma = eta_free ? out.sigma[static_cast<std::size_t>(np)] : 0.0;
    out.g_hat = g;
    out.g_sigma = out.sigma.back();
    out.p_hat = PhononDistribution(p, std::max(0.0, 1.0 - p.sum()));
    out.p_sigma.assign(out.sigma.begin(), out.sigma.begin() + np);
    for (int n : hidden) {
        out.warnings.push_back("peak " + std::to_string(n) + " is outside the scanned range");
    }
    warn_unresolved(out, used, drive);
    return out;
}

nlohmann::json to_json(const FitResult& fit) {
    nlohmann::json j;
    j["family"] = fit.family;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json sigma = nlohmann::json::object();
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        params[fit.names[i]] = fit.values[i];
        sigma[fit.names[i]] = fit.sigma[i];
    }
    j["params"] = params;
    j["param_sigma"] = sigma;
    j["p_hat"] = std::vector<double>(fit.p_hat.p().data(), fit.p_hat.p().data() + fit.p_hat.size());
    j["p_sigma"] = fit.p_sigma;
    j["p_tail"] = fit.p_hat.tail();
    j["eta_hat"] = fit.eta_hat;
    j["eta_sigma"] = fit.eta_sigma;
    j["g_hat"] = fit.g_hat;
    j["g_sigma"] = fit.g_sigma;
    j["residual_rms"] = fit.residual_rms;
    j["residuals"] = fit.residuals;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["singular"] = fit.singular;
    if (fit.singular) {
        nlohmann::json dir = nlohmann::json::object();
        for (std::size_t i = 0; i < fit.names.size(); ++i) {
            dir[fit.names[i]] = fit.degenerate_direction[i];
        }
        j["degenerate_direction"] = dir;
    }
    j["warnings"] = fit.warnings;
    return j;
}

}  // namespace kerrsim
