#include "kerrsim/fock.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kerrsim/error.hpp"

namespace kerrsim {

void FockCutoff::validate() const {
    if (n_a_max < 1) {
        throw InputError("FockCutoff: n_a_max must be >= 1, got " + std::to_string(n_a_max));
    }
    if (n_b_max < 2) {
        throw InputError("FockCutoff: n_b_max must be >= 2 (mode b exchanges quanta in pairs), got " +
                         std::to_string(n_b_max));
    }
}

Index FockCutoff::dim() const { return mode_block() * (with_qubit ? 2 : 1); }

Index tensor_basis_index(int n_a, int n_b, const FockCutoff& cutoff, std::optional<Qubit> qubit) {
    cutoff.validate();
    if (n_a < 0 || n_a > cutoff.n_a_max) {
        throw InputError("tensor_basis_index: n_a = " + std::to_string(n_a) + " outside [0, " +
                         std::to_string(cutoff.n_a_max) + "]");
    }
    if (n_b < 0 || n_b > cutoff.n_b_max) {
        throw InputError("tensor_basis_index: n_b = " + std::to_string(n_b) + " outside [0, " +
                         std::to_string(cutoff.n_b_max) + "]");
    }
    Index q = 0;
    if (qubit) {
        if (!cutoff.with_qubit && *qubit == Qubit::up) {
            throw InputError("tensor_basis_index: qubit = up but cutoff has no qubit factor");
        }
        q = static_cast<Index>(*qubit);
    }
    return (q * (cutoff.n_a_max + 1) + n_a) * (cutoff.n_b_max + 1) + n_b;
}

BasisLabel basis_label(Index index, const FockCutoff& cutoff) {
    if (index < 0 || index >= cutoff.dim()) {
        throw InputError("basis_label: index " + std::to_string(index) + " outside the basis");
    }
    const Index nb = cutoff.n_b_max + 1;
    const Index na = cutoff.n_a_max + 1;
    BasisLabel label;
    label.n_b = static_cast<int>(index % nb);
    label.n_a = static_cast<int>((index / nb) % na);
    label.qubit = (index / (nb * na)) == 0 ? Qubit::down : Qubit::up;
    return label;
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

FockOperator::FockOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
        throw InputError("FockOperator: matrix must be square");
    }
}

double FockOperator::hermiticity_defect() const { return max_abs(m_ - m_.adjoint()); }

FockOperator FockOperator::hermitian(Matrix m) {
    FockOperator op(std::move(m));
    const double scale = max_abs(op.m_);
    const double defect = op.hermiticity_defect();
    if (defect > 1e-12 * scale) {
        std::ostringstream msg;
        msg << "FockOperator: matrix is not Hermitian, max|M - M^dagger| = " << defect
            << " (scale " << scale << ")";
        throw NumericalError(msg.str());
    }
    op.hermitian_ = true;
    return op;
}

FockOperator FockOperator::adjoint() const {
    FockOperator out(Matrix(m_.adjoint()));
    out.hermitian_ = hermitian_;
    return out;
}

namespace {

void require_same_dim(const FockOperator& x, const FockOperator& y, const char* what) {
    if (x.dim() != y.dim()) {
        throw InputError(std::string(what) + ": dimension mismatch " + std::to_string(x.dim()) +
                         " vs " + std::to_string(y.dim()));
    }
}

}  // namespace

FockOperator operator+(const FockOperator& x, const FockOperator& y) {
    require_same_dim(x, y, "operator+");
    FockOperator out(Matrix(x.m_ + y.m_));
    out.hermitian_ = x.hermitian_ && y.hermitian_;
    return out;
}

FockOperator operator-(const FockOperator& x, const FockOperator& y) {
    require_same_dim(x, y, "operator-");
    FockOperator out(Matrix(x.m_ - y.m_));
    out.hermitian_ = x.hermitian_ && y.hermitian_;
    return out;
}

FockOperator operator*(const FockOperator& x, const FockOperator& y) {
    require_same_dim(x, y, "operator*");
    return FockOperator(Matrix(x.m_ * y.m_));
}

FockOperator operator*(Complex s, const FockOperator& x) {
    FockOperator out(Matrix(s * x.m_));
    out.hermitian_ = x.hermitian_ && s.imag() == 0.0;
    return out;
}

Matrix kron(const Matrix& x, const Matrix& y) {
    Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        }
    }
    return out;
}

FockOperator single_mode_annihilation(int n_max) {
    if (n_max < 0) {
        throw InputError("single_mode_annihilation: n_max must be >= 0");
    }
    Matrix m = Matrix::Zero(n_max + 1, n_max + 1);
    for (int n = 1; n <= n_max; ++n) {
        m(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return FockOperator(std::move(m));
}

namespace {

// Embeds single-factor matrices as qubit ⊗ a ⊗ b.
Matrix embed(const FockCutoff& cutoff, const Matrix& qubit, const Matrix& a, const Matrix& b) {
    const Matrix motional = kron(a, b);
    return cutoff.with_qubit ? kron(qubit, motional) : motional;
}

Matrix eye(Index n) { return Matrix::Identity(n, n); }

}  // namespace

FockOperator identity_op(const FockCutoff& cutoff) {
    cutoff.validate();
    return FockOperator::hermitian(eye(cutoff.dim()));
}

FockOperator annihilation_op(const FockCutoff& cutoff, Mode mode) {
    cutoff.validate();
    const Matrix qa = eye(2);
    if (mode == Mode::axial) {
        return FockOperator(embed(cutoff, qa, single_mode_annihilation(cutoff.n_a_max).matrix(),
                                  eye(cutoff.n_b_max + 1)));
    }
    return FockOperator(embed(cutoff, qa, eye(cutoff.n_a_max + 1),
                              single_mode_annihilation(cutoff.n_b_max).matrix()));
}

FockOperator creation_op(const FockCutoff& cutoff, Mode mode) {
    return annihilation_op(cutoff, mode).adjoint();
}

FockOperator number_op(const FockCutoff& cutoff, Mode mode) {
    const auto a = annihilation_op(cutoff, mode);
    return FockOperator::hermitian(a.matrix().adjoint() * a.matrix());
}

FockOperator sigma_plus(const FockCutoff& cutoff) {
    cutoff.validate();
    if (!cutoff.with_qubit) {
        throw InputError("sigma_plus: cutoff has no qubit factor");
    }
    Matrix s = Matrix::Zero(2, 2);
    s(1, 0) = 1.0;
    return FockOperator(embed(cutoff, s, eye(cutoff.n_a_max + 1), eye(cutoff.n_b_max + 1)));
}

FockOperator qubit_up_projector(const FockCutoff& cutoff) {
    const auto sp = sigma_plus(cutoff);
    return FockOperator::hermitian(sp.matrix() * sp.matrix().adjoint());
}

FockOperator commutator(const FockOperator& x, const FockOperator& y) { return x * y - y * x; }

FockState FockState::pure(Vector psi) {
    const double norm = psi.norm();
    if (std::abs(norm - 1.0) > kNormTolerance) {
        throw InputError("FockState::pure: norm " + std::to_string(norm) + " differs from 1");
    }
    return FockState(std::move(psi));
}

FockState FockState::mixed(Matrix rho) {
    if (rho.rows() != rho.cols()) {
        throw InputError("FockState::mixed: density matrix must be square");
    }
    const double defect = max_abs(rho - rho.adjoint());
    if (defect > kNormTolerance) {
        throw InputError("FockState::mixed: density matrix not Hermitian (defect " +
                         std::to_string(defect) + ")");
    }
    const double trace = rho.trace().real();
    if (std::abs(trace - 1.0) > kNormTolerance) {
        throw InputError("FockState::mixed: trace " + std::to_string(trace) + " differs from 1");
    }
    // Hermitize before the spectrum check so round-off asymmetry does not leak in.
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().size() > 0 && solver.eigenvalues().minCoeff() < -kNormTolerance) {
        throw InputError("FockState::mixed: negative eigenvalue " +
                         std::to_string(solver.eigenvalues().minCoeff()));
    }
    return FockState(herm);
}

FockState FockState::basis(Index dim, Index k) {
    if (k < 0 || k >= dim) {
        throw InputError("FockState::basis: index " + std::to_string(k) + " outside dimension " +
                         std::to_string(dim));
    }
    Vector psi = Vector::Zero(dim);
    psi(k) = 1.0;
    return FockState(std::move(psi));
}

Index FockState::dim() const {
    return is_pure() ? std::get<Vector>(data_).size() : std::get<Matrix>(data_).rows();
}

const Vector& FockState::vector() const {
    if (!is_pure()) {
        throw InputError("FockState::vector: state is mixed");
    }
    return std::get<Vector>(data_);
}

Matrix FockState::density() const {
    if (is_pure()) {
        const auto& psi = std::get<Vector>(data_);
        return psi * psi.adjoint();
    }
    return std::get<Matrix>(data_);
}

RealVector FockState::populations() const {
    if (is_pure()) {
        return std::get<Vector>(data_).cwiseAbs2();
    }
    return std::get<Matrix>(data_).diagonal().real();
}

FockState renormalized(const Vector& psi) {
    const double norm = psi.norm();
    if (norm == 0.0) {
        throw NumericalError("renormalized: zero vector");
    }
    return FockState::pure(psi / norm);
}

FockState renormalized(const Matrix& rho) {
    const double trace = rho.trace().real();
    if (trace <= 0.0) {
        throw NumericalError("renormalized: non-positive trace");
    }
    return FockState::mixed(rho / trace);
}

Eigensystem eigh(const FockOperator& h) {
    const double scale = max_abs(h.matrix());
    const double defect = h.hermiticity_defect();
    if (defect > 1e-12 * scale) {
        std::ostringstream msg;
        msg << "eigh: operator is not Hermitian, max|H - H^dagger| = " << defect << " (scale "
            << scale << ")";
        throw NumericalError(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h.matrix());
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigh: eigensolver did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

FockState evolve(const FockState& state, const Eigensystem& eig, double t) {
    if (state.dim() != eig.vectors.rows()) {
        throw InputError("evolve: state dimension " + std::to_string(state.dim()) +
                         " does not match Hamiltonian dimension " +
                         std::to_string(eig.vectors.rows()));
    }
    if (t < 0.0) {
        throw InputError("evolve: negative time");
    }
    const Vector phases = (eig.values * Complex(0.0, -t)).array().exp().matrix();
    if (state.is_pure()) {
        Vector c = eig.vectors.adjoint() * state.vector();
        c = c.cwiseProduct(phases);
        return FockState::pure(eig.vectors * c);
    }
    const Matrix u = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
    return FockState::mixed(u * state.density() * u.adjoint());
}

FockState evolve(const FockState& state, const FockOperator& h, double t) {
    if (state.dim() != h.dim()) {
        throw InputError("evolve: state dimension " + std::to_string(state.dim()) +
                         " does not match Hamiltonian dimension " + std::to_string(h.dim()));
    }
    return evolve(state, eigh(h), t);
}

Complex expectation(const FockState& state, const FockOperator& op) {
    if (state.dim() != op.dim()) {
        throw InputError("expectation: state dimension " + std::to_string(state.dim()) +
                         " does not match operator dimension " + std::to_string(op.dim()));
    }
    if (state.is_pure()) {
        const auto& psi = state.vector();
        return psi.dot(op.matrix() * psi);
    }
    return (state.density() * op.matrix()).trace();
}

}  // namespace kerrsim
