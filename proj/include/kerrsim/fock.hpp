#pragma once

// Truncated Fock-space linear algebra for two bosonic modes (axial a, radial b)
// with an optional spectator qubit.
//
// Basis ordering is row-major with the qubit slowest, then mode a, then mode b
// fastest:
//
//     index = (q * (n_a_max + 1) + n_a) * (n_b_max + 1) + n_b,   q = 0 (down), 1 (up)
//
// Hamiltonians are stored as H/hbar in rad/s; times are in seconds.

#include <complex>
#include <optional>
#include <variant>

#include <Eigen/Dense>

namespace kerrsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Mode { axial, radial };
enum class Qubit { down = 0, up = 1 };

struct FockCutoff {
    int n_a_max = 6;
    int n_b_max = 20;
    bool with_qubit = false;

    // Throws InputError unless n_a_max >= 1 and n_b_max >= 2.
    void validate() const;
    Index dim() const;
    Index mode_block() const { return Index(n_a_max + 1) * (n_b_max + 1); }
};

struct BasisLabel {
    int n_a = 0;
    int n_b = 0;
    Qubit qubit = Qubit::down;
};

Index tensor_basis_index(int n_a, int n_b, const FockCutoff& cutoff,
                         std::optional<Qubit> qubit = std::nullopt);
BasisLabel basis_label(Index index, const FockCutoff& cutoff);

// Dense square operator. The Hermitian flag is only set after verification:
// max|M - M^dagger| < 1e-12 * max|M|.
class FockOperator {
public:
    FockOperator() = default;
    explicit FockOperator(Matrix m);

    static FockOperator hermitian(Matrix m);

    const Matrix& matrix() const { return m_; }
    Index dim() const { return m_.rows(); }
    bool is_hermitian() const { return hermitian_; }
    double hermiticity_defect() const;

    FockOperator adjoint() const;

    friend FockOperator operator+(const FockOperator& x, const FockOperator& y);
    friend FockOperator operator-(const FockOperator& x, const FockOperator& y);
    friend FockOperator operator*(const FockOperator& x, const FockOperator& y);
    friend FockOperator operator*(Complex s, const FockOperator& x);

private:
    Matrix m_;
    bool hermitian_ = false;
};

double max_abs(const Matrix& m);

FockOperator identity_op(const FockCutoff& cutoff);
FockOperator annihilation_op(const FockCutoff& cutoff, Mode mode);
FockOperator creation_op(const FockCutoff& cutoff, Mode mode);
FockOperator number_op(const FockCutoff& cutoff, Mode mode);
// |up><down| on the qubit factor; requires cutoff.with_qubit.
FockOperator sigma_plus(const FockCutoff& cutoff);
FockOperator qubit_up_projector(const FockCutoff& cutoff);
FockOperator commutator(const FockOperator& x, const FockOperator& y);

// Single-oscillator annihilation operator on levels 0..n_max.
FockOperator single_mode_annihilation(int n_max);

Matrix kron(const Matrix& x, const Matrix& y);

class FockState {
public:
    static constexpr double kNormTolerance = 1e-10;

    // Validating constructors; throw InputError on broken invariants.
    static FockState pure(Vector psi);
    static FockState mixed(Matrix rho);
    static FockState basis(Index dim, Index k);

    bool is_pure() const { return std::holds_alternative<Vector>(data_); }
    Index dim() const;
    const Vector& vector() const;
    Matrix density() const;
    RealVector populations() const;

private:
    explicit FockState(Vector psi) : data_(std::move(psi)) {}
    explicit FockState(Matrix rho) : data_(std::move(rho)) {}

    std::variant<Vector, Matrix> data_;
};

// Builds a state from an unnormalized vector/density by dividing out the norm/trace.
FockState renormalized(const Vector& psi);
FockState renormalized(const Matrix& rho);

struct Eigensystem {
    RealVector values;  // ascending
    Matrix vectors;     // columns are eigenvectors
};

// Throws NumericalError (with the measured asymmetry) for non-Hermitian input.
Eigensystem eigh(const FockOperator& h);

FockState evolve(const FockState& state, const FockOperator& h, double t);
FockState evolve(const FockState& state, const Eigensystem& eig, double t);
Complex expectation(const FockState& state, const FockOperator& op);

}  // namespace kerrsim
