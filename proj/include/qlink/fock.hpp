#ifndef QLINK_FOCK_HPP
#define QLINK_FOCK_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "qlink/errors.hpp"

// Truncated-Fock-space linear algebra: density matrices, ladder operators,
// unitaries, channels, partial trace. Everything here is a pure function of
// its inputs; values are immutable after construction and safe to share
// across threads.

namespace qlink {

using Index = Eigen::Index;

template <class T = double>
using Complex = std::complex<T>;

template <class T = double>
using ComplexMatrix = Eigen::Matrix<Complex<T>, Eigen::Dynamic, Eigen::Dynamic>;

template <class T = double>
using ComplexVector = Eigen::Matrix<Complex<T>, Eigen::Dynamic, 1>;

namespace tol {
inline constexpr double hermiticity = 1e-12;
inline constexpr double trace_unit = 1e-10;
inline constexpr double psd_floor = -1e-10;
inline constexpr double unitarity = 1e-10;
} // namespace tol

/// Density operator on a truncated Fock space, optionally with a tensor
/// product structure (per-subsystem dimensions must multiply to dim()).
///
/// Construction validates hermiticity, unit trace and positivity.
/// Eigenvalues in [-1e-10, 0) are clipped to zero and the matrix is
/// renormalized; anything more negative is rejected.
template <class T = double>
class DensityMatrix {
public:
    DensityMatrix(ComplexMatrix<T> matrix, std::vector<Index> subsystem_dims)
        : matrix_(std::move(matrix)), dims_(std::move(subsystem_dims)) {
        validate(T(1));
    }

    explicit DensityMatrix(ComplexMatrix<T> matrix)
        : DensityMatrix(std::move(matrix), {}) {
        dims_ = {matrix_.rows()};
    }

    /// A state carrying less than unit probability weight (trace <= 1).
    /// Used when conditioning weight has been deliberately removed; all
    /// other invariants still hold.
    static DensityMatrix subnormalized(ComplexMatrix<T> matrix,
                                       std::vector<Index> subsystem_dims) {
        DensityMatrix out(Tag{}, std::move(matrix), std::move(subsystem_dims));
        out.validate(out.matrix_.trace().real());
        return out;
    }

    Index dim() const { return matrix_.rows(); }
    const ComplexMatrix<T>& matrix() const { return matrix_; }
    const std::vector<Index>& subsystem_dims() const { return dims_; }
    Index num_subsystems() const { return static_cast<Index>(dims_.size()); }

    T trace() const { return matrix_.trace().real(); }

    T purity() const { return (matrix_ * matrix_).trace().real(); }

    T mean_photon_number() const {
        T n = 0;
        if (dims_.size() <= 1) {
            for (Index k = 0; k < dim(); ++k) n += T(k) * matrix_(k, k).real();
            return n;
        }
        // Joint state: total photon number over all subsystems.
        for (Index k = 0; k < dim(); ++k) {
            Index rem = k, tot = 0;
            for (auto it = dims_.rbegin(); it != dims_.rend(); ++it) {
                tot += rem % *it;
                rem /= *it;
            }
            n += T(tot) * matrix_(k, k).real();
        }
        return n;
    }

private:
    struct Tag {};
    DensityMatrix(Tag, ComplexMatrix<T> matrix, std::vector<Index> dims)
        : matrix_(std::move(matrix)), dims_(std::move(dims)) {
        if (dims_.empty()) dims_ = {matrix_.rows()};
    }

    void validate(T expected_trace) {
        if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1)
            throw ValidationError("density matrix must be square and non-empty");
        Index prod = std::accumulate(dims_.begin(), dims_.end(), Index(1),
                                     std::multiplies<Index>());
        if (prod != matrix_.rows())
            throw ValidationError("subsystem dimensions do not multiply to the matrix dimension");
        const T herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
        if (herm > T(tol::hermiticity))
            throw ValidationError("density matrix is not Hermitian (deviation " +
                                  std::to_string(static_cast<double>(herm)) + ")");
        matrix_ = T(0.5) * (matrix_ + matrix_.adjoint().eval());
        const T tr = matrix_.trace().real();
        if (std::abs(tr - expected_trace) > T(tol::trace_unit) ||
            expected_trace > T(1) + T(tol::trace_unit) || expected_trace <= T(0))
            throw ValidationError("density matrix trace " + std::to_string(static_cast<double>(tr)) +
                                  " outside tolerance of expected " +
                                  std::to_string(static_cast<double>(expected_trace)));
        Eigen::SelfAdjointEigenSolver<ComplexMatrix<T>> es(matrix_);
        const auto& evals = es.eigenvalues();
        if (evals.minCoeff() < T(tol::psd_floor))
            throw ValidationError("density matrix is not positive semidefinite (min eigenvalue " +
                                  std::to_string(static_cast<double>(evals.minCoeff())) + ")");
        if (evals.minCoeff() < T(0)) {
            auto clipped = evals.cwiseMax(T(0)).eval();
            matrix_ = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
            matrix_ *= Complex<T>(tr / matrix_.trace().real(), 0);
        }
    }

    ComplexMatrix<T> matrix_;
    std::vector<Index> dims_;
};

using QuantumState = DensityMatrix<double>;

template <class T = double>
ComplexMatrix<T> identity_op(Index dim) {
    return ComplexMatrix<T>::Identity(dim, dim);
}

/// Annihilation operator a with a|n> = sqrt(n)|n-1>.
template <class T = double>
ComplexMatrix<T> annihilation(Index dim) {
    ComplexMatrix<T> a = ComplexMatrix<T>::Zero(dim, dim);
    for (Index n = 1; n < dim; ++n) a(n - 1, n) = Complex<T>(std::sqrt(T(n)), 0);
    return a;
}

template <class T = double>
ComplexMatrix<T> creation(Index dim) {
    return annihilation<T>(dim).adjoint();
}

template <class T = double>
ComplexMatrix<T> number_operator(Index dim) {
    ComplexMatrix<T> n = ComplexMatrix<T>::Zero(dim, dim);
    for (Index k = 0; k < dim; ++k) n(k, k) = Complex<T>(T(k), 0);
    return n;
}

/// Kronecker product, first factor = most significant subsystem.
template <class DerivedA, class DerivedB>
auto tensor(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                              a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

template <class T = double>
bool is_unitary(const ComplexMatrix<T>& u, T tolerance = T(tol::unitarity)) {
    return ((u.adjoint() * u - identity_op<T>(u.rows())).norm()) <= tolerance;
}

/// Displacement D(alpha) = exp(alpha a^dag - alpha* a).
template <class T = double>
ComplexMatrix<T> displacement(Complex<T> alpha, Index dim) {
    ComplexMatrix<T> gen = alpha * creation<T>(dim) - std::conj(alpha) * annihilation<T>(dim);
    return gen.exp();
}

/// Photon-number parity, diag((-1)^n).
template <class T = double>
ComplexMatrix<T> parity_operator(Index dim) {
    ComplexMatrix<T> p = ComplexMatrix<T>::Zero(dim, dim);
    for (Index n = 0; n < dim; ++n) p(n, n) = Complex<T>((n % 2 == 0) ? T(1) : T(-1), 0);
    return p;
}

/// Self-Kerr evolution for H = (chi/2) a^dag^2 a^2: each Fock level n
/// acquires phase exp(-i (chi/2) n(n-1) t).
template <class T = double>
ComplexMatrix<T> kerr_unitary(T chi, T t, Index dim) {
    ComplexMatrix<T> u = ComplexMatrix<T>::Zero(dim, dim);
    for (Index n = 0; n < dim; ++n) {
        T phase = T(0.5) * chi * T(n) * T(n - 1) * t;
        u(n, n) = std::exp(Complex<T>(0, -phase));
    }
    return u;
}

/// Two-mode beamsplitter U = exp(-i H_bs) with
/// H_bs = (-i theta/2)(a1^dag a2 - a1 a2^dag), both ports of dimension dim.
///
/// Sign convention (pinned, the source material leaves it open): theta = pi/2
/// maps |1,0> to (|1,0> + |0,1>)/sqrt(2) with +1 relative phase, so a
/// half-release of one photon targets the Bell state (|10>+|01>)/sqrt(2).
template <class T = double>
ComplexMatrix<T> beamsplitter_unitary(T theta, Index dim) {
    ComplexMatrix<T> a = annihilation<T>(dim);
    ComplexMatrix<T> ad = creation<T>(dim);
    ComplexMatrix<T> k = tensor(ad, a) - tensor(a, ad);
    return ((-theta / T(2)) * k).exp();
}

/// Pure Fock state |n><n|.
template <class T = double>
DensityMatrix<T> make_fock(Index n, Index dim) {
    if (n < 0 || n >= dim)
        throw ValidationError("Fock index " + std::to_string(n) +
                              " out of range for dimension " + std::to_string(dim));
    ComplexMatrix<T> rho = ComplexMatrix<T>::Zero(dim, dim);
    rho(n, n) = Complex<T>(1, 0);
    return DensityMatrix<T>(std::move(rho), {dim});
}

/// Normalized coherent-state vector within the truncation.
template <class T = double>
ComplexVector<T> coherent_vector(Complex<T> alpha, Index dim) {
    ComplexVector<T> v(dim);
    v(0) = Complex<T>(1, 0);
    for (Index n = 1; n < dim; ++n)
        v(n) = v(n - 1) * alpha / Complex<T>(std::sqrt(T(n)), 0);
    v *= std::exp(Complex<T>(-T(0.5) * std::norm(alpha), 0));
    v.normalize();
    return v;
}

/// Coherent state |alpha><alpha|; requires |alpha|^2 <= dim/4 so the
/// truncated tail is negligible.
template <class T = double>
DensityMatrix<T> coherent_state(Complex<T> alpha, Index dim) {
    if (std::norm(alpha) > T(dim) / T(4))
        throw TruncationError("coherent amplitude |alpha|^2 = " +
                              std::to_string(static_cast<double>(std::norm(alpha))) +
                              " exceeds dim/4 truncation safety for dim " + std::to_string(dim));
    ComplexVector<T> v = coherent_vector(alpha, dim);
    return DensityMatrix<T>(ComplexMatrix<T>(v * v.adjoint()), {dim});
}

template <class T = double>
DensityMatrix<T> pure_state(const ComplexVector<T>& psi, std::vector<Index> dims) {
    ComplexVector<T> v = psi.normalized();
    return DensityMatrix<T>(ComplexMatrix<T>(v * v.adjoint()), std::move(dims));
}

template <class T = double>
DensityMatrix<T> apply_unitary(const DensityMatrix<T>& state, const ComplexMatrix<T>& u) {
    if (u.rows() != state.dim())
        throw ValidationError("unitary dimension does not match state");
    return DensityMatrix<T>(ComplexMatrix<T>(u * state.matrix() * u.adjoint()),
                            state.subsystem_dims());
}

/// Trace out every subsystem except `keep` (0-based).
template <class T = double>
DensityMatrix<T> partial_trace(const DensityMatrix<T>& state, Index keep) {
    const auto& dims = state.subsystem_dims();
    const Index ns = static_cast<Index>(dims.size());
    if (ns < 2) throw ValidationError("partial_trace requires at least two subsystems");
    if (keep < 0 || keep >= ns)
        throw ValidationError("partial_trace: subsystem index " + std::to_string(keep) +
                              " out of range");
    const Index dk = dims[keep];
    Index left = 1, right = 1;
    for (Index s = 0; s < keep; ++s) left *= dims[s];
    for (Index s = keep + 1; s < ns; ++s) right *= dims[s];

    ComplexMatrix<T> out = ComplexMatrix<T>::Zero(dk, dk);
    const auto& m = state.matrix();
    for (Index i = 0; i < dk; ++i)
        for (Index j = 0; j < dk; ++j) {
            Complex<T> acc(0, 0);
            for (Index l = 0; l < left; ++l)
                for (Index r = 0; r < right; ++r) {
                    Index row = (l * dk + i) * right + r;
                    Index col = (l * dk + j) * right + r;
                    acc += m(row, col);
                }
            out(i, j) = acc;
        }
    return DensityMatrix<T>(std::move(out), {dk});
}

/// Principal square root of a PSD Hermitian matrix (small negative
/// eigenvalues from roundoff are clipped).
template <class Derived>
auto sqrt_psd(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    using Real = typename Eigen::NumTraits<Scalar>::Real;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(m);
    auto vals = es.eigenvalues().cwiseMax(Real(0)).cwiseSqrt().eval();
    return Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(
        es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint());
}

/// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
template <class T = double>
T fidelity(const DensityMatrix<T>& rho, const DensityMatrix<T>& sigma) {
    if (rho.dim() != sigma.dim()) throw ValidationError("fidelity: dimension mismatch");
    ComplexMatrix<T> s = sqrt_psd(rho.matrix());
    ComplexMatrix<T> inner = s * sigma.matrix() * s;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<T>> es(inner);
    T acc = es.eigenvalues().cwiseMax(T(0)).cwiseSqrt().sum();
    return acc * acc;
}

/// Fidelity against a pure target, <psi|rho|psi>.
template <class T = double>
T fidelity(const DensityMatrix<T>& rho, const ComplexVector<T>& psi) {
    ComplexVector<T> v = psi.normalized();
    return (v.adjoint() * rho.matrix() * v)(0, 0).real();
}

template <class T = double>
T expectation(const DensityMatrix<T>& rho, const ComplexMatrix<T>& op) {
    return (rho.matrix() * op).trace().real();
}

/// Trace out one subsystem, keeping the joint structure of the rest.
template <class T = double>
DensityMatrix<T> trace_out(const DensityMatrix<T>& state, Index subsystem) {
    const auto& dims = state.subsystem_dims();
    const Index ns = static_cast<Index>(dims.size());
    if (ns < 2) throw ValidationError("trace_out requires at least two subsystems");
    if (subsystem < 0 || subsystem >= ns)
        throw ValidationError("trace_out: subsystem index out of range");
    const Index dt_ = dims[subsystem];
    Index left = 1, right = 1;
    for (Index s = 0; s < subsystem; ++s) left *= dims[s];
    for (Index s = subsystem + 1; s < ns; ++s) right *= dims[s];

    ComplexMatrix<T> out = ComplexMatrix<T>::Zero(left * right, left * right);
    const auto& m = state.matrix();
    for (Index l = 0; l < left; ++l)
        for (Index r = 0; r < right; ++r)
            for (Index l2 = 0; l2 < left; ++l2)
                for (Index r2 = 0; r2 < right; ++r2) {
                    Complex<T> acc(0, 0);
                    for (Index d = 0; d < dt_; ++d)
                        acc += m((l * dt_ + d) * right + r, (l2 * dt_ + d) * right + r2);
                    out(l * right + r, l2 * right + r2) = acc;
                }
    std::vector<Index> newdims;
    for (Index s = 0; s < ns; ++s)
        if (s != subsystem) newdims.push_back(dims[s]);
    const T tr = out.trace().real();
    return (std::abs(tr - T(1)) <= T(tol::trace_unit))
               ? DensityMatrix<T>(std::move(out), std::move(newdims))
               : DensityMatrix<T>::subnormalized(std::move(out), std::move(newdims));
}

/// Lift a two-site operator onto subsystems (p, q) of a product space;
/// p indexes the most significant factor of the pair.
template <class T = double>
ComplexMatrix<T> embed_two_site(const ComplexMatrix<T>& op, const std::vector<Index>& dims,
                                Index p, Index q) {
    const Index ns = static_cast<Index>(dims.size());
    if (p == q || p < 0 || q < 0 || p >= ns || q >= ns)
        throw ValidationError("embed_two_site: bad subsystem indices");
    if (op.rows() != dims[p] * dims[q])
        throw ValidationError("embed_two_site: operator dimension mismatch");
    Index total = 1;
    for (Index d : dims) total *= d;

    std::vector<Index> strides(ns, 1);
    for (Index s = ns - 2; s >= 0; --s) strides[s] = strides[s + 1] * dims[s + 1];

    auto digit = [&](Index idx, Index site) { return (idx / strides[site]) % dims[site]; };

    ComplexMatrix<T> out = ComplexMatrix<T>::Zero(total, total);
    for (Index r = 0; r < total; ++r)
        for (Index c = 0; c < total; ++c) {
            bool same = true;
            for (Index s = 0; s < ns; ++s)
                if (s != p && s != q && digit(r, s) != digit(c, s)) {
                    same = false;
                    break;
                }
            if (!same) continue;
            Index ro = digit(r, p) * dims[q] + digit(r, q);
            Index co = digit(c, p) * dims[q] + digit(c, q);
            out(r, c) = op(ro, co);
        }
    return out;
}

/// Pure attenuation of one subsystem: beamsplitter with a vacuum ancilla at
/// power transmission eta, ancilla traced out.
template <class T = double>
DensityMatrix<T> attenuate_subsystem(const DensityMatrix<T>& state, Index subsystem, T eta) {
    if (eta < T(0) || eta > T(1))
        throw ValidationError("attenuate_subsystem: transmission must lie in [0, 1]");
    auto dims = state.subsystem_dims();
    const Index ns = static_cast<Index>(dims.size());
    if (subsystem < 0 || subsystem >= ns)
        throw ValidationError("attenuate_subsystem: subsystem index out of range");
    const Index d = dims[subsystem];
    const T theta = T(2) * std::acos(std::min(T(1), std::sqrt(eta)));

    ComplexMatrix<T> vac = ComplexMatrix<T>::Zero(d, d);
    vac(0, 0) = Complex<T>(1, 0);
    ComplexMatrix<T> big = tensor(state.matrix(), vac);
    auto bigdims = dims;
    bigdims.push_back(d);

    ComplexMatrix<T> u = embed_two_site(beamsplitter_unitary<T>(theta, d), bigdims, subsystem, ns);
    ComplexMatrix<T> evolved = u * big * u.adjoint();
    DensityMatrix<T> joint = (std::abs(evolved.trace().real() - T(1)) <= T(tol::trace_unit))
                                 ? DensityMatrix<T>(std::move(evolved), bigdims)
                                 : DensityMatrix<T>::subnormalized(std::move(evolved), bigdims);
    return trace_out(joint, ns);
}

/// Single-mode convenience overload.
template <class T = double>
DensityMatrix<T> attenuator_channel(const DensityMatrix<T>& state, T eta) {
    return attenuate_subsystem(state, 0, eta);
}

} // namespace qlink

#endif
