#ifndef UNRAVEL_QOPS_HPP_
#define UNRAVEL_QOPS_HPP_

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "unravel/errors.hpp"

namespace unravel {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;
using CMatrix = Matrix<Complex>;
using CVector = Vector<Complex>;
using RVector = Vector<double>;
using Index = Eigen::Index;

struct Tolerances {
  double self_adjoint = 1e-10;
  double cp = 1e-9;
  double kraus_cutoff = 1e-12;
  double channel_sum = 1e-10;
};

template <typename Scalar>
class Superoperator {
 public:
  Superoperator() = default;
  Superoperator(Index dim, Matrix<Scalar> m) : dim_(dim), matrix_(std::move(m)) {
    if (matrix_.rows() != dim * dim || matrix_.cols() != dim * dim)
      throw ShapeError("superoperator must be d^2 x d^2");
  }

  static Superoperator identity(Index dim) {
    return {dim, Matrix<Scalar>::Identity(dim * dim, dim * dim)};
  }

  Index dim() const { return dim_; }
  const Matrix<Scalar>& matrix() const { return matrix_; }
  Matrix<Scalar>& matrix() { return matrix_; }

 private:
  Index dim_ = 0;
  Matrix<Scalar> matrix_;
};

using Superop = Superoperator<Complex>;

// Row-major flattening: component d*i+j holds entry (i,j).
template <typename Derived>
Vector<typename Derived::Scalar> reshape(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) throw ShapeError("reshape needs a square matrix");
  const Index d = m.rows();
  Vector<typename Derived::Scalar> v(d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) v(d * i + j) = m(i, j);
  return v;
}

template <typename Derived>
Matrix<typename Derived::Scalar> unreshape(const Eigen::MatrixBase<Derived>& v) {
  const auto d = static_cast<Index>(std::llround(std::sqrt(double(v.size()))));
  if (d * d != v.size()) throw ShapeError("unreshape needs a length d^2 vector");
  Matrix<typename Derived::Scalar> m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = v(d * i + j);
  return m;
}

template <typename Scalar>
Matrix<Scalar> apply(const Superoperator<Scalar>& s, const Matrix<Scalar>& rho) {
  return unreshape(s.matrix() * reshape(rho));
}

// res(A rho B) = (A kron B^T) res(rho)
template <typename DA, typename DB>
Matrix<typename DA::Scalar> sandwich(const Eigen::MatrixBase<DA>& a,
                                     const Eigen::MatrixBase<DB>& b) {
  return Eigen::kroneckerProduct(a.eval(), b.transpose().eval()).eval();
}

template <typename Scalar>
Matrix<Scalar> reshuffle(const Matrix<Scalar>& s) {
  const auto d = static_cast<Index>(std::llround(std::sqrt(double(s.rows()))));
  if (s.rows() != s.cols() || d * d != s.rows())
    throw ShapeError("reshuffle needs a d^2 x d^2 matrix");
  Matrix<Scalar> r(s.rows(), s.cols());
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index m = 0; m < d; ++m)
        for (Index n = 0; n < d; ++n) r(d * i + j, d * m + n) = s(d * i + m, d * j + n);
  return r;
}

template <typename Scalar>
Matrix<Scalar> reshuffle(const Superoperator<Scalar>& s) {
  return reshuffle(s.matrix());
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : double(m.cwiseAbs().maxCoeff());
}

template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  return max_abs(m - m.adjoint());
}

// Rotates v so that its largest-magnitude component (first on ties) is real positive.
template <typename Derived>
void fix_phase(Eigen::MatrixBase<Derived>& v) {
  Index k = 0;
  double best = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best) {
      best = std::abs(v(i));
      k = i;
    }
  }
  if (best > 0.0) v *= std::conj(v(k)) / std::abs(v(k));
}

template <typename Scalar>
struct Eigensystem {
  Vector<typename Eigen::NumTraits<Scalar>::Real> values;
  Matrix<Scalar> vectors;
};

// Descending eigenvalues of a Hermitian matrix with phase-fixed eigenvectors.
template <typename Scalar>
Eigensystem<Scalar> hermitian_eigensystem(const Matrix<Scalar>& h) {
  const Matrix<Scalar> sym = (h + h.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
  const Index n = h.rows();
  Eigensystem<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.values(k) = es.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
    auto col = out.vectors.col(k);
    fix_phase(col);
  }
  return out;
}

template <typename Scalar>
struct ChoiSpectrum {
  Vector<typename Eigen::NumTraits<Scalar>::Real> eigenvalues;
  Matrix<Scalar> eigenvectors;
  bool cp = false;
  double min_eigenvalue() const { return eigenvalues(eigenvalues.size() - 1); }
};

template <typename Scalar>
ChoiSpectrum<Scalar> choi_spectrum(const Superoperator<Scalar>& s,
                                   const Tolerances& tol = {}) {
  const Matrix<Scalar> r = reshuffle(s);
  if (hermiticity_defect(r) > tol.self_adjoint)
    throw NotSelfAdjointPreserving("dynamics not self-adjoint preserving");
  auto es = hermitian_eigensystem(r);
  ChoiSpectrum<Scalar> out{es.values, es.vectors, false};
  out.cp = out.min_eigenvalue() >= -tol.cp;
  return out;
}

template <typename Scalar>
struct SignedKrausSet {
  std::vector<int> signs;
  std::vector<Matrix<Scalar>> ops;

  std::size_t size() const { return ops.size(); }

  Matrix<Scalar> apply(const Matrix<Scalar>& rho) const {
    Matrix<Scalar> out = Matrix<Scalar>::Zero(rho.rows(), rho.cols());
    for (std::size_t n = 0; n < ops.size(); ++n)
      out += double(signs[n]) * ops[n] * rho * ops[n].adjoint();
    return out;
  }
};

template <typename Scalar>
SignedKrausSet<Scalar> kraus_decompose(const Superoperator<Scalar>& s,
                                       const Tolerances& tol = {}) {
  const auto spec = choi_spectrum(s, tol);
  SignedKrausSet<Scalar> out;
  for (Index k = 0; k < spec.eigenvalues.size(); ++k) {
    const double f = spec.eigenvalues(k);
    if (std::abs(f) < tol.kraus_cutoff) continue;
    out.signs.push_back(f > 0 ? 1 : -1);
    out.ops.push_back(unreshape(Vector<Scalar>(std::sqrt(std::abs(f)) *
                                               spec.eigenvectors.col(k))));
  }
  return out;
}

template <typename Scalar>
struct ChannelSum {
  bool proportional = false;
  double g = 0.0;            // proportionality constant, or largest eigenvalue otherwise
  Matrix<Scalar> deficiency;  // g*1 - sum L^dag L
  bool deficiency_psd = true;
};

template <typename Scalar>
ChannelSum<Scalar> check_channel_sum(const std::vector<Matrix<Scalar>>& channels,
                                     const Tolerances& tol = {}) {
  if (channels.empty()) throw ShapeError("empty channel list");
  const Index d = channels.front().rows();
  Matrix<Scalar> m = Matrix<Scalar>::Zero(d, d);
  for (const auto& l : channels) {
    if (l.rows() != d || l.cols() != d) throw ShapeError("channel dimension mismatch");
    m += l.adjoint() * l;
  }
  ChannelSum<Scalar> out;
  const double g = std::real(m.trace()) / double(d);
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(d, d);
  if (g > 0.0 && max_abs(m - g * id) <= tol.channel_sum) {
    out.proportional = true;
    out.g = g;
    out.deficiency = Matrix<Scalar>::Zero(d, d);
    return out;
  }
  const auto es = hermitian_eigensystem(m);
  out.g = es.values(0);
  out.deficiency = out.g * id - m;
  out.deficiency_psd = hermitian_eigensystem(out.deficiency).values(d - 1) >= -tol.channel_sum;
  return out;
}

// Orthonormal (Hilbert-Schmidt) traceless basis of d x d matrices.
inline std::vector<CMatrix> gell_mann_basis(Index d) {
  std::vector<CMatrix> basis;
  const double s = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < d; ++j) {
    for (Index k = j + 1; k < d; ++k) {
      CMatrix a = CMatrix::Zero(d, d);
      a(j, k) = s;
      a(k, j) = s;
      basis.push_back(a);
      CMatrix b = CMatrix::Zero(d, d);
      b(j, k) = Complex(0, -s);
      b(k, j) = Complex(0, s);
      basis.push_back(b);
    }
  }
  for (Index l = 1; l < d; ++l) {
    CMatrix c = CMatrix::Zero(d, d);
    const double norm = 1.0 / std::sqrt(double(l * (l + 1)));
    for (Index j = 0; j < l; ++j) c(j, j) = norm;
    c(l, l) = -double(l) * norm;
    basis.push_back(c);
  }
  return basis;
}

namespace pauli {

inline CMatrix x() { return (CMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline CMatrix y() { return (CMatrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished(); }
inline CMatrix z() { return (CMatrix(2, 2) << 1, 0, 0, -1).finished(); }
// Basis vector 0 is the excited state.
inline CMatrix plus() { return (CMatrix(2, 2) << 0, 1, 0, 0).finished(); }
inline CMatrix minus() { return (CMatrix(2, 2) << 0, 0, 1, 0).finished(); }

}  // namespace pauli

// Pauli matrices for d=2, diagonal generalized Gell-Mann matrices (trace norm 2) otherwise.
inline std::vector<CMatrix> default_observables(Index d) {
  if (d == 2) return {pauli::x(), pauli::y(), pauli::z()};
  std::vector<CMatrix> obs;
  for (Index l = 1; l < d; ++l) {
    CMatrix c = CMatrix::Zero(d, d);
    const double norm = std::sqrt(2.0 / double(l * (l + 1)));
    for (Index j = 0; j < l; ++j) c(j, j) = norm;
    c(l, l) = -double(l) * norm;
    obs.push_back(c);
  }
  return obs;
}

}  // namespace unravel

#endif  // UNRAVEL_QOPS_HPP_
