#pragma once

// Dense complex linear algebra shared by the rest of the library. Everything
// here is templated on the real scalar type; the `double` aliases at the
// bottom are what the physics code uses.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "zeno/errors.hpp"

namespace zeno {

template <typename Real>
using ComplexMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using ComplexVectorT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using RealVectorT = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Contiguous run of columns sharing one (numerically) degenerate eigenvalue.
struct Cluster {
  Index begin = 0;
  Index size = 0;
};

template <typename Real>
struct HermitianSpectrum {
  RealVectorT<Real> eigenvalues;        // ascending
  ComplexMatrixT<Real> eigenvectors;    // orthonormal columns
  std::vector<Cluster> clusters;        // degenerate groups, in eigenvalue order
  std::vector<Index> pivots;            // basis state that generated each column
};

/// Right eigenvectors |alpha_j> and left eigenvectors |beta_j> of a
/// diagonalizable matrix, normalized so that <beta_j|alpha_k> = delta_jk.
template <typename Real>
struct SpectralDecompositionT {
  ComplexVectorT<Real> eigenvalues;
  ComplexMatrixT<Real> right;
  ComplexMatrixT<Real> left;
  Real condition = 1;  // 1-norm condition estimate of `right`

  Index size() const { return eigenvalues.size(); }

  ComplexMatrixT<Real> reconstruct() const {
    return right * eigenvalues.asDiagonal() * left.adjoint();
  }
};

namespace detail {

template <typename Real>
constexpr Real hermitian_tolerance = Real(1e-12);

template <typename Real>
constexpr Real cluster_tolerance = Real(1e-9);

// Orders (possibly complex) eigenvalues by real part, then imaginary part.
template <typename Scalar>
bool spectral_less(const Scalar& a, const Scalar& b) {
  if (std::real(a) != std::real(b)) return std::real(a) < std::real(b);
  return std::imag(a) < std::imag(b);
}

/// Replaces the orthonormal columns of `span` by a canonical basis of the
/// same subspace: the projector is applied to computational basis states in
/// the given index order and the images are Gram-Schmidt orthonormalized,
/// skipping images already spanned. The result depends only on the subspace.
template <typename Real>
ComplexMatrixT<Real> canonical_basis(const ComplexMatrixT<Real>& span, bool descending,
                                     std::vector<Index>* pivots = nullptr) {
  const Index n = span.rows();
  const Index m = span.cols();
  ComplexMatrixT<Real> basis(n, m);
  Index found = 0;
  for (Index step = 0; step < n && found < m; ++step) {
    const Index i = descending ? n - 1 - step : step;
    // P e_i = U U^dagger e_i
    ComplexVectorT<Real> v = span * span.row(i).adjoint();
    for (int pass = 0; pass < 2; ++pass) {
      if (found > 0) {
        v -= basis.leftCols(found) * (basis.leftCols(found).adjoint() * v);
      }
    }
    const Real norm = v.norm();
    if (norm > Real(1e-6)) {
      basis.col(found++) = v / norm;
      if (pivots) pivots->push_back(i);
    }
  }
  if (found < m) {
    throw NumericalError("canonical basis construction lost rank");
  }
  return basis;
}

// Multiplies each column by a phase so that its first significant entry is
// real and positive.
template <typename Real>
void fix_column_phases(ComplexMatrixT<Real>& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    auto col = vectors.col(j);
    const Real scale = col.cwiseAbs().maxCoeff();
    if (scale == Real(0)) continue;
    for (Index i = 0; i < col.size(); ++i) {
      const Real mag = std::abs(col(i));
      if (mag > Real(1e-6) * scale) {
        col *= std::conj(col(i)) / mag;
        break;
      }
    }
  }
}

template <typename Real>
ComplexMatrixT<Real> pade_approximant(const ComplexMatrixT<Real>& A, int degree) {
  using Matrix = ComplexMatrixT<Real>;
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  Matrix U;
  Matrix V;
  switch (degree) {
    case 3: {
      const Real b[] = {120, 60, 12, 1};
      U = A * (b[3] * A2 + b[1] * I);
      V = b[2] * A2 + b[0] * I;
      break;
    }
    case 5: {
      const Real b[] = {30240, 15120, 3360, 420, 30, 1};
      const Matrix A4 = A2 * A2;
      U = A * (b[5] * A4 + b[3] * A2 + b[1] * I);
      V = b[4] * A4 + b[2] * A2 + b[0] * I;
      break;
    }
    case 7: {
      const Real b[] = {17297280, 8648640, 1995840, 277200, 25200, 1512, 56, 1};
      const Matrix A4 = A2 * A2;
      const Matrix A6 = A4 * A2;
      U = A * (b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
      V = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
      break;
    }
    case 9: {
      const Real b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                        2162160.0,     110880.0,     3960.0,       90.0,        1.0};
      const Matrix A4 = A2 * A2;
      const Matrix A6 = A4 * A2;
      const Matrix A8 = A6 * A2;
      U = A * (b[9] * A8 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
      V = b[8] * A8 + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
      break;
    }
    default: {
      const Real b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                        1187353796428800.0,  129060195264000.0,   10559470521600.0,
                        670442572800.0,      33522128640.0,       1323241920.0,
                        40840800.0,          960960.0,            16380.0,
                        182.0,               1.0};
      const Matrix A4 = A2 * A2;
      const Matrix A6 = A4 * A2;
      U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
               b[3] * A2 + b[1] * I);
      V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 +
          b[0] * I;
      break;
    }
  }
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace detail

/// max |A - A^dagger| relative to max(1, max |A|).
template <typename Derived>
typename Derived::RealScalar hermiticity_defect(const Eigen::MatrixBase<Derived>& A) {
  using Real = typename Derived::RealScalar;
  if (A.rows() != A.cols()) return std::numeric_limits<Real>::infinity();
  if (A.size() == 0) return Real(0);
  const Real scale = std::max(Real(1), A.cwiseAbs().maxCoeff());
  return (A - A.adjoint()).cwiseAbs().maxCoeff() / scale;
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& A) {
  using Real = typename Derived::RealScalar;
  return hermiticity_defect(A) <= detail::hermitian_tolerance<Real>;
}

/// Largest singular value.
template <typename Derived>
typename Derived::RealScalar operator_norm(const Eigen::MatrixBase<Derived>& A) {
  using Plain = typename Derived::PlainObject;
  if (A.size() == 0) return 0;
  Eigen::BDCSVD<Plain> svd(A.eval());
  return svd.singularValues()(0);
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascend; every
/// degenerate cluster (spread <= 1e-9 max(1, spectral radius)) carries the
/// canonical basis of its eigenspace, so the result is independent of the
/// underlying solver's choice of degenerate representatives.
template <typename Derived>
HermitianSpectrum<typename Derived::RealScalar> hermitian_eigendecompose(
    const Eigen::MatrixBase<Derived>& A) {
  using Real = typename Derived::RealScalar;
  using Matrix = ComplexMatrixT<Real>;
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw NotHermitian("hermitian_eigendecompose needs a non-empty square matrix");
  }
  const Real defect = hermiticity_defect(A);
  if (!(defect <= detail::hermitian_tolerance<Real>)) {
    throw NotHermitian("matrix is not Hermitian (relative defect " + std::to_string(defect) +
                       ")");
  }
  const Matrix H = (A + A.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(H);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Hermitian eigensolver did not converge");
  }

  HermitianSpectrum<Real> out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  const Index n = out.eigenvalues.size();
  const Real radius = out.eigenvalues.cwiseAbs().maxCoeff();
  const Real tol = detail::cluster_tolerance<Real> * std::max(Real(1), radius);

  Index begin = 0;
  for (Index i = 1; i <= n; ++i) {
    if (i == n || out.eigenvalues(i) - out.eigenvalues(i - 1) > tol) {
      const Index size = i - begin;
      out.eigenvectors.middleCols(begin, size) = detail::canonical_basis<Real>(
          out.eigenvectors.middleCols(begin, size), true, &out.pivots);
      out.clusters.push_back({begin, size});
      begin = i;
    }
  }
  return out;
}

/// Eigen-decomposition of a general (diagonalizable) complex matrix with
/// biorthonormal left/right families. Throws Defective when the right
/// eigenvector matrix is too ill-conditioned (> `max_condition`) or when a
/// repeated eigenvalue lacks a full eigenspace.
template <typename Derived>
SpectralDecompositionT<typename Derived::RealScalar> general_eigendecompose(
    const Eigen::MatrixBase<Derived>& A, typename Derived::RealScalar max_condition = 1e10) {
  using Real = typename Derived::RealScalar;
  using Matrix = ComplexMatrixT<Real>;
  using Vector = ComplexVectorT<Real>;
  using Complex = std::complex<Real>;
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw ConfigError("general_eigendecompose needs a non-empty square matrix");
  }
  const Matrix M = A;
  const Index n = M.rows();
  Eigen::ComplexEigenSolver<Matrix> solver(M, true);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("complex eigensolver did not converge");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return detail::spectral_less(solver.eigenvalues()(a), solver.eigenvalues()(b));
  });
  Vector values(n);
  Matrix right(n, n);
  for (Index k = 0; k < n; ++k) {
    values(k) = solver.eigenvalues()(order[static_cast<std::size_t>(k)]);
    right.col(k) = solver.eigenvectors().col(order[static_cast<std::size_t>(k)]).normalized();
  }

  auto condition_of = [](const Matrix& R) {
    Eigen::PartialPivLU<Matrix> lu(R);
    const Real rcond = lu.rcond();
    return rcond > Real(0) ? Real(1) / rcond : std::numeric_limits<Real>::infinity();
  };

  // Group eigenvalues that coincide numerically; union-find over the
  // real-part sorted sequence.
  const Real radius = values.cwiseAbs().maxCoeff();
  const Real tol = detail::cluster_tolerance<Real> * std::max(Real(1), radius);
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      parent[static_cast<std::size_t>(i)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
      i = parent[static_cast<std::size_t>(i)];
    }
    return i;
  };
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n && values(j).real() - values(i).real() <= tol; ++j) {
      if (std::abs(values(j) - values(i)) <= tol) parent[static_cast<std::size_t>(find(j))] = find(i);
    }
  }
  std::map<Index, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[find(i)].push_back(i);

  const Real scale = std::max(Real(1), M.norm());
  for (const auto& [root, members] : groups) {
    if (members.size() < 2) continue;
    const Index m = static_cast<Index>(members.size());
    Complex mean(0);
    for (Index k : members) mean += values(k);
    mean /= Real(m);
    Eigen::BDCSVD<Matrix> svd(M - mean * Matrix::Identity(n, n), Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    if (sigma(n - m) > Real(1e-8) * scale) {
      throw Defective(condition_of(right));
    }
    for (Index k = 0; k < m; ++k) {
      right.col(members[static_cast<std::size_t>(k)]) = svd.matrixV().col(n - m + k);
    }
  }
  detail::fix_column_phases<Real>(right);

  Eigen::PartialPivLU<Matrix> lu(right);
  const Real rcond = lu.rcond();
  const Real condition = rcond > Real(0) ? Real(1) / rcond : std::numeric_limits<Real>::infinity();
  if (!(condition <= max_condition)) {
    throw Defective(condition);
  }
  const Matrix inverse = lu.inverse();

  SpectralDecompositionT<Real> out;
  out.right = std::move(right);
  out.left = inverse.adjoint();
  out.condition = condition;
  // Rayleigh-type refinement; collapses cluster members onto one value.
  out.eigenvalues.resize(n);
  const Matrix projected = inverse * M * out.right;
  for (Index k = 0; k < n; ++k) out.eigenvalues(k) = projected(k, k);
  return out;
}

/// exp(A) by scaling and squaring with a diagonal Pade approximant of degree
/// 3, 5, 7, 9 or 13 chosen from the 1-norm.
template <typename Derived>
ComplexMatrixT<typename Derived::RealScalar> pade_exponential(
    const Eigen::MatrixBase<Derived>& A) {
  using Real = typename Derived::RealScalar;
  using Matrix = ComplexMatrixT<Real>;
  const Matrix B = A;
  const Real norm1 = B.cwiseAbs().colwise().sum().maxCoeff();
  constexpr std::pair<int, double> kThetas[] = {
      {3, 1.495585217958292e-2}, {5, 2.539398330063230e-1}, {7, 9.504178996162932e-1},
      {9, 2.097847961257068e0}};
  for (const auto& [degree, theta] : kThetas) {
    if (norm1 <= Real(theta)) return detail::pade_approximant<Real>(B, degree);
  }
  constexpr Real theta13 = Real(5.371920351148152);
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  Matrix E = detail::pade_approximant<Real>(B / std::ldexp(Real(1), squarings), 13);
  for (int s = 0; s < squarings; ++s) E = (E * E).eval();
  return E;
}

/// exp(scale * A). Hermitian and anti-Hermitian arguments go through the
/// eigen-decomposition; everything else through `pade_exponential`.
template <typename Derived>
ComplexMatrixT<typename Derived::RealScalar> matrix_exponential(
    const Eigen::MatrixBase<Derived>& A, std::complex<typename Derived::RealScalar> scale) {
  using Real = typename Derived::RealScalar;
  using Matrix = ComplexMatrixT<Real>;
  if (A.rows() != A.cols()) {
    throw ConfigError("matrix_exponential needs a square matrix");
  }
  const Index n = A.rows();
  if (scale == std::complex<Real>(0)) return Matrix::Identity(n, n);
  const Matrix B = scale * A;
  if (is_hermitian(B)) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver((B + B.adjoint()) / Real(2));
    const auto& U = solver.eigenvectors();
    return U * solver.eigenvalues().array().exp().matrix().asDiagonal() * U.adjoint();
  }
  const Matrix K = std::complex<Real>(0, -1) * B;  // B = iK
  if (is_hermitian(K)) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver((K + K.adjoint()) / Real(2));
    const auto& U = solver.eigenvectors();
    const ComplexVectorT<Real> phases =
        (std::complex<Real>(0, 1) * solver.eigenvalues().template cast<std::complex<Real>>())
            .array()
            .exp()
            .matrix();
    return U * phases.asDiagonal() * U.adjoint();
  }
  return pade_exponential(B);
}

/// exp(scale * A) for a matrix that is block diagonal with respect to the
/// integer `labels` (entries between different labels are zero). Each block
/// is exponentiated on its own.
template <typename Derived>
ComplexMatrixT<typename Derived::RealScalar> block_exponential(
    const Eigen::MatrixBase<Derived>& A, std::complex<typename Derived::RealScalar> scale,
    std::span<const int> labels) {
  using Real = typename Derived::RealScalar;
  using Matrix = ComplexMatrixT<Real>;
  const Index n = A.rows();
  if (A.cols() != n || static_cast<Index>(labels.size()) != n) {
    throw ConfigError("block_exponential: label count does not match matrix dimension");
  }
  std::map<int, std::vector<Index>> blocks;
  for (Index i = 0; i < n; ++i) blocks[labels[static_cast<std::size_t>(i)]].push_back(i);
  Matrix out = Matrix::Zero(n, n);
  for (const auto& [label, idx] : blocks) {
    const Matrix block = A(idx, idx);
    out(idx, idx) = matrix_exponential(block, scale);
  }
  return out;
}

/// Orthonormal basis (as columns) of { v : |A v| <= tol |A| |v| }, from the
/// singular value decomposition. An empty (n x 0) matrix is a valid result.
template <typename Derived>
ComplexMatrixT<typename Derived::RealScalar> kernel_basis(const Eigen::MatrixBase<Derived>& A,
                                                          typename Derived::RealScalar tol) {
  using Real = typename Derived::RealScalar;
  using Matrix = ComplexMatrixT<Real>;
  const Index cols = A.cols();
  if (cols == 0) return Matrix(0, 0);
  if (A.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::BDCSVD<Matrix> svd(Matrix(A), Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const Real largest = sigma.size() > 0 ? sigma(0) : Real(0);
  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tol * largest) ++rank;
  }
  return svd.matrixV().rightCols(cols - rank);
}

/// 64-bit mixing of a base seed with a stream index (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Haar-random unit vector: i.i.d. standard complex Gaussian entries,
/// normalized. Same seed, same vector.
template <typename Real = double>
ComplexVectorT<Real> random_state(Index dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("random_state needs dim >= 1");
  std::mt19937_64 engine(seed);
  std::normal_distribution<Real> normal(Real(0), Real(1));
  ComplexVectorT<Real> v(dim);
  for (Index i = 0; i < dim; ++i) {
    const Real re = normal(engine);
    const Real im = normal(engine);
    v(i) = std::complex<Real>(re, im);
  }
  return v / v.norm();
}

using cplx = std::complex<double>;
using ComplexMatrix = ComplexMatrixT<double>;
using ComplexVector = ComplexVectorT<double>;
using RealVector = RealVectorT<double>;
using SpectralDecomposition = SpectralDecompositionT<double>;

}  // namespace zeno
