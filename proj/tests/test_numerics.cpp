#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "zeno/model.hpp"
#include "zeno/numerics.hpp"

using namespace zeno;

namespace {

ComplexMatrix pauli_x() {
  ComplexMatrix X(2, 2);
  X << 0, 1, 1, 0;
  return X;
}

ComplexMatrix random_matrix(Index n, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  ComplexMatrix A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = cplx(normal(engine), normal(engine));
  return A;
}

ComplexMatrix random_hermitian(Index n, std::uint64_t seed) {
  const ComplexMatrix A = random_matrix(n, seed);
  return (A + A.adjoint()) / 2.0;
}

ComplexMatrix random_unitary(Index n, std::uint64_t seed) {
  Eigen::HouseholderQR<ComplexMatrix> qr(random_matrix(n, seed));
  return qr.householderQ() * ComplexMatrix::Identity(n, n);
}

// Independent oracle: truncated power series.
ComplexMatrix taylor_exponential(const ComplexMatrix& B) {
  const Index n = B.rows();
  ComplexMatrix sum = ComplexMatrix::Identity(n, n);
  ComplexMatrix term = ComplexMatrix::Identity(n, n);
  for (int k = 1; k < 200; ++k) {
    term = (term * B / static_cast<double>(k)).eval();
    sum += term;
    if (term.norm() < 1e-20) break;
  }
  return sum;
}

}  // namespace

TEST_CASE("hermitian_eigendecompose: identity and Pauli X") {
  const auto id = hermitian_eigendecompose(ComplexMatrix::Identity(2, 2));
  CHECK(id.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(id.eigenvalues(1) == doctest::Approx(1.0));
  REQUIRE(id.clusters.size() == 1);
  CHECK(id.clusters[0].size == 2);

  const auto x = hermitian_eigendecompose(pauli_x());
  CHECK(x.eigenvalues(0) == doctest::Approx(-1.0));
  CHECK(x.eigenvalues(1) == doctest::Approx(1.0));
}

TEST_CASE("hermitian_eigendecompose rejects non-Hermitian input") {
  ComplexMatrix A(2, 2);
  A << 0, 1, 0, 0;
  CHECK_THROWS_AS(hermitian_eigendecompose(A), NotHermitian);
}

TEST_CASE("hermitian_eigendecompose: residuals and orthonormality on random input") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 2 + static_cast<Index>(seed % 13);
    const ComplexMatrix A = random_hermitian(n, seed);
    const auto spectrum = hermitian_eigendecompose(A);
    const double scale = operator_norm(A);
    for (Index j = 0; j < n; ++j) {
      const ComplexVector v = spectrum.eigenvectors.col(j);
      CHECK((A * v - spectrum.eigenvalues(j) * v).norm() <= 1e-10 * scale);
    }
    for (Index j = 1; j < n; ++j) CHECK(spectrum.eigenvalues(j) >= spectrum.eigenvalues(j - 1));
    const ComplexMatrix gram = spectrum.eigenvectors.adjoint() * spectrum.eigenvectors;
    CHECK((gram - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("degenerate eigenspaces get a basis that depends only on the subspace") {
  // Same spectrum {1, 1, 1, 2, 5}, two different unitary frames.
  RealVector diag(5);
  diag << 1, 1, 1, 2, 5;
  const ComplexMatrix Q = random_unitary(5, 7);
  const ComplexMatrix A = Q * diag.cast<cplx>().asDiagonal() * Q.adjoint();
  // Rotating inside the degenerate block leaves A unchanged.
  ComplexMatrix R = ComplexMatrix::Identity(5, 5);
  R.topLeftCorner(3, 3) = random_unitary(3, 11);
  const ComplexMatrix Q2 = Q * R;
  const ComplexMatrix A2 = Q2 * diag.cast<cplx>().asDiagonal() * Q2.adjoint();

  const auto s1 = hermitian_eigendecompose(A);
  const auto s2 = hermitian_eigendecompose(A2);
  REQUIRE(s1.clusters.front().size == 3);
  CHECK((s1.eigenvectors.leftCols(3) - s2.eigenvectors.leftCols(3)).cwiseAbs().maxCoeff() <
        1e-9);
  CHECK(s1.pivots == s2.pivots);
}

TEST_CASE("general_eigendecompose: diagonal and Jordan block") {
  ComplexMatrix D = ComplexMatrix::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = cplx(2.0, -3.0);
  const auto s = general_eigendecompose(D);
  CHECK(std::abs(s.eigenvalues(0) - cplx(1.0, 0.0)) < 1e-14);
  CHECK(std::abs(s.eigenvalues(1) - cplx(2.0, -3.0)) < 1e-14);
  CHECK((s.right - ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s.left - ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

  ComplexMatrix J(2, 2);
  J << 0, 1, 0, 0;
  CHECK_THROWS_AS(general_eigendecompose(J), Defective);
  try {
    general_eigendecompose(J);
  } catch (const Defective& e) {
    CHECK(e.condition() > 1e10);
  }
}

TEST_CASE("general_eigendecompose: biorthogonality and reconstruction on random input") {
  for (std::uint64_t seed = 100; seed < 115; ++seed) {
    const Index n = 3 + static_cast<Index>(seed % 17);
    const ComplexMatrix A = random_matrix(n, seed);
    const auto s = general_eigendecompose(A);
    const ComplexMatrix overlap = s.left.adjoint() * s.right;
    CHECK((overlap - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((s.reconstruct() - A).norm() <= 1e-8 * std::max(1.0, A.norm()));
    for (Index k = 1; k < n; ++k) {
      const bool ordered = s.eigenvalues(k - 1).real() < s.eigenvalues(k).real() ||
                           (s.eigenvalues(k - 1).real() == s.eigenvalues(k).real() &&
                            s.eigenvalues(k - 1).imag() <= s.eigenvalues(k).imag());
      CHECK(ordered);
    }
  }
}

TEST_CASE("general_eigendecompose handles exactly repeated eigenvalues of a diagonalizable matrix") {
  // Non-normal but diagonalizable, eigenvalue 2 three times.
  RealVector diag(5);
  diag << 2, 2, 2, -1, 0.5;
  const ComplexMatrix S = random_matrix(5, 3) + 3.0 * ComplexMatrix::Identity(5, 5);
  const ComplexMatrix A = S * diag.cast<cplx>().asDiagonal() * S.inverse();
  const auto s = general_eigendecompose(A);
  CHECK((s.left.adjoint() * s.right - ComplexMatrix::Identity(5, 5)).cwiseAbs().maxCoeff() <=
        1e-9);
  CHECK((s.reconstruct() - A).norm() <= 1e-8 * A.norm());
}

TEST_CASE("effective Hamiltonian N=4: three real eigenvalues") {
  ChainConfig config;
  config.n_spins = 4;
  config.coupling_g = 1.0;
  config.tau = 0.1;
  const auto s = general_eigendecompose(effective_hamiltonian(config));
  const double tol = 1e-8 * std::max(1.0, config.damping());
  CHECK((s.eigenvalues.imag().array().abs() <= tol).count() == 3);
}

TEST_CASE("matrix_exponential: analytic cases") {
  const ComplexMatrix X = pauli_x();
  CHECK((matrix_exponential(X, cplx(0.0)) - ComplexMatrix::Identity(2, 2)).norm() == 0.0);
  const ComplexMatrix rotation = matrix_exponential(X, cplx(0.0, -std::numbers::pi / 2));
  CHECK((rotation - cplx(0.0, -1.0) * X).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((pade_exponential((cplx(0.0, -std::numbers::pi / 2) * X).eval()) - cplx(0.0, -1.0) * X)
            .cwiseAbs()
            .maxCoeff() < 1e-13);
}

TEST_CASE("matrix_exponential of the effective Hamiltonian is a contraction") {
  ChainConfig config;
  config.n_spins = 6;
  config.coupling_g = 4.0;
  config.tau = 0.03;
  const ComplexMatrix HM = effective_hamiltonian(config);
  const ComplexMatrix E = matrix_exponential(HM, cplx(0.0, -config.tau));
  CHECK(operator_norm(E) <= 1.0 + 1e-10);
  const ComplexMatrix oracle = taylor_exponential(cplx(0.0, -config.tau) * HM);
  CHECK(operator_norm(E - oracle) <= 1e-11 * operator_norm(oracle));
}

TEST_CASE("matrix_exponential: spectral and Pade routes agree, unitarity holds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Index n = 2 + static_cast<Index>(seed * 3 % 20);
    const ComplexMatrix H = random_hermitian(n, seed);
    const double t = 0.1 * static_cast<double>(seed);
    const ComplexMatrix spectral = matrix_exponential(H, cplx(0.0, -t));
    const ComplexMatrix pade = pade_exponential((cplx(0.0, -t) * H).eval());
    CHECK(operator_norm(spectral - pade) <= 1e-11 * operator_norm(spectral) * n);
    CHECK((spectral.adjoint() * spectral - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <=
          1e-10);
    const ComplexMatrix back = matrix_exponential(H, cplx(0.0, t));
    CHECK((spectral * back - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-9);

    // Real scale takes the Hermitian spectral route.
    const ComplexMatrix heat = matrix_exponential(H, cplx(-t, 0.0));
    const ComplexMatrix heat_pade = pade_exponential((cplx(-t, 0.0) * H).eval());
    CHECK(operator_norm(heat - heat_pade) <= 1e-11 * operator_norm(heat_pade) * n);
  }
}

TEST_CASE("pade_exponential matches an external implementation on general matrices") {
  for (std::uint64_t seed = 30; seed < 40; ++seed) {
    const Index n = 3 + static_cast<Index>(seed % 9);
    const double scale = 0.05 * static_cast<double>(seed - 29);
    const ComplexMatrix A = scale * random_matrix(n, seed);
    const ComplexMatrix mine = matrix_exponential(A, cplx(1.0));
    const ComplexMatrix reference = A.exp();
    CHECK(operator_norm(mine - reference) <= 1e-11 * operator_norm(reference));
  }
}

TEST_CASE("block_exponential equals the dense exponential for block-diagonal input") {
  ChainConfig config;
  config.n_spins = 5;
  const ComplexMatrix H = chain_hamiltonian(config);
  const auto labels = down_spin_counts(config.n_spins);
  const ComplexMatrix blocked = block_exponential(H, cplx(0.0, -0.7), std::span<const int>(labels));
  const ComplexMatrix dense = matrix_exponential(H, cplx(0.0, -0.7));
  CHECK((blocked - dense).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel_basis") {
  SUBCASE("zero matrix has full kernel") {
    const ComplexMatrix k = kernel_basis(ComplexMatrix::Zero(4, 4), 1e-9);
    CHECK(k.cols() == 4);
  }
  SUBCASE("projector on site 1, N=2") {
    ChainConfig config;
    config.n_spins = 2;
    config.boundary = Boundary::open;
    const ComplexMatrix k = kernel_basis(probe_projector(config), 1e-9);
    CHECK(k.cols() == 2);
  }
  SUBCASE("projector restricted to the N=6 ground eigenspace") {
    ChainConfig config;
    const auto spectrum = hermitian_eigendecompose(chain_hamiltonian(config));
    const Cluster ground = spectrum.clusters.front();
    REQUIRE(ground.size == 1);
    const ComplexMatrix restricted =
        probe_projector(config) * spectrum.eigenvectors.middleCols(ground.begin, ground.size);
    // Independent rank computation.
    Eigen::FullPivLU<ComplexMatrix> lu(restricted);
    lu.setThreshold(1e-9);
    CHECK(lu.rank() == 1);
    CHECK(kernel_basis(restricted, 1e-9).cols() == 0);
  }
  SUBCASE("orthonormal and annihilated on random rank-deficient input") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Index n = 8;
      const Index rank = static_cast<Index>(seed % 7) + 1;
      const ComplexMatrix A = random_matrix(n, seed).leftCols(rank) *
                              random_matrix(n, seed + 50).topRows(rank);
      const ComplexMatrix k = kernel_basis(A, 1e-9);
      CHECK(k.cols() == n - rank);
      CHECK((k.adjoint() * k - ComplexMatrix::Identity(k.cols(), k.cols())).cwiseAbs().maxCoeff() <=
            1e-10);
      CHECK((A * k).norm() <= 1e-9 * operator_norm(A) * n);
    }
  }
  SUBCASE("wide matrices") {
    ComplexMatrix A = ComplexMatrix::Zero(1, 3);
    A(0, 0) = 1.0;
    CHECK(kernel_basis(A, 1e-9).cols() == 2);
  }
}

TEST_CASE("random_state: normalization, determinism, Haar mean magnetization") {
  const ComplexVector a = random_state(64, 42);
  const ComplexVector b = random_state(64, 42);
  CHECK(std::abs(a.norm() - 1.0) <= 1e-12);
  CHECK(a == b);
  CHECK(random_state(64, 43) != a);

  const int samples = 10000;
  Eigen::MatrixXd z(samples, 6);
  for (int i = 0; i < samples; ++i) {
    z.row(i) = magnetization_profile(random_state(64, derive_seed(7, i))).transpose();
  }
  for (int site = 0; site < 6; ++site) {
    const double mean = z.col(site).mean();
    const double sd = std::sqrt((z.col(site).array() - mean).square().sum() / (samples - 1));
    CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(samples));
  }
}

TEST_CASE("derive_seed spreads indices") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 9) == derive_seed(5, 9));
}
