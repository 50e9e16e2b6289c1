#pragma once

// Decaying / non-decaying split of the chain Hilbert space.
//
// A state survives the measurement protocol forever exactly when it lies in
// the span of chain eigenstates that have no weight on "probed site down".
// That span is built here two ways: from the kernel of the probe projector
// inside each degenerate eigenspace of H_ch, and from the real part of the
// spectrum of the effective Hamiltonian.

#include <optional>
#include <span>
#include <vector>

#include "zeno/model.hpp"

namespace zeno {

/// Eigenstates of the bare chain Hamiltonian, diagonalized one
/// magnetization sector at a time. Global order is ascending energy; inside a
/// degenerate level the canonical vectors are ordered by generating basis
/// index, highest first (matching `hermitian_eigendecompose` on the full
/// matrix).
class ChainEigenbasis {
 public:
  struct Member {
    int sector = 0;
    Index column = 0;
    Index pivot = 0;
    double energy = 0.0;
  };

  explicit ChainEigenbasis(const ChainConfig& config);

  const ChainConfig& config() const { return config_; }
  Index size() const { return static_cast<Index>(members_.size()); }
  double energy(Index k) const { return member(k).energy; }
  const Member& member(Index k) const;
  /// Eigenstate k embedded in the full 2^N space.
  ComplexVector state(Index k) const;
  ComplexVector ground_state() const { return state(0); }
  /// Degenerate levels as contiguous ranges of global indices.
  const std::vector<Cluster>& levels() const { return levels_; }

  const std::vector<MagnetizationSector>& sectors() const { return sectors_; }
  const HermitianSpectrum<double>& sector_spectrum(int sector) const {
    return spectra_[static_cast<std::size_t>(sector)];
  }

 private:
  ChainConfig config_;
  std::vector<MagnetizationSector> sectors_;
  std::vector<HermitianSpectrum<double>> spectra_;
  std::vector<Member> members_;
  std::vector<Cluster> levels_;
};

struct SubspaceReport {
  ComplexMatrix nd_basis;  // 2^N x nd_dimension, orthonormal columns
  RealVector nd_energies;
  int nd_dimension = 0;
  int spectral_real_count = 0;
  ComplexVector eigenvalues;  // spectrum of H_M, sorted by (Re, Im)
  double realness_tolerance = 0.0;
};

/// |Im lambda| bound below which an H_M eigenvalue counts as real:
/// 1e-8 max(1, 2 g^2 tau).
double realness_tolerance(const ChainConfig& config);

/// Non-decaying basis from the eigenspace-kernel construction, plus the H_M
/// eigenvalues and their real count as an independent cross-check.
SubspaceReport build_nondecaying_basis(const ChainConfig& config);

/// Kernel-route dimension only; cheaper than build_nondecaying_basis.
int nondecaying_dimension(const ChainConfig& config);

/// Closed form for the periodic chain: 2^((N-1)/2) for odd N and
/// 3 * 2^((N-4)/2) for even N >= 4.
std::optional<int> periodic_dimension_formula(int n_spins);

struct ScanEntry {
  int n_spins = 0;
  int probe_site = 0;
  int dimension = 0;
  std::optional<int> formula;
};

/// Dimension table over chain lengths and probe positions. An empty
/// `probe_positions` means site 1 for periodic chains and every site for open
/// chains; positions beyond a chain's length are skipped.
std::vector<ScanEntry> nondecaying_dimension_scan(std::span<const int> n_values,
                                                  Boundary boundary,
                                                  std::span<const int> probe_positions = {});

/// Squared norm of the projection onto the non-decaying subspace.
double predicted_survival(const ComplexVector& psi, const SubspaceReport& report);

/// Normalized projection onto the non-decaying subspace; throws
/// NoSurvivingComponent when the projection norm is <= 1e-12.
ComplexVector project_nondecaying(const ComplexVector& psi, const SubspaceReport& report);

struct AverageSurvival {
  double analytic = 0.0;
  double monte_carlo = 0.0;
  double mc_stderr = 0.0;
  int samples = 0;
};

/// dim H_ND / 2^N against the Haar average of predicted_survival.
AverageSurvival average_survival(const ChainConfig& config, int samples = 1000);

/// Eigenvalues of H_M only (Schur form per sector), sorted by (Re, Im).
ComplexVector effective_eigenvalues(const ChainConfig& config);

/// Full biorthogonal decomposition of H_M assembled from the sector blocks.
SpectralDecomposition effective_spectrum(const ChainConfig& config);

struct SpectrumClassification {
  ComplexVector eigenvalues;
  std::vector<Index> real;
  std::vector<Index> decaying;
  double tolerance = 0.0;
  double max_imag = 0.0;
};

SpectrumClassification classify_spectrum(const ChainConfig& config);

}  // namespace zeno
