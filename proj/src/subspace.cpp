#include "zeno/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "zeno/parallel.hpp"

namespace zeno {

namespace {

constexpr double kKernelTolerance = 1e-9;

// Orthonormal kernel basis of an operator whose norm is at most one; the
// threshold on singular values is absolute.
ComplexMatrix absolute_kernel(const ComplexMatrix& A) {
  if (A.rows() == 0) return ComplexMatrix::Identity(A.cols(), A.cols());
  const double norm = operator_norm(A);
  if (norm <= kKernelTolerance) return ComplexMatrix::Identity(A.cols(), A.cols());
  return kernel_basis(A, kKernelTolerance / norm);
}

struct KernelBlock {
  int sector = 0;
  ComplexMatrix vectors;  // sector-local coordinates
  std::vector<Index> pivots;
};

// Mirror image of each bit under reflection about the probed spin, or
// nullopt when that reflection is not a symmetry of the chain.
std::optional<std::vector<int>> probe_reflection(const ChainConfig& config) {
  const int n = config.n_spins;
  const int q = config.probe_site - 1;
  if (config.boundary == Boundary::open && 2 * q != n - 1) return std::nullopt;
  std::vector<int> image(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) image[static_cast<std::size_t>(k)] = ((2 * q - k) % n + n) % n;
  return image;
}

// H_M on one sector split into its reflection-even and reflection-odd
// blocks; a single block when there is no reflection symmetry.
std::vector<ComplexMatrix> reflection_blocks(const ChainConfig& config,
                                             const MagnetizationSector& sector) {
  ComplexMatrix H = effective_hamiltonian_block(config, sector);
  const auto image = probe_reflection(config);
  if (!image || sector.size() < 2) return {std::move(H)};

  std::map<std::uint32_t, Index> position;
  for (Index i = 0; i < sector.size(); ++i) position[sector.states[static_cast<std::size_t>(i)]] = i;
  std::vector<std::pair<Index, Index>> even;
  std::vector<std::pair<Index, Index>> odd;
  for (Index i = 0; i < sector.size(); ++i) {
    const std::uint32_t s = sector.states[static_cast<std::size_t>(i)];
    std::uint32_t r = 0;
    for (int k = 0; k < config.n_spins; ++k) {
      if ((s >> k) & 1U) r |= 1U << (*image)[static_cast<std::size_t>(k)];
    }
    const Index j = position.at(r);
    if (j == i) {
      even.emplace_back(i, i);
    } else if (i < j) {
      even.emplace_back(i, j);
      odd.emplace_back(i, j);
    }
  }

  // Columns of the orthogonal change of basis have one or two entries.
  const auto reduce = [&](const std::vector<std::pair<Index, Index>>& pairs, double sign) {
    const Index m = static_cast<Index>(pairs.size());
    ComplexMatrix HQ(H.rows(), m);
    for (Index c = 0; c < m; ++c) {
      const auto [a, b] = pairs[static_cast<std::size_t>(c)];
      if (a == b) {
        HQ.col(c) = H.col(a);
      } else {
        HQ.col(c) = (H.col(a) + sign * H.col(b)) / std::sqrt(2.0);
      }
    }
    ComplexMatrix out(m, m);
    for (Index r = 0; r < m; ++r) {
      const auto [a, b] = pairs[static_cast<std::size_t>(r)];
      if (a == b) {
        out.row(r) = HQ.row(a);
      } else {
        out.row(r) = (HQ.row(a) + sign * HQ.row(b)) / std::sqrt(2.0);
      }
    }
    return out;
  };
  std::vector<ComplexMatrix> blocks{reduce(even, 1.0)};
  if (!odd.empty()) blocks.push_back(reduce(odd, -1.0));
  return blocks;
}

// Calls emit(level_energy, KernelBlock) for every (level, sector) pair with
// a non-trivial kernel of the probe projector.
template <typename Emit>
void for_each_kernel_block(const ChainEigenbasis& basis, bool canonical, Emit&& emit) {
  const ChainConfig& config = basis.config();
  std::vector<RealVector> projector;
  for (const auto& sector : basis.sectors()) {
    projector.push_back(projector_diagonal_block(config, sector));
  }
  for (const Cluster& level : basis.levels()) {
    std::map<int, std::vector<Index>> by_sector;
    for (Index k = level.begin; k < level.begin + level.size; ++k) {
      by_sector[basis.member(k).sector].push_back(basis.member(k).column);
    }
    for (const auto& [sector, columns] : by_sector) {
      const auto& spectrum = basis.sector_spectrum(sector);
      const ComplexMatrix U = spectrum.eigenvectors(Eigen::all, columns);
      std::vector<Index> down_rows;
      const RealVector& diag = projector[static_cast<std::size_t>(sector)];
      for (Index i = 0; i < diag.size(); ++i) {
        if (diag(i) > 0.5) down_rows.push_back(i);
      }
      const ComplexMatrix restricted = U(down_rows, Eigen::all);
      const ComplexMatrix coefficients = absolute_kernel(restricted);
      if (coefficients.cols() == 0) continue;
      KernelBlock block;
      block.sector = sector;
      block.vectors = U * coefficients;
      if (canonical) {
        block.vectors = detail::canonical_basis<double>(block.vectors, false, &block.pivots);
      }
      emit(basis.energy(level.begin), block);
    }
  }
}

}  // namespace

ChainEigenbasis::ChainEigenbasis(const ChainConfig& config) : config_(config) {
  config_.validate();
  sectors_ = magnetization_sectors(config_.n_spins);
  spectra_.reserve(sectors_.size());
  for (std::size_t s = 0; s < sectors_.size(); ++s) {
    const auto& sector = sectors_[s];
    spectra_.push_back(hermitian_eigendecompose(chain_hamiltonian_block(config_, sector)));
    const auto& spectrum = spectra_.back();
    for (Index c = 0; c < sector.size(); ++c) {
      const Index local_pivot = spectrum.pivots[static_cast<std::size_t>(c)];
      members_.push_back({static_cast<int>(s), c,
                          static_cast<Index>(sector.states[static_cast<std::size_t>(local_pivot)]),
                          spectrum.eigenvalues(c)});
    }
  }
  std::stable_sort(members_.begin(), members_.end(),
                   [](const Member& a, const Member& b) { return a.energy < b.energy; });

  double radius = 0.0;
  for (const auto& m : members_) radius = std::max(radius, std::abs(m.energy));
  const double tol = detail::cluster_tolerance<double> * std::max(1.0, radius);
  Index begin = 0;
  const Index n = size();
  for (Index i = 1; i <= n; ++i) {
    if (i == n || members_[static_cast<std::size_t>(i)].energy -
                          members_[static_cast<std::size_t>(i - 1)].energy >
                      tol) {
      std::sort(members_.begin() + begin, members_.begin() + i,
                [](const Member& a, const Member& b) { return a.pivot > b.pivot; });
      levels_.push_back({begin, i - begin});
      begin = i;
    }
  }
}

const ChainEigenbasis::Member& ChainEigenbasis::member(Index k) const {
  if (k < 0 || k >= size()) {
    throw InvalidIndex("eigenstate index " + std::to_string(k) + " outside [0, " +
                       std::to_string(size()) + ")");
  }
  return members_[static_cast<std::size_t>(k)];
}

ComplexVector ChainEigenbasis::state(Index k) const {
  const Member& m = member(k);
  const auto& sector = sectors_[static_cast<std::size_t>(m.sector)];
  const auto& spectrum = spectra_[static_cast<std::size_t>(m.sector)];
  ComplexVector v = ComplexVector::Zero(config_.dim());
  for (Index i = 0; i < sector.size(); ++i) {
    v(sector.states[static_cast<std::size_t>(i)]) = spectrum.eigenvectors(i, m.column);
  }
  return v;
}

double realness_tolerance(const ChainConfig& config) {
  return 1e-8 * std::max(1.0, config.damping());
}

SubspaceReport build_nondecaying_basis(const ChainConfig& config) {
  const ChainEigenbasis basis(config);
  struct NdVector {
    double energy;
    Index pivot;
    ComplexVector vector;
  };
  std::vector<NdVector> found;
  for_each_kernel_block(basis, true, [&](double energy, const KernelBlock& block) {
    const auto& sector = basis.sectors()[static_cast<std::size_t>(block.sector)];
    for (Index j = 0; j < block.vectors.cols(); ++j) {
      ComplexVector v = ComplexVector::Zero(config.dim());
      for (Index i = 0; i < sector.size(); ++i) {
        v(sector.states[static_cast<std::size_t>(i)]) = block.vectors(i, j);
      }
      const Index pivot =
          sector.states[static_cast<std::size_t>(block.pivots[static_cast<std::size_t>(j)])];
      found.push_back({energy, pivot, std::move(v)});
    }
  });
  // Levels arrive in ascending energy; inside a level order by pivot.
  std::stable_sort(found.begin(), found.end(), [](const NdVector& a, const NdVector& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return a.pivot < b.pivot;
  });

  SubspaceReport report;
  report.nd_dimension = static_cast<int>(found.size());
  report.nd_basis.resize(config.dim(), report.nd_dimension);
  report.nd_energies.resize(report.nd_dimension);
  for (std::size_t j = 0; j < found.size(); ++j) {
    report.nd_basis.col(static_cast<Index>(j)) = found[j].vector;
    report.nd_energies(static_cast<Index>(j)) = found[j].energy;
  }
  report.eigenvalues = effective_eigenvalues(config);
  report.realness_tolerance = realness_tolerance(config);
  report.spectral_real_count = static_cast<int>(
      (report.eigenvalues.imag().array().abs() <= report.realness_tolerance).count());
  return report;
}

int nondecaying_dimension(const ChainConfig& config) {
  const ChainEigenbasis basis(config);
  int dimension = 0;
  for_each_kernel_block(basis, false, [&](double, const KernelBlock& block) {
    dimension += static_cast<int>(block.vectors.cols());
  });
  return dimension;
}

std::optional<int> periodic_dimension_formula(int n_spins) {
  if (n_spins < 3) return std::nullopt;
  if (n_spins % 2 == 1) return 1 << ((n_spins - 1) / 2);
  return 3 * (1 << ((n_spins - 4) / 2));
}

std::vector<ScanEntry> nondecaying_dimension_scan(std::span<const int> n_values,
                                                  Boundary boundary,
                                                  std::span<const int> probe_positions) {
  std::vector<ScanEntry> entries;
  for (int n : n_values) {
    if (probe_positions.empty()) {
      const int last = boundary == Boundary::periodic ? 1 : n;
      for (int p = 1; p <= last; ++p) entries.push_back({n, p, 0, std::nullopt});
    } else {
      for (int p : probe_positions) {
        if (p >= 1 && p <= n) entries.push_back({n, p, 0, std::nullopt});
      }
    }
  }
  parallel_for(entries.size(), [&](std::size_t i) {
    ChainConfig config;
    config.n_spins = entries[i].n_spins;
    config.boundary = boundary;
    config.probe_site = entries[i].probe_site;
    entries[i].dimension = nondecaying_dimension(config);
    if (boundary == Boundary::periodic) {
      entries[i].formula = periodic_dimension_formula(entries[i].n_spins);
    }
  });
  return entries;
}

double predicted_survival(const ComplexVector& psi, const SubspaceReport& report) {
  if (psi.size() != report.nd_basis.rows()) {
    throw LengthMismatch("state dimension does not match the subspace report");
  }
  if (report.nd_dimension == 0) return 0.0;
  return (report.nd_basis.adjoint() * psi).squaredNorm();
}

ComplexVector project_nondecaying(const ComplexVector& psi, const SubspaceReport& report) {
  if (psi.size() != report.nd_basis.rows()) {
    throw LengthMismatch("state dimension does not match the subspace report");
  }
  ComplexVector projected = ComplexVector::Zero(psi.size());
  if (report.nd_dimension > 0) {
    projected = report.nd_basis * (report.nd_basis.adjoint() * psi);
  }
  const double norm = projected.norm();
  if (norm <= 1e-12) {
    throw NoSurvivingComponent("state has no component in the non-decaying subspace");
  }
  return projected / norm;
}

AverageSurvival average_survival(const ChainConfig& config, int samples) {
  if (samples < 100) throw InvalidConfig("average_survival needs at least 100 samples");
  const SubspaceReport report = build_nondecaying_basis(config);
  AverageSurvival out;
  out.samples = samples;
  out.analytic = static_cast<double>(report.nd_dimension) / static_cast<double>(config.dim());
  std::vector<double> values(static_cast<std::size_t>(samples));
  parallel_for(values.size(), [&](std::size_t i) {
    values[i] = predicted_survival(random_state(config.dim(), derive_seed(config.seed, i)), report);
  });
  const Eigen::Map<const RealVector> v(values.data(), samples);
  out.monte_carlo = v.mean();
  const double variance = (v.array() - out.monte_carlo).square().sum() / (samples - 1);
  out.mc_stderr = std::sqrt(variance / samples);
  return out;
}

ComplexVector effective_eigenvalues(const ChainConfig& config) {
  config.validate();
  std::vector<ComplexMatrix> blocks;
  for (const auto& sector : magnetization_sectors(config.n_spins)) {
    for (auto& block : reflection_blocks(config, sector)) blocks.push_back(std::move(block));
  }
  std::vector<ComplexVector> spectra(blocks.size());
  std::vector<char> failed(blocks.size(), 0);
  parallel_for(blocks.size(), [&](std::size_t b) {
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(blocks[b], false);
    failed[b] = solver.info() != Eigen::Success;
    spectra[b] = solver.eigenvalues();
  });
  if (std::find(failed.begin(), failed.end(), 1) != failed.end()) {
    throw NumericalError("eigenvalue iteration did not converge");
  }
  std::vector<cplx> values;
  values.reserve(static_cast<std::size_t>(config.dim()));
  for (const auto& v : spectra) values.insert(values.end(), v.begin(), v.end());
  std::stable_sort(values.begin(), values.end(), detail::spectral_less<cplx>);
  return Eigen::Map<const ComplexVector>(values.data(), static_cast<Index>(values.size()));
}

SpectralDecomposition effective_spectrum(const ChainConfig& config) {
  config.validate();
  const auto sectors = magnetization_sectors(config.n_spins);
  std::vector<SpectralDecomposition> blocks;
  struct Slot {
    cplx value;
    std::size_t block;
    Index column;
  };
  std::vector<Slot> slots;
  for (std::size_t s = 0; s < sectors.size(); ++s) {
    blocks.push_back(general_eigendecompose(effective_hamiltonian_block(config, sectors[s])));
    for (Index c = 0; c < blocks.back().size(); ++c) {
      slots.push_back({blocks.back().eigenvalues(c), s, c});
    }
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return detail::spectral_less(a.value, b.value);
  });

  const Index dim = config.dim();
  SpectralDecomposition out;
  out.eigenvalues.resize(dim);
  out.right = ComplexMatrix::Zero(dim, dim);
  out.left = ComplexMatrix::Zero(dim, dim);
  out.condition = 1.0;
  for (const auto& block : blocks) out.condition = std::max(out.condition, block.condition);
  for (Index k = 0; k < dim; ++k) {
    const Slot& slot = slots[static_cast<std::size_t>(k)];
    const auto& states = sectors[slot.block].states;
    const auto& block = blocks[slot.block];
    out.eigenvalues(k) = slot.value;
    for (std::size_t i = 0; i < states.size(); ++i) {
      out.right(states[i], k) = block.right(static_cast<Index>(i), slot.column);
      out.left(states[i], k) = block.left(static_cast<Index>(i), slot.column);
    }
  }
  return out;
}

SpectrumClassification classify_spectrum(const ChainConfig& config) {
  const SpectralDecomposition spectrum = effective_spectrum(config);
  SpectrumClassification out;
  out.eigenvalues = spectrum.eigenvalues;
  out.tolerance = realness_tolerance(config);
  out.max_imag = spectrum.eigenvalues.imag().maxCoeff();
  for (Index k = 0; k < spectrum.size(); ++k) {
    if (std::abs(spectrum.eigenvalues(k).imag()) <= out.tolerance) {
      out.real.push_back(k);
    } else {
      out.decaying.push_back(k);
    }
  }
  return out;
}

}  // namespace zeno
