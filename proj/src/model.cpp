#include "zeno/model.hpp"

#include <bit>

namespace zeno {

namespace {

// Nearest-neighbour bonds as 0-based bit pairs.
std::vector<std::pair<int, int>> chain_bonds(const ChainConfig& config) {
  std::vector<std::pair<int, int>> bonds;
  const int n = config.n_spins;
  for (int site = 0; site + 1 < n; ++site) bonds.emplace_back(site, site + 1);
  if (config.boundary == Boundary::periodic) bonds.emplace_back(n - 1, 0);
  return bonds;
}

// X_a X_b + Y_a Y_b maps |..0_a..1_b..> <-> |..1_a..0_b..> with amplitude 2
// and annihilates aligned pairs.
template <typename Emit>
void for_each_exchange(std::uint32_t state, int a, int b, Emit&& emit) {
  const std::uint32_t bit_a = (state >> a) & 1U;
  const std::uint32_t bit_b = (state >> b) & 1U;
  if (bit_a != bit_b) emit(state ^ ((1U << a) | (1U << b)));
}

}  // namespace

std::string to_string(Boundary boundary) {
  return boundary == Boundary::periodic ? "periodic" : "open";
}

Boundary parse_boundary(const std::string& text) {
  if (text == "periodic") return Boundary::periodic;
  if (text == "open") return Boundary::open;
  throw InvalidConfig("unknown boundary '" + text + "' (expected periodic or open)");
}

void ChainConfig::validate() const {
  if (n_spins < 2) throw InvalidConfig("n_spins must be >= 2");
  if (n_spins > kMaxSpins) {
    throw InvalidConfig("n_spins must be <= " + std::to_string(kMaxSpins));
  }
  if (boundary == Boundary::periodic && n_spins < 3) {
    throw InvalidConfig("a periodic chain needs at least 3 spins");
  }
  if (probe_site < 1 || probe_site > n_spins) {
    throw InvalidConfig("probe_site must lie in [1, n_spins]");
  }
  if (!(tau > 0.0)) throw InvalidConfig("tau must be positive");
  if (!std::isfinite(coupling_g)) throw InvalidConfig("coupling g must be finite");
  if (steps < 0) throw InvalidConfig("steps must be >= 0");
  if (disconnect_step) {
    if (*disconnect_step < 0 || *disconnect_step > steps) {
      throw InvalidConfig("disconnect_step must lie in [0, steps]");
    }
  }
}

std::vector<MagnetizationSector> magnetization_sectors(int n_bits) {
  std::vector<MagnetizationSector> sectors(static_cast<std::size_t>(n_bits) + 1);
  for (int k = 0; k <= n_bits; ++k) sectors[static_cast<std::size_t>(k)].n_down = k;
  const std::uint32_t dim = 1U << n_bits;
  for (std::uint32_t s = 0; s < dim; ++s) {
    sectors[static_cast<std::size_t>(std::popcount(s))].states.push_back(s);
  }
  return sectors;
}

std::vector<int> down_spin_counts(int n_bits) {
  std::vector<int> counts(std::size_t{1} << n_bits);
  for (std::size_t s = 0; s < counts.size(); ++s) {
    counts[s] = std::popcount(static_cast<std::uint32_t>(s));
  }
  return counts;
}

ComplexMatrix chain_hamiltonian(const ChainConfig& config) {
  config.validate();
  const Index dim = config.dim();
  ComplexMatrix H = ComplexMatrix::Zero(dim, dim);
  const auto bonds = chain_bonds(config);
  for (Index col = 0; col < dim; ++col) {
    for (const auto& [a, b] : bonds) {
      for_each_exchange(static_cast<std::uint32_t>(col), a, b,
                        [&](std::uint32_t row) { H(row, col) += 2.0; });
    }
  }
  return H;
}

ComplexMatrix chain_hamiltonian_block(const ChainConfig& config,
                                      const MagnetizationSector& sector) {
  config.validate();
  std::vector<Index> local(static_cast<std::size_t>(config.dim()), -1);
  for (Index i = 0; i < sector.size(); ++i) local[sector.states[static_cast<std::size_t>(i)]] = i;
  ComplexMatrix H = ComplexMatrix::Zero(sector.size(), sector.size());
  const auto bonds = chain_bonds(config);
  for (Index col = 0; col < sector.size(); ++col) {
    for (const auto& [a, b] : bonds) {
      for_each_exchange(sector.states[static_cast<std::size_t>(col)], a, b,
                        [&](std::uint32_t row) { H(local[row], col) += 2.0; });
    }
  }
  return H;
}

ComplexMatrix total_hamiltonian(const ChainConfig& config) {
  config.validate();
  const Index chain_dim = config.dim();
  const Index dim = 2 * chain_dim;
  ComplexMatrix H = ComplexMatrix::Zero(dim, dim);
  const ComplexMatrix chain = chain_hamiltonian(config);
  H.topLeftCorner(chain_dim, chain_dim) = chain;
  H.bottomRightCorner(chain_dim, chain_dim) = chain;
  const int probe_bit = config.n_spins;
  const int site_bit = config.probe_site - 1;
  for (Index col = 0; col < dim; ++col) {
    for_each_exchange(static_cast<std::uint32_t>(col), probe_bit, site_bit,
                      [&](std::uint32_t row) { H(row, col) += 2.0 * config.coupling_g; });
  }
  return H;
}

ComplexMatrix probe_projector(const ChainConfig& config) {
  config.validate();
  const Index dim = config.dim();
  RealVector diag(dim);
  const int bit = config.probe_site - 1;
  for (Index i = 0; i < dim; ++i) diag(i) = static_cast<double>((i >> bit) & 1);
  return diag.cast<cplx>().asDiagonal();
}

RealVector projector_diagonal_block(const ChainConfig& config, const MagnetizationSector& sector) {
  config.validate();
  const int bit = config.probe_site - 1;
  RealVector diag(sector.size());
  for (Index i = 0; i < sector.size(); ++i) {
    diag(i) = static_cast<double>((sector.states[static_cast<std::size_t>(i)] >> bit) & 1U);
  }
  return diag;
}

ComplexMatrix effective_hamiltonian(const ChainConfig& config) {
  return chain_hamiltonian(config) - cplx(0.0, config.damping()) * probe_projector(config);
}

ComplexMatrix effective_hamiltonian_block(const ChainConfig& config,
                                          const MagnetizationSector& sector) {
  ComplexMatrix H = chain_hamiltonian_block(config, sector);
  H.diagonal() -= cplx(0.0, config.damping()) * projector_diagonal_block(config, sector).cast<cplx>();
  return H;
}

RealVector total_magnetization_diagonal(int n_bits) {
  const Index dim = Index{1} << n_bits;
  RealVector diag(dim);
  for (Index i = 0; i < dim; ++i) {
    diag(i) = n_bits - 2.0 * std::popcount(static_cast<std::uint64_t>(i));
  }
  return diag;
}

int spins_for_dimension(Index dim) {
  if (dim < 2 || !std::has_single_bit(static_cast<std::uint64_t>(dim))) {
    throw LengthMismatch("state dimension " + std::to_string(dim) + " is not 2^N with N >= 1");
  }
  return std::countr_zero(static_cast<std::uint64_t>(dim));
}

double site_magnetization(const ComplexVector& state, int site) {
  const int n = spins_for_dimension(state.size());
  if (site < 1 || site > n) {
    throw SiteOutOfRange("site " + std::to_string(site) + " outside [1, " + std::to_string(n) +
                         "]");
  }
  const int bit = site - 1;
  double z = 0.0;
  for (Index i = 0; i < state.size(); ++i) {
    const double weight = std::norm(state(i));
    z += ((i >> bit) & 1) ? -weight : weight;
  }
  return z;
}

RealVector magnetization_profile(const ComplexVector& state) {
  const int n = spins_for_dimension(state.size());
  RealVector z = RealVector::Zero(n);
  for (Index i = 0; i < state.size(); ++i) {
    const double weight = std::norm(state(i));
    for (int bit = 0; bit < n; ++bit) z(bit) += ((i >> bit) & 1) ? -weight : weight;
  }
  return z;
}

ComplexVector product_state(const ChainConfig& config, std::span<const Spin> spins,
                            std::optional<Spin> probe) {
  if (static_cast<int>(spins.size()) != config.n_spins) {
    throw LengthMismatch("product state lists " + std::to_string(spins.size()) +
                         " spins for a chain of " + std::to_string(config.n_spins));
  }
  Index index = 0;
  for (std::size_t n = 0; n < spins.size(); ++n) {
    if (spins[n] == Spin::down) index |= Index{1} << n;
  }
  Index dim = config.dim();
  if (probe) {
    if (*probe == Spin::down) index |= dim;
    dim *= 2;
  }
  ComplexVector v = ComplexVector::Zero(dim);
  v(index) = 1.0;
  return v;
}

}  // namespace zeno
