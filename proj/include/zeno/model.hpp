#pragma once

// Spin chain + probe operators.
//
// Basis convention: spin n (1-based) is bit n-1 of the computational index,
// bit 0 is spin up and bit 1 is spin down. Index 0 is the fully polarized
// state |up up ... up>. When the probe is present it is bit N, so the
// probe-up half of the 2^(N+1) space is the leading 2^N x 2^N block.
//
// Couplings are dimensionless (unit exchange along the chain), and so is time.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zeno/numerics.hpp"

namespace zeno {

enum class Boundary { periodic, open };

enum class Spin { up, down };

std::string to_string(Boundary boundary);
Boundary parse_boundary(const std::string& text);

struct ChainConfig {
  int n_spins = 6;
  Boundary boundary = Boundary::periodic;
  int probe_site = 1;
  double coupling_g = 4.0;
  double tau = 0.03;
  int steps = 400;
  std::optional<int> disconnect_step;
  std::uint64_t seed = 42;

  /// Throws InvalidConfig describing the first violated constraint.
  void validate() const;

  Index dim() const { return Index{1} << n_spins; }
  /// 2 g^2 tau, the strength of the imaginary field on the probed site.
  double damping() const { return 2.0 * coupling_g * coupling_g * tau; }

  bool operator==(const ChainConfig&) const = default;
};

/// Largest chain handled by the dense builders.
inline constexpr int kMaxSpins = 14;

/// Basis states with a fixed number of down spins, ascending by index.
struct MagnetizationSector {
  int n_down = 0;
  std::vector<std::uint32_t> states;

  Index size() const { return static_cast<Index>(states.size()); }
};

std::vector<MagnetizationSector> magnetization_sectors(int n_bits);

/// Number of down spins of every basis state of `n_bits` spins; the label
/// set for block-diagonal operations.
std::vector<int> down_spin_counts(int n_bits);

/// sum_n (X_n X_{n+1} + Y_n Y_{n+1}), dimension 2^N.
ComplexMatrix chain_hamiltonian(const ChainConfig& config);

/// The chain Hamiltonian restricted to one magnetization sector.
ComplexMatrix chain_hamiltonian_block(const ChainConfig& config,
                                      const MagnetizationSector& sector);

/// H_ch (x) 1_probe + g (X X_p + Y Y_p), dimension 2^(N+1).
ComplexMatrix total_hamiltonian(const ChainConfig& config);

/// |down><down| on the probed site, identity elsewhere.
ComplexMatrix probe_projector(const ChainConfig& config);

/// Diagonal of the probe projector restricted to a sector (0 or 1 entries).
RealVector projector_diagonal_block(const ChainConfig& config, const MagnetizationSector& sector);

/// H_ch - 2 i g^2 tau Pi_p.
ComplexMatrix effective_hamiltonian(const ChainConfig& config);

ComplexMatrix effective_hamiltonian_block(const ChainConfig& config,
                                          const MagnetizationSector& sector);

/// Diagonal of sum_n Z_n over the 2^n_bits basis.
RealVector total_magnetization_diagonal(int n_bits);

/// <Z_site> for a state over 2^N amplitudes; site is 1-based.
double site_magnetization(const ComplexVector& state, int site);

/// <Z_n> for n = 1..N.
RealVector magnetization_profile(const ComplexVector& state);

/// Computational basis state, optionally with the probe attached.
ComplexVector product_state(const ChainConfig& config, std::span<const Spin> spins,
                            std::optional<Spin> probe = std::nullopt);

/// Number of spins encoded by a state of the given dimension; throws
/// LengthMismatch if the dimension is not a power of two.
int spins_for_dimension(Index dim);

}  // namespace zeno
