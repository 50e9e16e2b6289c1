#pragma once

// The evolve-then-measure loop on the probe, its continuous non-Hermitian
// approximation, and mixtures.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zeno/model.hpp"
#include "zeno/subspace.hpp"

namespace zeno {

struct PhaseMarker {
  double time = 0.0;
  std::string label;
};

/// One record per step k = 0..M (k = 0 is the initial state with p_0 = 1).
struct Trajectory {
  RealVector times;
  Eigen::MatrixXd magnetizations;  // records x sites
  RealVector step_probabilities;
  RealVector cumulative_survival;
  ComplexVector final_state;
  std::vector<PhaseMarker> phase_markers;

  Index records() const { return times.size(); }
  double final_survival() const { return cumulative_survival(cumulative_survival.size() - 1); }
};

struct ConvergedRun {
  Trajectory trajectory;
  bool converged = false;
  int steps = 0;
  double survival = 0.0;
  std::optional<double> predicted_survival;
};

/// The probe-up block of exp(-i H tau) on the chain.
ComplexMatrix step_operator(const ChainConfig& config);

/// exp(-i H_ch tau), used once the probe is disconnected.
ComplexMatrix free_propagator(const ChainConfig& config);

/// Post-selected measurement protocol with cached propagators. Each step
/// applies V and renormalizes; after `disconnect_step` the chain evolves
/// freely with p_j = 1.
class MeasurementProtocol {
 public:
  explicit MeasurementProtocol(const ChainConfig& config);

  const ChainConfig& config() const { return config_; }
  const ComplexMatrix& step() const { return step_; }
  const ComplexMatrix& free() const { return free_; }

  Trajectory run(const ComplexVector& psi0) const;

  /// Measures until |1 - p_j| < 1e-10 for 50 consecutive steps or
  /// `max_steps` is reached. Ignores `steps` and `disconnect_step`.
  ConvergedRun run_to_convergence(const ComplexVector& psi0, int max_steps = 1'000'000,
                                  const SubspaceReport* report = nullptr) const;

 private:
  ChainConfig config_;
  ComplexMatrix step_;
  ComplexMatrix free_;
};

Trajectory run_measurement_protocol(const ChainConfig& config, const ComplexVector& psi0);

/// psi(t) = sum_j <beta_j|psi0> exp(-i lambda_j t) |alpha_j>, renormalized
/// at every grid time; survival is the squared norm before renormalization.
/// Falls back to `run_effective_evolution_stepped` if H_M is defective.
Trajectory run_effective_evolution(const ChainConfig& config, const ComplexVector& psi0,
                                   std::span<const double> t_grid);

/// Repeated exp(-i H_M dt) with dt <= tau / 10 between grid times.
Trajectory run_effective_evolution_stepped(const ChainConfig& config, const ComplexVector& psi0,
                                           std::span<const double> t_grid);

struct DeviationReport {
  int steps = 0;
  double max_infidelity = 0.0;
  double max_survival_gap = 0.0;
  double max_magnetization_gap = 0.0;
};

/// Discrete protocol against continuous H_M evolution on the grid t = k tau,
/// over the measured phase (up to disconnect_step when set).
DeviationReport compare_discrete_continuous(const ChainConfig& config, const ComplexVector& psi0);

struct MixedComponent {
  double weight = 0.0;
  ComplexVector state;
};

struct MixedState {
  std::vector<MixedComponent> components;

  /// Throws ConfigError unless weights are >= 0 and sum to 1 within 1e-12.
  void validate() const;
  ComplexMatrix density_matrix() const;
  /// <phi| rho |phi>
  double fidelity(const ComplexVector& phi) const;
};

struct MixedOutcome {
  MixedState final_state;
  double survival = 0.0;
  std::vector<double> component_survival;
};

/// Runs every component through the protocol; final weights are
/// proportional to weight_i * P_i.
MixedOutcome run_mixed_protocol(const ChainConfig& config, const MixedState& rho0);

}  // namespace zeno
