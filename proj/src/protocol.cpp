#include "zeno/protocol.hpp"

#include <cmath>
#include <map>

namespace zeno {

namespace {

constexpr double kUnderflowNorm = 1e-300;
constexpr double kConvergedDeviation = 1e-10;
constexpr int kConvergedRun = 50;

void require_state(const ChainConfig& config, const ComplexVector& psi) {
  if (psi.size() != config.dim()) {
    throw LengthMismatch("initial state has dimension " + std::to_string(psi.size()) +
                         ", chain needs " + std::to_string(config.dim()));
  }
  if (std::abs(psi.norm() - 1.0) > 1e-10) {
    throw ConfigError("initial state is not normalized");
  }
}

class Recorder {
 public:
  explicit Recorder(int n_spins) : n_spins_(n_spins) {}

  void add(double time, double p, double survival, const ComplexVector& state) {
    times_.push_back(time);
    probabilities_.push_back(p);
    survival_.push_back(survival);
    const RealVector z = magnetization_profile(state);
    magnetizations_.insert(magnetizations_.end(), z.data(), z.data() + z.size());
  }

  Trajectory finish(const ComplexVector& final_state, std::vector<PhaseMarker> markers) const {
    const Index n = static_cast<Index>(times_.size());
    Trajectory t;
    t.times = Eigen::Map<const RealVector>(times_.data(), n);
    t.step_probabilities = Eigen::Map<const RealVector>(probabilities_.data(), n);
    t.cumulative_survival = Eigen::Map<const RealVector>(survival_.data(), n);
    t.magnetizations =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            magnetizations_.data(), n, n_spins_);
    t.final_state = final_state;
    t.phase_markers = std::move(markers);
    return t;
  }

 private:
  int n_spins_;
  std::vector<double> times_;
  std::vector<double> probabilities_;
  std::vector<double> survival_;
  std::vector<double> magnetizations_;
};

}  // namespace

ComplexMatrix step_operator(const ChainConfig& config) {
  config.validate();
  const auto labels = down_spin_counts(config.n_spins + 1);
  const ComplexMatrix U = block_exponential(total_hamiltonian(config), cplx(0.0, -config.tau),
                                            std::span<const int>(labels));
  return U.topLeftCorner(config.dim(), config.dim());
}

ComplexMatrix free_propagator(const ChainConfig& config) {
  config.validate();
  const auto labels = down_spin_counts(config.n_spins);
  return block_exponential(chain_hamiltonian(config), cplx(0.0, -config.tau),
                           std::span<const int>(labels));
}

MeasurementProtocol::MeasurementProtocol(const ChainConfig& config)
    : config_(config), step_(step_operator(config)), free_(free_propagator(config)) {}

Trajectory MeasurementProtocol::run(const ComplexVector& psi0) const {
  require_state(config_, psi0);
  Recorder recorder(config_.n_spins);
  ComplexVector psi = psi0;
  ComplexVector next(psi.size());
  double survival = 1.0;
  recorder.add(0.0, 1.0, survival, psi);
  for (int j = 1; j <= config_.steps; ++j) {
    const bool measured = !config_.disconnect_step || j <= *config_.disconnect_step;
    double p = 1.0;
    if (measured) {
      next.noalias() = step_ * psi;
      p = next.squaredNorm();
      const double norm = std::sqrt(p);
      if (!(std::sqrt(survival) * norm >= kUnderflowNorm)) {
        throw ZeroNorm(static_cast<std::size_t>(j - 1));
      }
      next /= norm;
    } else {
      next.noalias() = free_ * psi;
      next.normalize();
    }
    psi.swap(next);
    survival *= p;
    recorder.add(j * config_.tau, p, survival, psi);
  }
  std::vector<PhaseMarker> markers;
  if (config_.disconnect_step) {
    markers.push_back({*config_.disconnect_step * config_.tau, "probe-disconnected"});
  }
  return recorder.finish(psi, std::move(markers));
}

ConvergedRun MeasurementProtocol::run_to_convergence(const ComplexVector& psi0, int max_steps,
                                                     const SubspaceReport* report) const {
  require_state(config_, psi0);
  Recorder recorder(config_.n_spins);
  ComplexVector psi = psi0;
  ComplexVector next(psi.size());
  ConvergedRun out;
  double survival = 1.0;
  int quiet = 0;
  recorder.add(0.0, 1.0, survival, psi);
  for (int j = 1; j <= max_steps; ++j) {
    next.noalias() = step_ * psi;
    const double p = next.squaredNorm();
    const double norm = std::sqrt(p);
    if (!(std::sqrt(survival) * norm >= kUnderflowNorm)) {
      throw ZeroNorm(static_cast<std::size_t>(j - 1));
    }
    next /= norm;
    psi.swap(next);
    survival *= p;
    recorder.add(j * config_.tau, p, survival, psi);
    out.steps = j;
    quiet = std::abs(1.0 - p) < kConvergedDeviation ? quiet + 1 : 0;
    if (quiet >= kConvergedRun) {
      out.converged = true;
      break;
    }
  }
  out.survival = survival;
  out.trajectory = recorder.finish(psi, {});
  if (report) out.predicted_survival = predicted_survival(psi0, *report);
  return out;
}

Trajectory run_measurement_protocol(const ChainConfig& config, const ComplexVector& psi0) {
  return MeasurementProtocol(config).run(psi0);
}

namespace {

void require_grid(std::span<const double> t_grid) {
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!(t_grid[k] >= 0.0) || (k > 0 && t_grid[k] < t_grid[k - 1])) {
      throw ConfigError("time grid must be ascending and start at t >= 0");
    }
  }
}

void record_effective(Recorder& recorder, double time, const ComplexVector& unnormalized,
                      double initial_norm2, double& previous_survival) {
  const double survival = unnormalized.squaredNorm() / initial_norm2;
  if (!(std::sqrt(survival) >= kUnderflowNorm)) throw ZeroNorm(0);
  const double p = previous_survival > 0.0 ? survival / previous_survival : 1.0;
  recorder.add(time, p, survival, unnormalized.normalized());
  previous_survival = survival;
}

}  // namespace

Trajectory run_effective_evolution(const ChainConfig& config, const ComplexVector& psi0,
                                   std::span<const double> t_grid) {
  require_state(config, psi0);
  require_grid(t_grid);
  SpectralDecomposition spectrum;
  try {
    spectrum = effective_spectrum(config);
  } catch (const Defective&) {
    return run_effective_evolution_stepped(config, psi0, t_grid);
  }
  const ComplexVector coefficients = spectrum.left.adjoint() * psi0;
  Recorder recorder(config.n_spins);
  double previous = 1.0;
  ComplexVector psi = psi0;
  for (double t : t_grid) {
    if (t == 0.0) {
      psi = psi0;
    } else {
      const ComplexVector phases =
          (cplx(0.0, -t) * spectrum.eigenvalues).array().exp().matrix();
      psi.noalias() = spectrum.right * coefficients.cwiseProduct(phases);
    }
    record_effective(recorder, t, psi, psi0.squaredNorm(), previous);
  }
  return recorder.finish(psi / psi.norm(), {});
}

Trajectory run_effective_evolution_stepped(const ChainConfig& config, const ComplexVector& psi0,
                                           std::span<const double> t_grid) {
  require_state(config, psi0);
  require_grid(t_grid);
  const ComplexMatrix H = effective_hamiltonian(config);
  const double max_dt = config.tau / 10.0;
  std::map<double, ComplexMatrix> propagators;
  Recorder recorder(config.n_spins);
  double previous = 1.0;
  double now = 0.0;
  ComplexVector psi = psi0;
  for (double t : t_grid) {
    const double span = t - now;
    if (span > 0.0) {
      const int pieces = static_cast<int>(std::ceil(span / max_dt - 1e-9));
      const double dt = span / pieces;
      auto it = propagators.find(dt);
      if (it == propagators.end()) {
        it = propagators.emplace(dt, pade_exponential((cplx(0.0, -dt) * H).eval())).first;
      }
      for (int i = 0; i < pieces; ++i) psi = it->second * psi;
      now = t;
    }
    record_effective(recorder, t, psi, psi0.squaredNorm(), previous);
  }
  return recorder.finish(psi / psi.norm(), {});
}

DeviationReport compare_discrete_continuous(const ChainConfig& config, const ComplexVector& psi0) {
  ChainConfig measured = config;
  measured.steps = config.disconnect_step.value_or(config.steps);
  measured.disconnect_step.reset();
  require_state(measured, psi0);
  const MeasurementProtocol protocol(measured);

  // exp(-i H_M tau) from the biorthogonal decomposition, or Pade if defective.
  ComplexMatrix continuous_step;
  try {
    const SpectralDecomposition spectrum = effective_spectrum(measured);
    const ComplexVector phases =
        (cplx(0.0, -config.tau) * spectrum.eigenvalues).array().exp().matrix();
    continuous_step = spectrum.right * phases.asDiagonal() * spectrum.left.adjoint();
  } catch (const Defective&) {
    continuous_step =
        pade_exponential((cplx(0.0, -config.tau) * effective_hamiltonian(measured)).eval());
  }

  DeviationReport report;
  report.steps = measured.steps;
  ComplexVector discrete = psi0;
  ComplexVector continuous = psi0;
  double discrete_survival = 1.0;
  double continuous_survival = 1.0;
  for (int k = 1; k <= measured.steps; ++k) {
    discrete = protocol.step() * discrete;
    continuous = continuous_step * continuous;
    const double p_discrete = discrete.squaredNorm();
    const double p_continuous = continuous.squaredNorm();
    if (!(std::sqrt(std::min(discrete_survival * p_discrete, continuous_survival * p_continuous)) >=
          kUnderflowNorm)) {
      throw ZeroNorm(static_cast<std::size_t>(k - 1));
    }
    discrete /= std::sqrt(p_discrete);
    continuous /= std::sqrt(p_continuous);
    discrete_survival *= p_discrete;
    continuous_survival *= p_continuous;
    report.max_infidelity =
        std::max(report.max_infidelity, 1.0 - std::norm(discrete.dot(continuous)));
    report.max_survival_gap =
        std::max(report.max_survival_gap, std::abs(discrete_survival - continuous_survival));
    report.max_magnetization_gap =
        std::max(report.max_magnetization_gap,
                 (magnetization_profile(discrete) - magnetization_profile(continuous))
                     .cwiseAbs()
                     .maxCoeff());
  }
  return report;
}

void MixedState::validate() const {
  if (components.empty()) throw ConfigError("mixed state has no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) throw ConfigError("mixture weights must be non-negative");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
}

ComplexMatrix MixedState::density_matrix() const {
  const Index dim = components.front().state.size();
  ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
  for (const auto& c : components) rho += c.weight * c.state * c.state.adjoint();
  return rho;
}

double MixedState::fidelity(const ComplexVector& phi) const {
  double f = 0.0;
  for (const auto& c : components) f += c.weight * std::norm(phi.dot(c.state));
  return f;
}

MixedOutcome run_mixed_protocol(const ChainConfig& config, const MixedState& rho0) {
  rho0.validate();
  const MeasurementProtocol protocol(config);
  MixedOutcome out;
  std::vector<ComplexVector> finals;
  for (const auto& component : rho0.components) {
    double survival = 0.0;
    ComplexVector final_state = component.state;
    if (component.weight > 0.0) {
      try {
        const Trajectory t = protocol.run(component.state);
        survival = t.final_survival();
        final_state = t.final_state;
      } catch (const ZeroNorm&) {
        survival = 0.0;
      }
    }
    out.component_survival.push_back(survival);
    finals.push_back(final_state);
    out.survival += component.weight * survival;
  }
  if (!(out.survival > 0.0)) throw ZeroNorm(static_cast<std::size_t>(config.steps));
  for (std::size_t i = 0; i < finals.size(); ++i) {
    const double w = rho0.components[i].weight * out.component_survival[i] / out.survival;
    out.final_state.components.push_back({w, finals[i]});
  }
  return out;
}

}  // namespace zeno
