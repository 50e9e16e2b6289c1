// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Optional argv[1]: scratch directory for scenario runs.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "zeno/protocol.hpp"
#include "zeno/scenario.hpp"
#include "zeno/subspace.hpp"

using namespace zeno;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kFormulaMinN = 3;
constexpr int kFormulaMaxN = 12;
constexpr double kFormulaRuntimeSeconds = 60.0;
// Criterion 2
constexpr int kCrossMinN = 3;
constexpr int kCrossMaxN = 10;
// Criterion 3
constexpr double kSlopeTarget = -0.5;
constexpr double kSlopeTolerance = 0.05;
// Criterion 5
constexpr double kImagLowerSlack = 1e-9;
constexpr double kImagUpper = 1e-10;
// Criterion 6
constexpr double kThirdOrderRatioLo = 6.0;
constexpr double kThirdOrderRatioHi = 10.0;
// Criterion 7
constexpr int kEnsembleSize = 100;
constexpr double kPredictionTolerance = 1e-3;
constexpr double kStderrMultiple = 3.0;
constexpr double kHaarAnalytic = 6.0 / 64.0;
constexpr int kConvergenceCap = 2'000'000;
// Criterion 8
constexpr double kP400Lo = 0.01;
constexpr double kP400Hi = 0.04;
constexpr double kZ1AtDisconnect = 0.95;
constexpr double kFreeMagnetizationDrift = 1e-9;
constexpr int kFreeSteps = 200;
// Criterion 9
constexpr double kWeakPaperValue = 0.017;
constexpr double kWeakFactor = 2.0;
// Criterion 10
constexpr int kPolaronSteps = 300;
constexpr double kPolaronRatioLo = 1.6;
constexpr double kPolaronRatioHi = 2.4;
// Criterion 11
constexpr double kDistillRelative = 0.02;
constexpr double kDistillFidelity = 0.999;
// Criterion 12
constexpr double kMixtureP = 0.3;
constexpr double kMixtureTolerance = 0.002;
constexpr int kMixtureSteps = 5000;
// Criterion 13
constexpr double kContinuousGap = 0.02;
constexpr double kContinuousShrink = 3.0;
// Criterion 14
constexpr double kEigenDecayBound = 0.01;
constexpr double kEigenDecayTime = 12.0;

ChainConfig paper_chain() {
  ChainConfig c;
  c.n_spins = 6;
  c.boundary = Boundary::periodic;
  c.probe_site = 1;
  c.coupling_g = 4.0;
  c.tau = 0.03;
  c.steps = 400;
  c.seed = 42;
  return c;
}

ComplexVector pure(const ChainConfig& c, std::string_view spec) {
  return std::get<ComplexVector>(parse_initial_state(spec, c));
}

ComplexVector all_up(const ChainConfig& c) { return pure(c, "product:" + std::string(c.n_spins, 'u')); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome dimension_formula() {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = true;
  for (int n = kFormulaMinN; n <= kFormulaMaxN; ++n) {
    ChainConfig c = paper_chain();
    c.n_spins = n;
    const int dim = build_nondecaying_basis(c).nd_dimension;
    const int formula = *periodic_dimension_formula(n);
    pass = pass && dim == formula;
    detail += fmt::format("{}{}:{}", n == kFormulaMinN ? "" : " ", n, dim);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  pass = pass && seconds < kFormulaRuntimeSeconds;
  return {pass, fmt::format("N:dim {} ({:.1f} s)", detail, seconds)};
}

Outcome cross_method() {
  int checked = 0;
  int mismatched = 0;
  std::string first_bad;
  for (int n = kCrossMinN; n <= kCrossMaxN; ++n) {
    for (Boundary b : {Boundary::periodic, Boundary::open}) {
      if (b == Boundary::periodic && n < 3) continue;
      for (double g : {0.5, 4.0}) {
        for (double tau : {0.01, 0.03}) {
          ChainConfig c = paper_chain();
          c.n_spins = n;
          c.boundary = b;
          c.coupling_g = g;
          c.tau = tau;
          const int kernel = nondecaying_dimension(c);
          const int real = static_cast<int>(classify_spectrum(c).real.size());
          ++checked;
          if (kernel != real) {
            ++mismatched;
            if (first_bad.empty()) {
              first_bad = fmt::format(" first: N={} {} g={} tau={} kernel={} real={}", n,
                                      to_string(b), g, tau, kernel, real);
            }
          }
        }
      }
    }
  }
  return {mismatched == 0, fmt::format("{} configurations, {} mismatches{}", checked, mismatched,
                                       first_bad)};
}

Outcome scaling_law() {
  // log2 P = slope N + c_parity, least squares with one intercept per parity.
  const int rows = kFormulaMaxN - kFormulaMinN + 1;
  Eigen::MatrixXd X(rows, 3);
  Eigen::VectorXd y(rows);
  for (int n = kFormulaMinN; n <= kFormulaMaxN; ++n) {
    ChainConfig c = paper_chain();
    c.n_spins = n;
    const int dim = nondecaying_dimension(c);
    const int r = n - kFormulaMinN;
    X(r, 0) = n;
    X(r, 1) = n % 2 == 1 ? 1.0 : 0.0;
    X(r, 2) = n % 2 == 0 ? 1.0 : 0.0;
    y(r) = std::log2(static_cast<double>(dim)) - n;
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  const double slope = beta(0);
  return {std::abs(slope - kSlopeTarget) <= kSlopeTolerance,
          fmt::format("slope {:.6f}, intercepts odd {:.4f} even {:.4f}", slope, beta(1), beta(2))};
}

Outcome open_chain_scan() {
  bool pass = true;
  std::string detail = "even N all 1:";
  for (int n : {4, 6, 8}) {
    const std::vector<int> ns{n};
    bool ones = true;
    for (const auto& e : nondecaying_dimension_scan(ns, Boundary::open)) ones = ones && e.dimension == 1;
    pass = pass && ones;
    detail += fmt::format(" N={} {}", n, ones ? "yes" : "no");
  }
  const std::vector<int> seven{7};
  const auto profile = nondecaying_dimension_scan(seven, Boundary::open);
  std::vector<int> d;
  for (const auto& e : profile) d.push_back(e.dimension);
  bool symmetric = d.size() == 7;
  int best = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    symmetric = symmetric && d[i] == d[d.size() - 1 - i];
    best = std::max(best, d[i]);
  }
  const bool centre = d.size() == 7 && d[3] == best;
  pass = pass && symmetric && centre;
  detail += fmt::format("; N=7 profile {} symmetric={} max at 4={}", fmt::join(d, ","),
                        symmetric ? "yes" : "no", centre ? "yes" : "no");
  return {pass, detail};
}

Outcome imaginary_field() {
  const ChainConfig c = paper_chain();
  const SpectralDecomposition s = effective_spectrum(c);
  const double lo = s.eigenvalues.imag().minCoeff();
  const double hi = s.eigenvalues.imag().maxCoeff();
  const bool pass = lo >= -c.damping() - kImagLowerSlack && hi <= kImagUpper;
  return {pass, fmt::format("Im lambda in [{:.6g}, {:.3g}], bound [-{}, {}]", lo, hi,
                            c.damping(), kImagUpper)};
}

Outcome third_order() {
  ChainConfig c = paper_chain();
  std::vector<double> dev;
  for (double tau : {0.03, 0.015}) {
    c.tau = tau;
    const ComplexMatrix E = matrix_exponential(effective_hamiltonian(c), cplx(0.0, -tau));
    dev.push_back(operator_norm(step_operator(c) - E));
  }
  const double ratio = dev[0] / dev[1];
  return {ratio >= kThirdOrderRatioLo && ratio <= kThirdOrderRatioHi,
          fmt::format("||V - exp(-i H_M tau)||: {:.4e} -> {:.4e}, ratio {:.3f}", dev[0], dev[1],
                      ratio)};
}

Outcome survival_prediction() {
  const ChainConfig c = paper_chain();
  const SubspaceReport report = build_nondecaying_basis(c);
  const MeasurementProtocol protocol(c);
  RealVector survival(kEnsembleSize);
  double worst = 0.0;
  int unconverged = 0;
  for (int i = 0; i < kEnsembleSize; ++i) {
    const ComplexVector psi = random_state(c.dim(), derive_seed(c.seed, static_cast<std::uint64_t>(i)));
    const ConvergedRun run = protocol.run_to_convergence(psi, kConvergenceCap, &report);
    if (!run.converged) ++unconverged;
    survival(i) = run.survival;
    worst = std::max(worst, std::abs(run.survival - *run.predicted_survival));
  }
  const double mean = survival.mean();
  const double stderr_mean =
      std::sqrt((survival.array() - mean).square().sum() / (kEnsembleSize - 1) / kEnsembleSize);
  const double z = (mean - kHaarAnalytic) / stderr_mean;
  const bool pass = unconverged == 0 && worst <= kPredictionTolerance &&
                    std::abs(z) <= kStderrMultiple;
  return {pass, fmt::format("max |P - predicted| {:.2e}; mean {:.5f} +/- {:.5f} vs {:.5f} ({:+.2f} "
                            "stderr); unconverged {}",
                            worst, mean, stderr_mean, kHaarAnalytic, z, unconverged)};
}

Outcome paper_trajectory() {
  ChainConfig c = paper_chain();
  c.disconnect_step = 400;
  c.steps = 400 + kFreeSteps;
  const Trajectory t = run_measurement_protocol(c, pure(c, "eigen-uniform:0..16"));
  const double p400 = t.cumulative_survival(400);
  const double z1 = t.magnetizations(400, 0);
  const double total = t.magnetizations.row(400).sum();
  double drift = 0.0;
  for (Index k = 401; k < t.records(); ++k) {
    drift = std::max(drift, std::abs(t.magnetizations.row(k).sum() - total));
  }
  const bool pass = p400 >= kP400Lo && p400 <= kP400Hi && z1 >= kZ1AtDisconnect &&
                    drift <= kFreeMagnetizationDrift;
  return {pass, fmt::format("P_400 {:.5f}, <Z_1>(t=12) {:.5f}, total Z drift after {:.2e}", p400,
                            z1, drift)};
}

Outcome weak_coupling() {
  ChainConfig c = paper_chain();
  c.coupling_g = 0.5;
  const ComplexVector psi = pure(c, "eigen-uniform:0..16");
  const SubspaceReport report = build_nondecaying_basis(c);
  const ConvergedRun run = MeasurementProtocol(c).run_to_convergence(psi, kConvergenceCap, &report);
  const double predicted = *run.predicted_survival;
  const bool pass = run.converged && std::abs(run.survival - predicted) <= kPredictionTolerance &&
                    run.survival >= kWeakPaperValue / kWeakFactor &&
                    run.survival <= kWeakPaperValue * kWeakFactor;
  return {pass, fmt::format("P_inf {:.5f} after {} steps (converged={}), projection {:.5f}",
                            run.survival, run.steps, run.converged, predicted)};
}

Outcome polaron_factor(const fs::path& scratch) {
  std::vector<fs::path> dirs;
  for (Scenario s : {Scenario::ensemble, Scenario::polaron_ensemble}) {
    ScenarioSpec spec;
    spec.scenario = s;
    spec.chain = paper_chain();
    spec.chain.steps = kPolaronSteps;
    spec.ensemble_size = kEnsembleSize;
    spec.initial_state = s == Scenario::ensemble ? "random" : "random-polaron";
    spec.output_dir = scratch / to_string(s);
    fs::remove_all(spec.output_dir);
    run_scenario(spec);
    dirs.push_back(spec.output_dir);
  }
  const SummaryReport summary = summarize(dirs);
  const double ratio = summary.polaron_to_haar_ratio.value_or(0.0);
  const bool pass = ratio >= kPolaronRatioLo && ratio <= kPolaronRatioHi;
  return {pass, fmt::format("mean P_300 Haar {:.5f}, polaron {:.5f}, ratio {:.4f}",
                            summary.groups[0].mean_survival, summary.groups[1].mean_survival, ratio)};
}

Outcome distillation() {
  const ChainConfig c = paper_chain();
  const SubspaceReport report = build_nondecaying_basis(c);
  const MeasurementProtocol protocol(c);
  const ComplexVector up = all_up(c);
  bool pass = true;
  std::string detail;
  for (double a : {1.0, 0.05}) {
    const ComplexVector psi = pure(c, fmt::format("gs-plus-allup:a={}", a));
    const ConvergedRun run = protocol.run_to_convergence(psi, kConvergenceCap, &report);
    const double expected = a * a / (1.0 + a * a);
    const double relative = std::abs(run.survival - expected) / expected;
    const double fidelity = std::norm(up.dot(run.trajectory.final_state));
    pass = pass && run.converged && relative <= kDistillRelative && fidelity >= kDistillFidelity;
    detail += fmt::format("{}a={}: P {:.6f} vs {:.6f} (rel {:.1e}), F {:.8f}", detail.empty() ? "" : "; ",
                          a, run.survival, expected, relative, fidelity);
  }
  return {pass, detail};
}

Outcome mixture() {
  ChainConfig c = paper_chain();
  c.steps = kMixtureSteps;
  const MixedState rho = std::get<MixedState>(parse_initial_state(fmt::format("mixture:p={}", kMixtureP), c));
  const MixedOutcome out = run_mixed_protocol(c, rho);
  const double fidelity = out.final_state.fidelity(all_up(c));
  const bool pass =
      std::abs(out.survival - kMixtureP) <= kMixtureTolerance && fidelity >= kDistillFidelity;
  return {pass, fmt::format("survival {:.6f} after {} steps, fidelity with all-up {:.8f}",
                            out.survival, c.steps, fidelity)};
}

double magnetization_gap(const ChainConfig& c, const ComplexVector& psi) {
  const Trajectory discrete = run_measurement_protocol(c, psi);
  std::vector<double> grid(static_cast<std::size_t>(discrete.records()));
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = discrete.times(static_cast<Index>(k));
  const Trajectory continuous = run_effective_evolution(c, psi, grid);
  return (discrete.magnetizations - continuous.magnetizations).cwiseAbs().maxCoeff();
}

Outcome discrete_continuous() {
  ChainConfig c = paper_chain();
  const ComplexVector psi = pure(c, "eigen-uniform:0..16");
  const double coarse = magnetization_gap(c, psi);
  ChainConfig fine = c;
  fine.tau = c.tau / 2;
  fine.steps = 2 * c.steps;
  const double refined = magnetization_gap(fine, psi);
  const double shrink = coarse / refined;
  const bool pass = coarse <= kContinuousGap && shrink >= kContinuousShrink;
  return {pass, fmt::format("max per-site |dZ| {:.5f} at tau={}, {:.5f} at tau={}, shrink {:.3f} "
                            "(needs <= {} and >= {}x)",
                            coarse, c.tau, refined, fine.tau, shrink, kContinuousGap,
                            kContinuousShrink)};
}

Outcome eigenstate_decay() {
  ChainConfig c = paper_chain();
  c.steps = static_cast<int>(std::lround(kEigenDecayTime / c.tau));
  const ChainEigenbasis basis(c);
  const MeasurementProtocol protocol(c);
  bool pass = true;
  std::string detail;
  for (Index k = 0; k < 4; ++k) {
    const double p = protocol.run(basis.state(k)).final_survival();
    pass = pass && p < kEigenDecayBound;
    detail += fmt::format("{}|{}> E={:.4f} P={:.2e}", k ? "; " : "", k, basis.energy(k), p);
  }
  return {pass, detail};
}

Outcome reproducibility(const fs::path& scratch) {
  std::vector<ScenarioSpec> specs;
  {
    ScenarioSpec s;
    s.scenario = Scenario::polaron;
    s.chain = paper_chain();
    s.chain.disconnect_step = 300;
    s.initial_state = "random";
    specs.push_back(s);
  }
  {
    ScenarioSpec s;
    s.scenario = Scenario::ensemble;
    s.chain = paper_chain();
    s.chain.steps = 100;
    s.ensemble_size = 16;
    s.initial_state = "random";
    specs.push_back(s);
  }
  {
    ScenarioSpec s;
    s.scenario = Scenario::compare;
    s.chain = paper_chain();
    s.chain.steps = 100;
    s.initial_state = "random-polaron";
    specs.push_back(s);
  }
  int files = 0;
  int differing = 0;
  for (auto& spec : specs) {
    std::vector<std::vector<std::string>> contents;
    for (const char* tag : {"a", "b"}) {
      spec.output_dir = scratch / ("repro_" + to_string(spec.scenario) + "_" + tag);
      fs::remove_all(spec.output_dir);
      const RunManifest m = run_scenario(spec);
      std::vector<std::string> texts;
      for (const auto& f : m.outputs) texts.push_back(slurp(spec.output_dir / f.name));
      contents.push_back(texts);
    }
    for (std::size_t i = 0; i < contents[0].size(); ++i) {
      ++files;
      if (contents[0][i] != contents[1].at(i) || contents[0][i].empty()) ++differing;
    }
  }
  return {differing == 0 && files > 0,
          fmt::format("{} output files compared across 3 scenarios, {} differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch =
      argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "zeno_acceptance";
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dimension formula, periodic N=3..12", dimension_formula},
      {"kernel dimension = real eigenvalue count", cross_method},
      {"average survival scaling slope", scaling_law},
      {"open-chain probe-position scan", open_chain_scan},
      {"imaginary-field spectrum bounds", imaginary_field},
      {"third-order step-operator consistency", third_order},
      {"Haar survival prediction", survival_prediction},
      {"paper trajectory with disconnection", paper_trajectory},
      {"weak-coupling limit", weak_coupling},
      {"polaron-ensemble factor", [&] { return polaron_factor(scratch); }},
      {"distillation of gs + a all-up", distillation},
      {"mixture distillation", mixture},
      {"discrete vs continuous magnetization", discrete_continuous},
      {"lowest eigenstates decay", eigenstate_decay},
      {"byte-identical reruns", [&] { return reproducibility(scratch); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::cout << fmt::format("[{}] {:>2} {:<42} {} [{:.1f} s]\n", outcome.pass ? "PASS" : "FAIL",
                             i + 1, criteria[i].first, outcome.detail, seconds)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failures,
                           criteria.size());
  return failures == 0 ? 0 : 1;
}
