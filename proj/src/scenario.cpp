#include "zeno/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "zeno/errors.hpp"
#include "zeno/parallel.hpp"
#include "zeno/subspace.hpp"

#ifndef ZENO_VERSION
#define ZENO_VERSION "0.0.0"
#endif

namespace zeno {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kBasisConvention =
    "degenerate chain levels: Gram-Schmidt of the level projector applied to basis states in "
    "descending index order; non-decaying vectors: per-level projector kernel, Gram-Schmidt in "
    "ascending index order";

constexpr int kDistillMaxSteps = 1'000'000;

const std::vector<std::pair<Scenario, std::string>>& scenario_names() {
  static const std::vector<std::pair<Scenario, std::string>> names{
      {Scenario::polaron, "polaron"},
      {Scenario::ensemble, "ensemble"},
      {Scenario::polaron_ensemble, "polaron-ensemble"},
      {Scenario::distill, "distill"},
      {Scenario::dimension_scan, "dimension-scan"},
      {Scenario::spectrum, "spectrum"},
      {Scenario::eigen_decay, "eigen-decay"},
      {Scenario::compare, "compare"}};
  return names;
}

bool is_ensemble(Scenario s) {
  return s == Scenario::ensemble || s == Scenario::polaron_ensemble;
}

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

// ---- initial-state grammar --------------------------------------------------

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == text_.size(); }
  std::string_view rest() const { return text_.substr(pos_); }

  void expect(std::string_view literal) {
    if (text_.substr(pos_, literal.size()) != literal) {
      throw ParseError("expected '" + std::string(literal) + "'", pos_);
    }
    pos_ += literal.size();
  }

  long long integer() {
    long long value = 0;
    const char* first = text_.data() + pos_;
    const auto [end, ec] = std::from_chars(first, text_.data() + text_.size(), value);
    if (ec != std::errc() || end == first) throw ParseError("expected an integer", pos_);
    pos_ += static_cast<std::size_t>(end - first);
    return value;
  }

  double real() {
    double value = 0.0;
    const char* first = text_.data() + pos_;
    const auto [end, ec] = std::from_chars(first, text_.data() + text_.size(), value);
    if (ec != std::errc() || end == first || !std::isfinite(value)) {
      throw ParseError("expected a real number", pos_);
    }
    pos_ += static_cast<std::size_t>(end - first);
    return value;
  }

  void finish() const {
    if (!done()) throw ParseError("unexpected trailing characters", pos_);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

ComplexVector all_up_state(const ChainConfig& config) {
  ComplexVector psi = ComplexVector::Zero(config.dim());
  psi(0) = 1.0;
  return psi;
}

// Haar-random state on the other N-1 spins with the probed site up.
ComplexVector random_polaron(const ChainConfig& config) {
  const int bit = config.probe_site - 1;
  const Index rest = Index{1} << (config.n_spins - 1);
  const ComplexVector r = random_state(rest, config.seed);
  ComplexVector psi = ComplexVector::Zero(config.dim());
  const Index low = (Index{1} << bit) - 1;
  for (Index i = 0; i < rest; ++i) psi((i & low) | ((i & ~low) << 1)) = r(i);
  return psi;
}

Index checked_eigen_index(long long k, const ChainConfig& config) {
  if (k < 0 || k >= config.dim()) {
    throw InvalidIndex("eigenstate index " + std::to_string(k) + " outside [0, " +
                       std::to_string(config.dim()) + ")");
  }
  return static_cast<Index>(k);
}

// ---- files ------------------------------------------------------------------

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
  }

  void add(const std::string& name, const std::string& content, std::size_t rows) {
    write_file(dir_ / name, content);
    files_.push_back({name, sha256_hex(content), rows});
  }

  const std::vector<OutputFile>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<OutputFile> files_;
};

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) text_ += ',';
      text_ += header[i];
    }
    text_ += '\n';
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    (append(cells, first), ...);
    text_ += '\n';
    ++rows_;
  }

  void row_values(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
    ++rows_;
  }

  const std::string& text() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  template <typename T>
  void append(const T& cell, bool& first) {
    if (!first) text_ += ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      text_ += format_double(cell);
    } else if constexpr (std::is_integral_v<T>) {
      text_ += std::to_string(cell);
    } else {
      text_ += cell;
    }
  }

  std::string text_;
  std::size_t rows_ = 0;
};

std::vector<std::string> site_columns(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Csv trajectory_csv(const Trajectory& t, const ChainConfig& config) {
  std::vector<std::string> header{"step", "time", "p", "P"};
  for (auto& c : site_columns("Z", config.n_spins)) header.push_back(c);
  header.push_back("phase");
  Csv csv(header);
  for (Index k = 0; k < t.records(); ++k) {
    std::vector<std::string> cells{std::to_string(k), format_double(t.times(k)),
                                   format_double(t.step_probabilities(k)),
                                   format_double(t.cumulative_survival(k))};
    for (Index s = 0; s < t.magnetizations.cols(); ++s) {
      cells.push_back(format_double(t.magnetizations(k, s)));
    }
    std::string phase = "measured";
    if (k == 0) {
      phase = "initial";
    } else if (config.disconnect_step && k > *config.disconnect_step) {
      phase = "free";
    }
    cells.push_back(phase);
    csv.row_values(cells);
  }
  return csv;
}

Json vector_json(const RealVector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json config_json(const ScenarioSpec& spec) {
  Json c;
  c["scenario"] = to_string(spec.scenario);
  c["n_spins"] = spec.chain.n_spins;
  c["boundary"] = to_string(spec.chain.boundary);
  c["probe_site"] = spec.chain.probe_site;
  c["g"] = spec.chain.coupling_g;
  c["tau"] = spec.chain.tau;
  c["steps"] = spec.chain.steps;
  c["disconnect_step"] =
      spec.chain.disconnect_step ? Json(*spec.chain.disconnect_step) : Json(nullptr);
  c["seed"] = spec.chain.seed;
  c["ensemble_size"] = spec.ensemble_size ? Json(*spec.ensemble_size) : Json(nullptr);
  c["initial_state"] = spec.initial_state;
  c["output_dir"] = spec.output_dir.string();
  if (spec.scenario == Scenario::dimension_scan) {
    c["n_range"] = fmt::format("{}..{}", spec.scan_lo, spec.scan_hi);
  }
  if (spec.scenario == Scenario::eigen_decay) c["eigen_indices"] = spec.eigen_indices;
  return c;
}

ComplexVector require_pure(const InitialState& state, Scenario scenario) {
  if (const auto* psi = std::get_if<ComplexVector>(&state)) return *psi;
  throw InvalidConfig("scenario " + to_string(scenario) +
                      " needs a pure initial state (mixtures run under distill)");
}

// ---- scenarios ----------------------------------------------------------------

Json run_polaron(const ScenarioSpec& spec, OutputSet& out, Json& markers) {
  const ChainConfig& config = spec.chain;
  const ComplexVector psi = require_pure(parse_initial_state(spec.initial_state, config), spec.scenario);
  const Trajectory t = run_measurement_protocol(config, psi);
  const Csv csv = trajectory_csv(t, config);
  out.add("trajectory.csv", csv.text(), csv.rows());
  for (const auto& m : t.phase_markers) markers.push_back({{"time", m.time}, {"label", m.label}});

  const SubspaceReport report = build_nondecaying_basis(config);
  Json r;
  r["survival"] = t.final_survival();
  r["predicted_survival"] = predicted_survival(psi, report);
  r["nd_dimension"] = report.nd_dimension;
  if (config.disconnect_step) {
    const Index k = *config.disconnect_step;
    r["survival_at_disconnect"] = t.cumulative_survival(k);
    r["magnetization_at_disconnect"] = vector_json(t.magnetizations.row(k).transpose());
  }
  r["final_magnetization"] =
      vector_json(t.magnetizations.row(t.records() - 1).transpose());
  return r;
}

Json run_ensemble(const ScenarioSpec& spec, OutputSet& out) {
  const ChainConfig& config = spec.chain;
  const int members = *spec.ensemble_size;
  const MeasurementProtocol protocol(config);
  const SubspaceReport report = build_nondecaying_basis(config);

  std::vector<Trajectory> runs(static_cast<std::size_t>(members));
  std::vector<double> predicted(runs.size());
  std::vector<std::uint64_t> seeds(runs.size());
  parallel_for(runs.size(), [&](std::size_t i) {
    ChainConfig member = config;
    member.seed = derive_seed(config.seed, i);
    seeds[i] = member.seed;
    const ComplexVector psi =
        require_pure(parse_initial_state(spec.initial_state, member), spec.scenario);
    runs[i] = protocol.run(psi);
    predicted[i] = predicted_survival(psi, report);
  });

  const Index records = runs.front().records();
  std::vector<std::string> header{"step", "time", "mean_P", "stderr_P"};
  for (auto& c : site_columns("mean_Z", config.n_spins)) header.push_back(c);
  Csv mean_csv(header);
  for (Index k = 0; k < records; ++k) {
    RealVector P(members);
    Eigen::MatrixXd Z(members, config.n_spins);
    for (int i = 0; i < members; ++i) {
      P(i) = runs[static_cast<std::size_t>(i)].cumulative_survival(k);
      Z.row(i) = runs[static_cast<std::size_t>(i)].magnetizations.row(k);
    }
    const double mean = P.mean();
    const double stderr_p =
        members > 1 ? std::sqrt((P.array() - mean).square().sum() / (members - 1) / members) : 0.0;
    std::vector<std::string> cells{std::to_string(k), format_double(runs.front().times(k)),
                                   format_double(mean), format_double(stderr_p)};
    const RealVector z = Z.colwise().mean().transpose();
    for (Index s = 0; s < z.size(); ++s) cells.push_back(format_double(z(s)));
    mean_csv.row_values(cells);
  }
  out.add("ensemble.csv", mean_csv.text(), mean_csv.rows());

  Csv member_csv({"member", "seed", "final_P", "predicted_P"});
  Json finals = Json::array();
  Json predictions = Json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    member_csv.row(static_cast<long long>(i), std::to_string(seeds[i]), runs[i].final_survival(),
                   predicted[i]);
    finals.push_back(runs[i].final_survival());
    predictions.push_back(predicted[i]);
  }
  out.add("members.csv", member_csv.text(), member_csv.rows());

  RealVector final_p(members);
  for (int i = 0; i < members; ++i) final_p(i) = runs[static_cast<std::size_t>(i)].final_survival();
  const double mean = final_p.mean();
  Json r;
  r["mean_survival"] = mean;
  r["stderr_survival"] =
      members > 1 ? std::sqrt((final_p.array() - mean).square().sum() / (members - 1) / members)
                  : 0.0;
  r["analytic_survival"] =
      static_cast<double>(report.nd_dimension) / static_cast<double>(config.dim());
  r["nd_dimension"] = report.nd_dimension;
  r["member_survival"] = finals;
  r["member_predicted_survival"] = predictions;
  return r;
}

Json run_distill(const ScenarioSpec& spec, OutputSet& out) {
  const ChainConfig& config = spec.chain;
  const InitialState initial = parse_initial_state(spec.initial_state, config);
  const ComplexVector up = all_up_state(config);
  Json r;
  if (const auto* mixed = std::get_if<MixedState>(&initial)) {
    const MixedOutcome outcome = run_mixed_protocol(config, *mixed);
    Csv csv({"component", "weight", "survival", "final_weight", "fidelity_all_up"});
    for (std::size_t i = 0; i < mixed->components.size(); ++i) {
      csv.row(static_cast<long long>(i), mixed->components[i].weight, outcome.component_survival[i],
              outcome.final_state.components[i].weight,
              std::norm(up.dot(outcome.final_state.components[i].state)));
    }
    out.add("components.csv", csv.text(), csv.rows());
    r["survival"] = outcome.survival;
    r["analytic_survival"] = mixed->fidelity(up);
    r["fidelity_all_up"] = outcome.final_state.fidelity(up);
    return r;
  }

  const ComplexVector& psi = std::get<ComplexVector>(initial);
  const SubspaceReport report = build_nondecaying_basis(config);
  const MeasurementProtocol protocol(config);
  const ConvergedRun run = protocol.run_to_convergence(psi, kDistillMaxSteps, &report);
  const Csv csv = trajectory_csv(run.trajectory, config);
  out.add("trajectory.csv", csv.text(), csv.rows());

  // Non-decaying components only acquire phases exp(-i E t).
  const double t = run.steps * config.tau;
  const ComplexVector coefficients = report.nd_basis.adjoint() * psi;
  ComplexVector limit = ComplexVector::Zero(config.dim());
  for (Index j = 0; j < report.nd_dimension; ++j) {
    limit += std::exp(cplx(0.0, -report.nd_energies(j) * t)) * coefficients(j) *
             report.nd_basis.col(j);
  }
  const ComplexVector& final_state = run.trajectory.final_state;
  r["survival"] = run.survival;
  r["analytic_survival"] = *run.predicted_survival;
  r["converged"] = run.converged;
  r["steps_run"] = run.steps;
  r["fidelity_all_up"] = std::norm(up.dot(final_state));
  r["fidelity_projection"] =
      limit.norm() > 0.0 ? std::norm(limit.normalized().dot(final_state)) : 0.0;
  r["final_magnetization"] = vector_json(magnetization_profile(final_state));
  return r;
}

Json run_dimension_scan(const ScenarioSpec& spec, OutputSet& out) {
  std::vector<int> n_values;
  for (int n = spec.scan_lo; n <= spec.scan_hi; ++n) {
    if (spec.chain.boundary == Boundary::periodic && n < 3) continue;
    n_values.push_back(n);
  }
  const auto entries = nondecaying_dimension_scan(n_values, spec.chain.boundary);
  Json table;
  table["boundary"] = to_string(spec.chain.boundary);
  Json rows = Json::array();
  bool formula_ok = true;
  for (const auto& e : entries) {
    Json row;
    row["n_spins"] = e.n_spins;
    row["probe_site"] = e.probe_site;
    row["dimension"] = e.dimension;
    row["formula"] = e.formula ? Json(*e.formula) : Json(nullptr);
    row["average_survival"] = std::ldexp(static_cast<double>(e.dimension), -e.n_spins);
    if (e.formula && *e.formula != e.dimension) formula_ok = false;
    rows.push_back(row);
  }
  table["entries"] = rows;
  out.add("scan.json", table.dump(2) + "\n", entries.size());
  Json r;
  r["entries"] = entries.size();
  if (spec.chain.boundary == Boundary::periodic) r["matches_formula"] = formula_ok;
  return r;
}

Json run_spectrum(const ScenarioSpec& spec, OutputSet& out) {
  const SpectrumClassification s = classify_spectrum(spec.chain);
  std::vector<bool> is_real(static_cast<std::size_t>(s.eigenvalues.size()), false);
  for (Index k : s.real) is_real[static_cast<std::size_t>(k)] = true;
  Csv csv({"index", "re", "im", "class"});
  for (Index k = 0; k < s.eigenvalues.size(); ++k) {
    csv.row(static_cast<long long>(k), s.eigenvalues(k).real(), s.eigenvalues(k).imag(),
            std::string(is_real[static_cast<std::size_t>(k)] ? "real" : "decaying"));
  }
  out.add("spectrum.csv", csv.text(), csv.rows());
  Json r;
  r["real_count"] = s.real.size();
  r["decaying_count"] = s.decaying.size();
  r["nd_dimension"] = nondecaying_dimension(spec.chain);
  r["tolerance"] = s.tolerance;
  r["max_imag"] = s.max_imag;
  r["min_imag"] = s.eigenvalues.imag().minCoeff();
  r["damping"] = spec.chain.damping();
  return r;
}

Json run_eigen_decay(const ScenarioSpec& spec, OutputSet& out) {
  const ChainConfig& config = spec.chain;
  const ChainEigenbasis basis(config);
  const MeasurementProtocol protocol(config);
  std::vector<Trajectory> runs(spec.eigen_indices.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Index k = checked_eigen_index(spec.eigen_indices[i], config);
    runs[i] = protocol.run(basis.state(k));
  }
  std::vector<std::string> header{"step", "time"};
  for (int k : spec.eigen_indices) header.push_back("P_eigen" + std::to_string(k));
  Csv csv(header);
  for (Index step = 0; step < runs.front().records(); ++step) {
    std::vector<std::string> cells{std::to_string(step), format_double(runs.front().times(step))};
    for (const auto& t : runs) cells.push_back(format_double(t.cumulative_survival(step)));
    csv.row_values(cells);
  }
  out.add("eigen_decay.csv", csv.text(), csv.rows());
  Json r;
  Json states = Json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Index k = spec.eigen_indices[i];
    states.push_back({{"index", k}, {"energy", basis.energy(k)},
                      {"survival", runs[i].final_survival()}});
  }
  r["eigenstates"] = states;
  return r;
}

Json run_compare(const ScenarioSpec& spec, OutputSet& out) {
  ChainConfig measured = spec.chain;
  measured.steps = spec.chain.disconnect_step.value_or(spec.chain.steps);
  measured.disconnect_step.reset();
  const ComplexVector psi =
      require_pure(parse_initial_state(spec.initial_state, measured), spec.scenario);

  const DeviationReport d = compare_discrete_continuous(measured, psi);
  const Trajectory discrete = run_measurement_protocol(measured, psi);
  std::vector<double> grid(static_cast<std::size_t>(discrete.records()));
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = discrete.times(static_cast<Index>(k));
  const Trajectory continuous = run_effective_evolution(measured, psi, grid);

  Csv csv({"step", "time", "P_discrete", "P_continuous", "max_dZ"});
  for (Index k = 0; k < discrete.records(); ++k) {
    const double dz =
        (discrete.magnetizations.row(k) - continuous.magnetizations.row(k)).cwiseAbs().maxCoeff();
    csv.row(static_cast<long long>(k), discrete.times(k), discrete.cumulative_survival(k),
            continuous.cumulative_survival(k), dz);
  }
  out.add("compare.csv", csv.text(), csv.rows());
  Json r;
  r["steps_compared"] = d.steps;
  r["max_infidelity"] = d.max_infidelity;
  r["max_survival_gap"] = d.max_survival_gap;
  r["max_magnetization_gap"] = d.max_magnetization_gap;
  r["survival"] = discrete.final_survival();
  return r;
}

template <typename T>
T json_get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

// ---- public -------------------------------------------------------------------

std::string to_string(Scenario scenario) {
  for (const auto& [s, name] : scenario_names()) {
    if (s == scenario) return name;
  }
  return "unknown";
}

Scenario parse_scenario_name(const std::string& text) {
  for (const auto& [s, name] : scenario_names()) {
    if (name == text) return s;
  }
  throw InvalidConfig("unknown scenario '" + text + "'");
}

void ScenarioSpec::validate() const {
  chain.validate();
  if (is_ensemble(scenario) && (!ensemble_size || *ensemble_size < 1)) {
    throw InvalidConfig("scenario " + to_string(scenario) + " needs ensemble_size >= 1");
  }
  if (scenario == Scenario::dimension_scan &&
      (scan_lo < 2 || scan_hi > kMaxSpins || scan_lo > scan_hi)) {
    throw InvalidConfig("n_range must satisfy 2 <= lo <= hi <= " + std::to_string(kMaxSpins));
  }
  if (scenario == Scenario::eigen_decay && eigen_indices.empty()) {
    throw InvalidConfig("eigen_indices must not be empty");
  }
  if (output_dir.empty()) throw InvalidConfig("output_dir must not be empty");
}

std::pair<int, int> parse_range(std::string_view text) {
  Cursor cursor(text);
  const long long lo = cursor.integer();
  cursor.expect("..");
  const long long hi = cursor.integer();
  cursor.finish();
  if (lo > hi) throw ParseError("range lower bound exceeds upper bound", 0);
  if (lo < 0 || hi > 1'000'000) throw ParseError("range bound out of bounds", 0);
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

ScenarioSpec parse_scenario_spec(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");

  static const std::vector<std::string> known{
      "scenario", "n_spins", "boundary", "probe_site", "g", "tau", "steps", "disconnect_step",
      "seed", "ensemble_size", "initial_state", "output_dir", "n_range", "eigen_indices"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw InvalidConfig("unknown config key '" + item.key() + "'");
    }
  }

  ScenarioSpec spec;
  if (!j.contains("scenario")) throw InvalidConfig("config key 'scenario' is required");
  spec.scenario = parse_scenario_name(json_get<std::string>(j, "scenario"));
  if (j.contains("n_spins")) spec.chain.n_spins = json_get<int>(j, "n_spins");
  if (j.contains("boundary")) spec.chain.boundary = parse_boundary(json_get<std::string>(j, "boundary"));
  if (j.contains("probe_site")) spec.chain.probe_site = json_get<int>(j, "probe_site");
  if (j.contains("g")) spec.chain.coupling_g = json_get<double>(j, "g");
  if (j.contains("tau")) spec.chain.tau = json_get<double>(j, "tau");
  if (j.contains("steps")) spec.chain.steps = json_get<int>(j, "steps");
  if (j.contains("disconnect_step") && !j.at("disconnect_step").is_null()) {
    spec.chain.disconnect_step = json_get<int>(j, "disconnect_step");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      throw InvalidConfig("config key 'seed' must be a non-negative integer");
    }
    spec.chain.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("ensemble_size") && !j.at("ensemble_size").is_null()) {
    spec.ensemble_size = json_get<int>(j, "ensemble_size");
  }
  if (j.contains("initial_state")) {
    spec.initial_state = json_get<std::string>(j, "initial_state");
  } else if (spec.scenario == Scenario::ensemble) {
    spec.initial_state = "random";
  } else if (spec.scenario == Scenario::polaron_ensemble) {
    spec.initial_state = "random-polaron";
  } else if (spec.scenario == Scenario::distill) {
    spec.initial_state = "gs-plus-allup:a=0.05";
  }
  if (j.contains("output_dir")) spec.output_dir = json_get<std::string>(j, "output_dir");
  if (j.contains("n_range")) {
    const Json& range = j.at("n_range");
    if (range.is_string()) {
      std::tie(spec.scan_lo, spec.scan_hi) = parse_range(range.get<std::string>());
    } else if (range.is_array() && range.size() == 2) {
      spec.scan_lo = json_get<std::vector<int>>(j, "n_range")[0];
      spec.scan_hi = json_get<std::vector<int>>(j, "n_range")[1];
    } else {
      throw InvalidConfig("config key 'n_range' must be \"lo..hi\" or [lo, hi]");
    }
  }
  if (j.contains("eigen_indices")) spec.eigen_indices = json_get<std::vector<int>>(j, "eigen_indices");
  spec.validate();
  return spec;
}

ScenarioSpec load_scenario_spec(const std::filesystem::path& path) {
  return parse_scenario_spec(read_file(path));
}

InitialState parse_initial_state(std::string_view spec, const ChainConfig& config) {
  config.validate();
  const auto colon = spec.find(':');
  const std::string_view head = spec.substr(0, colon);
  Cursor cursor(spec);

  if (head == "random" || head == "random-polaron") {
    cursor.expect(head);
    cursor.finish();
    if (head == "random") return random_state(config.dim(), config.seed);
    return random_polaron(config);
  }
  if (colon == std::string_view::npos) throw ParseError("unknown initial state", 0);
  cursor.expect(head);
  cursor.expect(":");

  if (head == "product") {
    const std::string_view letters = cursor.rest();
    std::vector<Spin> spins;
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (letters[i] == 'u') {
        spins.push_back(Spin::up);
      } else if (letters[i] == 'd') {
        spins.push_back(Spin::down);
      } else {
        throw ParseError("expected 'u' or 'd'", cursor.position() + i);
      }
    }
    return product_state(config, spins);
  }
  if (head == "eigen-uniform") {
    const long long lo = cursor.integer();
    cursor.expect("..");
    const std::size_t hi_at = cursor.position();
    const long long hi = cursor.integer();
    cursor.finish();
    if (lo > hi) throw ParseError("range lower bound exceeds upper bound", hi_at);
    const Index first = checked_eigen_index(lo, config);
    const Index last = checked_eigen_index(hi, config);
    const ChainEigenbasis basis(config);
    ComplexVector psi = ComplexVector::Zero(config.dim());
    for (Index k = first; k <= last; ++k) psi += basis.state(k);
    return ComplexVector(psi / std::sqrt(static_cast<double>(last - first + 1)));
  }
  if (head == "eigen") {
    const long long k = cursor.integer();
    cursor.finish();
    const Index index = checked_eigen_index(k, config);
    return ChainEigenbasis(config).state(index);
  }
  if (head == "gs-plus-allup") {
    cursor.expect("a=");
    const double a = cursor.real();
    cursor.finish();
    const ComplexVector psi = ChainEigenbasis(config).ground_state() + a * all_up_state(config);
    return ComplexVector(psi / std::sqrt(1.0 + a * a));
  }
  if (head == "mixture") {
    cursor.expect("p=");
    const std::size_t at = cursor.position();
    const double p = cursor.real();
    cursor.finish();
    if (p < 0.0 || p > 1.0) throw ParseError("mixture weight must lie in [0, 1]", at);
    MixedState rho;
    rho.components.push_back({p, all_up_state(config)});
    rho.components.push_back({1.0 - p, ChainEigenbasis(config).ground_state()});
    return rho;
  }
  throw ParseError("unknown initial state '" + std::string(head) + "'", 0);
}

RunManifest run_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  OutputSet out(spec.output_dir);
  Json markers = Json::array();
  Json results;
  switch (spec.scenario) {
    case Scenario::polaron: results = run_polaron(spec, out, markers); break;
    case Scenario::ensemble:
    case Scenario::polaron_ensemble: results = run_ensemble(spec, out); break;
    case Scenario::distill: results = run_distill(spec, out); break;
    case Scenario::dimension_scan: results = run_dimension_scan(spec, out); break;
    case Scenario::spectrum: results = run_spectrum(spec, out); break;
    case Scenario::eigen_decay: results = run_eigen_decay(spec, out); break;
    case Scenario::compare: results = run_compare(spec, out); break;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RunManifest manifest;
  manifest.spec = spec;
  manifest.version = ZENO_VERSION;
  manifest.duration_seconds = seconds;
  manifest.outputs = out.files();

  Json m;
  m["artifact"] = "zenochain";
  m["version"] = manifest.version;
  m["scenario"] = to_string(spec.scenario);
  m["seed"] = spec.chain.seed;
  m["config"] = config_json(spec);
  m["basis_convention"] = kBasisConvention;
  m["duration_seconds"] = seconds;
  Json outputs = Json::array();
  for (const auto& f : manifest.outputs) {
    outputs.push_back({{"file", f.name}, {"sha256", f.sha256}, {"rows", f.rows}});
  }
  m["outputs"] = outputs;
  m["phase_markers"] = markers;
  m["results"] = results;
  manifest.json = m.dump(2) + "\n";
  write_file(out.dir() / "manifest.json", manifest.json);
  return manifest;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

SummaryReport summarize(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.empty()) throw InvalidConfig("summarize needs at least one run directory");
  struct Pool {
    int runs = 0;
    std::vector<double> samples;
    std::vector<double> analytic;
    bool all_analytic = true;
  };
  std::map<std::string, Pool> pools;
  std::vector<std::string> order;
  std::optional<Json> reference_chain;
  std::string reference_dir;

  for (const auto& dir : run_dirs) {
    const std::filesystem::path path = dir / "manifest.json";
    Json m;
    try {
      m = Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("unreadable manifest " + path.string() + ": " + e.what());
    }
    try {
      for (const auto& f : m.at("outputs")) {
        const std::string name = f.at("file").get<std::string>();
        if (sha256_file(dir / name) != f.at("sha256").get<std::string>()) {
          throw IoError("checksum mismatch for " + (dir / name).string());
        }
      }
      const Json& c = m.at("config");
      Json chain;
      for (const char* key : {"n_spins", "boundary", "probe_site", "g", "tau", "steps"}) {
        chain[key] = c.at(key);
      }
      if (!reference_chain) {
        reference_chain = chain;
        reference_dir = dir.string();
      } else if (chain != *reference_chain) {
        throw IncompatibleRuns("chain parameters of " + dir.string() + " (" + chain.dump() +
                               ") differ from " + reference_dir + " (" + reference_chain->dump() +
                               ")");
      }

      const std::string scenario = m.at("scenario").get<std::string>();
      if (!pools.count(scenario)) order.push_back(scenario);
      Pool& pool = pools[scenario];
      ++pool.runs;
      const Json& r = m.at("results");
      if (r.contains("member_survival")) {
        for (const auto& v : r.at("member_survival")) pool.samples.push_back(v.get<double>());
      } else if (r.contains("survival")) {
        pool.samples.push_back(r.at("survival").get<double>());
      }
      if (r.contains("analytic_survival")) {
        pool.analytic.push_back(r.at("analytic_survival").get<double>());
      } else {
        pool.all_analytic = false;
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
  }

  SummaryReport report;
  Csv csv({"scenario", "runs", "samples", "mean_survival", "stderr_survival", "analytic",
           "z_score"});
  for (const auto& name : order) {
    const Pool& pool = pools.at(name);
    SummaryGroup g;
    g.scenario = name;
    g.runs = pool.runs;
    g.samples = static_cast<int>(pool.samples.size());
    if (g.samples > 0) {
      const Eigen::Map<const RealVector> v(pool.samples.data(), g.samples);
      g.mean_survival = v.mean();
      g.stderr_survival =
          g.samples > 1
              ? std::sqrt((v.array() - g.mean_survival).square().sum() / (g.samples - 1) / g.samples)
              : 0.0;
    }
    if (pool.all_analytic && !pool.analytic.empty()) {
      double sum = 0.0;
      for (double a : pool.analytic) sum += a;
      g.analytic = sum / static_cast<double>(pool.analytic.size());
    }
    std::string analytic = g.analytic ? format_double(*g.analytic) : "";
    std::string z;
    if (g.analytic && g.stderr_survival > 0.0) {
      z = format_double((g.mean_survival - *g.analytic) / g.stderr_survival);
    }
    csv.row(name, g.runs, g.samples, g.mean_survival, g.stderr_survival, analytic, z);
    report.groups.push_back(g);
  }
  report.csv = csv.text();

  const auto find = [&](const std::string& name) -> const SummaryGroup* {
    for (const auto& g : report.groups) {
      if (g.scenario == name && g.samples > 0) return &g;
    }
    return nullptr;
  };
  const SummaryGroup* haar = find("ensemble");
  const SummaryGroup* polaron = find("polaron-ensemble");
  if (haar && polaron && haar->mean_survival > 0.0) {
    report.polaron_to_haar_ratio = polaron->mean_survival / haar->mean_survival;
  }

  std::string text = fmt::format("runs: {}  chain: {}\n", run_dirs.size(), reference_chain->dump());
  for (const auto& g : report.groups) {
    text += fmt::format("{:<17} runs {:>4}  samples {:>5}", g.scenario, g.runs, g.samples);
    if (g.samples > 0) {
      text += fmt::format("  survival {:.6f} +/- {:.6f}", g.mean_survival, g.stderr_survival);
    }
    if (g.analytic) {
      text += fmt::format("  analytic {:.6f}", *g.analytic);
      if (g.stderr_survival > 0.0) {
        text += fmt::format("  ({:+.2f} stderr)", (g.mean_survival - *g.analytic) / g.stderr_survival);
      }
    }
    text += "\n";
  }
  if (report.polaron_to_haar_ratio) {
    text += fmt::format("polaron/Haar mean survival ratio: {:.4f}\n", *report.polaron_to_haar_ratio);
  }
  report.text = text;
  return report;
}

void write_summary(const SummaryReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.csv", report.csv);
  write_file(dir / "summary.txt", report.text);
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error)) return 2;
  if (dynamic_cast<const NumericalError*>(&error)) return 3;
  if (dynamic_cast<const IoError*>(&error)) return 4;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&error)) return 4;
  return 1;
}

}  // namespace zeno
