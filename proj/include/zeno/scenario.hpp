#pragma once

// Declarative experiment runner: JSON config in, CSV/JSON files plus a
// checksummed manifest out.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "zeno/model.hpp"
#include "zeno/protocol.hpp"

namespace zeno {

enum class Scenario {
  polaron,
  ensemble,
  polaron_ensemble,
  distill,
  dimension_scan,
  spectrum,
  eigen_decay,
  compare
};

std::string to_string(Scenario scenario);
Scenario parse_scenario_name(const std::string& text);

struct ScenarioSpec {
  Scenario scenario = Scenario::polaron;
  ChainConfig chain;
  std::string initial_state = "eigen-uniform:0..16";
  std::optional<int> ensemble_size;
  std::filesystem::path output_dir = "out";
  // dimension-scan only: inclusive chain-length range.
  int scan_lo = 3;
  int scan_hi = 12;
  // eigen-decay only: which chain eigenstates to start from.
  std::vector<int> eigen_indices{0, 1, 2, 3};

  void validate() const;
};

/// Parses the config object. Unknown keys are rejected so typos surface.
ScenarioSpec parse_scenario_spec(std::string_view json_text);
ScenarioSpec load_scenario_spec(const std::filesystem::path& path);

using InitialState = std::variant<ComplexVector, MixedState>;

/// Grammar:
///   product:<u|d>{N} | random | random-polaron | eigen-uniform:<lo>..<hi>
///   | eigen:<index> | gs-plus-allup:a=<real> | mixture:p=<real>
/// Random specs draw from config.seed. Eigenstate indices follow
/// ChainEigenbasis ordering.
InitialState parse_initial_state(std::string_view spec, const ChainConfig& config);

/// Parses "<lo>..<hi>" into an inclusive pair.
std::pair<int, int> parse_range(std::string_view text);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::size_t rows = 0;
};

struct RunManifest {
  ScenarioSpec spec;
  std::string version;
  double duration_seconds = 0.0;
  std::vector<OutputFile> outputs;
  std::string json;  // the manifest as written
};

/// Runs the scenario and writes its outputs and manifest.json into
/// spec.output_dir (created if missing).
RunManifest run_scenario(const ScenarioSpec& spec);

struct SummaryGroup {
  std::string scenario;
  int runs = 0;
  int samples = 0;
  double mean_survival = 0.0;
  double stderr_survival = 0.0;
  std::optional<double> analytic;
};

struct SummaryReport {
  std::vector<SummaryGroup> groups;
  std::optional<double> polaron_to_haar_ratio;
  std::string csv;
  std::string text;
};

/// Reads manifest.json from each directory, verifies every checksum (IoError
/// on mismatch) and pools survivals per scenario. Throws IncompatibleRuns if
/// the chain parameters differ between runs.
SummaryReport summarize(const std::vector<std::filesystem::path>& run_dirs);

/// Writes summary.csv and summary.txt.
void write_summary(const SummaryReport& report, const std::filesystem::path& dir);

std::string sha256_file(const std::filesystem::path& path);

/// 0 ok, 2 config, 3 numerical, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& error);

}  // namespace zeno
