#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <wgal/network.hpp>
#include <wgal/pde.hpp>
#include <wgal/train.hpp>

namespace wgal {

enum class Command { solve, penalty_study, convergence_study, theory_check, approx_probe };

std::string to_string(Command c);

struct ArchSpec {
  std::optional<NetworkArch> explicit_arch;
  // arch_recipe inputs, used when explicit_arch is empty
  double eps = 0.1;
  double mu = 0.5;
  double c_user = 1.0;
  RecipeLimits limits;
};

struct DomainSpec {
  bool ball = false;
  std::vector<double> center;
  double radius = 0.0;
};

struct ProblemSpec {
  int dimension = 1;
  DomainSpec domain;
  std::vector<std::string> a;  // d*d
  std::vector<std::string> b;  // d
  std::string c = "0";
  std::optional<std::string> u_exact;
  std::optional<std::string> f;
  std::optional<std::string> g;
  double alpha = 1.0;
  double beta = 1.0;
  BoundaryKind bc_kind = BoundaryKind::robin;
};

struct SweepSpec {
  std::vector<double> betas = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  std::vector<std::size_t> n_values = {64, 256, 1024, 4096};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t grid_n = 2048;
};

struct TheorySpec {
  std::size_t probes = 10000;
  std::size_t trials = 20;
  std::size_t probe_budget = 4;
  std::size_t ascent_steps = 3;
  std::size_t big_factor = 100;
  std::vector<std::size_t> n_values = {64, 128};
  double c_user = 1.0;
  std::size_t random_sets = 500;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  Command command = Command::solve;
  std::string output_dir;
  ProblemSpec problem;
  ArchSpec u_arch;
  ArchSpec v_arch;
  TrainConfig train;
  bool checkpoints = false;
  SweepSpec sweep;
  TheorySpec theory;
  ApproxConfig approx;
  nlohmann::json raw;  // as parsed, for the manifest hash
};

/// Parses and validates a configuration. Unknown keys, wrong types and
/// invalid values raise ConfigError naming the offending key.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

EllipticProblem build_problem(const ProblemSpec& spec);
NetworkArch resolve_arch(const ArchSpec& spec, const ProblemSpec& problem,
                         nlohmann::json* recipe_report = nullptr);

struct RunOptions {
  std::string out_dir;  // overrides config output_dir when non-empty
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 other failure, 2 config error, 3 numerical abort
  std::string message;
  nlohmann::json summary;
};

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& opts);
/// Loads, validates and runs; every failure is mapped to an exit code.
RunResult run_experiment_file(const std::string& config_path, const RunOptions& opts);

/// %.17g, with nan/inf spelled "nan", "inf", "-inf".
std::string format_double(double v);

std::string library_version();

}  // namespace wgal
