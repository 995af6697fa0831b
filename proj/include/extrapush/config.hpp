#pragma once

// Experiment configuration: INI text with [problem], [graph], [run] and one
// [algorithm:NAME] section per run, plus the objects built from it.

#include "extrapush/experiment.hpp"
#include "extrapush/graph.hpp"
#include "extrapush/solver.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace extrapush {

enum class Engine { matrix, agents };
std::string to_string(Engine e);
Engine parse_engine(const std::string& s);

struct ProblemSpec {
  /// ls | huber | consensus | file
  std::string kind = "ls";
  GeneratorOptions gen;
  std::filesystem::path file;  ///< instance JSON when kind = file
};

struct GraphSpec {
  /// paper-fig1 | complete | bidirectional-ring | single; ignored when a file is given.
  std::string preset = "paper-fig1";
  std::size_t nodes = 0;  ///< for complete / bidirectional-ring; 0 means problem n
  std::filesystem::path edges;
  std::filesystem::path matrix;
};

struct RunSpec {
  std::string name;
  AlgorithmConfig cfg;
};

struct ExperimentConfig {
  ProblemSpec problem;
  GraphSpec graph;
  std::vector<RunSpec> runs;
  std::filesystem::path out = "results";
  Engine engine = Engine::matrix;
};

/// Relative paths inside the file resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides; unset fields leave the config alone.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> max_iters;
  std::optional<double> tol;
  std::optional<Engine> engine;
};
void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o);

/// A mixing matrix plus the graph it lives on.
struct Network {
  DirectedGraph graph;
  MixingMatrix mixing;
  std::string label;
};
Network build_network(const GraphSpec& spec, std::size_t default_nodes);

struct Problem {
  std::unique_ptr<Objective> objective;
  std::optional<Vector> x_star;
  Matrix x0;
  std::optional<ExperimentInstance> instance;
  std::string label;
};
Problem build_problem(const ProblemSpec& spec);

}  // namespace extrapush
