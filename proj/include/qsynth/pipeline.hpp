#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qsynth/abstraction.hpp"
#include "qsynth/arena.hpp"
#include "qsynth/casestudies.hpp"
#include "qsynth/games.hpp"
#include "qsynth/rational.hpp"
#include "qsynth/refine_sim.hpp"
#include "qsynth/safety.hpp"
#include "qsynth/verify.hpp"

namespace qsynth {

/*
 * flat key=value configuration; lists are comma separated and lambdas are
 * exact rationals ("15/16"). see README for the keys
 */
struct PipelineConfig {
  std::string system = "hvac";
  double hvac_x2_bound = 50.0;
  double hvac_x4_bound = 100.0;
  std::vector<CostKind> costs{CostKind::IS, CostKind::DR, CostKind::CC};
  std::vector<Rational> lambdas{Rational(0), Rational(1, 2), Rational(1)};
  /* empty: every disturbance of the case study except "none" (or "none" if that is all there is) */
  std::vector<std::string> disturbances;
  std::size_t steps = 0;  // 0: case study default
  std::size_t window = 1000;
  double eps = 1e-4;
  int substeps = 5;
  std::size_t initial_states = 20;
  std::filesystem::path output = "qsynth-out";
  /* suffix of the runs/table CSV names, so several sweeps can share one output directory */
  std::string tag;
  unsigned workers = 1;
  std::uint64_t seed = 1;
  double tol = 1e-9;
  /* adversary probe */
  double lattice_step = 1.0;
  std::size_t probe_steps = 1000;
  /* verify */
  std::size_t corpus = 200;
  std::size_t soundness_samples = 10000;
  /* per-node CSV exports next to the binary artifacts */
  bool export_csv = false;
  /* one trace CSV per (cost, lambda, disturbance) for the first initial state */
  bool traces = false;

  void set(std::string_view key, std::string_view value);
  /* "key=value" */
  void apply(std::string_view assignment);
  std::string to_text() const;
};

PipelineConfig load_config(const std::filesystem::path& path);
/* config text: one assignment per line, '#' starts a comment */
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});

std::string lambda_tag(const Rational& lambda);  // "15_16", "0", "1"

/* one closed-loop run of the sweep */
struct RunRecord {
  CostKind cost = CostKind::IS;
  Rational lambda;
  std::string disturbance;
  std::size_t run = 0;
  Vec x0;
  std::size_t steps = 0;
  bool safe = true;
  std::optional<std::size_t> violation_step;
  double average = 0.0;          // mean over all steps
  double limit_average = 0.0;    // mean over the last window
  bool converged = false;
  double discounted = 0.0;
  double game_value = 0.0;       // value of the solved game at the start node
  double nu_start = 0.0;         // MPG value at the start node
  double nu_max = 0.0;           // max MPG value over min nodes reachable from the start nodes
  bool within_guarantee = true;  // limit_average <= nu_max + 1e-6
};

struct SweepResult {
  std::vector<RunRecord> runs;
  bool all_safe() const;
  bool all_within_guarantee() const;
};

struct ModelSizes {
  std::uint64_t cells = 0, inputs = 0, transitions = 0, domain = 0, pairs = 0;
  std::uint64_t min_nodes = 0, max_nodes = 0, min_edges = 0, max_edges = 0;
};

/*
 * class: Pipeline
 *
 * the stages abstract -> synthesize -> arena -> solve -> simulate, each cached
 * in the output directory under a content hash of its inputs, so a rerun with
 * the same configuration reuses files and a changed parameter never does
 */
class Pipeline {
public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);
  ~Pipeline();

  const PipelineConfig& config() const noexcept { return config_; }
  const CaseStudy& case_study() const noexcept { return case_; }

  const SymbolicModel& model();
  const SafetyResult& safety();
  /* throws Unrealizable when the safety controller is empty */
  const Controller& controller();
  const Arena& topology();
  CostSpec cost_spec(CostKind kind);
  /* topology with the weights of this cost swapped in */
  const Arena& arena(CostKind kind);
  /* loaded from or written to the output directory; not kept in memory */
  GameSolution solution(CostKind kind, const Rational& lambda);
  Implementation implementation(CostKind kind, const Rational& lambda);

  /* seeded states, uniform in uniformly drawn cells of dom(K^) */
  const std::vector<Vec>& initial_states();
  std::vector<std::uint32_t> start_nodes();
  /* max MPG value (cost units) over min nodes reachable from the start nodes */
  double nu_max(CostKind kind);
  /* max MPG value over all min nodes */
  double nu_max_all(CostKind kind);

  SweepResult sweep();
  ProbeReport probe(CostKind kind);

  ModelSizes sizes();
  std::vector<std::string> disturbance_names() const;
  std::size_t steps() const;

  /* files under the output directory */
  std::filesystem::path model_path();
  std::filesystem::path controller_path();
  std::filesystem::path topology_path();
  std::filesystem::path weights_path(CostKind kind);
  std::filesystem::path solution_path(CostKind kind, const Rational& lambda);
  std::filesystem::path runs_path() const;
  std::filesystem::path table_path() const;

private:
  std::uint64_t model_key() const;
  std::uint64_t controller_key();
  std::uint64_t weights_key(CostKind kind);
  std::uint64_t solution_key(CostKind kind, const Rational& lambda);
  void note(const std::string& line);

  PipelineConfig config_;
  CaseStudy case_;
  std::ostream* log_;
  std::unique_ptr<SymbolicModel> model_;
  std::unique_ptr<SafetyResult> safety_;
  std::unique_ptr<Arena> topology_;
  std::optional<CostKind> loaded_weights_;
  std::map<CostKind, CostSpec> costs_;
  std::map<CostKind, double> nu_max_;
  std::optional<std::vector<Vec>> initial_;
};

/* summary: one row per (cost, disturbance), worst limit average per lambda */
void write_runs_csv(const SweepResult& sweep, const std::string& system, std::ostream& out);
void write_table_csv(const SweepResult& sweep, const std::vector<Rational>& lambdas, const std::string& system,
                     std::ostream& out);
std::string format_table(const SweepResult& sweep, const std::vector<Rational>& lambdas);

}  // namespace qsynth
