#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "qsynth/abstraction.hpp"
#include "qsynth/core.hpp"

namespace qsynth {

constexpr double kMicroUnitsPerCost = 1e6;

/* round half up to integer micro-units (costs are non-negative) */
std::int64_t to_micro_units(double cost);

/*
 * class: Arena
 *
 * bipartite game graph. Min nodes are (cell, last input) pairs over dom(K^) x U^,
 * max nodes are the pairs of K^. Min edges carry integer micro-unit weights,
 * max edges weigh 0 and are not stored with weights. Both edge relations are
 * kept in CSR form with targets sorted by node index.
 */
struct Arena {
  std::uint32_t num_inputs = 0;

  std::vector<CellId> min_cell;
  std::vector<std::uint32_t> min_input;
  std::vector<CellId> max_cell;
  std::vector<std::uint32_t> max_input;

  std::vector<std::uint64_t> min_offsets;   // num_min() + 1
  std::vector<std::uint32_t> min_targets;   // max node ids
  std::vector<std::uint64_t> max_offsets;   // num_max() + 1
  std::vector<std::uint32_t> max_targets;   // min node ids

  std::vector<std::int64_t> weights;        // per min edge, micro-units

  std::size_t num_min() const noexcept { return min_offsets.empty() ? 0 : min_offsets.size() - 1; }
  std::size_t num_max() const noexcept { return max_offsets.empty() ? 0 : max_offsets.size() - 1; }
  std::size_t num_min_edges() const noexcept { return min_targets.size(); }
  std::size_t num_max_edges() const noexcept { return max_targets.size(); }

  /* checks bipartite CSR consistency, sorted targets, totality */
  void validate() const;

  std::uint64_t topology_hash() const;
  std::uint64_t weights_hash() const;

  /* arena without node tables, from explicit (from, to[, weight]) edge lists */
  static Arena from_edges(std::size_t num_min, std::size_t num_max,
                          const std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>>& min_edges,
                          const std::vector<std::pair<std::uint32_t, std::uint32_t>>& max_edges);
};

struct NormalizerReport {
  Normalizers values;
  bool dr_replaced = false;
  bool ec_replaced = false;
  bool id_replaced = false;
};

/* maxima of the abstract DR/EC/ID costs over dom(K^); zero maxima become 1 */
NormalizerReport compute_normalizers(const SymbolicModel& model, const Controller& controller,
                                     const CostSpec& cost);

/* nodes and edges only; weights left empty */
Arena build_arena_topology(const SymbolicModel& model, const Controller& controller, unsigned workers = 1);

/* micro-unit weight of every min edge under the abstract cost */
std::vector<std::int64_t> arena_weights(const Arena& arena, const SymbolicModel& model, const CostSpec& cost,
                                        unsigned workers = 1);

Arena build_arena(const SymbolicModel& model, const Controller& controller, const CostSpec& cost,
                  unsigned workers = 1);

void save_arena_topology(const Arena& arena, const std::filesystem::path& path);
Arena load_arena_topology(const std::filesystem::path& path);
void save_arena_weights(const Arena& arena, std::uint64_t cost_hash, const std::filesystem::path& path);
/* loads weights into arena; throws if the file belongs to another topology or cost */
void load_arena_weights(Arena& arena, std::uint64_t cost_hash, const std::filesystem::path& path);

std::uint64_t cost_hash(const CostSpec& cost);

}  // namespace qsynth
