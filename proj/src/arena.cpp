#include "qsynth/arena.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"
#include "qsynth/parallel.hpp"

namespace qsynth {

namespace {
constexpr std::string_view kTopologyMagic = "QSAT";
constexpr std::string_view kWeightsMagic = "QSAW";
constexpr std::uint32_t kArenaVersion = 1;

template <class T>
void hash_vector(Hasher& h, const std::vector<T>& v) {
  h.u64(v.size());
  h.bytes(v.data(), v.size() * sizeof(T));
}
}  // namespace

std::int64_t to_micro_units(double cost) {
  require(std::isfinite(cost) && cost >= 0.0, "to_micro_units: cost must be finite and non-negative");
  return static_cast<std::int64_t>(std::floor(cost * kMicroUnitsPerCost + 0.5));
}

void Arena::validate() const {
  const std::size_t nmin = num_min(), nmax = num_max();
  require(min_offsets.size() == nmin + 1 && max_offsets.size() == nmax + 1, "Arena: offset tables missing");
  require(min_offsets.front() == 0 && max_offsets.front() == 0, "Arena: offsets must start at 0");
  require(min_offsets.back() == min_targets.size() && max_offsets.back() == max_targets.size(),
          "Arena: offsets do not cover the edge arrays");
  require(weights.empty() || weights.size() == min_targets.size(), "Arena: weight array size mismatch");
  for (std::size_t v = 0; v < nmin; ++v) {
    require(min_offsets[v + 1] > min_offsets[v], "Arena: min node without successor");
    for (std::uint64_t e = min_offsets[v]; e < min_offsets[v + 1]; ++e) {
      require(min_targets[e] < nmax, "Arena: min edge target out of range");
      require(e == min_offsets[v] || min_targets[e - 1] < min_targets[e], "Arena: min targets not sorted");
    }
  }
  for (std::size_t m = 0; m < nmax; ++m) {
    require(max_offsets[m + 1] > max_offsets[m], "Arena: max node without successor");
    for (std::uint64_t e = max_offsets[m]; e < max_offsets[m + 1]; ++e) {
      require(max_targets[e] < nmin, "Arena: max edge target out of range");
      require(e == max_offsets[m] || max_targets[e - 1] < max_targets[e], "Arena: max targets not sorted");
    }
  }
  for (std::int64_t w : weights)
    require(w >= 0, "Arena: negative weight");
}

std::uint64_t Arena::topology_hash() const {
  Hasher h;
  h.u64(num_inputs);
  hash_vector(h, min_cell);
  hash_vector(h, min_input);
  hash_vector(h, max_cell);
  hash_vector(h, max_input);
  hash_vector(h, min_offsets);
  hash_vector(h, min_targets);
  hash_vector(h, max_offsets);
  hash_vector(h, max_targets);
  return h.value();
}

std::uint64_t Arena::weights_hash() const {
  Hasher h;
  hash_vector(h, weights);
  return h.value();
}

Arena Arena::from_edges(std::size_t nmin, std::size_t nmax,
                        const std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>>& min_edges,
                        const std::vector<std::pair<std::uint32_t, std::uint32_t>>& max_edges) {
  Arena a;
  auto me = min_edges;
  std::sort(me.begin(), me.end());
  auto xe = max_edges;
  std::sort(xe.begin(), xe.end());
  xe.erase(std::unique(xe.begin(), xe.end()), xe.end());
  a.min_offsets.assign(nmin + 1, 0);
  a.max_offsets.assign(nmax + 1, 0);
  for (std::size_t i = 0; i < me.size(); ++i) {
    auto [from, to, w] = me[i];
    require(from < nmin && to < nmax, "Arena::from_edges: node out of range");
    require(i == 0 || std::get<0>(me[i - 1]) != from || std::get<1>(me[i - 1]) != to,
            "Arena::from_edges: parallel min edges");
    ++a.min_offsets[from + 1];
    a.min_targets.push_back(to);
    a.weights.push_back(w);
  }
  for (auto [from, to] : xe) {
    require(from < nmax && to < nmin, "Arena::from_edges: node out of range");
    ++a.max_offsets[from + 1];
    a.max_targets.push_back(to);
  }
  for (std::size_t i = 0; i < nmin; ++i)
    a.min_offsets[i + 1] += a.min_offsets[i];
  for (std::size_t i = 0; i < nmax; ++i)
    a.max_offsets[i + 1] += a.max_offsets[i];
  a.validate();
  return a;
}

NormalizerReport compute_normalizers(const SymbolicModel& model, const Controller& controller,
                                     const CostSpec& cost) {
  require(controller.num_cells() == model.num_cells() && controller.num_inputs() == model.num_inputs(),
          "compute_normalizers: controller does not match model");
  if (controller.empty())
    throw Unrealizable("compute_normalizers: empty safety controller");
  CostSpec dr = cost, ec = cost, id = cost;
  dr.kind = CostKind::DR;
  ec.kind = CostKind::EC;
  id.kind = CostKind::ID;
  double max_dr = 0.0, max_ec = 0.0, max_id = 0.0;
  for (const auto& u : model.inputs)
    max_ec = std::max(max_ec, cell_cost(ec, u, Box(), u));
  std::vector<std::uint8_t> enabled_anywhere(model.num_inputs(), 0);
  for (std::uint64_t c = 0; c < model.num_cells(); ++c) {
    CellId cell{static_cast<std::uint32_t>(c)};
    auto inputs = controller.inputs(cell);
    if (inputs.empty())
      continue;
    max_dr = std::max(max_dr, cell_cost(dr, model.inputs[0], model.grid.cell_box(cell), model.inputs[0]));
    for (std::uint32_t u2 : inputs)
      enabled_anywhere[u2] = 1;
  }
  for (std::uint32_t u2 = 0; u2 < model.num_inputs(); ++u2)
    if (enabled_anywhere[u2])
      for (const auto& u : model.inputs)
        max_id = std::max(max_id, squared_distance(u, model.inputs[u2]));

  NormalizerReport report;
  report.values = {max_dr, max_ec, max_id};
  auto fix = [](double& v, bool& flag, const char* name) {
    if (v <= 0.0) {
      v = 1.0;
      flag = true;
      std::cerr << "warning: max_" << name << " is zero, using 1\n";
    }
  };
  fix(report.values.dr, report.dr_replaced, "DR");
  fix(report.values.ec, report.ec_replaced, "EC");
  fix(report.values.id, report.id_replaced, "ID");
  return report;
}

Arena build_arena_topology(const SymbolicModel& model, const Controller& controller, unsigned workers) {
  require(controller.num_cells() == model.num_cells() && controller.num_inputs() == model.num_inputs(),
          "build_arena: controller does not match model");
  const std::uint32_t nu = model.num_inputs();
  const std::uint64_t cells = model.num_cells();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  Arena a;
  a.num_inputs = nu;
  std::vector<std::uint32_t> rank(cells, kNone);   // cell -> position in dom(K^)
  std::vector<std::uint32_t> first_max(cells, kNone);
  std::vector<std::uint32_t> dom;
  for (std::uint64_t c = 0; c < cells; ++c) {
    CellId cell{static_cast<std::uint32_t>(c)};
    auto inputs = controller.inputs(cell);
    if (inputs.empty())
      continue;
    rank[c] = static_cast<std::uint32_t>(dom.size());
    dom.push_back(cell.index);
    first_max[c] = static_cast<std::uint32_t>(a.max_cell.size());
    for (std::uint32_t u : inputs) {
      a.max_cell.push_back(cell);
      a.max_input.push_back(u);
    }
  }
  require(static_cast<std::uint64_t>(dom.size()) * nu < kNone, "build_arena: arena too large");

  const std::size_t nmin = dom.size() * nu;
  a.min_cell.resize(nmin);
  a.min_input.resize(nmin);
  a.min_offsets.assign(nmin + 1, 0);
  for (std::size_t d = 0; d < dom.size(); ++d) {
    const std::uint32_t c = dom[d];
    const std::uint64_t k = (d + 1 < dom.size() ? first_max[dom[d + 1]] : a.max_cell.size()) - first_max[c];
    for (std::uint32_t u = 0; u < nu; ++u) {
      const std::size_t v = d * nu + u;
      a.min_cell[v] = CellId{c};
      a.min_input[v] = u;
      a.min_offsets[v + 1] = a.min_offsets[v] + k;
    }
  }
  a.min_targets.resize(a.min_offsets.back());
  parallel_for(dom.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t d = begin; d < end; ++d) {
      const std::uint32_t c = dom[d];
      const std::uint32_t lo = first_max[c];
      const std::uint32_t hi = d + 1 < dom.size() ? first_max[dom[d + 1]] : static_cast<std::uint32_t>(a.max_cell.size());
      for (std::uint32_t u = 0; u < nu; ++u) {
        std::uint64_t e = a.min_offsets[d * nu + u];
        for (std::uint32_t m = lo; m < hi; ++m)
          a.min_targets[e++] = m;
      }
    }
  });

  const std::size_t nmax = a.max_cell.size();
  a.max_offsets.assign(nmax + 1, 0);
  for (std::size_t m = 0; m < nmax; ++m)
    a.max_offsets[m + 1] = a.max_offsets[m] + model.successors(a.max_cell[m], a.max_input[m]).size();
  a.max_targets.resize(a.max_offsets.back());
  parallel_for(nmax, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      std::uint64_t e = a.max_offsets[m];
      const std::uint32_t u = a.max_input[m];
      for (CellId s : model.successors(a.max_cell[m], u)) {
        if (s.is_sink() || rank[s.index] == kNone)
          throw ContractViolation("build_arena: controller is not closed under the transition relation");
        a.max_targets[e++] = rank[s.index] * nu + u;
      }
    }
  });
  return a;
}

std::vector<std::int64_t> arena_weights(const Arena& arena, const SymbolicModel& model, const CostSpec& cost,
                                        unsigned workers) {
  cost.validate();
  require(arena.num_inputs == model.num_inputs(), "arena_weights: arena does not match model");
  std::vector<std::int64_t> weights(arena.num_min_edges());
  parallel_for(arena.num_min(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const Box cell = model.grid.cell_box(arena.min_cell[v]);
      const Vec& u = model.inputs.at(arena.min_input[v]);
      for (std::uint64_t e = arena.min_offsets[v]; e < arena.min_offsets[v + 1]; ++e) {
        const std::uint32_t m = arena.min_targets[e];
        require(arena.max_input[m] < model.num_inputs(), "arena_weights: input index out of range");
        weights[e] = to_micro_units(cell_cost(cost, u, cell, model.inputs[arena.max_input[m]]));
      }
    }
  });
  return weights;
}

Arena build_arena(const SymbolicModel& model, const Controller& controller, const CostSpec& cost,
                  unsigned workers) {
  Arena a = build_arena_topology(model, controller, workers);
  a.weights = arena_weights(a, model, cost, workers);
  return a;
}

std::uint64_t cost_hash(const CostSpec& cost) {
  Hasher h;
  h.str(to_string(cost.kind));
  h.f64s(cost.reference);
  h.u64(cost.projection.size());
  for (auto p : cost.projection)
    h.u64(p);
  h.f64s(cost.u0);
  if (cost.normalizers)
    h.f64(cost.normalizers->dr).f64(cost.normalizers->ec).f64(cost.normalizers->id);
  return h.value();
}

namespace {

template <class T>
void write_array(BinaryWriter& w, const std::vector<T>& v) {
  w.u64(v.size());
  for (const T& x : v) {
    if constexpr (std::is_same_v<T, CellId>)
      w.u32(x.index);
    else if constexpr (sizeof(T) == 4)
      w.u32(static_cast<std::uint32_t>(x));
    else
      w.u64(static_cast<std::uint64_t>(x));
  }
}

template <class T>
std::vector<T> read_array(BinaryReader& r) {
  std::uint64_t n = r.u64();
  if (n > (1ull << 36))
    throw ConfigError("arena file: corrupt array length");
  std::vector<T> v(n);
  for (auto& x : v) {
    if constexpr (std::is_same_v<T, CellId>)
      x = CellId{r.u32()};
    else if constexpr (sizeof(T) == 4)
      x = static_cast<T>(r.u32());
    else
      x = static_cast<T>(r.u64());
  }
  return v;
}

}  // namespace

void save_arena_topology(const Arena& a, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  BinaryWriter w(out);
  w.magic(kTopologyMagic, kArenaVersion);
  w.u32(a.num_inputs);
  write_array(w, a.min_cell);
  write_array(w, a.min_input);
  write_array(w, a.max_cell);
  write_array(w, a.max_input);
  write_array(w, a.min_offsets);
  write_array(w, a.min_targets);
  write_array(w, a.max_offsets);
  write_array(w, a.max_targets);
  write_file_atomic(path, out.str());
}

Arena load_arena_topology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open arena file " + path.string());
  BinaryReader r(in);
  r.expect_magic(kTopologyMagic, kArenaVersion);
  Arena a;
  a.num_inputs = r.u32();
  a.min_cell = read_array<CellId>(r);
  a.min_input = read_array<std::uint32_t>(r);
  a.max_cell = read_array<CellId>(r);
  a.max_input = read_array<std::uint32_t>(r);
  a.min_offsets = read_array<std::uint64_t>(r);
  a.min_targets = read_array<std::uint32_t>(r);
  a.max_offsets = read_array<std::uint64_t>(r);
  a.max_targets = read_array<std::uint32_t>(r);
  a.validate();
  return a;
}

void save_arena_weights(const Arena& a, std::uint64_t cost_key, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  BinaryWriter w(out);
  w.magic(kWeightsMagic, kArenaVersion);
  w.u64(a.topology_hash());
  w.u64(cost_key);
  write_array(w, a.weights);
  write_file_atomic(path, out.str());
}

void load_arena_weights(Arena& a, std::uint64_t cost_key, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open weight file " + path.string());
  BinaryReader r(in);
  r.expect_magic(kWeightsMagic, kArenaVersion);
  if (r.u64() != a.topology_hash())
    throw ConfigError("weight file " + path.string() + " belongs to a different arena");
  if (r.u64() != cost_key)
    throw ConfigError("weight file " + path.string() + " belongs to a different cost function");
  auto weights = read_array<std::int64_t>(r);
  if (weights.size() != a.num_min_edges())
    throw ConfigError("weight file " + path.string() + " has the wrong size");
  a.weights = std::move(weights);
}

}  // namespace qsynth
