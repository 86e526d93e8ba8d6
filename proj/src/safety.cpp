#include "qsynth/safety.hpp"

#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"

namespace qsynth {

namespace {
constexpr std::string_view kControllerMagic = "QSCT";
constexpr std::uint32_t kControllerVersion = 1;
}  // namespace

SafetySpecAbstract make_safety_spec(const ControlSystemSpec& sys) {
  return {[&sys](std::uint32_t u, CellId c) {
    if (c.is_sink())
      return false;
    return sys.safe_set.contains_cell(sys.inputs.at(u), sys.grid.cell_box(c));
  }};
}

SafetyResult solve_safety(const SymbolicModel& model, const SafetySpecAbstract& spec) {
  require(static_cast<bool>(spec.allowed), "solve_safety: missing specification");
  const std::uint64_t cells = model.num_cells();
  const std::uint32_t nu = model.num_inputs();
  const std::uint64_t pairs = model.num_pairs();
  require(model.offsets.size() == pairs + 1, "solve_safety: malformed model");
  require(pairs < std::numeric_limits<std::uint32_t>::max(), "solve_safety: too many pairs");

  std::vector<std::uint8_t> alive(pairs, 0);
  std::vector<std::uint32_t> live_inputs(cells, 0);
  for (std::uint64_t c = 0; c < cells; ++c) {
    const CellId cell{static_cast<std::uint32_t>(c)};
    for (std::uint32_t u = 0; u < nu; ++u) {
      if (model.blocked(cell, u) || !spec.allowed(u, cell))
        continue;
      alive[c * nu + u] = 1;
      ++live_inputs[c];
    }
  }

  /* predecessor lists of the initially alive pairs */
  std::vector<std::uint64_t> pred_offsets(cells + 1, 0);
  for (std::uint64_t p = 0; p < pairs; ++p)
    if (alive[p])
      for (std::uint64_t i = model.offsets[p]; i < model.offsets[p + 1]; ++i)
        ++pred_offsets[model.successor_table[i].index + 1];
  for (std::uint64_t c = 0; c < cells; ++c)
    pred_offsets[c + 1] += pred_offsets[c];
  std::vector<std::uint32_t> preds(pred_offsets[cells]);
  {
    std::vector<std::uint64_t> fill(pred_offsets.begin(), pred_offsets.end() - 1);
    for (std::uint64_t p = 0; p < pairs; ++p)
      if (alive[p])
        for (std::uint64_t i = model.offsets[p]; i < model.offsets[p + 1]; ++i)
          preds[fill[model.successor_table[i].index]++] = static_cast<std::uint32_t>(p);
  }

  std::vector<std::uint32_t> queue;
  for (std::uint64_t c = 0; c < cells; ++c)
    if (live_inputs[c] == 0)
      queue.push_back(static_cast<std::uint32_t>(c));

  SafetyResult result;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::uint32_t removed = queue[head];
    for (std::uint64_t i = pred_offsets[removed]; i < pred_offsets[removed + 1]; ++i) {
      const std::uint32_t p = preds[i];
      if (!alive[p])
        continue;
      alive[p] = 0;
      ++result.removed_pairs;
      const std::uint32_t c = p / nu;
      if (--live_inputs[c] == 0)
        queue.push_back(c);
    }
  }

  result.controller = Controller(cells, nu);
  for (std::uint64_t p = 0; p < pairs; ++p)
    if (alive[p])
      result.controller.set(CellId{static_cast<std::uint32_t>(p / nu)}, static_cast<std::uint32_t>(p % nu), true);
  result.realizable = queue.size() < cells;
  return result;
}

SymbolicModel restrict_to(const SymbolicModel& model, const Controller& controller) {
  require(controller.num_cells() == model.num_cells() && controller.num_inputs() == model.num_inputs(),
          "restrict_to: controller does not match model");
  SymbolicModel out;
  out.grid = model.grid;
  out.inputs = model.inputs;
  out.tau = model.tau;
  out.initial = model.initial;
  out.offsets.assign(model.num_pairs() + 1, 0);
  const std::uint32_t nu = model.num_inputs();
  for (std::uint64_t p = 0; p < model.num_pairs(); ++p) {
    CellId c{static_cast<std::uint32_t>(p / nu)};
    std::uint32_t u = static_cast<std::uint32_t>(p % nu);
    if (controller.allows(c, u)) {
      auto s = model.successors(c, u);
      out.successor_table.insert(out.successor_table.end(), s.begin(), s.end());
    } else {
      out.successor_table.push_back(CellId::sink());
    }
    out.offsets[p + 1] = out.successor_table.size();
  }
  return out;
}

bool is_closed(const SymbolicModel& model, const Controller& controller) {
  for (std::uint64_t c = 0; c < model.num_cells(); ++c) {
    CellId cell{static_cast<std::uint32_t>(c)};
    for (std::uint32_t u : controller.inputs(cell))
      for (CellId s : model.successors(cell, u))
        if (!controller.in_domain(s))
          return false;
  }
  return true;
}

void save_controller(const Controller& controller, std::ostream& out) {
  BinaryWriter w(out);
  w.magic(kControllerMagic, kControllerVersion);
  w.u64(controller.num_cells());
  w.u32(controller.num_inputs());
  /* cells x inputs bitset, row-major, least significant bit first */
  std::uint8_t byte = 0;
  int bit = 0;
  for (std::uint64_t c = 0; c < controller.num_cells(); ++c)
    for (std::uint32_t u = 0; u < controller.num_inputs(); ++u) {
      if (controller.allows(CellId{static_cast<std::uint32_t>(c)}, u))
        byte |= static_cast<std::uint8_t>(1u << bit);
      if (++bit == 8) {
        w.u8(byte);
        byte = 0;
        bit = 0;
      }
    }
  if (bit != 0)
    w.u8(byte);
}

Controller load_controller(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic(kControllerMagic, kControllerVersion);
  std::uint64_t cells = r.u64();
  std::uint32_t nu = r.u32();
  if (cells >= CellId::kSinkIndex)
    throw ConfigError("controller file: too many cells");
  Controller controller(cells, nu);
  std::uint8_t byte = 0;
  int bit = 8;
  for (std::uint64_t c = 0; c < cells; ++c)
    for (std::uint32_t u = 0; u < nu; ++u) {
      if (bit == 8) {
        byte = r.u8();
        bit = 0;
      }
      if (byte & (1u << bit))
        controller.set(CellId{static_cast<std::uint32_t>(c)}, u, true);
      ++bit;
    }
  return controller;
}

void save_controller(const Controller& controller, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  save_controller(controller, out);
  write_file_atomic(path, out.str());
}

Controller load_controller(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open controller file " + path.string());
  return load_controller(in);
}

void export_controller_csv(const Controller& controller, std::ostream& out) {
  out << "cell,input\n";
  for (std::uint64_t c = 0; c < controller.num_cells(); ++c)
    for (std::uint32_t u : controller.inputs(CellId{static_cast<std::uint32_t>(c)}))
      out << c << ',' << u << '\n';
}

}  // namespace qsynth
