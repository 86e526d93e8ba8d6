#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>

#include "qsynth/abstraction.hpp"
#include "qsynth/core.hpp"

namespace qsynth {

/* abstract specification Z^: allowed(u, cell) iff {u} x cell is inside Z */
struct SafetySpecAbstract {
  std::function<bool(std::uint32_t input, CellId cell)> allowed;
};

SafetySpecAbstract make_safety_spec(const ControlSystemSpec& sys);

struct SafetyResult {
  Controller controller;
  bool realizable = false;
  std::uint64_t removed_pairs = 0;
};

/* maximal permissive safety controller, by a counting worklist over predecessor lists */
SafetyResult solve_safety(const SymbolicModel& model, const SafetySpecAbstract& spec);

/* model whose pairs outside the controller are blocked (successors {SINK}) */
SymbolicModel restrict_to(const SymbolicModel& model, const Controller& controller);

/* closure: every enabled pair only leads into the controller domain */
bool is_closed(const SymbolicModel& model, const Controller& controller);

void save_controller(const Controller& controller, std::ostream& out);
Controller load_controller(std::istream& in);
void save_controller(const Controller& controller, const std::filesystem::path& path);
Controller load_controller(const std::filesystem::path& path);
void export_controller_csv(const Controller& controller, std::ostream& out);

}  // namespace qsynth
