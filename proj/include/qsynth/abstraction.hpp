#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "qsynth/core.hpp"

namespace qsynth {

/*
 * class: SymbolicModel
 *
 * finite abstraction (X^, X^0, U^, F^) on a uniform grid; the successor lists
 * of all (cell, input) pairs are stored in one CSR array indexed by
 * pair = cell * |U^| + input. A pair whose over-approximation leaves the grid
 * has the single successor SINK.
 */
struct SymbolicModel {
  Grid grid;
  std::vector<Vec> inputs;
  double tau = 0.0;
  std::vector<std::uint64_t> offsets;  // size num_pairs() + 1
  std::vector<CellId> successor_table;
  std::vector<std::uint8_t> initial;   // per cell; all ones by default

  std::uint64_t num_cells() const noexcept { return grid.num_cells(); }
  std::uint32_t num_inputs() const noexcept { return static_cast<std::uint32_t>(inputs.size()); }
  std::uint64_t num_pairs() const noexcept { return num_cells() * num_inputs(); }
  std::uint64_t num_transitions() const noexcept { return successor_table.size(); }

  std::span<const CellId> successors(CellId c, std::uint32_t u) const;
  bool blocked(CellId c, std::uint32_t u) const;  // successors == {SINK}

  friend bool operator==(const SymbolicModel& a, const SymbolicModel& b);
};

/* time-dependent additive term evaluated once per sub-step, at its midpoint */
using Disturbance = std::function<void(double t, std::span<double> omega)>;

/* classical RK4 with `substeps` uniform sub-intervals of [0, h] under constant u */
Vec rk4_step(const VectorField& f, std::span<const double> x, std::span<const double> u, double h,
             int substeps);

/* as rk4_step, for xi' = f(xi, u) + omega(t) starting at time t0 */
Vec rk4_step_disturbed(const VectorField& f, std::span<const double> x, std::span<const double> u,
                       double h, int substeps, const Disturbance& omega, double t0);

/* radius of the attainable-set over-approximation: r' = L r + w, r(0) = r0, integrated over [0, tau] */
Vec growth_bound(const Matrix& L, std::span<const double> w, std::span<const double> r0, double tau,
                 int substeps);

struct AbstractionOptions {
  int flow_substeps = 5;
  int radius_substeps = 5;
  unsigned workers = 1;
};

SymbolicModel build_symbolic_model(const ControlSystemSpec& sys, const AbstractionOptions& options = {});

void save_model(const SymbolicModel& model, std::ostream& out);
SymbolicModel load_model(std::istream& in);
void save_model(const SymbolicModel& model, const std::filesystem::path& path);
SymbolicModel load_model(const std::filesystem::path& path);

/* one line per transition: cell,input,successor (successor "sink" for SINK) */
void export_model_csv(const SymbolicModel& model, std::ostream& out);

}  // namespace qsynth
