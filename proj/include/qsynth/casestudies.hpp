#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "qsynth/core.hpp"
#include "qsynth/refine_sim.hpp"

namespace qsynth {

struct CaseStudy {
  ControlSystemSpec system;
  /* CC presets carry no normalizers; they depend on the safety controller */
  CostSpec is, dr, ec, id, cc;
  std::vector<DisturbanceSignal> disturbances;
  std::uint32_t u_init = 0;
  std::size_t steps = 1000;

  CostSpec preset(CostKind kind) const;
  const DisturbanceSignal& disturbance(std::string_view name) const;
};

struct HvacOptions {
  double x2_bound = 50.0;
  double x4_bound = 100.0;
};

CaseStudy hvac(const HvacOptions& options = {});
CaseStudy cartpole();
/* cart-pole with eta scaled by 4 and 11 inputs at spacing 1 */
CaseStudy cartpole_desk();

/* "hvac", "cartpole" or "cartpole-desk"; throws ConfigError otherwise */
CaseStudy builtin(std::string_view name);

}  // namespace qsynth
