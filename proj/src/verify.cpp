#include "qsynth/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "qsynth/errors.hpp"

namespace qsynth {

namespace {

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) { return rng() % bound; }

/* k distinct values of [0, n), ascending */
std::vector<std::uint32_t> pick(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::uint32_t> all(n);
  for (std::size_t i = 0; i < n; ++i)
    all[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < k; ++i)
    std::swap(all[i], all[i + draw(rng, n - i)]);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

/* odometer over one choice per node; false once every combination was visited */
bool advance(std::vector<std::uint64_t>& choice, const std::vector<std::uint64_t>& offsets) {
  for (std::size_t i = 0; i < choice.size(); ++i) {
    if (++choice[i] < offsets[i + 1])
      return true;
    choice[i] = offsets[i];
  }
  return false;
}

std::vector<std::uint64_t> first_choice(const std::vector<std::uint64_t>& offsets) {
  return std::vector<std::uint64_t>(offsets.begin(), offsets.end() - 1);
}

/* successor min node and round weight of every min node under a strategy pair (as edge indices) */
struct Rounds {
  std::vector<std::uint32_t> next;
  std::vector<std::int64_t> weight;
};

Rounds rounds(const Arena& a, const std::vector<std::uint64_t>& cmin, const std::vector<std::uint64_t>& cmax) {
  Rounds r;
  r.next.resize(a.num_min());
  r.weight.resize(a.num_min());
  for (std::size_t v = 0; v < a.num_min(); ++v) {
    const std::uint32_t m = a.min_targets[cmin[v]];
    r.next[v] = a.max_targets[cmax[m]];
    r.weight[v] = a.weights[cmin[v]];
  }
  return r;
}

/* the lasso from v: steps until the cycle, and the cycle */
void lasso(const Rounds& r, std::uint32_t v, std::vector<std::uint32_t>& stem, std::vector<std::uint32_t>& cycle) {
  std::vector<int> seen(r.next.size(), -1);
  std::vector<std::uint32_t> path;
  while (seen[v] < 0) {
    seen[v] = static_cast<int>(path.size());
    path.push_back(v);
    v = r.next[v];
  }
  stem.assign(path.begin(), path.begin() + seen[v]);
  cycle.assign(path.begin() + seen[v], path.end());
}

Rational lasso_mean(const Rounds& r, std::uint32_t v) {
  std::vector<std::uint32_t> stem, cycle;
  lasso(r, v, stem, cycle);
  std::int64_t sum = 0;
  for (std::uint32_t c : cycle)
    sum += r.weight[c];
  return Rational(sum, static_cast<std::int64_t>(cycle.size()));
}

/* (1-l) sum_i l^i w_i along the lasso, closed form on the cycle */
double lasso_discounted(const Rounds& r, std::uint32_t v, double l) {
  std::vector<std::uint32_t> stem, cycle;
  lasso(r, v, stem, cycle);
  double acc = 0.0, p = 1.0;
  for (std::uint32_t c : cycle) {
    acc += p * static_cast<double>(r.weight[c]);
    p *= l;
  }
  double value = (1.0 - l) * acc / (1.0 - p);
  for (std::size_t i = stem.size(); i-- > 0;)
    value = (1.0 - l) * static_cast<double>(r.weight[stem[i]]) + l * value;
  return value / kMicroUnitsPerCost;
}

template <class T, class Eval>
std::vector<T> min_max(const Arena& a, Eval eval) {
  require(strategy_pair_count(a) <= 10'000'000, "brute force: arena too large");
  const std::size_t n0 = a.num_min();
  std::vector<T> best(n0);
  std::vector<bool> have(n0, false);
  auto cmin = first_choice(a.min_offsets);
  do {
    std::vector<T> worst(n0);
    std::vector<bool> set(n0, false);
    auto cmax = first_choice(a.max_offsets);
    do {
      const Rounds r = rounds(a, cmin, cmax);
      for (std::size_t v = 0; v < n0; ++v) {
        const T x = eval(r, static_cast<std::uint32_t>(v));
        if (!set[v] || x > worst[v]) {
          worst[v] = x;
          set[v] = true;
        }
      }
    } while (advance(cmax, a.max_offsets));
    for (std::size_t v = 0; v < n0; ++v)
      if (!have[v] || worst[v] < best[v]) {
        best[v] = worst[v];
        have[v] = true;
      }
  } while (advance(cmin, a.min_offsets));
  return best;
}

double weight_range(const Arena& a) {
  const auto [lo, hi] = std::minmax_element(a.weights.begin(), a.weights.end());
  return static_cast<double>(*hi - *lo) / kMicroUnitsPerCost;
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

Arena random_arena(std::mt19937_64& rng, const CorpusOptions& o) {
  require(o.max_nodes >= 2 && o.max_degree >= 1, "random_arena: need two nodes and degree one");
  const std::size_t n0 = 1 + draw(rng, o.max_nodes - 1);
  const std::size_t n1 = 1 + draw(rng, o.max_nodes - n0);
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>> emin;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> emax;
  const auto unit = static_cast<std::int64_t>(kMicroUnitsPerCost);
  for (std::size_t v = 0; v < n0; ++v) {
    const std::size_t d = 1 + draw(rng, std::min(o.max_degree, n1));
    for (std::uint32_t t : pick(rng, n1, d))
      emin.emplace_back(static_cast<std::uint32_t>(v), t,
                        static_cast<std::int64_t>(draw(rng, static_cast<std::uint64_t>(o.max_weight) + 1)) * unit);
  }
  for (std::size_t m = 0; m < n1; ++m) {
    const std::size_t d = 1 + draw(rng, std::min(o.max_degree, n0));
    for (std::uint32_t t : pick(rng, n0, d))
      emax.emplace_back(static_cast<std::uint32_t>(m), t);
  }
  return Arena::from_edges(n0, n1, emin, emax);
}

std::vector<Arena> random_corpus(const CorpusOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<Arena> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i)
    out.push_back(random_arena(rng, options));
  return out;
}

std::uint64_t strategy_pair_count(const Arena& a) {
  std::uint64_t n = 1;
  auto mul = [&](const std::vector<std::uint64_t>& offsets) {
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
      n *= offsets[i + 1] - offsets[i];
      if (n > (1ull << 40))
        n = 1ull << 40;
    }
  };
  mul(a.min_offsets);
  mul(a.max_offsets);
  return n;
}

std::vector<Rational> brute_force_mpg(const Arena& a) {
  a.validate();
  return min_max<Rational>(a, [](const Rounds& r, std::uint32_t v) { return lasso_mean(r, v); });
}

std::vector<double> brute_force_dpg(const Arena& a, const Rational& lambda) {
  a.validate();
  require(Rational(0) <= lambda && lambda < Rational(1), "brute_force_dpg: lambda must lie in [0, 1)");
  const double l = lambda.to_double();
  return min_max<double>(a, [l](const Rounds& r, std::uint32_t v) { return lasso_discounted(r, v, l); });
}

CheckResult check_mpg_oracle(const std::vector<Arena>& corpus) {
  Stopwatch clock;
  CheckResult res{"mpg oracle", true, "", 0.0};
  std::size_t bad = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto oracle = brute_force_mpg(corpus[i]);
    const auto solved = solve_mpg(corpus[i]);
    const auto energy = solve_mpg_energy(corpus[i]);
    if (solved.values != oracle || energy.values != oracle) {
      if (bad++ == 0)
        res.detail = "arena " + std::to_string(i) + " differs from the oracle; ";
    }
  }
  res.passed = bad == 0;
  res.detail += std::to_string(corpus.size() - bad) + "/" + std::to_string(corpus.size()) + " arenas exact";
  res.seconds = clock.seconds();
  return res;
}

CheckResult check_dpg_oracle(const std::vector<Arena>& corpus, const std::vector<Rational>& lambdas, double tol) {
  Stopwatch clock;
  CheckResult res{"dpg oracle", true, "", 0.0};
  double worst = 0.0;
  for (const Arena& a : corpus)
    for (const Rational& l : lambdas) {
      const auto oracle = brute_force_dpg(a, l);
      const auto solved = solve_dpg(a, l);
      for (std::size_t v = 0; v < oracle.size(); ++v)
        worst = std::max(worst, std::abs(oracle[v] - solved.values[v]));
    }
  res.passed = worst <= tol;
  std::ostringstream d;
  d << "max deviation " << worst << " over " << corpus.size() << " arenas x " << lambdas.size() << " lambdas";
  res.detail = d.str();
  res.seconds = clock.seconds();
  return res;
}

CheckResult check_dpg_contraction(const std::vector<Arena>& corpus, const std::vector<Rational>& lambdas) {
  Stopwatch clock;
  CheckResult res{"dpg contraction", true, "", 0.0};
  std::size_t bad = 0;
  for (const Arena& a : corpus)
    for (const Rational& l : lambdas) {
      const auto r = solve_dpg(a, l);
      const double f = l.to_double();
      /* rounding of values of size up to the max weight */
      const double slack = 1e-13 * (1.0 + static_cast<double>(*std::max_element(a.weights.begin(), a.weights.end())) /
                                              kMicroUnitsPerCost);
      for (std::size_t k = 1; k < r.residuals.size(); ++k)
        if (r.residuals[k] > f * r.residuals[k - 1] + slack)
          ++bad;
    }
  res.passed = bad == 0;
  res.detail = std::to_string(bad) + " sweeps violate residual[k+1] <= lambda * residual[k]";
  res.seconds = clock.seconds();
  return res;
}

CheckResult check_limit(const std::vector<Arena>& corpus, const std::vector<Rational>& lambdas, double rel_bound) {
  Stopwatch clock;
  CheckResult res{"dpg to mpg limit", true, "", 0.0};
  std::size_t non_monotone = 0, too_far = 0;
  double worst_ratio = 0.0;
  for (const Arena& a : corpus) {
    const auto rep = dpg_mpg_limit_check(a, lambdas);
    /* slack for the value iteration tolerance */
    if (!rep.monotone(1e-8))
      ++non_monotone;
    const double range = weight_range(a);
    const double last = rep.max_gap(lambdas.size() - 1);
    if (last >= rel_bound * range + 1e-8)
      ++too_far;
    if (range > 0.0)
      worst_ratio = std::max(worst_ratio, last / range);
  }
  res.passed = non_monotone == 0 && too_far == 0;
  std::ostringstream d;
  d << non_monotone << " arenas with growing gaps, " << too_far << " above the bound; worst final gap "
    << worst_ratio << " x weight range";
  res.detail = d.str();
  res.seconds = clock.seconds();
  return res;
}

CheckResult check_abstraction_soundness(const ControlSystemSpec& sys, const SymbolicModel& model,
                                        const SoundnessOptions& o) {
  Stopwatch clock;
  CheckResult res{"abstraction soundness " + sys.name, true, "", 0.0};
  require(model.num_cells() == sys.grid.num_cells() && model.num_inputs() == sys.inputs.size(),
          "check_abstraction_soundness: model does not match the system");
  require(o.pieces >= 1, "check_abstraction_soundness: need at least one disturbance piece");
  std::mt19937_64 rng(o.seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const std::size_t n = sys.state_dim();
  std::size_t misses = 0, rejected = 0;
  for (std::size_t s = 0; s < o.samples; ++s) {
    /* pairs mapped to {SINK} hold vacuously; draw among the others */
    CellId c;
    std::uint32_t u = 0;
    std::size_t tries = 0;
    do {
      c = CellId{static_cast<std::uint32_t>(draw(rng, model.num_cells()))};
      u = static_cast<std::uint32_t>(draw(rng, model.num_inputs()));
    } while (model.blocked(c, u) && ++tries < 100000);
    if (tries == 100000) {
      res.passed = false;
      res.detail = "no pair with an in-grid over-approximation found";
      res.seconds = clock.seconds();
      return res;
    }
    rejected += tries;
    const Box box = sys.grid.cell_box(c);
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = box.lower[i] + unit() * (box.upper[i] - box.lower[i]);
    /* the upper face of an inner cell belongs to its neighbour */
    if (!(sys.grid.quantize(x) == c))
      x = sys.grid.cell_center(c);
    std::vector<Vec> piece(o.pieces, Vec(n));
    for (auto& p : piece)
      for (std::size_t i = 0; i < n; ++i)
        p[i] = (2.0 * unit() - 1.0) * sys.w[i];
    const double tau = sys.tau;
    const std::size_t pieces = o.pieces;
    Disturbance omega = [&piece, tau, pieces](double t, std::span<double> out) {
      auto k = static_cast<std::size_t>(t / tau * static_cast<double>(pieces));
      const Vec& p = piece[std::min(k, pieces - 1)];
      std::copy(p.begin(), p.end(), out.begin());
    };
    const Vec end = rk4_step_disturbed(sys.f, x, sys.inputs[u], tau, o.substeps, omega, 0.0);
    const CellId q = sys.grid.quantize(end);
    const auto succ = model.successors(c, u);
    if (q.is_sink() || !std::binary_search(succ.begin(), succ.end(), q))
      ++misses;
  }
  res.passed = misses == 0;
  std::ostringstream d;
  d << misses << " misses in " << o.samples << " samples of non-blocked pairs (" << rejected
    << " blocked draws skipped)";
  res.detail = d.str();
  res.seconds = clock.seconds();
  return res;
}

}  // namespace qsynth
