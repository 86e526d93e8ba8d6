#include "qsynth/games.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"
#include "qsynth/parallel.hpp"

namespace qsynth {

namespace {

using i128 = __int128;

constexpr std::string_view kSolutionMagic = "QSGS";
constexpr std::uint32_t kSolutionVersion = 1;

void check_game(const Arena& a) {
  require(a.num_min() > 0, "game: empty arena");
  require(a.weights.size() == a.num_min_edges(), "game: arena carries no weights");
  a.validate();
}

std::uint64_t find_edge(const std::vector<std::uint64_t>& offsets, const std::vector<std::uint32_t>& targets,
                        std::size_t from, std::uint32_t to) {
  auto first = targets.begin() + static_cast<std::ptrdiff_t>(offsets[from]);
  auto last = targets.begin() + static_cast<std::ptrdiff_t>(offsets[from + 1]);
  auto it = std::lower_bound(first, last, to);
  if (it == last || *it != to)
    throw ContractViolation("strategy picks a non-existing edge");
  return static_cast<std::uint64_t>(it - targets.begin());
}

/* reduced mean p/q with q > 0 */
struct Mean {
  std::int64_t p = 0;
  std::int64_t q = 1;
  friend bool operator==(const Mean&, const Mean&) = default;
};

int compare(const Mean& a, const Mean& b) {
  i128 l = static_cast<i128>(a.p) * b.q, r = static_cast<i128>(b.p) * a.q;
  return l < r ? -1 : (l > r ? 1 : 0);
}

Mean make_mean(i128 sum, i128 len) {
  i128 x = sum < 0 ? -sum : sum, y = len;
  while (y != 0) {
    i128 t = x % y;
    x = y;
    y = t;
  }
  if (x == 0)
    x = 1;
  return {static_cast<std::int64_t>(sum / x), static_cast<std::int64_t>(len / x)};
}

/*
 * policy iteration state. policies are edge indices; every min node belongs
 * to the class of the cycle its play ends in, the class carries the mean.
 * H is the bias scaled by the denominator of that mean
 */
class PolicyIteration {
public:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  PolicyIteration(const Arena& a, unsigned workers) : a_(a), workers_(workers) {
    n0_ = a.num_min();
    n1_ = a.num_max();
    smin_.resize(n0_);
    smax_.resize(n1_);
    pos_.resize(n0_);
  }

  void greedy_start() {
    for (std::size_t v = 0; v < n0_; ++v) {
      std::uint64_t best = a_.min_offsets[v];
      for (std::uint64_t e = best + 1; e < a_.min_offsets[v + 1]; ++e)
        if (a_.weights[e] < a_.weights[best])
          best = e;
      smin_[v] = best;
    }
    for (std::size_t m = 0; m < n1_; ++m)
      smax_[m] = a_.max_offsets[m];
  }

  void set_min_policy(const std::vector<std::uint32_t>& sigma) {
    require(sigma.size() == n0_, "strategy size does not match the arena");
    for (std::size_t v = 0; v < n0_; ++v)
      smin_[v] = find_edge(a_.min_offsets, a_.min_targets, v, sigma[v]);
  }

  void set_max_policy(const std::vector<std::uint32_t>& sigma) {
    require(sigma.size() == n1_, "strategy size does not match the arena");
    for (std::size_t m = 0; m < n1_; ++m)
      smax_[m] = find_edge(a_.max_offsets, a_.max_targets, m, sigma[m]);
    all_dirty_ = true;
  }

  std::uint32_t next(std::size_t v) const { return a_.max_targets[smax_[a_.min_targets[smin_[v]]]]; }
  std::int64_t weight(std::size_t v) const { return a_.weights[smin_[v]]; }
  std::uint32_t chosen_max(std::size_t m) const { return a_.max_targets[smax_[m]]; }
  const Mean& gain(std::size_t v) const { return means_[cls_[v]]; }

  /*
   * gain and bias of the functional graph v -> tau(sigma(v)). after the first
   * call only nodes whose play passes through a changed policy edge are redone;
   * the rest keep their values, exactly as a full pass would leave them
   */
  void evaluate() {
    std::vector<std::uint32_t>& aff = affected_;
    aff.clear();
    if (!have_old_) {
      cls_.assign(n0_, kNone);
      h_.assign(n0_, 0);
      next_.resize(n0_);
      edge_.resize(n0_);
      prev_cls_.assign(n0_, kNone);
      prev_h_.assign(n0_, 0);
      mark_.assign(n0_, 0);
      for (std::size_t v = 0; v < n0_; ++v) {
        next_[v] = next(v);
        edge_[v] = smin_[v];
        aff.push_back(static_cast<std::uint32_t>(v));
      }
    } else {
      for (std::size_t v = 0; v < n0_; ++v) {
        const std::uint32_t nn = next(v);
        if (nn != next_[v] || smin_[v] != edge_[v]) {
          aff.push_back(static_cast<std::uint32_t>(v));
          next_[v] = nn;
          edge_[v] = smin_[v];
        }
      }
      if (!aff.empty())
        collect_ancestors(aff);
    }
    for (std::uint32_t v : aff) {
      prev_cls_[v] = cls_[v];
      prev_h_[v] = h_[v];
      cls_[v] = kNone;
    }
    const std::size_t old_classes = means_.size();
    std::vector<std::uint32_t>& path = path_;
    for (std::uint32_t s : aff) {
      if (cls_[s] != kNone)
        continue;
      path.clear();
      std::uint32_t v = s;
      /* pos_ marks nodes of the current walk with their position */
      while (cls_[v] == kNone && !(pos_[v] < path.size() && path[pos_[v]] == v)) {
        pos_[v] = static_cast<std::uint32_t>(path.size());
        path.push_back(v);
        v = next_[v];
      }
      std::size_t stop = path.size();
      if (cls_[v] == kNone) {
        const std::size_t start = pos_[v], len = path.size() - start;
        i128 sum = 0;
        std::size_t rpos = start;
        for (std::size_t i = start; i < path.size(); ++i) {
          sum += a_.weights[edge_[path[i]]];
          if (path[i] < path[rpos])
            rpos = i;
        }
        const Mean g = make_mean(sum, static_cast<i128>(len));
        const auto id = static_cast<std::uint32_t>(means_.size());
        means_.push_back(g);
        auto cyc = [&](std::size_t k) { return path[start + (rpos - start + k) % len]; };
        const std::uint32_t root = cyc(0);
        cls_[root] = id;
        const bool keep = prev_cls_[root] != kNone && means_[prev_cls_[root]] == g;
        h_[root] = keep ? prev_h_[root] : 0;
        for (std::size_t k = len - 1; k >= 1; --k) {
          const std::uint32_t c = cyc(k), n = cyc((k + 1) % len);
          cls_[c] = id;
          h_[c] = static_cast<i128>(g.q) * a_.weights[edge_[c]] - g.p + h_[n];
        }
        stop = start;
      }
      for (std::size_t i = stop; i-- > 0;) {
        const std::uint32_t u = path[i], n = next_[u];
        const Mean& g = means_[cls_[n]];
        cls_[u] = cls_[n];
        h_[u] = static_cast<i128>(g.q) * a_.weights[edge_[u]] - g.p + h_[n];
      }
    }
    changed_list_.clear();
    for (std::uint32_t v : aff)
      if (prev_cls_[v] == kNone || h_[v] != prev_h_[v] || !(means_[cls_[v]] == means_[prev_cls_[v]]))
        changed_list_.push_back(v);
    have_old_ = true;
    const bool compacted = compact_classes();
    /* dense order-preserving ids of the distinct gains, for cheap comparisons */
    std::vector<std::uint32_t> order(means_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t x, std::uint32_t y) { return compare(means_[x], means_[y]) < 0; });
    std::vector<std::uint32_t> class_rank(means_.size());
    std::uint32_t r = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i > 0 && !(means_[order[i]] == means_[order[i - 1]]))
        ++r;
      class_rank[order[i]] = r;
    }
    bool same_ranks = !compacted && class_rank_.size() == old_classes;
    for (std::size_t c = 0; same_ranks && c < old_classes; ++c)
      same_ranks = class_rank[c] == class_rank_[c];
    class_rank_.swap(class_rank);
    rank_.resize(n0_);
    key_.resize(n0_);
    auto refresh = [&](std::size_t v) {
      rank_[v] = class_rank_[cls_[v]];
      key_[v] = Key{h_[v], rank_[v]};
    };
    if (same_ranks) {
      for (std::uint32_t v : aff)
        refresh(v);
    } else {
      for (std::size_t v = 0; v < n0_; ++v)
        refresh(v);
    }
  }

  /*
   * multichain Howard step for the max player; true if the policy changed.
   * proposals are cached per max node and only recomputed when the gain or
   * bias of a successor, or the node's own choice, changed
   */
  bool improve_max() {
    if (rev_off_.empty())
      build_reverse();
    std::vector<std::uint32_t>& work = work_;
    if (all_dirty_) {
      work.resize(n1_);
      std::iota(work.begin(), work.end(), 0u);
      std::fill(dirty_.begin(), dirty_.end(), 0);
      all_dirty_ = false;
    } else {
      for (std::uint32_t v : changed_list_)
        for (std::uint64_t i = rev_off_[v]; i < rev_off_[v + 1]; ++i)
          if (!dirty_[rev_src_[i]]) {
            dirty_[rev_src_[i]] = 1;
            work.push_back(rev_src_[i]);
          }
      for (std::uint32_t m : work)
        dirty_[m] = 0;
    }
    changed_list_.clear();
    parallel_for(work.size(), workers_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
        propose_max(work[i]);
    });
    std::size_t gains = 0, biases = 0;
    for (std::size_t m = 0; m < n1_; ++m) {
      gains += gain_prop_[m] != kNoEdge;
      biases += bias_prop_[m] != kNoEdge;
    }
    const std::vector<std::uint64_t>& prop = gains > 0 ? gain_prop_ : bias_prop_;
    if (gains == 0 && biases == 0)
      return false;
    work.clear();
    for (std::size_t m = 0; m < n1_; ++m)
      if (prop[m] != kNoEdge) {
        smax_[m] = prop[m];
        work.push_back(static_cast<std::uint32_t>(m));
      }
    return true;
  }

  /* two-stage improvement for the min player against the current max policy */
  bool improve_min() {
    std::atomic<bool> gain_step{false};
    std::vector<std::uint64_t> proposal(smin_);
    parallel_for(n0_, workers_, [&](std::size_t begin, std::size_t end) {
      bool local = false;
      for (std::size_t v = begin; v < end; ++v) {
        const std::uint32_t cur = rank_[v];
        std::uint64_t best = smin_[v];
        std::uint32_t br = cur;
        i128 bh = 0;
        for (std::uint64_t e = a_.min_offsets[v]; e < a_.min_offsets[v + 1]; ++e) {
          const std::uint32_t t = chosen_max(a_.min_targets[e]);
          const std::uint32_t r = rank_[t];
          if (r > br || (r == br && br == cur))
            continue;
          const Mean& g = gain(t);
          const i128 val = static_cast<i128>(g.q) * a_.weights[e] - g.p + h_[t];
          if (r < br || val < bh) {
            best = e;
            br = r;
            bh = val;
          }
        }
        if (br < cur) {
          proposal[v] = best;
          local = true;
        }
      }
      if (local)
        gain_step = true;
    });
    if (gain_step) {
      smin_.swap(proposal);
      return true;
    }
    std::atomic<bool> changed{false};
    parallel_for(n0_, workers_, [&](std::size_t begin, std::size_t end) {
      bool local = false;
      for (std::size_t v = begin; v < end; ++v) {
        const std::uint32_t cur = rank_[v];
        std::uint64_t best = smin_[v];
        i128 bh = h_[v];
        for (std::uint64_t e = a_.min_offsets[v]; e < a_.min_offsets[v + 1]; ++e) {
          const std::uint32_t t = chosen_max(a_.min_targets[e]);
          if (rank_[t] != cur)
            continue;
          const Mean& g = gain(t);
          const i128 val = static_cast<i128>(g.q) * a_.weights[e] - g.p + h_[t];
          if (val < bh) {
            best = e;
            bh = val;
          }
        }
        if (best != smin_[v]) {
          smin_[v] = best;
          local = true;
        }
      }
      if (local)
        changed = true;
    });
    return changed;
  }

  /* max best response to the current min policy; returns evaluations spent */
  std::size_t best_response(std::size_t budget) {
    std::size_t spent = 0;
    while (true) {
      evaluate();
      if (++spent > budget)
        throw NumericalBlowup("policy iteration: iteration cap reached");
      if (!improve_max())
        return spent;
    }
  }

  std::vector<Mean> gains() const {
    std::vector<Mean> out(n0_);
    for (std::size_t v = 0; v < n0_; ++v)
      out[v] = gain(v);
    return out;
  }
  const std::vector<i128>& bias() const { return h_; }

private:
  static constexpr std::uint64_t kNoEdge = ~std::uint64_t{0};

  /* best strictly better successor by gain, and by bias among equal gain */
  void propose_max(std::size_t m) {
    const Key cur = key_[a_.max_targets[smax_[m]]];
    std::uint64_t bg = kNoEdge, bb = kNoEdge;
    Key kg = cur;
    i128 hb = cur.h;
    for (std::uint64_t e = a_.max_offsets[m]; e < a_.max_offsets[m + 1]; ++e) {
      const Key k = key_[a_.max_targets[e]];
      if (k.rank > cur.rank) {
        if (bg == kNoEdge || k.rank > kg.rank || (k.rank == kg.rank && k.h > kg.h)) {
          bg = e;
          kg = k;
        }
      } else if (k.rank == cur.rank && k.h > hb) {
        bb = e;
        hb = k.h;
      }
    }
    gain_prop_[m] = bg;
    bias_prop_[m] = bb;
  }

  /* max predecessors of every min node */
  void build_reverse() {
    rev_off_.assign(n0_ + 1, 0);
    for (std::uint32_t t : a_.max_targets)
      ++rev_off_[t + 1];
    for (std::size_t v = 0; v < n0_; ++v)
      rev_off_[v + 1] += rev_off_[v];
    rev_src_.resize(rev_off_[n0_]);
    std::vector<std::uint64_t> fill(rev_off_.begin(), rev_off_.end() - 1);
    for (std::size_t m = 0; m < n1_; ++m)
      for (std::uint64_t e = a_.max_offsets[m]; e < a_.max_offsets[m + 1]; ++e)
        rev_src_[fill[a_.max_targets[e]]++] = static_cast<std::uint32_t>(m);
    gain_prop_.assign(n1_, kNoEdge);
    bias_prop_.assign(n1_, kNoEdge);
    dirty_.assign(n1_, 0);
    all_dirty_ = true;
  }

  /* extends seeds to every node whose policy path reaches one of them */
  void collect_ancestors(std::vector<std::uint32_t>& nodes) {
    in_off_.assign(n0_ + 1, 0);
    for (std::size_t v = 0; v < n0_; ++v)
      ++in_off_[next_[v] + 1];
    for (std::size_t v = 0; v < n0_; ++v)
      in_off_[v + 1] += in_off_[v];
    in_src_.resize(n0_);
    std::vector<std::uint32_t>& fill = path_;
    fill.assign(in_off_.begin(), in_off_.end() - 1);
    for (std::size_t v = 0; v < n0_; ++v)
      in_src_[fill[next_[v]]++] = static_cast<std::uint32_t>(v);
    ++stamp_;
    for (std::uint32_t v : nodes)
      mark_[v] = stamp_;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::uint32_t v = nodes[i];
      for (std::uint32_t k = in_off_[v]; k < in_off_[v + 1]; ++k) {
        const std::uint32_t u = in_src_[k];
        if (mark_[u] != stamp_) {
          mark_[u] = stamp_;
          nodes.push_back(u);
        }
      }
    }
  }

  /* drops classes no node belongs to any more; true if ids changed */
  bool compact_classes() {
    if (means_.size() < 2 * live_classes_ + 1024)
      return false;
    std::vector<std::uint32_t> remap(means_.size(), kNone);
    std::vector<Mean> live;
    for (std::size_t v = 0; v < n0_; ++v) {
      std::uint32_t& c = cls_[v];
      if (remap[c] == kNone) {
        remap[c] = static_cast<std::uint32_t>(live.size());
        live.push_back(means_[c]);
      }
      c = remap[c];
    }
    means_.swap(live);
    live_classes_ = means_.size();
    return true;
  }

  const Arena& a_;
  unsigned workers_;
  std::size_t n0_ = 0, n1_ = 0;
  /* bias and gain rank side by side, the inner loop of improve_max reads one line per target */
  struct Key {
    i128 h;
    std::uint32_t rank;
  };
  std::vector<std::uint64_t> smin_, smax_, gain_prop_, bias_prop_;
  std::vector<Key> key_;
  std::vector<std::uint64_t> rev_off_;
  std::vector<std::uint32_t> rev_src_;
  std::vector<std::uint8_t> dirty_;
  bool all_dirty_ = true;
  std::vector<std::uint32_t> next_, prev_cls_, affected_, changed_list_, work_, mark_, in_off_, in_src_;
  std::vector<std::uint64_t> edge_;
  std::vector<i128> prev_h_;
  std::vector<std::uint32_t> class_rank_;
  std::uint32_t stamp_ = 0;
  std::size_t live_classes_ = 0;
  std::vector<std::uint32_t> cls_, rank_, pos_, path_;
  std::vector<Mean> means_;
  std::vector<i128> h_;
  bool have_old_ = false;
};

/*
 * optimality equations of both players for (g, H) on min nodes; on success
 * fills the canonical strategies (argmin / argmax, lowest node id on ties)
 */
bool certify(const Arena& a, const std::vector<Mean>& g, const std::vector<i128>& h, unsigned workers,
             Strategy& out) {
  const std::size_t n0 = a.num_min(), n1 = a.num_max();
  std::vector<Mean> gm(n1);
  std::vector<i128> hm(n1);
  out.sigma_min.assign(n0, 0);
  out.sigma_max.assign(n1, 0);
  parallel_for(n1, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      std::uint32_t best = a.max_targets[a.max_offsets[m]];
      for (std::uint64_t e = a.max_offsets[m] + 1; e < a.max_offsets[m + 1]; ++e) {
        const std::uint32_t t = a.max_targets[e];
        int c = compare(g[t], g[best]);
        if (c > 0 || (c == 0 && h[t] > h[best]))
          best = t;
      }
      gm[m] = g[best];
      hm[m] = h[best];
      out.sigma_max[m] = best;
    }
  });
  std::atomic<bool> ok{true};
  parallel_for(n0, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end && ok; ++v) {
      std::uint32_t best = a.min_targets[a.min_offsets[v]];
      Mean bg = gm[best];
      i128 bh = static_cast<i128>(bg.q) * a.weights[a.min_offsets[v]] - bg.p + hm[best];
      for (std::uint64_t e = a.min_offsets[v] + 1; e < a.min_offsets[v + 1]; ++e) {
        const std::uint32_t t = a.min_targets[e];
        int c = compare(gm[t], bg);
        if (c > 0)
          continue;
        const i128 val = static_cast<i128>(gm[t].q) * a.weights[e] - gm[t].p + hm[t];
        if (c < 0 || val < bh) {
          best = t;
          bg = gm[t];
          bh = val;
        }
      }
      if (!(bg == g[v]) || bh != h[v])
        ok = false;
      out.sigma_min[v] = best;
    }
  });
  return ok;
}

std::vector<Rational> to_rationals(const std::vector<Mean>& g) {
  std::vector<Rational> out;
  out.reserve(g.size());
  for (const Mean& m : g)
    out.emplace_back(m.p, m.q);
  return out;
}

/* ---- energy games ---- */

struct Reverse {
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint32_t> sources;  // node ids in the joint numbering
};

/* joint numbering: min nodes 0..n0-1, max nodes n0..n0+n1-1 */
Reverse reverse_edges(const Arena& a) {
  const std::size_t n0 = a.num_min(), n = n0 + a.num_max();
  Reverse r;
  r.offsets.assign(n + 1, 0);
  for (std::uint32_t t : a.min_targets)
    ++r.offsets[n0 + t + 1];
  for (std::uint32_t t : a.max_targets)
    ++r.offsets[t + 1];
  for (std::size_t i = 0; i < n; ++i)
    r.offsets[i + 1] += r.offsets[i];
  r.sources.resize(r.offsets[n]);
  std::vector<std::uint64_t> fill(r.offsets.begin(), r.offsets.end() - 1);
  for (std::size_t v = 0; v < n0; ++v)
    for (std::uint64_t e = a.min_offsets[v]; e < a.min_offsets[v + 1]; ++e)
      r.sources[fill[n0 + a.min_targets[e]]++] = static_cast<std::uint32_t>(v);
  for (std::size_t m = 0; m < a.num_max(); ++m)
    for (std::uint64_t e = a.max_offsets[m]; e < a.max_offsets[m + 1]; ++e)
      r.sources[fill[a.max_targets[e]]++] = static_cast<std::uint32_t>(n0 + m);
  return r;
}

constexpr i128 kTop = -1;

/*
 * least progress measure of the energy game on the nodes with in[x] set.
 * min edges gain gain(e) energy for the energy player (min if min_energy).
 * kTop marks nodes the energy player loses
 */
template <class Gain>
std::vector<i128> progress_measure(const Arena& a, const Reverse& rev, const std::vector<std::uint8_t>& in,
                                   bool min_energy, Gain&& gain) {
  const std::size_t n0 = a.num_min(), n = n0 + a.num_max();
  i128 worst = 0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < n0; ++v) {
    if (!in[v])
      continue;
    ++count;
    for (std::uint64_t e = a.min_offsets[v]; e < a.min_offsets[v + 1]; ++e)
      if (in[n0 + a.min_targets[e]])
        worst = std::max(worst, -gain(e));
  }
  const i128 bound = worst * static_cast<i128>(count);
  std::vector<i128> f(n, 0);
  auto sub = [&](i128 x, i128 c) -> i128 {
    if (x == kTop)
      return kTop;
    i128 r = x - c;
    if (r < 0)
      r = 0;
    return r > bound ? kTop : r;
  };
  /* larger is worse for the energy player; kTop is the largest */
  auto worse = [](i128 x, i128 y) { return x == kTop ? y != kTop : (y != kTop && x > y); };
  auto lift = [&](std::size_t x) -> i128 {
    const bool is_min = x < n0;
    const bool energy = is_min == min_energy;
    bool first = true;
    i128 best = 0;
    if (is_min) {
      for (std::uint64_t e = a.min_offsets[x]; e < a.min_offsets[x + 1]; ++e) {
        const std::size_t y = n0 + a.min_targets[e];
        if (!in[y])
          continue;
        i128 val = sub(f[y], gain(e));
        if (first || (energy ? worse(best, val) : worse(val, best)))
          best = val;
        first = false;
      }
    } else {
      const std::size_t m = x - n0;
      for (std::uint64_t e = a.max_offsets[m]; e < a.max_offsets[m + 1]; ++e) {
        const std::size_t y = a.max_targets[e];
        if (!in[y])
          continue;
        i128 val = f[y];
        if (first || (energy ? worse(best, val) : worse(val, best)))
          best = val;
        first = false;
      }
    }
    require(!first, "energy game: node without successor in the subgame");
    return best;
  };
  std::deque<std::uint32_t> work;
  std::vector<std::uint8_t> queued(n, 0);
  for (std::size_t x = 0; x < n; ++x)
    if (in[x]) {
      work.push_back(static_cast<std::uint32_t>(x));
      queued[x] = 1;
    }
  while (!work.empty()) {
    const std::uint32_t x = work.front();
    work.pop_front();
    queued[x] = 0;
    if (f[x] == kTop)
      continue;
    const i128 val = lift(x);
    if (!worse(val, f[x]))
      continue;
    f[x] = val;
    for (std::uint64_t i = rev.offsets[x]; i < rev.offsets[x + 1]; ++i) {
      const std::uint32_t y = rev.sources[i];
      if (in[y] && !queued[y] && f[y] != kTop) {
        queued[y] = 1;
        work.push_back(y);
      }
    }
  }
  return f;
}

Fraction128 reduce(i128 n, i128 d) {
  if (d < 0) {
    n = -n;
    d = -d;
  }
  i128 x = n < 0 ? -n : n, y = d;
  while (y != 0) {
    i128 t = x % y;
    x = y;
    y = t;
  }
  if (x == 0)
    x = 1;
  return {n / x, d / x};
}

int compare(const Fraction128& a, const Fraction128& b) {
  i128 l = a.num * b.den, r = b.num * a.den;
  return l < r ? -1 : (l > r ? 1 : 0);
}

void check_magnitude(const Fraction128& f) {
  const i128 limit = static_cast<i128>(1) << 100;
  if (f.num > limit || f.num < -limit || f.den > limit)
    throw NumericalBlowup("energy solver: fractions too large");
}

class EnergySolver {
public:
  EnergySolver(const Arena& a, std::int64_t scale) : a_(a), rev_(reverse_edges(a)), scale_(scale) {
    n0_ = a.num_min();
    n_ = n0_ + a.num_max();
    value_.assign(n0_, Fraction128{});
  }

  std::int64_t w(std::uint64_t e) const { return a_.weights[e] / scale_; }

  void solve(std::vector<std::uint8_t> in, Fraction128 lo, Fraction128 hi) {
    std::size_t count = 0;
    for (std::size_t v = 0; v < n0_; ++v)
      count += in[v];
    if (count == 0)
      return;
    const i128 N = static_cast<i128>(count);
    /* at most one fraction with denominator <= N in [lo, hi] */
    if ((hi.num * lo.den - lo.num * hi.den) * N * N < hi.den * lo.den) {
      const Fraction128 val = simplest_between(lo, hi);
      for (std::size_t v = 0; v < n0_; ++v)
        if (in[v])
          value_[v] = val;
      return;
    }
    const Fraction128 q1 = reduce(3 * lo.num * hi.den + hi.num * lo.den, 4 * lo.den * hi.den);
    const Fraction128 q3 = reduce(lo.num * hi.den + 3 * hi.num * lo.den, 4 * lo.den * hi.den);
    const Fraction128 t = simplest_between(q1, q3);
    check_magnitude(t);
    const i128 ta = t.num, tb = t.den;
    auto fmin = progress_measure(a_, rev_, in, true, [&](std::uint64_t e) { return ta - tb * w(e); });
    std::vector<std::uint8_t> low(n_, 0), high(n_, 0), equal(n_, 0);
    for (std::size_t x = 0; x < n_; ++x) {
      if (!in[x])
        continue;
      (fmin[x] != kTop ? low : high)[x] = 1;
    }
    auto fmax = progress_measure(a_, rev_, low, false, [&](std::uint64_t e) { return tb * w(e) - ta; });
    for (std::size_t x = 0; x < n_; ++x)
      if (low[x] && fmax[x] != kTop) {
        low[x] = 0;
        equal[x] = 1;
      }
    for (std::size_t v = 0; v < n0_; ++v)
      if (equal[v])
        value_[v] = t;
    const Fraction128 step{1, tb * N};
    Fraction128 below = reduce(t.num * step.den - step.num * t.den, t.den * step.den);
    Fraction128 above = reduce(t.num * step.den + step.num * t.den, t.den * step.den);
    check_magnitude(below);
    check_magnitude(above);
    solve(std::move(low), lo, below);
    solve(std::move(high), above, hi);
  }

  /* max node value = max over successors */
  std::vector<Fraction128> max_values() const {
    std::vector<Fraction128> out(a_.num_max());
    for (std::size_t m = 0; m < a_.num_max(); ++m) {
      Fraction128 best = value_[a_.max_targets[a_.max_offsets[m]]];
      for (std::uint64_t e = a_.max_offsets[m] + 1; e < a_.max_offsets[m + 1]; ++e)
        if (compare(value_[a_.max_targets[e]], best) > 0)
          best = value_[a_.max_targets[e]];
      out[m] = best;
    }
    return out;
  }

  /* strategies from class-restricted energy games */
  Strategy strategies() const {
    const auto vmax = max_values();
    auto node_value = [&](std::size_t x) { return x < n0_ ? value_[x] : vmax[x - n0_]; };
    std::vector<Fraction128> classes(value_.begin(), value_.end());
    std::sort(classes.begin(), classes.end(), [](const Fraction128& x, const Fraction128& y) { return compare(x, y) < 0; });
    classes.erase(std::unique(classes.begin(), classes.end(),
                              [](const Fraction128& x, const Fraction128& y) { return compare(x, y) == 0; }),
                  classes.end());
    Strategy s;
    s.sigma_min.assign(n0_, 0);
    s.sigma_max.assign(a_.num_max(), 0);
    for (const Fraction128& t : classes) {
      std::vector<std::uint8_t> in(n_, 0);
      for (std::size_t x = 0; x < n_; ++x)
        in[x] = compare(node_value(x), t) == 0;
      const i128 ta = t.num, tb = t.den;
      auto gmin = [&](std::uint64_t e) { return ta - tb * w(e); };
      auto gmax = [&](std::uint64_t e) { return tb * w(e) - ta; };
      auto fmin = progress_measure(a_, rev_, in, true, gmin);
      auto fmax = progress_measure(a_, rev_, in, false, gmax);
      for (std::size_t v = 0; v < n0_; ++v) {
        if (!in[v])
          continue;
        require(fmin[v] != kTop, "energy solver: inconsistent value class");
        for (std::uint64_t e = a_.min_offsets[v]; e < a_.min_offsets[v + 1]; ++e) {
          const std::size_t y = n0_ + a_.min_targets[e];
          if (!in[y] || fmin[y] == kTop)
            continue;
          i128 r = std::max<i128>(0, fmin[y] - gmin(e));
          if (r <= fmin[v]) {
            s.sigma_min[v] = a_.min_targets[e];
            break;
          }
        }
      }
      for (std::size_t m = 0; m < a_.num_max(); ++m) {
        if (!in[n0_ + m])
          continue;
        require(fmax[n0_ + m] != kTop, "energy solver: inconsistent value class");
        for (std::uint64_t e = a_.max_offsets[m]; e < a_.max_offsets[m + 1]; ++e) {
          const std::size_t y = a_.max_targets[e];
          if (in[y] && fmax[y] != kTop && fmax[y] <= fmax[n0_ + m]) {
            s.sigma_max[m] = a_.max_targets[e];
            break;
          }
        }
      }
    }
    return s;
  }

  const std::vector<Fraction128>& values() const { return value_; }

private:
  const Arena& a_;
  Reverse rev_;
  std::int64_t scale_;
  std::size_t n0_ = 0, n_ = 0;
  std::vector<Fraction128> value_;
};

}  // namespace

std::uint64_t Strategy::hash() const {
  Hasher h;
  h.u64(sigma_min.size()).bytes(sigma_min.data(), sigma_min.size() * sizeof(std::uint32_t));
  h.u64(sigma_max.size()).bytes(sigma_max.data(), sigma_max.size() * sizeof(std::uint32_t));
  return h.value();
}

double DpgResult::max_value() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

Rational MpgResult::max_value() const {
  require(!values.empty(), "MpgResult: no values");
  return *std::max_element(values.begin(), values.end());
}

std::vector<double> max_node_values(const Arena& a, const std::vector<double>& vmin) {
  require(vmin.size() == a.num_min(), "max_node_values: size mismatch");
  std::vector<double> out(a.num_max());
  for (std::size_t m = 0; m < a.num_max(); ++m) {
    double best = vmin[a.max_targets[a.max_offsets[m]]];
    for (std::uint64_t e = a.max_offsets[m] + 1; e < a.max_offsets[m + 1]; ++e)
      best = std::max(best, vmin[a.max_targets[e]]);
    out[m] = best;
  }
  return out;
}

DpgResult solve_dpg(const Arena& a, const Rational& lambda, const DpgOptions& options) {
  require(lambda >= Rational(0) && lambda < Rational(1), "solve_dpg: lambda must lie in [0, 1); use solve_mpg for 1");
  require(options.tol > 0.0, "solve_dpg: tolerance must be positive");
  check_game(a);
  const std::size_t n0 = a.num_min(), n1 = a.num_max();
  const double l = lambda.to_double();
  const double keep = (1.0 - l) / kMicroUnitsPerCost;

  DpgResult r;
  r.lambda = lambda;
  std::vector<double> v(n0, 0.0), next(n0), vmax(n1);
  if (options.warm_start) {
    require(options.warm_start->size() == n0, "solve_dpg: warm start has the wrong size");
    v = *options.warm_start;
  }
  auto sweep_max = [&] {
    parallel_for(n1, options.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t m = begin; m < end; ++m) {
        double best = v[a.max_targets[a.max_offsets[m]]];
        for (std::uint64_t e = a.max_offsets[m] + 1; e < a.max_offsets[m + 1]; ++e)
          best = std::max(best, v[a.max_targets[e]]);
        vmax[m] = best;
      }
    });
  };
  for (std::size_t sweep = 0;; ++sweep) {
    if (sweep >= options.max_sweeps)
      throw NumericalBlowup("solve_dpg: sweep cap reached");
    sweep_max();
    parallel_for(n0, options.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t u = begin; u < end; ++u) {
        double best = 0.0;
        for (std::uint64_t e = a.min_offsets[u]; e < a.min_offsets[u + 1]; ++e) {
          double val = keep * static_cast<double>(a.weights[e]) + l * vmax[a.min_targets[e]];
          if (e == a.min_offsets[u] || val < best)
            best = val;
        }
        next[u] = best;
      }
    });
    double delta = 0.0;
    for (std::size_t u = 0; u < n0; ++u)
      delta = std::max(delta, std::abs(next[u] - v[u]));
    v.swap(next);
    r.residuals.push_back(delta);
    if (delta * l < options.tol * (1.0 - l))
      break;
  }
  sweep_max();
  r.strategy.sigma_min.resize(n0);
  r.strategy.sigma_max.resize(n1);
  for (std::size_t u = 0; u < n0; ++u) {
    double best = 0.0;
    std::uint32_t arg = 0;
    for (std::uint64_t e = a.min_offsets[u]; e < a.min_offsets[u + 1]; ++e) {
      double val = keep * static_cast<double>(a.weights[e]) + l * vmax[a.min_targets[e]];
      if (e == a.min_offsets[u] || val < best) {
        best = val;
        arg = a.min_targets[e];
      }
    }
    r.strategy.sigma_min[u] = arg;
  }
  for (std::size_t m = 0; m < n1; ++m) {
    std::uint32_t arg = a.max_targets[a.max_offsets[m]];
    for (std::uint64_t e = a.max_offsets[m] + 1; e < a.max_offsets[m + 1]; ++e)
      if (v[a.max_targets[e]] > v[arg])
        arg = a.max_targets[e];
    r.strategy.sigma_max[m] = arg;
  }
  r.values = std::move(v);
  return r;
}

MpgResult solve_mpg(const Arena& a, const MpgOptions& options) {
  check_game(a);
  MpgResult r;
  try {
    PolicyIteration pi(a, options.workers);
    pi.greedy_start();
    if (options.initial) {
      pi.set_min_policy(options.initial->sigma_min);
      pi.set_max_policy(options.initial->sigma_max);
    }
    std::size_t spent = 0;
    while (true) {
      spent += pi.best_response(options.max_iterations - std::min(spent, options.max_iterations));
      if (!pi.improve_min())
        break;
    }
    r.iterations = spent;
    const std::vector<Mean> gains = pi.gains();
    if (!certify(a, gains, pi.bias(), options.workers, r.strategy))
      throw NumericalBlowup("policy iteration: fixed point fails the optimality check");
    r.values = to_rationals(gains);
    return r;
  } catch (const NumericalBlowup&) {
    if (!options.allow_fallback)
      throw;
  }
  MpgResult fb = solve_mpg_energy(a);
  fb.used_fallback = true;
  return fb;
}

MpgResult solve_mpg_energy(const Arena& a) {
  check_game(a);
  const std::size_t n0 = a.num_min(), n1 = a.num_max();
  std::int64_t scale = 0;
  for (std::int64_t w : a.weights)
    scale = std::gcd(scale, w);
  MpgResult r;
  if (scale == 0) {
    r.values.assign(n0, Rational(0));
    r.strategy.sigma_min.resize(n0);
    r.strategy.sigma_max.resize(n1);
    for (std::size_t v = 0; v < n0; ++v)
      r.strategy.sigma_min[v] = a.min_targets[a.min_offsets[v]];
    for (std::size_t m = 0; m < n1; ++m)
      r.strategy.sigma_max[m] = a.max_targets[a.max_offsets[m]];
    return r;
  }
  std::int64_t wmax = 0;
  for (std::int64_t w : a.weights)
    wmax = std::max(wmax, w / scale);
  EnergySolver solver(a, scale);
  std::vector<std::uint8_t> all(n0 + n1, 1);
  solver.solve(all, Fraction128{0, 1}, Fraction128{wmax, 1});
  r.values.reserve(n0);
  for (const Fraction128& f : solver.values()) {
    Fraction128 x = reduce(f.num * scale, f.den);
    require(x.num <= INT64_MAX && x.den <= INT64_MAX, "solve_mpg_energy: value does not fit");
    r.values.emplace_back(static_cast<std::int64_t>(x.num), static_cast<std::int64_t>(x.den));
  }
  r.strategy = solver.strategies();
  return r;
}

std::vector<Rational> mpg_values_against(const Arena& a, const std::vector<std::uint32_t>& sigma_min) {
  check_game(a);
  PolicyIteration pi(a, 1);
  pi.greedy_start();
  pi.set_min_policy(sigma_min);
  pi.best_response(std::numeric_limits<std::size_t>::max() / 2);
  return to_rationals(pi.gains());
}

std::vector<Rational> play_values(const Arena& a, const Strategy& s) {
  check_game(a);
  PolicyIteration pi(a, 1);
  pi.set_min_policy(s.sigma_min);
  pi.set_max_policy(s.sigma_max);
  pi.evaluate();
  return to_rationals(pi.gains());
}

double LimitCheckReport::max_gap(std::size_t i) const {
  return gaps.at(i).empty() ? 0.0 : *std::max_element(gaps[i].begin(), gaps[i].end());
}

bool LimitCheckReport::monotone(double tol) const {
  for (std::size_t i = 1; i < gaps.size(); ++i)
    for (std::size_t v = 0; v < gaps[i].size(); ++v)
      if (gaps[i][v] > gaps[i - 1][v] + tol)
        return false;
  return true;
}

LimitCheckReport dpg_mpg_limit_check(const Arena& a, const std::vector<Rational>& lambdas,
                                     const DpgOptions& options) {
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    require(lambdas[i - 1] < lambdas[i], "dpg_mpg_limit_check: lambdas must increase");
  MpgOptions mo;
  mo.workers = options.workers;
  const MpgResult mpg = solve_mpg(a, mo);
  LimitCheckReport report;
  report.lambdas = lambdas;
  std::vector<double> warm;
  for (const Rational& l : lambdas) {
    DpgOptions o = options;
    if (!warm.empty())
      o.warm_start = &warm;
    DpgResult d = solve_dpg(a, l, o);
    std::vector<double> gap(a.num_min());
    for (std::size_t v = 0; v < gap.size(); ++v)
      gap[v] = std::abs(d.values[v] - mpg.value(v));
    report.gaps.push_back(std::move(gap));
    warm = std::move(d.values);
  }
  return report;
}

GameSolution GameSolution::from(const DpgResult& r) {
  GameSolution s;
  s.lambda = r.lambda;
  s.values = r.values;
  s.strategy = r.strategy;
  return s;
}

GameSolution GameSolution::from(const MpgResult& r) {
  GameSolution s;
  s.lambda = Rational(1);
  s.values.reserve(r.values.size());
  for (std::size_t v = 0; v < r.values.size(); ++v)
    s.values.push_back(r.value(v));
  s.exact_values = r.values;
  s.strategy = r.strategy;
  return s;
}

void save_solution(const GameSolution& s, std::uint64_t arena_hash, std::uint64_t cost_key,
                   const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  BinaryWriter w(out);
  w.magic(kSolutionMagic, kSolutionVersion);
  w.u64(arena_hash);
  w.u64(cost_key);
  w.i64(s.lambda.num());
  w.i64(s.lambda.den());
  w.f64s(s.values);
  w.u64(s.exact_values.size());
  for (const Rational& q : s.exact_values) {
    w.i64(q.num());
    w.i64(q.den());
  }
  w.u64(s.strategy.sigma_min.size());
  for (std::uint32_t x : s.strategy.sigma_min)
    w.u32(x);
  w.u64(s.strategy.sigma_max.size());
  for (std::uint32_t x : s.strategy.sigma_max)
    w.u32(x);
  write_file_atomic(path, out.str());
}

GameSolution load_solution(const std::filesystem::path& path, std::uint64_t arena_hash, std::uint64_t cost_key,
                           const Rational& lambda) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open solution file " + path.string());
  BinaryReader r(in);
  r.expect_magic(kSolutionMagic, kSolutionVersion);
  if (r.u64() != arena_hash)
    throw ConfigError("solution file " + path.string() + " belongs to a different arena");
  if (r.u64() != cost_key)
    throw ConfigError("solution file " + path.string() + " belongs to a different cost function");
  GameSolution s;
  const std::int64_t num = r.i64(), den = r.i64();
  s.lambda = Rational(num, den);
  if (!(s.lambda == lambda))
    throw ConfigError("solution file " + path.string() + " was solved for lambda " + s.lambda.to_string());
  s.values = r.f64s();
  auto read_count = [&] {
    std::uint64_t n = r.u64();
    if (n > (1ull << 34))
      throw ConfigError("solution file " + path.string() + " is corrupt");
    return n;
  };
  s.exact_values.resize(read_count());
  for (auto& q : s.exact_values) {
    const std::int64_t p = r.i64(), d = r.i64();
    q = Rational(p, d);
  }
  s.strategy.sigma_min.resize(read_count());
  for (auto& x : s.strategy.sigma_min)
    x = r.u32();
  s.strategy.sigma_max.resize(read_count());
  for (auto& x : s.strategy.sigma_max)
    x = r.u32();
  return s;
}

void export_solution_csv(const GameSolution& s, const Arena& a, std::ostream& out) {
  require(s.values.size() == a.num_min(), "export_solution_csv: solution does not match the arena");
  const auto vmax = max_node_values(a, s.values);
  out << "kind,node,cell,input,value,successor\n";
  out.precision(17);
  /* arenas built from bare edge lists have no node tables */
  auto node = [](const std::vector<CellId>& cells, const std::vector<std::uint32_t>& inputs, std::size_t i) {
    return i < cells.size() ? std::to_string(cells[i].index) + ',' + std::to_string(inputs[i]) : std::string(",");
  };
  for (std::size_t v = 0; v < a.num_min(); ++v)
    out << "min," << v << ',' << node(a.min_cell, a.min_input, v) << ',' << s.values[v] << ','
        << s.strategy.sigma_min[v] << '\n';
  for (std::size_t m = 0; m < a.num_max(); ++m)
    out << "max," << m << ',' << node(a.max_cell, a.max_input, m) << ',' << vmax[m] << ','
        << s.strategy.sigma_max[m] << '\n';
}

}  // namespace qsynth
