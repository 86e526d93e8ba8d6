#include "qsynth/abstraction.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"
#include "qsynth/parallel.hpp"

namespace qsynth {

namespace {

constexpr std::string_view kModelMagic = "QSMD";
constexpr std::uint32_t kModelVersion = 1;

std::string describe(std::span<const double> v) {
  std::ostringstream ss;
  ss << "(";
  for (std::size_t i = 0; i < v.size(); ++i)
    ss << (i ? ", " : "") << v[i];
  ss << ")";
  return ss.str();
}

template <class Rhs>
void rk4_integrate(Rhs&& rhs, Vec& x, double h, int substeps, double t0) {
  const std::size_t n = x.size();
  Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
  const double dt = h / substeps;
  for (int s = 0; s < substeps; ++s) {
    const double t = t0 + s * dt;
    rhs(t, x, k1);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = x[i] + 0.5 * dt * k1[i];
    rhs(t, tmp, k2);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = x[i] + 0.5 * dt * k2[i];
    rhs(t, tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = x[i] + dt * k3[i];
    rhs(t, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

void check_finite(std::span<const double> x, std::span<const double> x0, std::span<const double> u) {
  for (double v : x)
    if (!std::isfinite(v))
      throw NumericalBlowup("non-finite state integrating from x = " + describe(x0) +
                            " under u = " + describe(u));
}

}  // namespace

std::span<const CellId> SymbolicModel::successors(CellId c, std::uint32_t u) const {
  require(!c.is_sink() && c.index < num_cells() && u < num_inputs(), "SymbolicModel: pair out of range");
  std::uint64_t pair = static_cast<std::uint64_t>(c.index) * num_inputs() + u;
  return {successor_table.data() + offsets[pair], successor_table.data() + offsets[pair + 1]};
}

bool SymbolicModel::blocked(CellId c, std::uint32_t u) const {
  auto s = successors(c, u);
  return s.size() == 1 && s.front().is_sink();
}

bool operator==(const SymbolicModel& a, const SymbolicModel& b) {
  return a.grid.domain().lower == b.grid.domain().lower && a.grid.domain().upper == b.grid.domain().upper &&
         a.grid.eta() == b.grid.eta() && a.inputs == b.inputs && a.tau == b.tau && a.offsets == b.offsets &&
         a.successor_table == b.successor_table && a.initial == b.initial;
}

Vec rk4_step(const VectorField& f, std::span<const double> x, std::span<const double> u, double h,
             int substeps) {
  require(h > 0.0, "rk4_step: step must be positive");
  require(substeps >= 1, "rk4_step: need at least one substep");
  Vec y(x.begin(), x.end());
  rk4_integrate([&](double, std::span<const double> s, std::span<double> d) { f(s, u, d); }, y, h, substeps, 0.0);
  check_finite(y, x, u);
  return y;
}

Vec rk4_step_disturbed(const VectorField& f, std::span<const double> x, std::span<const double> u,
                       double h, int substeps, const Disturbance& omega, double t0) {
  require(h > 0.0, "rk4_step: step must be positive");
  require(substeps >= 1, "rk4_step: need at least one substep");
  if (!omega)
    return rk4_step(f, x, u, h, substeps);
  Vec y(x.begin(), x.end());
  Vec w(x.size(), 0.0);
  const double dt = h / substeps;
  for (int s = 0; s < substeps; ++s) {
    const double t = t0 + s * dt;
    std::fill(w.begin(), w.end(), 0.0);
    omega(t + 0.5 * dt, w);
    rk4_integrate(
        [&](double, std::span<const double> st, std::span<double> d) {
          f(st, u, d);
          for (std::size_t i = 0; i < d.size(); ++i)
            d[i] += w[i];
        },
        y, dt, 1, t);
  }
  check_finite(y, x, u);
  return y;
}

Vec growth_bound(const Matrix& L, std::span<const double> w, std::span<const double> r0, double tau,
                 int substeps) {
  const std::size_t n = r0.size();
  require(L.rows == n && L.cols == n && w.size() == n, "growth_bound: dimension mismatch");
  require(tau > 0.0 && substeps >= 1, "growth_bound: bad integration parameters");
  for (std::size_t i = 0; i < n; ++i) {
    require(r0[i] >= 0.0, "growth_bound: negative initial radius");
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && L(i, j) < 0.0)
        throw ConfigError("growth_bound: off-diagonal entries of L must be non-negative");
  }
  Vec r(r0.begin(), r0.end());
  rk4_integrate(
      [&](double, std::span<const double> s, std::span<double> d) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = w[i];
          for (std::size_t j = 0; j < n; ++j)
            acc += L(i, j) * s[j];
          d[i] = acc;
        }
      },
      r, tau, substeps, 0.0);
  for (double& v : r)
    if (v < 0.0)
      v = 0.0;
  return r;
}

SymbolicModel build_symbolic_model(const ControlSystemSpec& sys, const AbstractionOptions& options) {
  sys.validate();
  const Grid& grid = sys.grid;
  const std::size_t n = grid.dims();
  const std::uint32_t nu = static_cast<std::uint32_t>(sys.inputs.size());
  const std::uint64_t pairs = grid.num_cells() * nu;

  Vec r0(n);
  for (std::size_t i = 0; i < n; ++i)
    r0[i] = 0.5 * grid.eta()[i];
  std::vector<Vec> radii(nu);
  for (std::uint32_t u = 0; u < nu; ++u)
    radii[u] = growth_bound(sys.jacobian_bound_for(sys.inputs[u]), sys.w, r0, sys.tau, options.radius_substeps);

  /* pass 1: per-pair index box [lo, hi] of successor cells, or blocked */
  std::vector<std::uint32_t> ranges(pairs * 2 * n);
  std::vector<std::uint8_t> blocked(pairs, 0);
  std::vector<std::uint64_t> counts(pairs, 0);
  const Box& dom = grid.domain();

  parallel_for(grid.num_cells(), options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const Vec center = grid.cell_center(CellId{static_cast<std::uint32_t>(c)});
      for (std::uint32_t u = 0; u < nu; ++u) {
        const std::uint64_t pair = c * nu + u;
        const Vec xi = rk4_step(sys.f, center, sys.inputs[u], sys.tau, options.flow_substeps);
        const Vec& radius = radii[u];
        std::uint32_t* range = &ranges[pair * 2 * n];
        std::uint64_t count = 1;
        bool out = false;
        for (std::size_t i = 0; i < n && !out; ++i) {
          double lo = xi[i] - radius[i];
          double hi = xi[i] + radius[i];
          if (lo < dom.lower[i] || hi > dom.upper[i]) {
            out = true;
            break;
          }
          range[2 * i] = grid.axis_index(i, lo);
          range[2 * i + 1] = grid.axis_index(i, hi);
          count *= range[2 * i + 1] - range[2 * i] + 1;
        }
        blocked[pair] = out ? 1 : 0;
        counts[pair] = out ? 1 : count;
      }
    }
  });

  SymbolicModel model;
  model.grid = grid;
  model.inputs = sys.inputs;
  model.tau = sys.tau;
  model.offsets.assign(pairs + 1, 0);
  for (std::uint64_t p = 0; p < pairs; ++p)
    model.offsets[p + 1] = model.offsets[p] + counts[p];
  model.successor_table.resize(model.offsets[pairs]);
  model.initial.assign(grid.num_cells(), 1);

  /* pass 2: enumerate boxes in row-major order, which is sorted by index */
  parallel_for(pairs, options.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> k(n);
    for (std::size_t p = begin; p < end; ++p) {
      CellId* out = model.successor_table.data() + model.offsets[p];
      if (blocked[p]) {
        *out = CellId::sink();
        continue;
      }
      const std::uint32_t* range = &ranges[p * 2 * n];
      for (std::size_t i = 0; i < n; ++i)
        k[i] = range[2 * i];
      for (;;) {
        std::uint64_t index = 0;
        for (std::size_t i = 0; i < n; ++i)
          index += grid.stride(i) * k[i];
        *out++ = CellId{static_cast<std::uint32_t>(index)};
        bool done = true;
        for (std::size_t d = n; d-- > 0;) {
          if (k[d] < range[2 * d + 1]) {
            ++k[d];
            done = false;
            break;
          }
          k[d] = range[2 * d];
        }
        if (done)
          break;
      }
    }
  });
  return model;
}

void save_model(const SymbolicModel& model, std::ostream& out) {
  BinaryWriter w(out);
  w.magic(kModelMagic, kModelVersion);
  const std::size_t n = model.grid.dims();
  w.u32(static_cast<std::uint32_t>(n));
  w.f64s(model.grid.eta());
  w.f64s(model.grid.domain().lower);
  w.f64s(model.grid.domain().upper);
  w.u32(model.num_inputs());
  w.u32(model.inputs.empty() ? 0u : static_cast<std::uint32_t>(model.inputs.front().size()));
  for (const auto& u : model.inputs)
    for (double v : u)
      w.f64(v);
  w.f64(model.tau);
  for (std::uint8_t b : model.initial)
    w.u8(b);
  /* successor lists: count, first index, then gaps */
  const std::uint64_t pairs = model.num_pairs();
  for (std::uint64_t p = 0; p < pairs; ++p) {
    std::uint64_t begin = model.offsets[p], end = model.offsets[p + 1];
    w.varint(end - begin);
    std::uint64_t prev = 0;
    for (std::uint64_t i = begin; i < end; ++i) {
      std::uint64_t idx = model.successor_table[i].index;
      w.varint(i == begin ? idx : idx - prev);
      prev = idx;
    }
  }
}

SymbolicModel load_model(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic(kModelMagic, kModelVersion);
  std::size_t n = r.u32();
  Vec eta = r.f64s(), lower = r.f64s(), upper = r.f64s();
  if (eta.size() != n || lower.size() != n || upper.size() != n)
    throw ConfigError("model file: inconsistent dimensions");
  SymbolicModel model;
  model.grid = Grid(Box(lower, upper), eta);
  std::uint32_t nu = r.u32(), m = r.u32();
  model.inputs.assign(nu, Vec(m));
  for (auto& u : model.inputs)
    for (double& v : u)
      v = r.f64();
  model.tau = r.f64();
  model.initial.resize(model.grid.num_cells());
  for (auto& b : model.initial)
    b = r.u8();
  const std::uint64_t pairs = model.num_pairs();
  model.offsets.assign(pairs + 1, 0);
  for (std::uint64_t p = 0; p < pairs; ++p) {
    std::uint64_t count = r.varint();
    std::uint64_t prev = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t v = r.varint();
      std::uint64_t idx = i == 0 ? v : prev + v;
      if (idx != CellId::kSinkIndex && idx >= model.grid.num_cells())
        throw ConfigError("model file: successor out of range");
      model.successor_table.push_back(CellId{static_cast<std::uint32_t>(idx)});
      prev = idx;
    }
    model.offsets[p + 1] = model.successor_table.size();
  }
  return model;
}

void save_model(const SymbolicModel& model, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  save_model(model, out);
  write_file_atomic(path, out.str());
}

SymbolicModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open model file " + path.string());
  return load_model(in);
}

void export_model_csv(const SymbolicModel& model, std::ostream& out) {
  out << "cell,input,successor\n";
  for (std::uint64_t c = 0; c < model.num_cells(); ++c)
    for (std::uint32_t u = 0; u < model.num_inputs(); ++u)
      for (CellId s : model.successors(CellId{static_cast<std::uint32_t>(c)}, u)) {
        out << c << ',' << u << ',';
        if (s.is_sink())
          out << "sink";
        else
          out << s.index;
        out << '\n';
      }
}

}  // namespace qsynth
