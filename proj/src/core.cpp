#include "qsynth/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsynth/errors.hpp"

namespace qsynth {

Box::Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  require(lower.size() == upper.size(), "Box: bound dimensions differ");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]))
      throw ContractViolation("Box: lower bound exceeds upper bound");
}

bool Box::contains(std::span<const double> x) const {
  require(x.size() == dims(), "Box::contains: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(lower[i] <= x[i] && x[i] <= upper[i]))
      return false;
  return true;
}

bool Box::contains(const Box& inner) const {
  require(inner.dims() == dims(), "Box::contains: dimension mismatch");
  for (std::size_t i = 0; i < dims(); ++i)
    if (!(lower[i] <= inner.lower[i] && inner.upper[i] <= upper[i]))
      return false;
  return true;
}

Grid::Grid(Box domain, Vec eta) : domain_(std::move(domain)), eta_(std::move(eta)) {
  require(domain_.dims() == eta_.size(), "Grid: eta has the wrong dimension");
  require(!eta_.empty(), "Grid: zero-dimensional grid");
  const std::size_t n = eta_.size();
  cells_per_dim_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eta_[i] > 0.0) || !std::isfinite(eta_[i]))
      throw ConfigError("Grid: eta must be positive");
    if (!std::isfinite(domain_.lower[i]) || !std::isfinite(domain_.upper[i]))
      throw ConfigError("Grid: domain must be bounded");
    double ratio = (domain_.upper[i] - domain_.lower[i]) / eta_[i];
    /* absorb rounding of exact multiples such as 2/0.2 */
    double cells = std::ceil(ratio * (1.0 - 1e-12));
    if (cells < 1.0)
      cells = 1.0;
    if (cells >= static_cast<double>(CellId::kSinkIndex))
      throw ConfigError("Grid: too many cells");
    cells_per_dim_[i] = static_cast<std::uint32_t>(cells);
  }
  strides_.assign(n, 1);
  for (std::size_t i = n - 1; i-- > 0;)
    strides_[i] = strides_[i + 1] * cells_per_dim_[i + 1];
  num_cells_ = strides_[0] * cells_per_dim_[0];
  if (num_cells_ >= CellId::kSinkIndex)
    throw ConfigError("Grid: too many cells");
}

double Grid::axis_lower(std::size_t dim, std::uint32_t k) const {
  return domain_.lower[dim] + static_cast<double>(k) * eta_[dim];
}

double Grid::axis_upper(std::size_t dim, std::uint32_t k) const {
  if (k + 1 >= cells_per_dim_[dim])
    return domain_.upper[dim];
  return domain_.lower[dim] + static_cast<double>(k + 1) * eta_[dim];
}

std::uint32_t Grid::axis_index(std::size_t dim, double v) const {
  const std::uint32_t last = cells_per_dim_[dim] - 1;
  double q = std::floor((v - domain_.lower[dim]) / eta_[dim]);
  std::uint32_t k = q <= 0.0 ? 0u : (q >= last ? last : static_cast<std::uint32_t>(q));
  /* make the result agree bit-for-bit with axis_lower/axis_upper */
  while (k > 0 && v < axis_lower(dim, k))
    --k;
  while (k < last && v >= axis_upper(dim, k))
    ++k;
  return k;
}

CellId Grid::quantize(std::span<const double> x) const {
  require(x.size() == dims(), "quantize: dimension mismatch");
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(domain_.lower[i] <= x[i] && x[i] <= domain_.upper[i]))
      return CellId::sink();
    index += strides_[i] * axis_index(i, x[i]);
  }
  return CellId{static_cast<std::uint32_t>(index)};
}

std::vector<std::uint32_t> Grid::coords(CellId c) const {
  require(!c.is_sink() && c.index < num_cells_, "Grid: invalid cell");
  std::vector<std::uint32_t> out(dims());
  std::uint64_t rest = c.index;
  for (std::size_t i = 0; i < dims(); ++i) {
    out[i] = static_cast<std::uint32_t>(rest / strides_[i]);
    rest %= strides_[i];
  }
  return out;
}

CellId Grid::from_coords(std::span<const std::uint32_t> k) const {
  require(k.size() == dims(), "Grid: coordinate dimension mismatch");
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    require(k[i] < cells_per_dim_[i], "Grid: coordinate out of range");
    index += strides_[i] * k[i];
  }
  return CellId{static_cast<std::uint32_t>(index)};
}

Box Grid::cell_box(CellId c) const {
  auto k = coords(c);
  Vec lo(dims()), hi(dims());
  for (std::size_t i = 0; i < dims(); ++i) {
    lo[i] = axis_lower(i, k[i]);
    hi[i] = axis_upper(i, k[i]);
  }
  return Box(std::move(lo), std::move(hi));
}

Vec Grid::cell_center(CellId c) const {
  Box b = cell_box(c);
  Vec center(dims());
  for (std::size_t i = 0; i < dims(); ++i)
    center[i] = 0.5 * (b.lower[i] + b.upper[i]);
  return center;
}

Matrix::Matrix(std::size_t r, std::size_t c, Vec d) : rows(r), cols(c), data(std::move(d)) {
  if (data.empty())
    data.assign(r * c, 0.0);
  require(data.size() == r * c, "Matrix: data size mismatch");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    m(i, i) = 1.0;
  return m;
}

Vec Matrix::apply(std::span<const double> x) const {
  require(x.size() == cols, "Matrix::apply: dimension mismatch");
  Vec y(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      y[i] += (*this)(i, j) * x[j];
  return y;
}

bool SafeSet::contains(std::span<const double> u, std::span<const double> x) const {
  if (input_ok && !input_ok(u))
    return false;
  return state.contains(x);
}

bool SafeSet::contains_cell(std::span<const double> u, const Box& cell) const {
  if (input_ok && !input_ok(u))
    return false;
  return state.contains(cell);
}

Matrix ControlSystemSpec::jacobian_bound_for(std::span<const double> u) const {
  if (!input_jacobian_bound)
    return jacobian_bound;
  Matrix L = input_jacobian_bound(u);
  if (L.rows != jacobian_bound.rows || L.cols != jacobian_bound.cols)
    throw ConfigError(name + ": per-input jacobian bound has the wrong shape");
  for (std::size_t k = 0; k < L.data.size(); ++k)
    if (L.data[k] > jacobian_bound.data[k])
      throw ConfigError(name + ": per-input jacobian bound exceeds the global bound");
  return L;
}

void ControlSystemSpec::validate() const {
  const std::size_t n = grid.dims();
  if (n == 0)
    throw ConfigError(name + ": empty grid");
  if (!f)
    throw ConfigError(name + ": missing vector field");
  if (jacobian_bound.rows != n || jacobian_bound.cols != n)
    throw ConfigError(name + ": jacobian bound must be n x n");
  if (w.size() != n)
    throw ConfigError(name + ": disturbance bound has the wrong dimension");
  for (double wi : w)
    if (!(wi >= 0.0))
      throw ConfigError(name + ": disturbance bound must be non-negative");
  if (inputs.empty())
    throw ConfigError(name + ": empty input list");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != inputs.front().size())
      throw ConfigError(name + ": inputs have different dimensions");
    for (std::size_t j = 0; j < i; ++j)
      if (inputs[i] == inputs[j])
        throw ConfigError(name + ": duplicate input");
  }
  if (!(tau > 0.0))
    throw ConfigError(name + ": sampling time must be positive");
  if (safe_set.state.dims() != n)
    throw ConfigError(name + ": safe set has the wrong dimension");
  if (disturbance_map.rows != n || disturbance_map.cols != disturbance_range.size())
    throw ConfigError(name + ": disturbance map does not match the state dimension");
}

std::string to_string(CostKind kind) {
  switch (kind) {
  case CostKind::IS: return "is";
  case CostKind::DR: return "dr";
  case CostKind::EC: return "ec";
  case CostKind::ID: return "id";
  case CostKind::CC: return "cc";
  }
  return "?";
}

CostKind parse_cost_kind(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "is") return CostKind::IS;
  if (t == "dr") return CostKind::DR;
  if (t == "ec") return CostKind::EC;
  if (t == "id") return CostKind::ID;
  if (t == "cc") return CostKind::CC;
  throw ConfigError("unknown cost function '" + t + "'");
}

void CostSpec::validate() const {
  if (kind == CostKind::DR || kind == CostKind::CC)
    if (reference.size() != projection.size())
      throw ConfigError("cost: reference and projection sizes differ");
  if (kind == CostKind::CC) {
    if (!normalizers)
      throw ConfigError("cost: CC requires normalizers");
    if (!(normalizers->dr > 0.0 && normalizers->ec > 0.0 && normalizers->id > 0.0))
      throw ConfigError("cost: CC normalizers must be positive");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

namespace {

double deviation(const CostSpec& spec, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < spec.projection.size(); ++i) {
    require(spec.projection[i] < x.size(), "cost: projection index out of range");
    double d = x[spec.projection[i]] - spec.reference[i];
    s += d * d;
  }
  return s;
}

/* farthest point of the cell from the reference, axis by axis */
double cell_deviation(const CostSpec& spec, const Box& cell) {
  double s = 0.0;
  for (std::size_t i = 0; i < spec.projection.size(); ++i) {
    require(spec.projection[i] < cell.dims(), "cost: projection index out of range");
    std::size_t k = spec.projection[i];
    double d = std::max(std::abs(cell.lower[k] - spec.reference[i]),
                        std::abs(cell.upper[k] - spec.reference[i]));
    s += d * d;
  }
  return s;
}

double combine(const CostSpec& spec, double dr, std::span<const double> u,
               std::span<const double> u2) {
  switch (spec.kind) {
  case CostKind::IS: return u.size() == u2.size() && std::equal(u.begin(), u.end(), u2.begin()) ? 0.0 : 1.0;
  case CostKind::DR: return dr;
  case CostKind::EC: return squared_distance(u, spec.u0);
  case CostKind::ID: return squared_distance(u, u2);
  case CostKind::CC: {
    const Normalizers& m = *spec.normalizers;
    return (dr / m.dr + squared_distance(u, spec.u0) / m.ec + squared_distance(u, u2) / m.id) / 3.0;
  }
  }
  return 0.0;
}

}  // namespace

double cost(const CostSpec& spec, std::span<const double> u, std::span<const double> x,
            std::span<const double> u2) {
  spec.validate();
  bool needs_state = spec.kind == CostKind::DR || spec.kind == CostKind::CC;
  return combine(spec, needs_state ? deviation(spec, x) : 0.0, u, u2);
}

double cell_cost(const CostSpec& spec, std::span<const double> u, const Box& cell,
                 std::span<const double> u2) {
  spec.validate();
  bool needs_state = spec.kind == CostKind::DR || spec.kind == CostKind::CC;
  return combine(spec, needs_state ? cell_deviation(spec, cell) : 0.0, u, u2);
}

Controller::Controller(std::uint64_t num_cells, std::uint32_t num_inputs)
    : num_cells_(num_cells), num_inputs_(num_inputs), enabled_(num_cells * num_inputs, 0) {}

bool Controller::allows(CellId c, std::uint32_t u) const {
  if (c.is_sink())
    return false;
  require(c.index < num_cells_ && u < num_inputs_, "Controller: index out of range");
  return enabled_[static_cast<std::uint64_t>(c.index) * num_inputs_ + u] != 0;
}

void Controller::set(CellId c, std::uint32_t u, bool enabled) {
  require(!c.is_sink() && c.index < num_cells_ && u < num_inputs_, "Controller: index out of range");
  enabled_[static_cast<std::uint64_t>(c.index) * num_inputs_ + u] = enabled ? 1 : 0;
}

bool Controller::in_domain(CellId c) const {
  if (c.is_sink() || c.index >= num_cells_)
    return false;
  auto first = enabled_.begin() + static_cast<std::ptrdiff_t>(c.index) * num_inputs_;
  return std::any_of(first, first + num_inputs_, [](std::uint8_t b) { return b != 0; });
}

std::vector<std::uint32_t> Controller::inputs(CellId c) const {
  std::vector<std::uint32_t> out;
  if (c.is_sink())
    return out;
  for (std::uint32_t u = 0; u < num_inputs_; ++u)
    if (allows(c, u))
      out.push_back(u);
  return out;
}

std::uint64_t Controller::domain_size() const {
  std::uint64_t n = 0;
  for (std::uint64_t c = 0; c < num_cells_; ++c)
    if (in_domain(CellId{static_cast<std::uint32_t>(c)}))
      ++n;
  return n;
}

std::uint64_t Controller::num_pairs() const {
  return static_cast<std::uint64_t>(std::count(enabled_.begin(), enabled_.end(), std::uint8_t{1}));
}

}  // namespace qsynth
