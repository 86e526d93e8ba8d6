#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qsynth {

using Vec = std::vector<double>;

/* closed hyper-interval [lower, upper] */
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lower, Vec upper);

  std::size_t dims() const noexcept { return lower.size(); }
  bool contains(std::span<const double> x) const;
  bool contains(const Box& inner) const;
};

/* row-major cell index, or the reserved SINK value for "outside the domain" */
struct CellId {
  static constexpr std::uint32_t kSinkIndex = 0xffffffffu;

  std::uint32_t index = 0;

  static constexpr CellId sink() noexcept { return CellId{kSinkIndex}; }
  constexpr bool is_sink() const noexcept { return index == kSinkIndex; }

  friend constexpr auto operator<=>(const CellId&, const CellId&) = default;
};

/*
 * class: Grid
 *
 * uniform tiling of the domain box by cells of edge lengths eta; every cell is
 * half-open except along the upper face of the domain, where the last cell per
 * axis is closed and clipped to the domain
 */
class Grid {
public:
  Grid() = default;
  Grid(Box domain, Vec eta);

  std::size_t dims() const noexcept { return eta_.size(); }
  const Box& domain() const noexcept { return domain_; }
  const Vec& eta() const noexcept { return eta_; }
  const std::vector<std::uint32_t>& cells_per_dim() const noexcept { return cells_per_dim_; }
  std::uint64_t num_cells() const noexcept { return num_cells_; }

  CellId quantize(std::span<const double> x) const;
  Vec cell_center(CellId c) const;
  Box cell_box(CellId c) const;

  std::vector<std::uint32_t> coords(CellId c) const;
  CellId from_coords(std::span<const std::uint32_t> coords) const;
  std::uint64_t stride(std::size_t dim) const noexcept { return strides_[dim]; }

  /* per-axis cell index of v, which must lie inside the domain along dim */
  std::uint32_t axis_index(std::size_t dim, double v) const;
  double axis_lower(std::size_t dim, std::uint32_t k) const;
  double axis_upper(std::size_t dim, std::uint32_t k) const;

private:
  Box domain_;
  Vec eta_;
  std::vector<std::uint32_t> cells_per_dim_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t num_cells_ = 0;
};

/* dense row-major matrix; the systems handled here are small */
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Vec data = {});
  static Matrix identity(std::size_t n);

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  Vec apply(std::span<const double> x) const;
};

using VectorField =
    std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> dxdt)>;

/* state part of Z as a (possibly unbounded) box, plus an optional input filter */
struct SafeSet {
  Box state;
  std::function<bool(std::span<const double> u)> input_ok;

  bool contains(std::span<const double> u, std::span<const double> x) const;
  bool contains_cell(std::span<const double> u, const Box& cell) const;
};

struct ControlSystemSpec {
  std::string name;
  VectorField f;
  /* L: off-diagonal entries bound |df_i/dx_j|, diagonal entries bound df_i/dx_i from above */
  Matrix jacobian_bound;
  /* optional tighter bound for a fixed input; must not exceed jacobian_bound entry-wise */
  std::function<Matrix(std::span<const double> u)> input_jacobian_bound;
  Vec w;
  std::vector<Vec> inputs;
  double tau = 0.0;
  Grid grid;
  SafeSet safe_set;
  /* the disturbance enters as omega = disturbance_map * d with |d_i| <= disturbance_range_i,
   * and is saturated to [-w, w] */
  Matrix disturbance_map;
  Vec disturbance_range;

  std::size_t state_dim() const noexcept { return grid.dims(); }
  std::size_t input_dim() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }
  /* L used for the growth bound under input u */
  Matrix jacobian_bound_for(std::span<const double> u) const;
  void validate() const;
};

enum class CostKind { IS, DR, EC, ID, CC };

std::string to_string(CostKind kind);
CostKind parse_cost_kind(std::string_view text);

struct Normalizers {
  double dr = 1.0;
  double ec = 1.0;
  double id = 1.0;
};

struct CostSpec {
  CostKind kind = CostKind::IS;
  Vec reference;                       // DR
  std::vector<std::size_t> projection; // DR
  Vec u0;                              // EC
  std::optional<Normalizers> normalizers;  // CC

  void validate() const;
};

double cost(const CostSpec& spec, std::span<const double> u, std::span<const double> x,
            std::span<const double> u2);

/* max of cost over all states of the cell */
double cell_cost(const CostSpec& spec, std::span<const double> u, const Box& cell,
                 std::span<const double> u2);

double squared_distance(std::span<const double> a, std::span<const double> b);

/*
 * class: Controller
 *
 * set-valued map from cells to input indices, stored as a dense cells x inputs
 * table; cells outside the domain simply have no enabled input
 */
class Controller {
public:
  Controller() = default;
  Controller(std::uint64_t num_cells, std::uint32_t num_inputs);

  std::uint64_t num_cells() const noexcept { return num_cells_; }
  std::uint32_t num_inputs() const noexcept { return num_inputs_; }

  bool allows(CellId c, std::uint32_t u) const;
  void set(CellId c, std::uint32_t u, bool enabled);
  bool in_domain(CellId c) const;
  std::vector<std::uint32_t> inputs(CellId c) const;
  std::uint64_t domain_size() const;
  std::uint64_t num_pairs() const;
  bool empty() const { return domain_size() == 0; }

  friend bool operator==(const Controller&, const Controller&) = default;

private:
  std::uint64_t num_cells_ = 0;
  std::uint32_t num_inputs_ = 0;
  std::vector<std::uint8_t> enabled_;
};

}  // namespace qsynth
