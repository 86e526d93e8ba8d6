#include "qsynth/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"
#include "qsynth/parallel.hpp"

namespace qsynth {

namespace {

constexpr double kGuaranteeSlack = 1e-6;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty())
      out.emplace_back(item);
    if (comma == std::string_view::npos)
      break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  std::string text(trim(v));
  try {
    std::size_t used = 0;
    const double d = std::stod(text, &used);
    if (used == text.size() && std::isfinite(d))
      return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + text + "'");
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    throw ConfigError("config: '" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "1" || v == "true" || v == "yes" || v == "on")
    return true;
  if (v == "0" || v == "false" || v == "no" || v == "off")
    return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true or false");
}

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i)
    out += (i ? "," : "") + items[i];
  return out;
}

Vec parse_vec(std::string_view key, std::string_view v) {
  Vec out;
  for (const auto& item : split_list(v))
    out.push_back(parse_double(key, item));
  return out;
}

/*
 * system file: a builtin base plus overrides of its grid and sampling time.
 * keys: base, eta, lower, upper, tau, hvac_x2_bound, hvac_x4_bound
 */
CaseStudy load_system_file(const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::string_view l = line;
    if (auto hash = l.find('#'); hash != std::string_view::npos)
      l = l.substr(0, hash);
    l = trim(l);
    if (l.empty())
      continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ": expected key=value, got '" + std::string(l) + "'");
    kv[std::string(trim(l.substr(0, eq)))] = std::string(trim(l.substr(eq + 1)));
  }
  if (!kv.count("base"))
    throw ConfigError(path.string() + ": missing 'base'");
  HvacOptions ho;
  if (kv.count("hvac_x2_bound"))
    ho.x2_bound = parse_double("hvac_x2_bound", kv["hvac_x2_bound"]);
  if (kv.count("hvac_x4_bound"))
    ho.x4_bound = parse_double("hvac_x4_bound", kv["hvac_x4_bound"]);
  CaseStudy cs = kv["base"] == "hvac" ? hvac(ho) : builtin(kv["base"]);
  ControlSystemSpec& s = cs.system;
  Box dom = s.grid.domain();
  Vec eta = s.grid.eta();
  for (const auto& [key, value] : kv) {
    if (key == "base" || key == "hvac_x2_bound" || key == "hvac_x4_bound")
      continue;
    else if (key == "eta")
      eta = parse_vec(key, value);
    else if (key == "lower")
      dom.lower = parse_vec(key, value);
    else if (key == "upper")
      dom.upper = parse_vec(key, value);
    else if (key == "tau")
      s.tau = parse_double(key, value);
    else
      throw ConfigError(path.string() + ": unknown key '" + key + "'");
  }
  if (eta.size() != s.state_dim() || dom.lower.size() != s.state_dim() || dom.upper.size() != s.state_dim())
    throw ConfigError(path.string() + ": eta, lower and upper need one entry per state coordinate");
  s.grid = Grid(Box(dom.lower, dom.upper), eta);
  s.name = path.stem().string();
  return cs;
}

CaseStudy make_case(const PipelineConfig& c) {
  if (c.system == "hvac")
    return hvac(HvacOptions{c.hvac_x2_bound, c.hvac_x4_bound});
  if (c.system == "cartpole" || c.system == "cartpole-desk")
    return builtin(c.system);
  if (std::filesystem::is_regular_file(c.system))
    return load_system_file(c.system);
  throw ConfigError("unknown system '" + c.system + "' (builtin: hvac, cartpole, cartpole-desk, or a system file)");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void PipelineConfig::set(std::string_view key_in, std::string_view value) {
  const std::string key(trim(key_in));
  value = trim(value);
  if (key == "system") {
    system = std::string(value);
  } else if (key == "hvac_x2_bound") {
    hvac_x2_bound = parse_double(key, value);
  } else if (key == "hvac_x4_bound") {
    hvac_x4_bound = parse_double(key, value);
  } else if (key == "costs" || key == "cost") {
    costs.clear();
    for (const auto& item : split_list(value))
      costs.push_back(parse_cost_kind(item));
    if (costs.empty())
      throw ConfigError("config: empty cost list");
  } else if (key == "lambdas" || key == "lambda") {
    lambdas.clear();
    for (const auto& item : split_list(value)) {
      const Rational l = Rational::parse(item);
      if (l < Rational(0) || l > Rational(1))
        throw ConfigError("config: lambda " + l.to_string() + " outside [0, 1]");
      lambdas.push_back(l);
    }
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    if (lambdas.empty())
      throw ConfigError("config: empty lambda list");
  } else if (key == "disturbances" || key == "disturbance") {
    disturbances = split_list(value);
  } else if (key == "steps") {
    steps = parse_uint(key, value);
  } else if (key == "window") {
    window = parse_uint(key, value);
    if (window == 0)
      throw ConfigError("config: window must be positive");
  } else if (key == "eps") {
    eps = parse_double(key, value);
  } else if (key == "substeps") {
    substeps = static_cast<int>(parse_uint(key, value));
    if (substeps < 1)
      throw ConfigError("config: substeps must be positive");
  } else if (key == "initial_states") {
    initial_states = parse_uint(key, value);
  } else if (key == "output") {
    output = std::string(value);
  } else if (key == "tag") {
    tag = std::string(value);
  } else if (key == "workers") {
    workers = static_cast<unsigned>(std::max<std::uint64_t>(1, parse_uint(key, value)));
  } else if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "tol") {
    tol = parse_double(key, value);
    if (!(tol > 0.0))
      throw ConfigError("config: tol must be positive");
  } else if (key == "lattice_step") {
    lattice_step = parse_double(key, value);
  } else if (key == "probe_steps") {
    probe_steps = parse_uint(key, value);
  } else if (key == "corpus") {
    corpus = parse_uint(key, value);
  } else if (key == "soundness_samples") {
    soundness_samples = parse_uint(key, value);
  } else if (key == "export_csv") {
    export_csv = parse_bool(key, value);
  } else if (key == "traces") {
    traces = parse_bool(key, value);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void PipelineConfig::apply(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("config: expected key=value, got '" + std::string(assignment) + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string PipelineConfig::to_text() const {
  std::vector<std::string> c, l;
  for (CostKind k : costs)
    c.push_back(to_string(k));
  for (const Rational& x : lambdas)
    l.push_back(x.to_string());
  std::ostringstream o;
  o.precision(17);
  o << "system=" << system << '\n'
    << "hvac_x2_bound=" << hvac_x2_bound << '\n'
    << "hvac_x4_bound=" << hvac_x4_bound << '\n'
    << "costs=" << join(c) << '\n'
    << "lambdas=" << join(l) << '\n'
    << "disturbances=" << join(disturbances) << '\n'
    << "steps=" << steps << '\n'
    << "window=" << window << '\n'
    << "eps=" << eps << '\n'
    << "substeps=" << substeps << '\n'
    << "initial_states=" << initial_states << '\n'
    << "output=" << output.string() << '\n'
    << "tag=" << tag << '\n'
    << "workers=" << workers << '\n'
    << "seed=" << seed << '\n'
    << "tol=" << tol << '\n'
    << "lattice_step=" << lattice_step << '\n'
    << "probe_steps=" << probe_steps << '\n'
    << "corpus=" << corpus << '\n'
    << "soundness_samples=" << soundness_samples << '\n'
    << "export_csv=" << (export_csv ? "true" : "false") << '\n'
    << "traces=" << (traces ? "true" : "false") << '\n';
  return o.str();
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    try {
      base.apply(line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string lambda_tag(const Rational& l) {
  if (l.den() == 1)
    return std::to_string(l.num());
  return std::to_string(l.num()) + "_" + std::to_string(l.den());
}

bool SweepResult::all_safe() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.safe; });
}

bool SweepResult::all_within_guarantee() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.within_guarantee; });
}

Pipeline::Pipeline(PipelineConfig config, std::ostream* log)
    : config_(std::move(config)), case_(make_case(config_)), log_(log) {
  std::filesystem::create_directories(config_.output);
}

Pipeline::~Pipeline() = default;

void Pipeline::note(const std::string& line) {
  if (log_)
    *log_ << line << std::endl;
}

std::size_t Pipeline::steps() const { return config_.steps ? config_.steps : case_.steps; }

std::vector<std::string> Pipeline::disturbance_names() const {
  if (!config_.disturbances.empty()) {
    for (const auto& d : config_.disturbances)
      case_.disturbance(d);
    return config_.disturbances;
  }
  std::vector<std::string> out;
  for (const auto& d : case_.disturbances)
    if (d.name != "none")
      out.push_back(d.name);
  if (out.empty())
    out.push_back("none");
  return out;
}

std::uint64_t Pipeline::model_key() const {
  const ControlSystemSpec& s = case_.system;
  Hasher h;
  h.str("model").u64(1).str(s.name);
  h.f64s(s.grid.domain().lower).f64s(s.grid.domain().upper).f64s(s.grid.eta());
  h.u64(s.inputs.size());
  for (const auto& u : s.inputs) {
    h.f64s(u);
    h.f64s(s.jacobian_bound_for(u).data);
  }
  h.f64(s.tau).f64s(s.w).f64s(s.jacobian_bound.data);
  h.u64(static_cast<std::uint64_t>(config_.substeps));
  return h.value();
}

std::uint64_t Pipeline::controller_key() {
  const ControlSystemSpec& s = case_.system;
  Hasher h;
  h.u64(model_key()).str("safety").u64(1);
  h.f64s(s.safe_set.state.lower).f64s(s.safe_set.state.upper);
  return h.value();
}

std::uint64_t Pipeline::weights_key(CostKind kind) {
  return Hasher().u64(controller_key()).str("weights").u64(cost_hash(cost_spec(kind))).value();
}

std::uint64_t Pipeline::solution_key(CostKind kind, const Rational& lambda) {
  Hasher h;
  h.u64(weights_key(kind)).str("solution").u64(1);
  h.u64(static_cast<std::uint64_t>(lambda.num())).u64(static_cast<std::uint64_t>(lambda.den()));
  if (lambda == Rational(1))
    h.str("mpg");
  else
    h.str("dpg").f64(config_.tol);
  return h.value();
}

std::filesystem::path Pipeline::model_path() {
  return config_.output / ("model-" + to_hex(model_key()) + ".qsmd");
}
std::filesystem::path Pipeline::controller_path() {
  return config_.output / ("controller-" + to_hex(controller_key()) + ".qsct");
}
std::filesystem::path Pipeline::topology_path() {
  return config_.output / ("arena-" + to_hex(controller_key()) + ".qsat");
}
std::filesystem::path Pipeline::weights_path(CostKind kind) {
  return config_.output / ("weights-" + to_string(kind) + "-" + to_hex(weights_key(kind)) + ".qsaw");
}
std::filesystem::path Pipeline::solution_path(CostKind kind, const Rational& lambda) {
  return config_.output /
         ("solution-" + to_string(kind) + "-" + lambda_tag(lambda) + "-" + to_hex(solution_key(kind, lambda)) + ".qsgs");
}
std::filesystem::path Pipeline::runs_path() const {
  return config_.output / ("runs-" + case_.system.name + (config_.tag.empty() ? "" : "-" + config_.tag) + ".csv");
}
std::filesystem::path Pipeline::table_path() const {
  return config_.output / ("table-" + case_.system.name + (config_.tag.empty() ? "" : "-" + config_.tag) + ".csv");
}

const SymbolicModel& Pipeline::model() {
  if (model_)
    return *model_;
  const auto path = model_path();
  if (std::filesystem::exists(path)) {
    model_ = std::make_unique<SymbolicModel>(load_model(path));
    note("[abstract] reused " + path.filename().string());
    return *model_;
  }
  const auto t0 = std::chrono::steady_clock::now();
  AbstractionOptions o;
  o.flow_substeps = config_.substeps;
  o.radius_substeps = config_.substeps;
  o.workers = config_.workers;
  model_ = std::make_unique<SymbolicModel>(build_symbolic_model(case_.system, o));
  save_model(*model_, path);
  if (config_.export_csv) {
    std::ofstream csv(config_.output / ("model-" + to_hex(model_key()) + ".csv"));
    export_model_csv(*model_, csv);
  }
  note("[abstract] built " + path.filename().string() + " in " + fmt(seconds_since(t0), 1) + "s");
  return *model_;
}

const SafetyResult& Pipeline::safety() {
  if (safety_)
    return *safety_;
  const auto path = controller_path();
  if (std::filesystem::exists(path)) {
    auto r = std::make_unique<SafetyResult>();
    r->controller = load_controller(path);
    r->realizable = !r->controller.empty();
    safety_ = std::move(r);
    note("[synthesize] reused " + path.filename().string());
    return *safety_;
  }
  const auto t0 = std::chrono::steady_clock::now();
  safety_ = std::make_unique<SafetyResult>(solve_safety(model(), make_safety_spec(case_.system)));
  save_controller(safety_->controller, path);
  if (config_.export_csv) {
    std::ofstream csv(config_.output / ("controller-" + to_hex(controller_key()) + ".csv"));
    export_controller_csv(safety_->controller, csv);
  }
  note("[synthesize] built " + path.filename().string() + " in " + fmt(seconds_since(t0), 1) + "s");
  return *safety_;
}

const Controller& Pipeline::controller() {
  const SafetyResult& s = safety();
  if (!s.realizable)
    throw Unrealizable(case_.system.name + ": the safety controller has an empty domain");
  return s.controller;
}

const Arena& Pipeline::topology() {
  if (topology_)
    return *topology_;
  const auto path = topology_path();
  if (std::filesystem::exists(path)) {
    topology_ = std::make_unique<Arena>(load_arena_topology(path));
    note("[arena] reused " + path.filename().string());
    return *topology_;
  }
  topology_ = std::make_unique<Arena>(build_arena_topology(model(), controller(), config_.workers));
  save_arena_topology(*topology_, path);
  note("[arena] built " + path.filename().string());
  return *topology_;
}

CostSpec Pipeline::cost_spec(CostKind kind) {
  if (auto it = costs_.find(kind); it != costs_.end())
    return it->second;
  CostSpec spec = case_.preset(kind);
  if (kind == CostKind::CC) {
    const NormalizerReport n = compute_normalizers(model(), controller(), spec);
    spec.normalizers = n.values;
    note("[arena] cc normalizers dr=" + fmt(n.values.dr) + " ec=" + fmt(n.values.ec) + " id=" + fmt(n.values.id));
  }
  costs_[kind] = spec;
  return spec;
}

const Arena& Pipeline::arena(CostKind kind) {
  topology();
  if (loaded_weights_ == kind)
    return *topology_;
  const CostSpec spec = cost_spec(kind);
  const auto path = weights_path(kind);
  loaded_weights_.reset();
  if (std::filesystem::exists(path)) {
    load_arena_weights(*topology_, cost_hash(spec), path);
    note("[arena] reused " + path.filename().string());
  } else {
    topology_->weights = arena_weights(*topology_, model(), spec, config_.workers);
    save_arena_weights(*topology_, cost_hash(spec), path);
    note("[arena] weights " + path.filename().string());
  }
  loaded_weights_ = kind;
  return *topology_;
}

GameSolution Pipeline::solution(CostKind kind, const Rational& lambda) {
  const auto path = solution_path(kind, lambda);
  const std::uint64_t topo = controller_key(), key = weights_key(kind);
  if (std::filesystem::exists(path))
    return load_solution(path, topo, key, lambda);
  const Arena& a = arena(kind);
  const auto t0 = std::chrono::steady_clock::now();
  GameSolution s;
  if (lambda < Rational(1)) {
    DpgOptions o;
    o.tol = config_.tol;
    o.workers = config_.workers;
    const DpgResult r = solve_dpg(a, lambda, o);
    s = GameSolution::from(r);
    note("[solve] " + to_string(kind) + " lambda=" + lambda.to_string() + ": " + std::to_string(r.residuals.size()) +
         " sweeps, " + fmt(seconds_since(t0), 1) + "s");
  } else {
    /* policy iteration starts from a coarse discounted solution */
    DpgOptions d;
    d.tol = 1e-3;
    d.workers = config_.workers;
    const DpgResult warm = solve_dpg(a, Rational(15, 16), d);
    MpgOptions o;
    o.workers = config_.workers;
    o.initial = &warm.strategy;
    const MpgResult r = solve_mpg(a, o);
    s = GameSolution::from(r);
    note("[solve] " + to_string(kind) + " mpg: " + std::to_string(r.iterations) + " evaluations" +
         (r.used_fallback ? " (energy fallback)" : "") + ", " + fmt(seconds_since(t0), 1) + "s");
  }
  save_solution(s, topo, key, path);
  if (config_.export_csv) {
    auto csv_path = path;
    csv_path.replace_extension(".csv");
    std::ofstream csv(csv_path);
    export_solution_csv(s, a, csv);
  }
  return s;
}

Implementation Pipeline::implementation(CostKind kind, const Rational& lambda) {
  const GameSolution s = solution(kind, lambda);
  return refine(topology(), s.strategy, controller());
}

const std::vector<Vec>& Pipeline::initial_states() {
  if (initial_)
    return *initial_;
  const Controller& k = controller();
  std::vector<CellId> dom;
  for (std::uint64_t c = 0; c < k.num_cells(); ++c)
    if (k.in_domain(CellId{static_cast<std::uint32_t>(c)}))
      dom.push_back(CellId{static_cast<std::uint32_t>(c)});
  std::mt19937_64 rng(config_.seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const Grid& g = case_.system.grid;
  std::vector<Vec> out;
  for (std::size_t i = 0; i < config_.initial_states; ++i) {
    const CellId c = dom[rng() % dom.size()];
    const Box b = g.cell_box(c);
    Vec x(g.dims());
    for (std::size_t d = 0; d < x.size(); ++d)
      x[d] = b.lower[d] + unit() * (b.upper[d] - b.lower[d]);
    if (!(g.quantize(x) == c))
      x = g.cell_center(c);
    out.push_back(std::move(x));
  }
  initial_ = std::move(out);
  return *initial_;
}

std::vector<std::uint32_t> Pipeline::start_nodes() {
  const Arena& a = topology();
  std::vector<std::uint32_t> out;
  for (const Vec& x : initial_states()) {
    const CellId c = case_.system.grid.quantize(x);
    const auto it = std::lower_bound(a.min_cell.begin(), a.min_cell.end(), c);
    require(it != a.min_cell.end() && *it == c, "start_nodes: initial state outside the controller domain");
    out.push_back(static_cast<std::uint32_t>(it - a.min_cell.begin()) + case_.u_init);
  }
  return out;
}

double Pipeline::nu_max(CostKind kind) {
  if (auto it = nu_max_.find(kind); it != nu_max_.end())
    return it->second;
  const GameSolution mpg = solution(kind, Rational(1));
  const Arena& a = topology();
  std::vector<std::uint8_t> seen(a.num_min(), 0);
  std::vector<std::uint32_t> stack = start_nodes();
  for (std::uint32_t v : stack)
    seen[v] = 1;
  std::vector<std::uint8_t> seen_max(a.num_max(), 0);
  double best = 0.0;
  while (!stack.empty()) {
    const std::uint32_t v = stack.back();
    stack.pop_back();
    best = std::max(best, mpg.values[v]);
    for (std::uint64_t e = a.min_offsets[v]; e < a.min_offsets[v + 1]; ++e) {
      const std::uint32_t m = a.min_targets[e];
      if (seen_max[m])
        continue;
      seen_max[m] = 1;
      for (std::uint64_t f = a.max_offsets[m]; f < a.max_offsets[m + 1]; ++f) {
        const std::uint32_t t = a.max_targets[f];
        if (!seen[t]) {
          seen[t] = 1;
          stack.push_back(t);
        }
      }
    }
  }
  nu_max_[kind] = best;
  return best;
}

double Pipeline::nu_max_all(CostKind kind) {
  const GameSolution mpg = solution(kind, Rational(1));
  return mpg.values.empty() ? 0.0 : *std::max_element(mpg.values.begin(), mpg.values.end());
}

SweepResult Pipeline::sweep() {
  SweepResult out;
  const auto names = disturbance_names();
  const auto& xs = initial_states();
  const auto starts = start_nodes();
  const std::size_t T = steps();
  for (CostKind kind : config_.costs) {
    const CostSpec spec = cost_spec(kind);
    const double bound = nu_max(kind);
    const GameSolution mpg = solution(kind, Rational(1));
    for (const Rational& lambda : config_.lambdas) {
      const auto t0 = std::chrono::steady_clock::now();
      const GameSolution sol = solution(kind, lambda);
      const Implementation impl = refine(topology(), sol.strategy, controller());
      const std::size_t first = out.runs.size();
      for (const auto& d : names)
        for (std::size_t i = 0; i < xs.size(); ++i) {
          RunRecord r;
          r.cost = kind;
          r.lambda = lambda;
          r.disturbance = d;
          r.run = i;
          r.x0 = xs[i];
          r.game_value = sol.values[starts[i]];
          r.nu_start = mpg.values[starts[i]];
          r.nu_max = bound;
          out.runs.push_back(std::move(r));
        }
      parallel_for(out.runs.size() - first, config_.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = first + begin; j < first + end; ++j) {
          RunRecord& r = out.runs[j];
          SimulationOptions so;
          so.steps = T;
          so.u_init = case_.u_init;
          so.lambda = lambda;
          so.substeps = config_.substeps;
          so.record_trajectory = config_.traces && r.run == 0;
          so.throw_on_violation = false;
          const SimulationReport rep = simulate(case_.system, impl, r.x0, case_.disturbance(r.disturbance), spec, so);
          r.steps = rep.steps;
          r.safe = rep.safe;
          r.violation_step = rep.violation_step;
          r.average = rep.average;
          r.discounted = rep.discounted;
          const std::size_t w = std::min(config_.window, rep.steps);
          r.limit_average = w > 0 ? window_average(rep, w) : 0.0;
          r.converged = rep.steps >= 2 * config_.window && limit_average_converged(rep, config_.window, config_.eps);
          r.within_guarantee = r.limit_average <= bound + kGuaranteeSlack;
          if (so.record_trajectory && rep.safe) {
            std::ostringstream csv;
            write_trace_csv(rep, case_.system, lambda, csv);
            write_file_atomic(config_.output / ("trace-" + case_.system.name + "-" + to_string(kind) + "-" +
                                                lambda_tag(lambda) + "-" + r.disturbance + ".csv"),
                              csv.str());
          }
        }
      });
      std::size_t unsafe = 0;
      for (std::size_t j = first; j < out.runs.size(); ++j)
        unsafe += !out.runs[j].safe;
      note("[simulate] " + to_string(kind) + " lambda=" + lambda.to_string() + ": " +
           std::to_string(out.runs.size() - first) + " runs, " + std::to_string(unsafe) + " unsafe, " +
           fmt(seconds_since(t0), 1) + "s");
    }
  }
  std::ostringstream runs, table;
  write_runs_csv(out, case_.system.name, runs);
  write_table_csv(out, config_.lambdas, case_.system.name, table);
  write_file_atomic(runs_path(), runs.str());
  write_file_atomic(table_path(), table.str());
  return out;
}

ProbeReport Pipeline::probe(CostKind kind) {
  const GameSolution mpg = solution(kind, Rational(1));
  const Implementation impl = refine(topology(), mpg.strategy, controller());
  const Vec& x0 = initial_states().front();
  return adversary_probe(topology(), mpg.strategy, case_.system, impl, x0, case_.u_init, config_.probe_steps,
                         config_.lattice_step, config_.substeps);
}

ModelSizes Pipeline::sizes() {
  ModelSizes s;
  const SymbolicModel& m = model();
  s.cells = m.num_cells();
  s.inputs = m.num_inputs();
  s.transitions = m.num_transitions();
  const SafetyResult& r = safety();
  s.domain = r.controller.domain_size();
  s.pairs = r.controller.num_pairs();
  if (r.realizable) {
    const Arena& a = topology();
    s.min_nodes = a.num_min();
    s.max_nodes = a.num_max();
    s.min_edges = a.num_min_edges();
    s.max_edges = a.num_max_edges();
  }
  return s;
}

void write_runs_csv(const SweepResult& sweep, const std::string& system, std::ostream& out) {
  out << "system,cost,lambda,disturbance,run,x0,steps,safe,violation_step,average,limit_average,converged,"
         "discounted,game_value,nu_start,nu_max,within_guarantee\n";
  for (const RunRecord& r : sweep.runs) {
    std::vector<std::string> x;
    for (double v : r.x0)
      x.push_back(fmt(v, 9));
    std::string xs;
    for (std::size_t i = 0; i < x.size(); ++i)
      xs += (i ? " " : "") + x[i];
    out << system << ',' << to_string(r.cost) << ',' << r.lambda.to_string() << ',' << r.disturbance << ',' << r.run
        << ',' << xs << ',' << r.steps << ',' << (r.safe ? 1 : 0) << ','
        << (r.violation_step ? std::to_string(*r.violation_step) : "") << ',' << fmt(r.average, 9) << ','
        << fmt(r.limit_average, 9) << ',' << (r.converged ? 1 : 0) << ',' << fmt(r.discounted, 9) << ','
        << fmt(r.game_value, 9) << ',' << fmt(r.nu_start, 9) << ',' << fmt(r.nu_max, 9) << ','
        << (r.within_guarantee ? 1 : 0) << '\n';
  }
}

namespace {

struct Row {
  CostKind cost;
  std::string disturbance;
  std::vector<double> worst;  // per lambda, max limit average over runs
  std::vector<bool> have;
  double nu_max = 0.0;
};

std::vector<Row> summarize(const SweepResult& sweep, const std::vector<Rational>& lambdas) {
  std::vector<Row> rows;
  for (const RunRecord& r : sweep.runs) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const Row& x) { return x.cost == r.cost && x.disturbance == r.disturbance; });
    if (it == rows.end()) {
      rows.push_back(Row{r.cost, r.disturbance, std::vector<double>(lambdas.size(), 0.0),
                         std::vector<bool>(lambdas.size(), false), r.nu_max});
      it = rows.end() - 1;
    }
    const auto k = static_cast<std::size_t>(std::find(lambdas.begin(), lambdas.end(), r.lambda) - lambdas.begin());
    if (k == lambdas.size())
      continue;
    if (!it->have[k] || r.limit_average > it->worst[k])
      it->worst[k] = r.limit_average;
    it->have[k] = true;
  }
  return rows;
}

/* lowest value of the row, compared at the printed precision */
std::vector<bool> best_of(const Row& row) {
  std::vector<bool> best(row.worst.size(), false);
  std::string low;
  for (std::size_t k = 0; k < row.worst.size(); ++k)
    if (row.have[k] && (low.empty() || std::stod(fmt(row.worst[k])) < std::stod(low)))
      low = fmt(row.worst[k]);
  for (std::size_t k = 0; k < row.worst.size(); ++k)
    best[k] = row.have[k] && fmt(row.worst[k]) == low;
  return best;
}

}  // namespace

void write_table_csv(const SweepResult& sweep, const std::vector<Rational>& lambdas, const std::string& system,
                     std::ostream& out) {
  out << "system,cost,disturbance";
  for (const Rational& l : lambdas)
    out << ",lambda=" << l.to_string();
  out << ",nu_max\n";
  for (const Row& row : summarize(sweep, lambdas)) {
    const auto best = best_of(row);
    out << system << ',' << to_string(row.cost) << ',' << row.disturbance;
    for (std::size_t k = 0; k < lambdas.size(); ++k)
      out << ',' << (row.have[k] ? fmt(row.worst[k]) + (best[k] ? "*" : "") : "");
    out << ',' << fmt(row.nu_max) << '\n';
  }
}

std::string format_table(const SweepResult& sweep, const std::vector<Rational>& lambdas) {
  std::ostringstream o;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-5s %-8s", "cost", "signal");
  o << buf;
  for (const Rational& l : lambdas) {
    std::snprintf(buf, sizeof buf, " %9s", l.to_string().c_str());
    o << buf;
  }
  std::snprintf(buf, sizeof buf, " %9s\n", "nu_max");
  o << buf;
  for (const Row& row : summarize(sweep, lambdas)) {
    const auto best = best_of(row);
    std::snprintf(buf, sizeof buf, "%-5s %-8s", to_string(row.cost).c_str(), row.disturbance.c_str());
    o << buf;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      const std::string cell = row.have[k] ? fmt(row.worst[k], 3) + (best[k] ? "*" : " ") : "-";
      std::snprintf(buf, sizeof buf, " %9s", cell.c_str());
      o << buf;
    }
    std::snprintf(buf, sizeof buf, " %9s\n", fmt(row.nu_max, 3).c_str());
    o << buf;
  }
  return o.str();
}

}  // namespace qsynth
