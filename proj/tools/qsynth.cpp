#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"
#include "qsynth/parallel.hpp"
#include "qsynth/pipeline.hpp"
#include "qsynth/verify.hpp"

using namespace qsynth;

namespace {

enum Exit { kOk = 0, kError = 1, kUnrealizable = 2, kUnsafe = 3, kVerifyFailed = 4 };

struct Args {
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
};

PipelineConfig make_config(const Args& a) {
  PipelineConfig c = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (std::getenv("QS_WORKERS"))
    c.workers = default_workers();
  for (const auto& o : a.overrides)
    c.apply(o);
  return c;
}

std::string invocation(const Args& a, const char* command) {
  std::string s = std::string("qsynth ") + command;
  if (!a.config.empty())
    s += " --config " + a.config;
  for (const auto& o : a.overrides)
    s += " " + o;
  return s;
}

std::string num(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int cmd_abstract(Pipeline& p) {
  const ModelSizes s = p.sizes();
  std::printf("%-14s %12s %6s %14s\n", "system", "|X|", "|U|", "|F|");
  std::printf("%-14s %12llu %6llu %14llu\n", p.case_study().system.name.c_str(),
              static_cast<unsigned long long>(s.cells), static_cast<unsigned long long>(s.inputs),
              static_cast<unsigned long long>(s.transitions));
  std::printf("model: %s\n", p.model_path().string().c_str());
  return kOk;
}

int cmd_synthesize(Pipeline& p) {
  const SafetyResult& r = p.safety();
  std::printf("domain: %llu of %llu cells, %llu state-input pairs\n",
              static_cast<unsigned long long>(r.controller.domain_size()),
              static_cast<unsigned long long>(r.controller.num_cells()),
              static_cast<unsigned long long>(r.controller.num_pairs()));
  std::printf("controller: %s\n", p.controller_path().string().c_str());
  if (!r.realizable) {
    std::printf("unrealizable\n");
    return kUnrealizable;
  }
  std::printf("realizable\n");
  return kOk;
}

int cmd_solve(Pipeline& p) {
  p.controller();
  const Arena& a = p.topology();
  std::printf("arena: %zu min nodes, %zu max nodes, %llu + %llu edges\n", a.num_min(), a.num_max(),
              static_cast<unsigned long long>(a.num_min_edges()), static_cast<unsigned long long>(a.num_max_edges()));
  for (CostKind k : p.config().costs) {
    for (const Rational& l : p.config().lambdas) {
      p.solution(k, l);
      std::printf("%-3s lambda=%-7s %s\n", to_string(k).c_str(), l.to_string().c_str(),
                  p.solution_path(k, l).filename().string().c_str());
    }
    std::printf("%-3s nu_max=%s\n", to_string(k).c_str(), num(p.nu_max(k), 3).c_str());
  }
  return kOk;
}

/* artifacts simulate relies on; empty when everything is in place */
std::vector<std::filesystem::path> missing_for_simulate(Pipeline& p) {
  std::vector<std::filesystem::path> out;
  for (const auto& path : {p.model_path(), p.controller_path()})
    if (!std::filesystem::exists(path))
      out.push_back(path);
  if (!out.empty())
    return out;
  p.controller();
  for (CostKind k : p.config().costs) {
    auto want = p.config().lambdas;
    want.push_back(Rational(1));
    for (const Rational& l : want)
      if (!std::filesystem::exists(p.solution_path(k, l)))
        out.push_back(p.solution_path(k, l));
  }
  return out;
}

int cmd_simulate(Pipeline& p, const Args& args) {
  const auto missing = missing_for_simulate(p);
  if (!missing.empty()) {
    std::cerr << "error: no strategy file for this configuration:\n";
    for (const auto& m : missing)
      std::cerr << "  " << m.string() << '\n';
    std::cerr << "run '" << invocation(args, "solve") << "' first\n";
    return kError;
  }
  const SweepResult r = p.sweep();
  std::cout << format_table(r, p.config().lambdas);
  std::printf("runs: %s\ntable: %s\n", p.runs_path().string().c_str(), p.table_path().string().c_str());
  if (!r.all_safe()) {
    for (const RunRecord& x : r.runs)
      if (!x.safe)
        std::fprintf(stderr, "safety violation: cost %s lambda %s disturbance %s run %zu at step %zu\n",
                     to_string(x.cost).c_str(), x.lambda.to_string().c_str(), x.disturbance.c_str(), x.run,
                     x.violation_step.value_or(0));
    return kUnsafe;
  }
  return kOk;
}

void print_check(const CheckResult& c) {
  std::printf("%-22s %s  %s (%.1fs)\n", c.name.c_str(), c.passed ? "ok  " : "FAIL", c.detail.c_str(), c.seconds);
}

int cmd_verify(Pipeline& p) {
  CorpusOptions co;
  co.seed = p.config().seed;
  co.count = p.config().corpus;
  const auto corpus = random_corpus(co);
  const std::vector<Rational> lambdas{Rational(0), Rational(1, 2), Rational(15, 16)};
  const std::vector<Rational> limit{Rational(15, 16), Rational(63, 64), Rational(255, 256)};
  const std::vector<Arena> head(corpus.begin(), corpus.begin() + std::min<std::size_t>(50, corpus.size()));
  std::vector<CheckResult> checks{check_mpg_oracle(corpus), check_dpg_oracle(corpus, lambdas, 1e-6),
                                  check_dpg_contraction(corpus, lambdas), check_limit(head, limit, 0.05)};
  for (const auto& c : checks)
    print_check(c);
  SoundnessOptions so;
  so.seed = p.config().seed;
  so.samples = p.config().soundness_samples;
  so.substeps = p.config().substeps;
  const CheckResult s = check_abstraction_soundness(p.case_study().system, p.model(), so);
  print_check(s);
  checks.push_back(s);
  for (const auto& c : checks)
    if (!c.passed)
      return kVerifyFailed;
  return kOk;
}

int cmd_report(Pipeline& p) {
  const ModelSizes s = p.sizes();
  std::printf("system %s: |X|=%llu |U|=%llu |F|=%llu dom=%llu\n", p.case_study().system.name.c_str(),
              static_cast<unsigned long long>(s.cells), static_cast<unsigned long long>(s.inputs),
              static_cast<unsigned long long>(s.transitions), static_cast<unsigned long long>(s.domain));
  if (std::filesystem::exists(p.table_path())) {
    std::printf("%s", read_file(p.table_path()).c_str());
  } else {
    std::printf("no sweep table yet (%s)\n", p.table_path().string().c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsynth: quantitative controller synthesis on symbolic models"};
  app.require_subcommand(1);
  Args args;
  const char* names[] = {"abstract", "synthesize", "solve", "simulate", "verify", "report"};
  const char* help[] = {"build the symbolic model",
                        "compute the maximal safety controller",
                        "build the arena and solve every (cost, lambda) game",
                        "run the closed-loop sweep and write the summary CSVs",
                        "oracle corpus, limit check and abstraction soundness sampling",
                        "print model sizes and the last sweep table"};
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 6; ++i) {
    CLI::App* s = app.add_subcommand(names[i], help[i]);
    s->add_option("-c,--config", args.config, "key=value config file")->check(CLI::ExistingFile);
    s->add_option("overrides", args.overrides, "key=value overrides applied after the config file");
    s->add_flag("-q,--quiet", args.quiet, "no progress lines");
    subs.push_back(s);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    Pipeline p(make_config(args), args.quiet ? nullptr : &std::cerr);
    if (subs[0]->parsed())
      return cmd_abstract(p);
    if (subs[1]->parsed())
      return cmd_synthesize(p);
    if (subs[2]->parsed())
      return cmd_solve(p);
    if (subs[3]->parsed())
      return cmd_simulate(p, args);
    if (subs[4]->parsed())
      return cmd_verify(p);
    return cmd_report(p);
  } catch (const Unrealizable& e) {
    std::cerr << "unrealizable: " << e.what() << '\n';
    return kUnrealizable;
  } catch (const SafetyViolation& e) {
    std::cerr << "safety violation at step " << e.step() << ": " << e.what() << '\n';
    return kUnsafe;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
