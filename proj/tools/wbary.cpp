#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "wbary/barycenter.hpp"
#include "wbary/generators.hpp"
#include "wbary/lp_solver.hpp"
#include "wbary/measures.hpp"
#include "wbary/models.hpp"
#include "wbary/support.hpp"

using namespace wbary;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kParse = 2, kBlowup = 3, kSolverFailure = 4, kUnsupported = 5 };

// Raised for anything that should stop the run with a specific exit code.
struct Failure {
  int code;
  std::string message;
};

constexpr double kAgreementTolerance = 1e-8;

struct RunConfig {
  std::vector<std::string> inputs;
  std::string format = "auto";
  bool normalize = false;
  std::string formulation = "general";
  std::string regime = "auto";
  double tol = kDefaultDedupTolerance;
  std::uint64_t cap = kDefaultCombinationCap;
  std::uint64_t max_iters = 50'000'000;
  std::string pivot = "bland";
  std::string out;
  bool json = false;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

Problem load_inputs(const RunConfig& cfg) {
  if (cfg.inputs.empty()) throw Failure{kUsage, "no input files"};
  InputFormat fmt = InputFormat::Json;
  if (cfg.format == "grid-csv" ||
      (cfg.format == "auto" && std::filesystem::path(cfg.inputs.front()).extension() == ".csv"))
    fmt = InputFormat::GridCsv;
  std::vector<std::unique_ptr<std::ifstream>> files;
  std::vector<std::istream*> streams;
  for (const auto& path : cfg.inputs) {
    files.push_back(std::make_unique<std::ifstream>(path));
    if (!*files.back()) throw Failure{kParse, fmt::format("cannot open {}", path)};
    streams.push_back(files.back().get());
  }
  if (fmt == InputFormat::Json && streams.size() != 1) throw Failure{kUsage, "JSON input takes exactly one file"};
  LoadOptions opts;
  opts.normalize = cfg.normalize;
  return load_problem(streams, fmt, opts);
}

std::vector<Formulation> requested(const std::string& name) {
  if (name == "all") return {Formulation::Original, Formulation::Reduced, Formulation::General, Formulation::Hybrid};
  try {
    return {parse_formulation(name)};
  } catch (const std::invalid_argument& e) {
    throw Failure{kUsage, e.what()};
  }
}

bool needs_atlas(Formulation f) {
  return f == Formulation::Original || f == Formulation::Reduced || f == Formulation::Hybrid;
}

SupportAtlas make_atlas(const Problem& p, const RunConfig& cfg) {
  if (cfg.regime == "exact") return build_atlas_exact(p, cfg.tol, cfg.cap);
  std::optional<GridSpec> g = p.grid;
  if (!g) g = detect_grid(p);
  if (cfg.regime == "grid") {
    if (!g) throw Failure{kUnsupported, "grid regime needs grid metadata or a detectable lattice"};
    return build_atlas_grid(p, *g);
  }
  if (g && p.has_uniform_weights()) return build_atlas_grid(p, *g);
  std::cerr << (g ? "warning: weights are not uniform, using the exact regime\n"
                  : "warning: no common lattice found, using the exact regime\n");
  return build_atlas_exact(p, cfg.tol, cfg.cap);
}

struct Built {
  Formulation formulation;
  LpModel model;
  double build_seconds = 0.0;
};

Built build_one(Formulation f, const Problem& p, const SupportAtlas* atlas, const RunConfig& cfg) {
  auto t = Clock::now();
  Built b{f, {}, 0.0};
  if (f == Formulation::Hybrid)
    b.model = build_hybrid(*atlas, hybrid_split(*atlas, p), p);
  else
    b.model = build_model(f, p, atlas, cfg.cap);
  b.build_seconds = seconds_since(t);
  return b;
}

SolveOptions solver_options(const RunConfig& cfg) {
  SolveOptions o;
  o.max_iters = cfg.max_iters;
  if (cfg.pivot == "bland")
    o.pivot_rule = PivotRule::Bland;
  else if (cfg.pivot == "dantzig")
    o.pivot_rule = PivotRule::Dantzig;
  else
    throw Failure{kUsage, fmt::format("unknown pivot rule '{}'", cfg.pivot)};
  return o;
}

std::string combination_count_text(const Problem& p) {
  BigCount total = 1;
  for (const auto& m : p.measures) total *= m.size();
  return total.str();
}

std::string with_suffix(const std::string& path, std::string_view name, std::string_view ext) {
  std::filesystem::path out(path);
  if (out.extension() == ext) out.replace_extension();
  return fmt::format("{}.{}{}", out.string(), name, ext);
}

struct Outcome {
  Built built;
  LpSolution solution;
  std::optional<BarycenterSolution> barycenter;
  double solve_seconds = 0.0;
};

Outcome run_one(Formulation f, const Problem& p, const SupportAtlas* atlas, const RunConfig& cfg) {
  Outcome o{build_one(f, p, atlas, cfg), {}, std::nullopt, 0.0};
  auto t = Clock::now();
  o.solution = solve(o.built.model, solver_options(cfg));
  o.solve_seconds = seconds_since(t);
  if (o.solution.status == SolveStatus::Optimal) o.barycenter = extract_barycenter(o.solution, o.built.model, p, atlas, cfg.tol);
  return o;
}

int cmd_solve(const RunConfig& cfg) {
  Problem p = load_inputs(cfg);
  auto fs = requested(cfg.formulation);
  std::optional<SupportAtlas> atlas;
  for (auto f : fs)
    if (needs_atlas(f)) {
      atlas = make_atlas(p, cfg);
      break;
    }

  int code = kOk;
  std::vector<double> objectives;
  for (auto f : fs) {
    Outcome o = run_one(f, p, atlas ? &*atlas : nullptr, cfg);
    const auto& m = o.built.model;
    if (!cfg.json) {
      fmt::print("formulation   {}\n", to_string(f));
      fmt::print("measures      {} (d={})\n", p.n(), p.dim());
      fmt::print("|S*|          {}\n", combination_count_text(p));
      if (atlas) fmt::print("|S|           {} ({} regime)\n", atlas->size(), atlas->regime == Regime::Grid ? "grid" : "exact");
      fmt::print("model         {} columns, {} rows, {} nonzeros\n", m.num_vars(), m.num_constraints(), m.nnz());
      fmt::print("status        {}\n", to_string(o.solution.status));
    }
    std::cerr << fmt::format("{}: build {:.3f}s, solve {:.3f}s, {} iterations\n", to_string(f), o.built.build_seconds,
                             o.solve_seconds, o.solution.iterations);
    if (o.solution.status != SolveStatus::Optimal) {
      if (!o.solution.message.empty()) std::cerr << o.solution.message << '\n';
      code = kSolverFailure;
    } else {
      const auto& v = o.barycenter->verification;
      objectives.push_back(o.solution.objective);
      if (!cfg.json) {
        fmt::print("objective     {:.12g}\n", o.solution.objective);
        for (const auto& line : v.lines()) fmt::print("{}\n", line);
      }
      if (!v.passed()) code = kSolverFailure;
    }
    if (cfg.json) write_solution_json(std::cout, o.solution, o.barycenter ? &*o.barycenter : nullptr);
    if (!cfg.out.empty()) {
      std::string path = fs.size() == 1 ? cfg.out : with_suffix(cfg.out, to_string(f), ".json");
      std::ofstream file(path);
      if (!file) throw Failure{kUsage, fmt::format("cannot write {}", path)};
      write_solution_json(file, o.solution, o.barycenter ? &*o.barycenter : nullptr);
    }
    if (!cfg.json) fmt::print("\n");
  }
  if (objectives.size() > 1) {
    auto [lo, hi] = std::minmax_element(objectives.begin(), objectives.end());
    bool agree = *hi - *lo <= kAgreementTolerance;
    if (!cfg.json) fmt::print("objectives agree within {:g}: {}\n", kAgreementTolerance, agree ? "yes" : "no");
    if (!agree) code = kSolverFailure;
  }
  return code;
}

int cmd_compare(const RunConfig& cfg) {
  Problem p = load_inputs(cfg);
  auto fs = requested(cfg.formulation);
  if (cfg.formulation == "all" && p.n() == 2) fs.push_back(Formulation::Transportation);
  std::optional<SupportAtlas> atlas;
  for (auto f : fs)
    if (needs_atlas(f)) {
      atlas = make_atlas(p, cfg);
      break;
    }

  fmt::print("{:<15} {:>10} {:>12} {:>12} {:>20} {:>8}\n", "formulation", "rows", "columns", "nonzeros", "objective",
             "support");
  int code = kOk;
  std::vector<double> objectives;
  std::string timings;
  std::size_t bound = p.total_support() - p.n() + 1;
  bool sparse = true;
  for (auto f : fs) {
    Outcome o = run_one(f, p, atlas ? &*atlas : nullptr, cfg);
    const auto& m = o.built.model;
    std::string objective(to_string(o.solution.status));
    std::string support = "-";
    if (o.barycenter) {
      objective = fmt::format("{:.12g}", o.solution.objective);
      support = fmt::format("{}", o.barycenter->support.size());
      objectives.push_back(o.solution.objective);
      sparse = sparse && o.barycenter->verification.sparse;
      if (!o.barycenter->verification.passed()) code = kSolverFailure;
    } else {
      code = kSolverFailure;
    }
    fmt::print("{:<15} {:>10} {:>12} {:>12} {:>20} {:>8}\n", to_string(f), m.num_constraints(), m.num_vars(), m.nnz(),
               objective, support);
    timings += fmt::format("{:<15} build {:>9.3f}s  solve {:>9.3f}s\n", to_string(f), o.built.build_seconds,
                           o.solve_seconds);
  }
  std::cerr << timings;
  if (!objectives.empty()) {
    auto [lo, hi] = std::minmax_element(objectives.begin(), objectives.end());
    bool agree = *hi - *lo <= kAgreementTolerance;
    fmt::print("objectives agree within {:g}: {}\n", kAgreementTolerance, agree ? "yes" : "no");
    if (!agree) code = kSolverFailure;
  }
  fmt::print("support within sparsity bound {}: {}\n", bound, sparse ? "yes" : "no");
  return code;
}

int cmd_export(const RunConfig& cfg) {
  Problem p = load_inputs(cfg);
  auto fs = requested(cfg.formulation);
  std::optional<SupportAtlas> atlas;
  for (auto f : fs)
    if (needs_atlas(f)) {
      atlas = make_atlas(p, cfg);
      break;
    }
  for (auto f : fs) {
    Built b = build_one(f, p, atlas ? &*atlas : nullptr, cfg);
    if (cfg.out.empty()) {
      export_mps(b.model, std::cout);
      continue;
    }
    std::string path = fs.size() == 1 ? cfg.out : with_suffix(cfg.out, to_string(f), ".mps");
    std::ofstream file(path);
    if (!file) throw Failure{kUsage, fmt::format("cannot write {}", path)};
    export_mps(b.model, file);
    fmt::print("{}: {} columns, {} rows -> {}\n", to_string(f), b.model.num_vars(), b.model.num_constraints(), path);
  }
  return kOk;
}

struct SizesConfig {
  std::string regime = "general";
  std::uint64_t n = 0;
  std::uint64_t p = 0;
  std::uint64_t K = 0;
  std::uint64_t d = 1;
  std::string formulation = "all";
  std::vector<std::string> compare;
};

int cmd_sizes(const SizesConfig& cfg) {
  SizeRegime regime;
  std::uint64_t size;
  if (cfg.regime == "general" || cfg.regime == "general-position") {
    regime = SizeRegime::GeneralPosition;
    size = cfg.p;
    if (size == 0) throw Failure{kUsage, "general-position sizes need -p"};
  } else if (cfg.regime == "grid" || cfg.regime == "full-grid") {
    regime = SizeRegime::FullGrid;
    size = cfg.K;
    if (size == 0) throw Failure{kUsage, "grid sizes need -K"};
  } else {
    throw Failure{kUsage, fmt::format("unknown regime '{}'", cfg.regime)};
  }
  if (cfg.n == 0) throw Failure{kUsage, "sizes need -n"};

  auto predict = [&](Formulation f) { return predict_sizes(regime, f, cfg.n, size, cfg.d); };

  if (!cfg.compare.empty()) {
    if (cfg.compare.size() != 2) throw Failure{kUsage, "--compare takes two formulations"};
    auto from = predict(requested(cfg.compare[0]).front());
    auto to = predict(requested(cfg.compare[1]).front());
    fmt::print("{} -> {}: {:.2f}% fewer variables\n", cfg.compare[0], cfg.compare[1], 100.0 * variable_reduction(from, to));
    return kOk;
  }

  std::vector<Formulation> fs;
  if (cfg.formulation == "all") {
    fs = regime == SizeRegime::FullGrid
             ? std::vector<Formulation>{Formulation::Original, Formulation::General}
             : std::vector<Formulation>{Formulation::Original, Formulation::Reduced, Formulation::General,
                                        Formulation::Hybrid};
    if (regime == SizeRegime::GeneralPosition && cfg.n == 2) fs.push_back(Formulation::Transportation);
  } else {
    fs = requested(cfg.formulation);
  }
  std::map<Formulation, SizePrediction> got;
  for (auto f : fs) got[f] = predict(f);
  fmt::print("{:<15} {:>22} {:>22}\n", "formulation", "variables", "constraints");
  for (auto f : fs) fmt::print("{:<15} {:>22} {:>22}\n", to_string(f), got[f].variables, got[f].constraints);
  auto reduction = [&](Formulation a, Formulation b) {
    if (got.count(a) && got.count(b))
      fmt::print("{} -> {}: {:.2f}% fewer variables\n", to_string(a), to_string(b),
                 100.0 * variable_reduction(got[a], got[b]));
  };
  reduction(Formulation::Original, Formulation::Reduced);
  reduction(Formulation::Original, Formulation::General);
  reduction(Formulation::Reduced, Formulation::General);
  return kOk;
}

struct RenderConfig {
  std::string solution;
  std::string out = "barycenter";
  long bins = 256;
};

// Bins the support onto its own lattice when it has one, otherwise onto a bins x bins raster.
int cmd_render(const RenderConfig& cfg) {
  std::ifstream in(cfg.solution);
  if (!in) throw Failure{kParse, fmt::format("cannot open {}", cfg.solution)};
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Failure{kParse, fmt::format("malformed solution: {}", e.what())};
  }
  DiscreteMeasure support;
  try {
    for (const auto& s : doc.at("support")) {
      support.points.push_back(s.at("point").get<Point>());
      support.masses.push_back(s.at("mass").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Failure{kParse, fmt::format("malformed solution: {}", e.what())};
  }
  if (support.points.empty()) throw Failure{kParse, "solution has no support"};
  for (const auto& x : support.points)
    if (x.size() != 2) throw Failure{kUnsupported, fmt::format("render needs d=2, got d={}", x.size())};

  Problem wrapper;
  wrapper.measures = {support};
  std::optional<GridSpec> g = detect_grid(wrapper);
  if (!g || g->side > 4096) {
    Point lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double span = 0.0;
    for (const auto& x : support.points)
      for (int l = 0; l < 2; ++l) lo[l] = std::min(lo[l], x[l]);
    for (const auto& x : support.points)
      for (int l = 0; l < 2; ++l) span = std::max(span, x[l] - lo[l]);
    g = GridSpec{2, cfg.bins, lo, span > 0.0 ? span / static_cast<double>(cfg.bins - 1) : 1.0};
  }
  const long side = g->side;
  std::vector<double> raster(static_cast<std::size_t>(side * side), 0.0);
  for (std::size_t s = 0; s < support.size(); ++s) {
    long a[2];
    for (int l = 0; l < 2; ++l)
      a[l] = std::clamp(std::lround((support.points[s][l] - g->origin[l]) / g->step), 0L, side - 1);
    // Row 0 of the image is the top, so the second axis is flipped.
    raster[static_cast<std::size_t>((side - 1 - a[1]) * side + a[0])] += support.masses[s];
  }

  std::ofstream csv(cfg.out + ".csv"), pgm(cfg.out + ".pgm");
  if (!csv || !pgm) throw Failure{kUsage, fmt::format("cannot write {}.csv/.pgm", cfg.out)};
  csv << "x,y,mass\n";
  double peak = 0.0;
  std::size_t nonzero = 0;
  for (long r = 0; r < side; ++r)
    for (long c = 0; c < side; ++c) {
      double v = raster[static_cast<std::size_t>(r * side + c)];
      long cell[] = {c + 1, side - r};
      Point x = g->point_at(cell);
      fmt::print(csv, "{},{},{}\n", x[0], x[1], v);
      peak = std::max(peak, v);
      nonzero += v > 0.0;
    }
  fmt::print(pgm, "P2\n{} {}\n255\n", side, side);
  for (long r = 0; r < side; ++r) {
    for (long c = 0; c < side; ++c) {
      double v = raster[static_cast<std::size_t>(r * side + c)];
      long level = v > 0.0 ? std::max(1L, std::lround(255.0 * v / peak)) : 0L;
      fmt::print(pgm, "{}{}", c ? " " : "", level);
    }
    pgm << '\n';
  }
  fmt::print("{}x{} raster, {} nonzero cells -> {}.csv, {}.pgm\n", side, side, nonzero, cfg.out, cfg.out);
  return kOk;
}

struct GenConfig {
  std::string kind;
  std::size_t n = 2;
  std::size_t p = 3;
  std::size_t K = 4;
  std::size_t d = 2;
  double density = 1.0;
  std::size_t extra = 3;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen(const GenConfig& cfg) {
  Problem p;
  if (cfg.kind == "general")
    p = generate_general(cfg.n, cfg.p, cfg.d, cfg.seed);
  else if (cfg.kind == "grid")
    p = generate_grid(cfg.n, cfg.K, cfg.d, cfg.density, cfg.seed);
  else
    p = generate_mixed(cfg.n, cfg.K, cfg.extra, cfg.seed);
  if (cfg.out.empty()) {
    write_problem_json(std::cout, p);
    return kOk;
  }
  std::ofstream file(cfg.out);
  if (!file) throw Failure{kUsage, fmt::format("cannot write {}", cfg.out)};
  write_problem_json(file, p);
  return kOk;
}

void add_run_options(CLI::App* cmd, RunConfig& cfg, bool solving) {
  cmd->add_option("inputs", cfg.inputs, "problem JSON, or one grid-csv file per measure")->required();
  cmd->add_option("--format", cfg.format, "input format")->check(CLI::IsMember({"auto", "json", "grid-csv"}));
  cmd->add_flag("--normalize", cfg.normalize, "rescale masses of every measure to sum 1");
  cmd->add_option("--formulation", cfg.formulation,
                  "original, reduced, general, hybrid, transportation or all");
  cmd->add_option("--regime", cfg.regime, "support construction")->check(CLI::IsMember({"auto", "exact", "grid"}));
  cmd->add_option("--tol", cfg.tol, "relative tolerance for identifying weighted means");
  cmd->add_option("--cap", cfg.cap, "largest |S*| enumerated");
  cmd->add_option("--out", cfg.out, "output path");
  if (solving) {
    cmd->add_option("--max-iters", cfg.max_iters, "simplex iteration limit");
    cmd->add_option("--pivot", cfg.pivot, "pivot rule")->check(CLI::IsMember({"bland", "dantzig"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete Wasserstein barycenters by linear programming"};
  app.require_subcommand(1);

  RunConfig solve_cfg, compare_cfg, export_cfg;
  auto* solve_cmd = app.add_subcommand("solve", "solve one or all formulations and verify the barycenter");
  add_run_options(solve_cmd, solve_cfg, true);
  solve_cmd->add_flag("--json", solve_cfg.json, "print the solution JSON instead of the summary");

  auto* compare_cmd = app.add_subcommand("compare", "build and solve several formulations side by side");
  compare_cfg.formulation = "all";
  add_run_options(compare_cmd, compare_cfg, true);

  auto* export_cmd = app.add_subcommand("export", "write models as fixed-format MPS");
  add_run_options(export_cmd, export_cfg, false);

  SizesConfig sizes_cfg;
  auto* sizes_cmd = app.add_subcommand("sizes", "closed-form model sizes");
  sizes_cmd->add_option("--regime", sizes_cfg.regime, "general or grid");
  sizes_cmd->add_option("-n", sizes_cfg.n, "number of measures");
  sizes_cmd->add_option("-p", sizes_cfg.p, "support points per measure");
  sizes_cmd->add_option("-K", sizes_cfg.K, "grid side");
  sizes_cmd->add_option("-d", sizes_cfg.d, "grid dimension");
  sizes_cmd->add_option("--formulation", sizes_cfg.formulation, "formulation or all");
  sizes_cmd->add_option("--compare", sizes_cfg.compare, "two formulations: from to")->expected(2);

  RenderConfig render_cfg;
  auto* render_cmd = app.add_subcommand("render", "bin a two-dimensional barycenter into CSV and PGM");
  render_cmd->add_option("solution", render_cfg.solution, "solution JSON")->required();
  render_cmd->add_option("--out", render_cfg.out, "output prefix");
  render_cmd->add_option("--bins", render_cfg.bins, "raster side when the support has no lattice")
      ->check(CLI::Range(2L, 4096L));

  GenConfig gen_cfg;
  auto* gen_cmd = app.add_subcommand("gen", "generate a problem instance");
  gen_cmd->add_option("kind", gen_cfg.kind, "general, grid or mixed")
      ->required()
      ->check(CLI::IsMember({"general", "grid", "mixed"}));
  gen_cmd->add_option("-n", gen_cfg.n, "number of measures")->check(CLI::Range(2, 64));
  gen_cmd->add_option("-p", gen_cfg.p, "points per measure (general)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("-K", gen_cfg.K, "grid side (grid, mixed)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("-d", gen_cfg.d, "dimension (general, grid)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--density", gen_cfg.density, "share of grid cells kept (grid)")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--extra", gen_cfg.extra, "off-grid points per measure (mixed)");
  gen_cmd->add_option("--seed", gen_cfg.seed, "random seed");
  gen_cmd->add_option("--out", gen_cfg.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve_cfg);
    if (*compare_cmd) return cmd_compare(compare_cfg);
    if (*export_cmd) return cmd_export(export_cfg);
    if (*sizes_cmd) return cmd_sizes(sizes_cfg);
    if (*render_cmd) return cmd_render(render_cfg);
    if (*gen_cmd) return cmd_gen(gen_cfg);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const CombinationBlowup& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBlowup;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnsupported;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  } catch (const std::overflow_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBlowup;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
