// Copyright 2026 The ffu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ffu: calibrate, account, and run correlated Gaussian noise for linear
// query workloads.  Subcommands: optimize, curve, release, compare, oracle,
// compose.  Exit codes: 0 success, 1 usage/config error, 2 optimizer did not
// converge (partial output written).

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffu/ffu.hpp"

namespace fs = std::filesystem;

namespace {

const std::vector<double> kCurveEpsilons = {0.1, 0.25, 0.5, 1.0, 2.0, 3.0};

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ffu::ParseError("cannot write: " + path.string());
  f << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ffu::ParseError("cannot open: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ffu::ParseError(path + ": " + e.what());
  }
  return j;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// A workload argument is either a generator spec (.json) or an explicit
// query matrix (any other extension, repo CSV format).
ffu::Workload load_workload(const std::string& path) {
  if (has_suffix(path, ".json")) {
    return ffu::workload_from_spec(read_json(path));
  }
  ffu::Workload w;
  w.rows = ffu::read_matrix_csv(path);
  for (ffu::Index i = 0; i < w.m(); ++i) {
    w.labels.push_back("q" + std::to_string(i));
  }
  w.provenance = {{"kind", "explicit"}, {"source", path}};
  ffu::validate(w);
  return w;
}

// --basis identity | prefix | <basis-matrix.csv>
ffu::Decomposition make_basis(const ffu::Workload& w, const std::string& basis) {
  if (basis == "identity") return ffu::decompose(w, ffu::BasisKind::kIdentity);
  if (basis == "prefix") return ffu::decompose(w, ffu::BasisKind::kPrefix);
  return ffu::decompose(w, ffu::read_matrix_csv(basis));
}

struct TargetArgs {
  std::string csv;
  std::optional<double> uniform;
  std::string random;  // "lo:hi"
};

// Splits "a:b" / "a:b:n" on colons into doubles.
std::vector<double> parse_colon_list(const std::string& s, size_t expect,
                                     const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ':')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw ffu::ParseError(what + ": bad number '" + piece + "' in '" + s +
                            "'");
    }
  }
  if (out.size() != expect) {
    throw ffu::ParseError(what + ": expected " + std::to_string(expect) +
                          " colon-separated values, got '" + s + "'");
  }
  return out;
}

ffu::VarianceTargets make_targets(const TargetArgs& args, ffu::Index m,
                                  const std::optional<std::uint64_t>& seed) {
  if (!args.csv.empty()) {
    ffu::VarianceTargets t{ffu::read_vector_csv(args.csv)};
    if (t.c.size() != m) {
      throw ffu::DimensionMismatch("targets file has " +
                                   std::to_string(t.c.size()) +
                                   " entries for " + std::to_string(m) +
                                   " queries");
    }
    ffu::validate(t);
    return t;
  }
  if (args.uniform) return ffu::targets_uniform(m, *args.uniform);
  if (!args.random.empty()) {
    if (!seed) {
      throw ffu::ParseError("--targets-random requires --seed");
    }
    const auto range = parse_colon_list(args.random, 2, "--targets-random");
    return ffu::targets_random(m, range[0], range[1], *seed);
  }
  throw ffu::ParseError(
      "need one of --targets / --target-value / --targets-random");
}

void add_target_options(CLI::App* cmd, TargetArgs& args) {
  auto* group = cmd->add_option_group("targets", "per-query variance targets");
  group->add_option("--targets", args.csv,
                    "one-column CSV of per-query variance targets");
  group->add_option("--target-value", args.uniform,
                    "uniform variance target for every query");
  group->add_option("--targets-random", args.random,
                    "random targets, uniform on lo:hi (needs --seed)");
  group->require_option(1);
}

ffu::OptimizerConfig load_config(const std::string& path) {
  ffu::OptimizerConfig cfg;
  if (!path.empty()) cfg = read_json(path).get<ffu::OptimizerConfig>();
  return cfg;
}

// Shared output writer for optimize/compose: the covariance, the
// decomposition, the targets (so runs can be chained into compose), and the
// privacy report with any extra run metadata.
void write_solution_dir(const fs::path& out, const ffu::Workload& w,
                        const ffu::Decomposition& dec,
                        const ffu::Covariance& cov,
                        const ffu::VarianceTargets& targets,
                        nlohmann::json extra) {
  fs::create_directories(out);
  ffu::write_matrix_csv((out / "sigma.csv").string(), cov.sigma());
  ffu::write_matrix_csv((out / "b.csv").string(), dec.b);
  ffu::write_matrix_csv((out / "l.csv").string(), dec.l);
  ffu::write_vector_csv((out / "targets.csv").string(), targets.c);
  nlohmann::json report =
      ffu::to_json(ffu::make_report(w, dec, cov, targets, kCurveEpsilons));
  report.update(extra);
  report["timestamp"] = now_utc();
  write_text(out / "report.json", report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

struct OptimizeArgs {
  std::string workload;
  std::string basis = "identity";
  std::string config;
  std::string out;
  TargetArgs targets;
  std::optional<std::uint64_t> seed;
};

int run_optimize(const OptimizeArgs& o) {
  const ffu::Workload w = load_workload(o.workload);
  const ffu::VarianceTargets targets = make_targets(o.targets, w.m(), o.seed);
  const ffu::Decomposition dec = make_basis(w, o.basis);
  const ffu::OptimizerConfig cfg = load_config(o.config);
  const ffu::SolveResult res = ffu::solve(dec, targets, cfg);
  nlohmann::json extra = {{"gamma", res.gamma},
                          {"iterations", res.iterations},
                          {"converged", res.converged},
                          {"objective_trace",
                           ffu::trace_to_json(res.objective_trace)}};
  write_solution_dir(o.out, w, dec, res.sigma, targets, std::move(extra));
  const double cost2 = ffu::squared_privacy_cost(
      ffu::privacy_profile(dec, res.sigma));
  std::cout << "cost " << ffu::format_double(std::sqrt(cost2))
            << "  squared cost " << ffu::format_double(cost2) << "  ("
            << res.iterations << " iterations, "
            << (res.converged ? "converged" : "NOT converged") << ") -> "
            << o.out << "\n";
  return res.converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

struct CurveArgs {
  std::optional<double> cost;
  std::string sigma;
  std::string basis;  // strategy matrix whose columns are per-user effects
  std::string eps;    // "a:b:n"
  std::optional<double> delta;
  std::string out;
};

int run_curve(const CurveArgs& o) {
  double cost = 0.0;
  if (o.cost) {
    cost = *o.cost;
  } else {
    if (o.sigma.empty() || o.basis.empty()) {
      throw ffu::ParseError("need --cost, or --sigma together with --basis");
    }
    cost = ffu::privacy_cost(ffu::read_matrix_csv(o.basis),
                             ffu::Covariance(ffu::read_matrix_csv(o.sigma)));
  }
  if (o.delta) {
    std::cout << ffu::format_double(ffu::epsilon_for_delta(cost, *o.delta))
              << "\n";
    return 0;
  }
  const auto spec = parse_colon_list(o.eps, 3, "--eps");
  const int n = static_cast<int>(spec[2]);
  if (n < 1 || spec[2] != n) throw ffu::ParseError("--eps: n must be >= 1");
  std::vector<double> epsilons;
  for (int i = 0; i < n; ++i) {
    epsilons.push_back(
        n == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * i / (n - 1));
  }
  std::string csv;
  for (const auto& pt : ffu::privacy_curve(cost, epsilons)) {
    csv += ffu::format_double(pt.epsilon) + "," + ffu::format_double(pt.delta) +
           "\n";
  }
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_text(o.out, csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// release
// ---------------------------------------------------------------------------

struct ReleaseArgs {
  std::string sigma;
  std::string workload;
  std::string basis = "identity";
  std::string data;
  std::uint64_t seed = 0;
  std::string out;
};

int run_release(const ReleaseArgs& o) {
  const ffu::Workload w = load_workload(o.workload);
  const ffu::Decomposition dec = make_basis(w, o.basis);
  const ffu::Covariance cov{ffu::read_matrix_csv(o.sigma)};
  const ffu::DatasetVector x = ffu::ingest_histogram(o.data, w.d());
  const ffu::Release rel = ffu::release(dec, cov, x, o.seed);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "answers.csv", ffu::release_to_csv(rel, w.labels));
  nlohmann::json j = ffu::to_json(rel);
  j["timestamp"] = now_utc();
  write_text(fs::path(o.out) / "release.json", j.dump(2) + "\n");
  std::cout << w.m() << " answers at cost " << ffu::format_double(rel.cost)
            << " -> " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareArgs {
  std::string workload;
  std::string basis = "identity";
  std::string config;
  std::string methods = "smii,ip,gm,hm,ssq-uniform,ssq-invvar,ssq-invsd";
  std::string out;
  TargetArgs targets;
  std::optional<std::uint64_t> seed;
};

std::vector<std::string> parse_methods(const std::string& csv) {
  static const std::vector<std::pair<std::string, std::string>> kTokens = {
      {"smii", "SM-II"},          {"ip", "IP"},
      {"gm", "GM"},               {"hm", "HM"},
      {"ssq-uniform", "SSQ-uniform"}, {"ssq-invvar", "SSQ-invvar"},
      {"ssq-invsd", "SSQ-invsd"}};
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    bool found = false;
    for (const auto& [name, canon] : kTokens) {
      if (token == name) {
        out.push_back(canon);
        found = true;
        break;
      }
    }
    if (!found) {
      std::string valid;
      for (const auto& [name, canon] : kTokens) {
        valid += (valid.empty() ? "" : ", ") + name;
      }
      throw ffu::ParseError("unknown method '" + token + "' (valid: " + valid +
                            ")");
    }
  }
  if (out.empty()) throw ffu::ParseError("--methods: empty list");
  return out;
}

int run_compare(const CompareArgs& o) {
  const ffu::Workload w = load_workload(o.workload);
  const ffu::VarianceTargets targets = make_targets(o.targets, w.m(), o.seed);
  const ffu::Decomposition dec = make_basis(w, o.basis);
  const ffu::OptimizerConfig cfg = load_config(o.config);
  const ffu::CompareResult res =
      ffu::compare(w, targets, parse_methods(o.methods), dec, cfg);
  std::cout << ffu::compare_to_csv(res);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    nlohmann::json j = ffu::to_json(res);
    j["timestamp"] = now_utc();
    write_text(fs::path(o.out) / "compare.json", j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleArgs {
  double gamma = 1.0;
  double beta = 1.0;
  double k = 1.0;
  double w = 1.0;
  ffu::Index d = 5;
  std::vector<ffu::Index> d_list;
};

// ---------------------------------------------------------------------------
// compose
// ---------------------------------------------------------------------------

struct ComposeArgs {
  std::string first;
  std::string second;
  std::string out;
};

struct SolvedDir {
  ffu::Decomposition dec;
  ffu::Matrix sigma;
  ffu::Vector targets;
};

SolvedDir load_solution_dir(const std::string& dir) {
  const fs::path p(dir);
  SolvedDir out;
  out.dec.kind = ffu::BasisKind::kExplicit;
  out.dec.b = ffu::read_matrix_csv((p / "b.csv").string());
  out.dec.l = ffu::read_matrix_csv((p / "l.csv").string());
  out.sigma = ffu::read_matrix_csv((p / "sigma.csv").string());
  out.targets = ffu::read_vector_csv((p / "targets.csv").string());
  return out;
}

int run_compose(const ComposeArgs& o) {
  const SolvedDir a = load_solution_dir(o.first);
  const SolvedDir b = load_solution_dir(o.second);
  const auto [dec, cov] = ffu::kron_compose(a.dec, ffu::Covariance(a.sigma),
                                            b.dec, ffu::Covariance(b.sigma));
  const ffu::VarianceTargets targets{ffu::kron_targets(a.targets, b.targets)};
  ffu::Workload w;
  w.rows = dec.l * dec.b;
  for (ffu::Index i = 0; i < w.m(); ++i) {
    w.labels.push_back("q" + std::to_string(i));
  }
  w.provenance = {{"kind", "compose"},
                  {"params", {{"first", o.first}, {"second", o.second}}}};
  write_solution_dir(o.out, w, dec, cov, targets, nlohmann::json::object());
  std::cout << "composed " << dec.k() << "x" << dec.d() << " basis, "
            << w.m() << " queries -> " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("FFU_THREADS")) {
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));
  }
  CLI::App app{
      "fitness-for-use noise calibration for linear query workloads"};
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto* optimize = app.add_subcommand(
      "optimize", "calibrate a covariance to per-query variance targets");
  optimize->add_option("--workload", opt.workload,
                       "query matrix CSV or generator spec JSON")
      ->required();
  add_target_options(optimize, opt.targets);
  optimize->add_option("--basis", opt.basis,
                       "identity | prefix | basis matrix CSV");
  optimize->add_option("--config", opt.config, "optimizer config JSON");
  optimize->add_option("--seed", opt.seed, "seed for stochastic target specs");
  optimize->add_option("--out", opt.out, "output directory")->required();

  CurveArgs curve;
  auto* curve_cmd =
      app.add_subcommand("curve", "(epsilon, delta) accounting for a cost");
  curve_cmd->add_option("--cost", curve.cost, "privacy cost Delta");
  curve_cmd->add_option("--sigma", curve.sigma, "covariance CSV");
  curve_cmd->add_option("--basis", curve.basis,
                        "strategy matrix CSV (with --sigma)");
  curve_cmd->add_option("--eps", curve.eps, "epsilon grid a:b:n");
  curve_cmd->add_option("--delta", curve.delta,
                        "solve for the epsilon giving this delta");
  curve_cmd->add_option("--out", curve.out, "write curve CSV here");

  ReleaseArgs rel;
  auto* release_cmd =
      app.add_subcommand("release", "run the mechanism on a histogram");
  release_cmd->add_option("--sigma", rel.sigma, "covariance CSV")->required();
  release_cmd->add_option("--workload", rel.workload,
                          "query matrix CSV or generator spec JSON")
      ->required();
  release_cmd->add_option("--basis", rel.basis,
                          "identity | prefix | basis matrix CSV");
  release_cmd->add_option("--data", rel.data, "histogram CSV")->required();
  release_cmd->add_option("--seed", rel.seed, "noise seed")->required();
  release_cmd->add_option("--out", rel.out, "output directory")->required();

  CompareArgs cmp;
  auto* compare_cmd = app.add_subcommand(
      "compare", "baseline mechanisms at matched privacy cost");
  compare_cmd->add_option("--workload", cmp.workload,
                          "query matrix CSV or generator spec JSON")
      ->required();
  add_target_options(compare_cmd, cmp.targets);
  compare_cmd->add_option("--basis", cmp.basis,
                          "identity | prefix | basis matrix CSV");
  compare_cmd->add_option("--config", cmp.config, "optimizer config JSON");
  compare_cmd->add_option("--methods", cmp.methods,
                          "comma list: smii,ip,gm,hm,ssq-uniform,ssq-invvar,"
                          "ssq-invsd");
  compare_cmd->add_option("--seed", cmp.seed,
                          "seed for stochastic target specs");
  compare_cmd->add_option("--out", cmp.out, "directory for compare.json");

  OracleArgs ora;
  auto* oracle_cmd =
      app.add_subcommand("oracle", "closed-form optimal solutions");
  oracle_cmd->require_subcommand(1);
  auto* twod_fit = oracle_cmd->add_subcommand("twod-fitness");
  twod_fit->add_option("--gamma", ora.gamma, "variance target");
  auto* twod_ssq = oracle_cmd->add_subcommand("twod-sum-squared");
  twod_ssq->add_option("--beta", ora.beta, "privacy cost budget");
  auto* id_fit = oracle_cmd->add_subcommand("idsum-fitness");
  id_fit->add_option("--d", ora.d, "domain size (>= 5)");
  id_fit->add_option("--gamma", ora.gamma, "identity-query target");
  id_fit->add_option("--k", ora.k, "sum-query target multiplier");
  auto* id_ssq = oracle_cmd->add_subcommand("idsum-sum-squared");
  id_ssq->add_option("--d", ora.d, "domain size (>= 5)");
  id_ssq->add_option("--beta", ora.beta, "privacy cost budget");
  id_ssq->add_option("--w", ora.w, "sum-query down-weight");
  auto* ratio = oracle_cmd->add_subcommand("ratio-curve");
  ratio->add_option("--d-list", ora.d_list, "domain sizes")->required();
  ratio->add_option("--gamma", ora.gamma, "variance target");

  ComposeArgs comp;
  auto* compose_cmd = app.add_subcommand(
      "compose", "Kronecker-compose two solved output directories");
  compose_cmd->add_option("--first", comp.first, "first optimize output dir")
      ->required();
  compose_cmd->add_option("--second", comp.second,
                          "second optimize output dir")
      ->required();
  compose_cmd->add_option("--out", comp.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*optimize) return run_optimize(opt);
    if (*curve_cmd) return run_curve(curve);
    if (*release_cmd) return run_release(rel);
    if (*compare_cmd) return run_compare(cmp);
    if (*oracle_cmd) {
      nlohmann::json j;
      if (*twod_fit) j = ffu::to_json(ffu::twod_fitness(ora.gamma));
      if (*twod_ssq) j = ffu::to_json(ffu::twod_sum_squared(ora.beta));
      if (*id_fit) j = ffu::to_json(ffu::idsum_fitness(ora.d, ora.gamma, ora.k));
      if (*id_ssq) j = ffu::to_json(ffu::idsum_sum_squared(ora.d, ora.beta, ora.w));
      if (*ratio) j = ffu::to_json(ffu::idsum_ratio_curve(ora.d_list, ora.gamma));
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*compose_cmd) return run_compose(comp);
  } catch (const ffu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
