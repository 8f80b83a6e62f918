// Command-line surface of the causal Shapley engine: explanation runs,
// frontier-reduction benchmarks, permutation-coverage math, random-graph
// generation, and the salary attribution comparison.  Commands emit
// machine-readable JSON plus plot-ready CSV files; exit codes are 0 on
// success, 2 for configuration problems, 3 for engine/runtime failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "doshap/dgps.hpp"
#include "doshap/errors.hpp"
#include "doshap/fra.hpp"
#include "doshap/rng.hpp"
#include "doshap/shapley.hpp"
#include "doshap/value_function.hpp"
#include "doshap/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace doshap;

namespace {

constexpr std::uint64_t kInstanceTag = 0x696e7374u;
constexpr std::uint64_t kValueFnTag = 0x76616c75u;
constexpr std::uint64_t kReplicationTag = 0x7265706cu;
constexpr std::uint64_t kGraphGenTag = 0x67656e67u;
constexpr std::uint64_t kBackgroundTag = 0x6261636bu;

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out = ".";
  bool json_stdout = false;
  int threads = 1;
  int replications = 30;
};

json base_json(const GlobalOpts& g, const std::string& command) {
  return json{{"schema_version", kSchemaVersion},
              {"engine_version", kEngineVersion},
              {"command", command},
              {"seed", g.seed}};
}

void write_json_file(const GlobalOpts& g, const std::string& name, const json& j) {
  fs::create_directories(g.out);
  std::ofstream os(fs::path(g.out) / name);
  if (!os) throw Error("cannot write " + (fs::path(g.out) / name).string());
  os << j.dump(2) << "\n";
}

// Minimal mixed-type CSV writer (numbers already formatted by caller).
void write_csv_file(const GlobalOpts& g, const std::string& name,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  fs::create_directories(g.out);
  std::ofstream os(fs::path(g.out) / name);
  if (!os) throw Error("cannot write " + (fs::path(g.out) / name).string());
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const GlobalOpts& g, const json& summary) {
  if (g.json_stdout)
    std::cout << summary.dump(2) << std::endl;
  else
    std::cout << summary["command"].get<std::string>() << ": done, outputs in " << g.out
              << std::endl;
}

struct MeanSpread {
  double mean = 0.0;
  double two_sigma = 0.0;
};

MeanSpread mean_2sigma(const std::vector<double>& xs) {
  MeanSpread ms;
  if (xs.empty()) return ms;
  for (const double v : xs) ms.mean += v;
  ms.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double v : xs) ss += (v - ms.mean) * (v - ms.mean);
    ms.two_sigma = 2.0 * std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return ms;
}

// ---------------------------------------------------------------- explain

struct ExplainOpts {
  std::string dgp;
  std::string graph_path;
  int k = 8;
  double p = 0.25;
  int samples = 4;
  bool exact = false;
  int mc = 1000;
  std::string perms;  // "", integer, or "auto:<coverage>"
  std::string cache = "fra";
  bool assert_identifiable = false;
  bool ground_truth = false;
};

CacheMode parse_cache_mode(const std::string& s) {
  if (s == "none") return CacheMode::none;
  if (s == "plain") return CacheMode::plain;
  if (s == "fra") return CacheMode::fra;
  throw CLI::ValidationError("--cache", "must be one of none|plain|fra");
}

std::optional<std::int64_t> parse_perms(const std::string& s, int k) {
  if (s.empty()) return std::nullopt;
  if (s.rfind("auto:", 0) == 0) {
    const double target = std::stod(s.substr(5));
    return budget_for_coverage(target, k);
  }
  return std::stoll(s);
}

int cmd_explain(const GlobalOpts& g, const ExplainOpts& o) {
  std::optional<Scm> scm;
  if (!o.graph_path.empty()) {
    if (!fs::exists(o.graph_path)) {
      std::cerr << "error: graph file not found: " << o.graph_path << "\n";
      return 2;
    }
    std::ifstream is(o.graph_path);
    json j;
    is >> j;
    if (j.contains("graph")) j = j["graph"];
    scm = make_linear_gaussian(CausalGraph::from_json(j));
  } else if (!o.dgp.empty()) {
    try {
      scm = builtin_dgp(o.dgp, o.k, o.p, g.seed);
    } catch (const UnknownDgp& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  } else {
    std::cerr << "error: explain needs --dgp or --graph\n";
    return 2;
  }

  // Work on the ancestor-projected model; features dropped by the
  // projection cannot influence the target and are reported with zero
  // attribution.
  Projection mapping;
  const Scm proj = scm->project_to_target(&mapping);
  const FeatureIndex orig_feats = FeatureIndex::of(scm->graph());
  const FeatureIndex kept_feats = FeatureIndex::of(proj.graph());
  const int kp = kept_feats.count();

  const SampleTable instances = scm->sample(static_cast<std::size_t>(o.samples),
                                            derive_seed(g.seed, {kInstanceTag}));

  std::optional<DoValueFunction> vf;
  if (o.exact)
    vf.emplace(DoValueFunction::exact(proj));
  else
    vf.emplace(DoValueFunction::sampled(proj, o.mc, derive_seed(g.seed, {kValueFnTag})));

  EngineOptions eopts;
  eopts.cache = parse_cache_mode(o.cache);
  eopts.gate = o.assert_identifiable ? IdentifiabilityGate::Mode::user_asserted
                                     : IdentifiabilityGate::Mode::markovian_trivial;
  eopts.ground_truth = o.ground_truth;
  eopts.threads = g.threads;
  eopts.seed = g.seed;
  const std::optional<std::int64_t> n_perms = parse_perms(o.perms, kp);

  FrontierCache frontier(/*thread_safe=*/g.threads > 1);
  const bool with_noise = proj.target_additive_noise() && !proj.target_confounded();

  json reports = json::array();
  std::vector<std::vector<double>> phi_rows;
  std::vector<std::vector<std::string>> csv_rows;
  for (std::size_t r = 0; r < instances.rows.size(); ++r) {
    const std::vector<double>& row = instances.rows[r];
    std::vector<double> x(static_cast<std::size_t>(kp));
    for (int i = 0; i < kp; ++i) {
      const NodeId orig = mapping.to_original[static_cast<std::size_t>(kept_feats.nodes[i])];
      x[static_cast<std::size_t>(i)] = row[instances.col(scm->graph().label(orig))];
    }
    const ShapleyReport rep =
        n_perms ? approx_shapley(*vf, proj.graph(), x, *n_perms, eopts, &frontier)
                : exact_shapley(*vf, proj.graph(), x, eopts, &frontier);

    // Widen phi back to the original feature set.
    std::vector<double> full_phi(static_cast<std::size_t>(orig_feats.count()), 0.0);
    std::vector<double> full_se(static_cast<std::size_t>(orig_feats.count()), 0.0);
    for (int i = 0; i < kp; ++i) {
      const NodeId orig = mapping.to_original[static_cast<std::size_t>(kept_feats.nodes[i])];
      const int oi = orig_feats.of_node[static_cast<std::size_t>(orig)];
      full_phi[static_cast<std::size_t>(oi)] = rep.phi[static_cast<std::size_t>(i)];
      full_se[static_cast<std::size_t>(oi)] = rep.phi_se[static_cast<std::size_t>(i)];
    }
    phi_rows.push_back(full_phi);

    json jr = rep.to_json();
    json phi_obj = json::object();
    json instance = json::object();
    for (int i = 0; i < orig_feats.count(); ++i) {
      const std::string& lbl = scm->graph().label(orig_feats.nodes[i]);
      phi_obj[lbl] = {{"value", full_phi[static_cast<std::size_t>(i)]},
                      {"stderr", full_se[static_cast<std::size_t>(i)]}};
      instance[lbl] = row[instances.col(lbl)];
    }
    jr["phi"] = phi_obj;
    jr["instance"] = instance;
    const double y = row[instances.col(scm->graph().label(scm->graph().target()))];
    jr["target_value"] = y;
    if (with_noise) {
      const double np = noise_phi(*scm, row);
      jr["noise_phi"] = np;
      jr["efficiency_with_noise_residual"] =
          std::abs(rep.phi_sum() + np - (y - rep.base_value));
    }
    reports.push_back(jr);

    std::vector<std::string> csv_row{std::to_string(r)};
    for (const double v : full_phi) csv_row.push_back(fmt(v));
    csv_row.push_back(fmt(y));
    csv_rows.push_back(std::move(csv_row));
  }

  json summary = base_json(g, "explain");
  summary["config"] = {{"dgp", o.dgp},          {"graph", o.graph_path},
                       {"samples", o.samples},  {"exact", o.exact},
                       {"mc", o.mc},            {"perms", o.perms},
                       {"cache", o.cache},      {"threads", g.threads},
                       {"ground_truth", o.ground_truth},
                       {"assert_identifiable", o.assert_identifiable}};
  if (n_perms) summary["config"]["resolved_perms"] = *n_perms;
  summary["reports"] = reports;
  std::vector<std::string> dropped;
  for (int i = 0; i < orig_feats.count(); ++i) {
    const NodeId v = orig_feats.nodes[i];
    if (mapping.from_original[static_cast<std::size_t>(v)] < 0)
      dropped.push_back(scm->graph().label(v));
  }
  summary["projected_out_features"] = dropped;
  try {
    const FeatureImportance fi = feature_importance(phi_rows);
    json fij = json::object();
    for (int i = 0; i < orig_feats.count(); ++i)
      fij[scm->graph().label(orig_feats.nodes[i])] = fi.fi[static_cast<std::size_t>(i)];
    summary["feature_importance"] = fij;
    summary["fi_skipped_samples"] = fi.skipped;
  } catch (const AllZeroAttribution& e) {
    summary["feature_importance_error"] = e.what();
  }

  write_json_file(g, "explain_report.json", summary);
  std::vector<std::string> header{"sample"};
  for (int i = 0; i < orig_feats.count(); ++i)
    header.push_back("phi_" + scm->graph().label(orig_feats.nodes[i]));
  header.push_back("target");
  write_csv_file(g, "explain_phi.csv", header, csv_rows);
  emit(g, summary);
  return 0;
}

// -------------------------------------------------------------- bench-fra

struct BenchOpts {
  std::string k_list = "5,10,15";
  std::string p_list = "0.1,0.25,0.5";
  double coverage_target = 0.5;
  int max_tries = 1000000;
  bool ablation = false;
  int ablation_k = 10;
  double ablation_p = 0.25;
  int ablation_mc = 200;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

// The coalition stream a permutation-sampling explanation would issue:
// every prefix (including the empty and full sets) of each permutation.
std::vector<Bitset> permutation_prefix_stream(int k, std::int64_t n_perms, std::uint64_t seed) {
  std::vector<Bitset> stream;
  stream.reserve(static_cast<std::size_t>(n_perms) * static_cast<std::size_t>(k + 1));
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (std::int64_t t = 0; t < n_perms; ++t) {
    RngStream rng(derive_seed(seed, {0x7065726du, static_cast<std::uint64_t>(t)}));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Bitset running(static_cast<std::size_t>(k));
    stream.push_back(running);
    for (const int i : perm) {
      running.set(static_cast<std::size_t>(i));
      stream.push_back(running);
    }
  }
  return stream;
}

int cmd_bench_fra(const GlobalOpts& g, const BenchOpts& o) {
  const std::vector<int> ks = parse_int_list(o.k_list);
  const std::vector<double> ps = parse_double_list(o.p_list);

  std::vector<std::vector<std::string>> ratio_rows;
  json cells = json::array();
  for (const int k : ks) {
    for (const double p : ps) {
      std::vector<double> ratios, ns_bits, ns_set;
      for (int rep = 0; rep < g.replications; ++rep) {
        const std::uint64_t rep_seed = derive_seed(g.seed, {kReplicationTag,
                                                            static_cast<std::uint64_t>(k),
                                                            static_cast<std::uint64_t>(rep)});
        CausalGraph graph;
        try {
          graph = sample_random_graph(k, p, rep_seed, o.max_tries).graph;
        } catch (const RejectionBudgetExceeded& e) {
          cells.push_back({{"k", k}, {"p", p}, {"rep", rep}, {"error", e.what()}});
          continue;
        }
        // Coalitions over node indices (features are nodes 0..k-1).  Up to
        // k=20 every coalition is enumerated, so the irreducible ratio is
        // exact per graph; beyond that a permutation prefix stream samples
        // the coalitions an explanation run would actually issue.
        std::vector<Bitset> stream;
        const char* stream_kind = "enumerate";
        if (k <= 20) {
          stream.reserve(std::size_t{1} << k);
          for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
            Bitset nodes(static_cast<std::size_t>(k + 1));
            for (int i = 0; i < k; ++i)
              if (mask >> i & 1u) nodes.set(static_cast<std::size_t>(i));
            stream.push_back(std::move(nodes));
          }
        } else {
          stream_kind = "permutation_stream";
          const std::int64_t n_perms = budget_for_coverage(o.coverage_target, k);
          for (const Bitset& s : permutation_prefix_stream(k, n_perms, rep_seed)) {
            Bitset nodes(static_cast<std::size_t>(k + 1));
            s.for_each([&](std::size_t i) { nodes.set(i); });
            stream.push_back(std::move(nodes));
          }
        }

        const FraContext ctx(graph);
        std::unordered_set<Bitset, BitsetHash> raw, irreducible;
        FrontierCache warm;
        const auto t0 = std::chrono::steady_clock::now();
        for (const Bitset& s : stream) {
          raw.insert(s);
          irreducible.insert(reduce_bits(s, warm, ctx));
        }
        const auto t1 = std::chrono::steady_clock::now();
        FrontierCache warm_set;
        for (const Bitset& s : stream) reduce_set(s, warm_set, graph);
        const auto t2 = std::chrono::steady_clock::now();

        const double ratio = static_cast<double>(irreducible.size()) / static_cast<double>(raw.size());
        const double per_call = static_cast<double>(stream.size());
        ratios.push_back(ratio);
        ns_bits.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() / per_call);
        ns_set.push_back(std::chrono::duration<double, std::nano>(t2 - t1).count() / per_call);
        ratio_rows.push_back({std::to_string(k), fmt(p), std::to_string(rep),
                              std::to_string(rep_seed), stream_kind,
                              std::to_string(raw.size()), std::to_string(irreducible.size()),
                              fmt(ratio), fmt(ns_bits.back()), fmt(ns_set.back())});
      }
      const MeanSpread r = mean_2sigma(ratios), b = mean_2sigma(ns_bits), s = mean_2sigma(ns_set);
      cells.push_back({{"k", k},
                       {"p", p},
                       {"replications", ratios.size()},
                       {"ratio_mean", r.mean},
                       {"ratio_2sigma", r.two_sigma},
                       {"ns_per_call_bits_mean", b.mean},
                       {"ns_per_call_bits_2sigma", b.two_sigma},
                       {"ns_per_call_set_mean", s.mean},
                       {"ns_per_call_set_2sigma", s.two_sigma}});
    }
  }
  write_csv_file(g, "bench_ratio.csv",
                 {"k", "p", "rep", "seed", "stream", "distinct_raw", "distinct_irreducible",
                  "ratio", "ns_per_call_bits", "ns_per_call_set"},
                 ratio_rows);

  json summary = base_json(g, "bench-fra");
  summary["cells"] = cells;
  summary["coverage_target"] = o.coverage_target;

  if (o.ablation) {
    std::vector<std::vector<std::string>> ab_rows;
    json ab = json::array();
    std::vector<double> wall[3];
    const char* names[3] = {"none", "plain", "fra"};
    const CacheMode modes[3] = {CacheMode::none, CacheMode::plain, CacheMode::fra};
    const std::int64_t n_perms = budget_for_coverage(o.coverage_target, o.ablation_k);
    for (int rep = 0; rep < g.replications; ++rep) {
      const std::uint64_t rep_seed = derive_seed(g.seed, {kReplicationTag, 0xab1au,
                                                          static_cast<std::uint64_t>(rep)});
      const Scm scm = make_linear_random(o.ablation_k, o.ablation_p, rep_seed);
      const SampleTable inst = scm.sample(1, derive_seed(rep_seed, {kInstanceTag}));
      std::vector<double> x;
      for (const NodeId v : scm.graph().feature_list())
        x.push_back(inst.rows[0][inst.col(scm.graph().label(v))]);
      const DoValueFunction vf =
          DoValueFunction::sampled(scm, o.ablation_mc, derive_seed(rep_seed, {kValueFnTag}));
      for (int m = 0; m < 3; ++m) {
        EngineOptions eopts;
        eopts.cache = modes[m];
        eopts.ground_truth = true;
        eopts.threads = 1;  // timing runs stay single-threaded
        eopts.seed = rep_seed;
        const ShapleyReport rep_out = approx_shapley(vf, scm.graph(), x, n_perms, eopts);
        wall[m].push_back(rep_out.wall_ms_total);
        ab_rows.push_back({std::to_string(rep), names[m], fmt(rep_out.wall_ms_total),
                           std::to_string(rep_out.nu_evaluations),
                           std::to_string(rep_out.fra_reductions)});
      }
    }
    for (int m = 0; m < 3; ++m) {
      const MeanSpread w = mean_2sigma(wall[m]);
      ab.push_back({{"mode", names[m]},
                    {"wall_ms_mean", w.mean},
                    {"wall_ms_2sigma", w.two_sigma}});
    }
    write_csv_file(g, "bench_ablation.csv",
                   {"rep", "mode", "wall_ms", "nu_evals", "fra_reductions"}, ab_rows);
    summary["ablation"] = {{"k", o.ablation_k},
                           {"p", o.ablation_p},
                           {"mc", o.ablation_mc},
                           {"n_perms", n_perms},
                           {"modes", ab}};
  }

  write_json_file(g, "bench_summary.json", summary);
  emit(g, summary);
  return 0;
}

// --------------------------------------------------------------- coverage

struct CoverageOpts {
  int k = 0;
  std::int64_t n = 0;
  double target = 0.0;
};

int cmd_coverage(const GlobalOpts& g, const CoverageOpts& o) {
  if (o.k < 1) {
    std::cerr << "error: coverage needs --k >= 1\n";
    return 2;
  }
  json summary = base_json(g, "coverage");
  summary["k"] = o.k;
  if (o.target > 0.0) {
    const std::int64_t n = budget_for_coverage(o.target, o.k);
    summary["target"] = o.target;
    summary["budget"] = n;
    summary["coverage_at_budget"] = expected_coverage(n, o.k);
    if (n > 1) summary["coverage_before_budget"] = expected_coverage(n - 1, o.k);
  } else {
    const std::int64_t n_max = o.n > 0 ? o.n : 64;
    std::vector<std::vector<std::string>> rows;
    for (std::int64_t n = 1; n <= n_max; ++n)
      rows.push_back({std::to_string(n), fmt(expected_uncached_ratio(n, o.k)),
                      fmt(expected_coverage(n, o.k))});
    write_csv_file(g, "coverage.csv", {"n", "uncached_ratio", "coverage"}, rows);
    summary["n_max"] = n_max;
    summary["coverage_at_n_max"] = expected_coverage(n_max, o.k);
  }
  write_json_file(g, "coverage_summary.json", summary);
  emit(g, summary);
  return 0;
}

// --------------------------------------------------------- salary-compare

struct SalaryOpts {
  int background = 1000;
  int mc = 1000;
  bool exact_only = false;
};

int cmd_salary_compare(const GlobalOpts& g, const SalaryOpts& o) {
  const Scm scm = make_salary_scm();
  const CausalGraph& graph = scm.graph();
  const int k = 3;

  const DoValueFunction vf_do = DoValueFunction::exact(scm);
  const ReferenceValueFunction vf_marg =
      ReferenceValueFunction::population(ReferenceValueFunction::Kind::marginal, scm);
  const ReferenceValueFunction vf_cond =
      ReferenceValueFunction::population(ReferenceValueFunction::Kind::conditional, scm);

  EngineOptions do_opts;  // interventional semantics: reduction is sound
  do_opts.cache = CacheMode::fra;
  EngineOptions ref_opts;  // observational semantics: plain cache only
  ref_opts.cache = CacheMode::plain;

  const auto all_configs = [] {
    std::vector<std::array<double, 3>> cs;
    for (int a = 0; a < 2; ++a)
      for (int e = 0; e < 2; ++e)
        for (int s = 0; s < 2; ++s)
          cs.push_back({static_cast<double>(a), static_cast<double>(e), static_cast<double>(s)});
    return cs;
  }();

  // Exact per-method attributions for each factual configuration.
  std::vector<std::vector<std::string>> exact_rows;
  json exact_json = json::array();
  for (const auto& cfg : all_configs) {
    const std::span<const double> x(cfg.data(), 3);
    const ShapleyReport r_do = exact_shapley(vf_do, graph, x, do_opts);
    const ShapleyReport r_m = exact_shapley(vf_marg, graph, x, ref_opts);
    const ShapleyReport r_c = exact_shapley(vf_cond, graph, x, ref_opts);
    const auto row_of = [&](const char* method, const ShapleyReport& r) {
      exact_rows.push_back({fmt(cfg[0]), fmt(cfg[1]), fmt(cfg[2]), method, fmt(r.phi[0]),
                            fmt(r.phi[1]), fmt(r.phi[2])});
      exact_json.push_back({{"a", cfg[0]},
                            {"e", cfg[1]},
                            {"s", cfg[2]},
                            {"method", method},
                            {"phi", {r.phi[0], r.phi[1], r.phi[2]}}});
    };
    row_of("do", r_do);
    row_of("marginal", r_m);
    row_of("conditional", r_c);
  }
  write_csv_file(g, "salary_exact.csv", {"a", "e", "s", "method", "phi_A", "phi_E", "phi_S"},
                 exact_rows);

  // Coalition-level equality matrix: a reference method agrees with the
  // interventional value on a coalition only if it agrees for every factual
  // configuration (values are exact, so equality is exact).
  std::vector<std::vector<std::string>> pattern_rows;
  json pattern_json = json::array();
  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    Bitset s(3);
    for (int i = 0; i < 3; ++i)
      if (mask & (1u << i)) s.set(static_cast<std::size_t>(i));
    double max_marg = 0.0, max_cond = 0.0;
    bool cond_defined = true;
    for (const auto& cfg : all_configs) {
      const std::span<const double> x(cfg.data(), 3);
      const double nu_do = vf_do.evaluate(s, x).value;
      max_marg = std::max(max_marg, std::abs(vf_marg.evaluate(s, x).value - nu_do));
      try {
        max_cond = std::max(max_cond, std::abs(vf_cond.evaluate(s, x).value - nu_do));
      } catch (const NoMatchingBackground&) {
        cond_defined = false;
      }
    }
    std::string label = "{";
    s.for_each([&](std::size_t i) {
      if (label.size() > 1) label += ",";
      label += graph.label(static_cast<NodeId>(i));
    });
    label += "}";
    pattern_rows.push_back({label, max_marg == 0.0 ? "equal" : "differs", fmt(max_marg),
                            cond_defined && max_cond == 0.0 ? "equal" : "differs",
                            fmt(max_cond)});
    pattern_json.push_back({{"coalition", label},
                            {"marginal_equal", max_marg == 0.0},
                            {"marginal_max_abs_diff", max_marg},
                            {"conditional_equal", cond_defined && max_cond == 0.0},
                            {"conditional_max_abs_diff", max_cond}});
  }
  write_csv_file(g, "salary_pattern.csv",
                 {"coalition", "marginal", "marginal_max_abs_diff", "conditional",
                  "conditional_max_abs_diff"},
                 pattern_rows);

  json summary = base_json(g, "salary-compare");
  summary["exact"] = exact_json;
  summary["pattern"] = pattern_json;

  if (!o.exact_only) {
    const Predictor pred = scm_mean_predictor(scm);
    std::vector<std::vector<std::string>> sampled_rows;
    // phi draws indexed [config][method][feature] across replications.
    std::vector<std::array<std::array<std::vector<double>, 3>, 3>> draws(all_configs.size());
    const char* names[3] = {"do", "marginal", "conditional"};
    for (int rep = 0; rep < g.replications; ++rep) {
      const std::uint64_t rep_seed =
          derive_seed(g.seed, {kReplicationTag, static_cast<std::uint64_t>(rep)});
      const SampleTable bg = scm.sample(static_cast<std::size_t>(o.background),
                                        derive_seed(rep_seed, {kBackgroundTag}));
      const DoValueFunction mc_do =
          DoValueFunction::sampled(scm, o.mc, derive_seed(rep_seed, {kValueFnTag}));
      const ReferenceValueFunction emp_marg = ReferenceValueFunction::empirical(
          ReferenceValueFunction::Kind::marginal, graph, bg, pred);
      const ReferenceValueFunction emp_cond = ReferenceValueFunction::empirical(
          ReferenceValueFunction::Kind::conditional, graph, bg, pred);
      const ValueFunction* vfs[3] = {&mc_do, &emp_marg, &emp_cond};
      for (std::size_t c = 0; c < all_configs.size(); ++c) {
        const std::span<const double> x(all_configs[c].data(), 3);
        for (int m = 0; m < 3; ++m) {
          const ShapleyReport r =
              exact_shapley(*vfs[m], graph, x, m == 0 ? do_opts : ref_opts);
          for (int i = 0; i < k; ++i)
            draws[c][static_cast<std::size_t>(m)][static_cast<std::size_t>(i)].push_back(
                r.phi[static_cast<std::size_t>(i)]);
          sampled_rows.push_back({fmt(all_configs[c][0]), fmt(all_configs[c][1]),
                                  fmt(all_configs[c][2]), names[m], std::to_string(rep),
                                  fmt(r.phi[0]), fmt(r.phi[1]), fmt(r.phi[2])});
        }
      }
    }
    write_csv_file(g, "salary_sampled.csv",
                   {"a", "e", "s", "method", "rep", "phi_A", "phi_E", "phi_S"}, sampled_rows);

    std::vector<std::vector<std::string>> sum_rows;
    json sampled_json = json::array();
    for (std::size_t c = 0; c < all_configs.size(); ++c) {
      for (int m = 0; m < 3; ++m) {
        json feats = json::array();
        std::vector<std::string> row{fmt(all_configs[c][0]), fmt(all_configs[c][1]),
                                     fmt(all_configs[c][2]), names[m]};
        for (int i = 0; i < k; ++i) {
          const MeanSpread ms = mean_2sigma(draws[c][static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]);
          feats.push_back({{"mean", ms.mean}, {"two_sigma", ms.two_sigma}});
          row.push_back(fmt(ms.mean));
          row.push_back(fmt(ms.two_sigma));
        }
        sampled_json.push_back({{"a", all_configs[c][0]},
                                {"e", all_configs[c][1]},
                                {"s", all_configs[c][2]},
                                {"method", names[m]},
                                {"phi", feats}});
        sum_rows.push_back(std::move(row));
      }
    }
    write_csv_file(g, "salary_sampled_summary.csv",
                   {"a", "e", "s", "method", "phi_A_mean", "phi_A_2sigma", "phi_E_mean",
                    "phi_E_2sigma", "phi_S_mean", "phi_S_2sigma"},
                   sum_rows);
    summary["sampled"] = sampled_json;
    summary["sampled_config"] = {{"replications", g.replications},
                                 {"background", o.background},
                                 {"mc", o.mc}};
  }

  write_json_file(g, "salary_summary.json", summary);
  emit(g, summary);
  return 0;
}

// --------------------------------------------------------------- graphgen

struct GraphGenOpts {
  int k = 8;
  double p = 0.25;
  int count = 30;
  int max_tries = 1000000;
};

int cmd_graphgen(const GlobalOpts& g, const GraphGenOpts& o) {
  fs::create_directories(g.out);
  json manifest = base_json(g, "graphgen");
  manifest["k"] = o.k;
  manifest["p"] = o.p;
  manifest["count"] = o.count;
  json entries = json::array();
  int ok = 0;
  for (int i = 0; i < o.count; ++i) {
    const std::uint64_t gseed = derive_seed(g.seed, {kGraphGenTag, static_cast<std::uint64_t>(i)});
    json entry{{"index", i}, {"seed", gseed}};
    try {
      const RandomGraphResult r = sample_random_graph(o.k, o.p, gseed, o.max_tries);
      const std::string fname = "graph_" + std::to_string(i) + ".json";
      json jg{{"schema_version", kSchemaVersion},
              {"engine_version", kEngineVersion},
              {"seed", gseed},
              {"graph", r.graph.to_json()}};
      write_json_file(g, fname, jg);
      entry["file"] = fname;
      entry["rejections"] = r.rejections;
      entry["nodes"] = r.graph.node_count();
      entry["edges"] = r.graph.edge_count();
      ++ok;
    } catch (const RejectionBudgetExceeded& e) {
      entry["error"] = e.what();
    }
    entries.push_back(entry);
  }
  manifest["graphs"] = entries;
  manifest["generated"] = ok;
  write_json_file(g, "manifest.json", manifest);
  emit(g, manifest);
  return ok > 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimand-agnostic causal Shapley attribution engine"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Root seed for all randomness")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--json", g.json_stdout, "Print the summary JSON to stdout");
  app.add_option("--threads", g.threads, "Worker threads for permutation sampling")
      ->capture_default_str();
  app.add_option("--replications", g.replications, "Replication count for benchmark commands")
      ->capture_default_str();

  ExplainOpts eo;
  CLI::App* explain = app.add_subcommand("explain", "Attribute sampled instances of a model");
  explain->fallthrough();
  explain->add_option("--dgp", eo.dgp,
                      "Built-in model: salary, synthetic_markovian, synthetic_semimarkovian, "
                      "linear_random");
  explain->add_option("--graph", eo.graph_path, "Graph JSON file (linear mechanisms attached)");
  explain->add_option("--k", eo.k, "Feature count for linear_random")->capture_default_str();
  explain->add_option("--p", eo.p, "Edge density for linear_random")->capture_default_str();
  explain->add_option("--samples", eo.samples, "Instances to explain")->capture_default_str();
  explain->add_flag("--exact", eo.exact, "Exact coalition values (finite-support models)");
  explain->add_option("--mc", eo.mc, "Interventional samples per coalition value")
      ->capture_default_str();
  explain->add_option("--perms", eo.perms,
                      "Permutation budget: an integer or auto:<coverage>; omit for the exact "
                      "2^K engine");
  explain->add_option("--cache", eo.cache, "Coalition cache: none, plain, or fra")
      ->capture_default_str();
  explain->add_flag("--assert-identifiable", eo.assert_identifiable,
                    "Vouch that every coalition query is identifiable");
  explain->add_flag("--ground-truth", eo.ground_truth,
                    "Model is the true mechanism set; skip the identifiability gate");

  BenchOpts bo;
  CLI::App* bench = app.add_subcommand("bench-fra", "Coalition-reduction benchmarks");
  bench->fallthrough();
  bench->add_option("--k-list", bo.k_list, "Feature counts")->capture_default_str();
  bench->add_option("--p-list", bo.p_list, "Edge densities")->capture_default_str();
  bench->add_option("--coverage", bo.coverage_target, "Coverage target fixing the budget")
      ->capture_default_str();
  bench->add_option("--max-tries", bo.max_tries,
                    "Rejection-sampling budget per graph (sparse densities accept rarely)")
      ->capture_default_str();
  bench->add_flag("--ablation", bo.ablation, "Also time none/plain/fra end to end");
  bench->add_option("--ablation-k", bo.ablation_k, "Ablation feature count")->capture_default_str();
  bench->add_option("--ablation-p", bo.ablation_p, "Ablation edge density")->capture_default_str();
  bench->add_option("--ablation-mc", bo.ablation_mc, "Ablation interventional samples")
      ->capture_default_str();

  CoverageOpts co;
  CLI::App* coverage = app.add_subcommand("coverage", "Permutation cache-coverage mathematics");
  coverage->fallthrough();
  coverage->add_option("--k", co.k, "Feature count")->required();
  coverage->add_option("--n", co.n, "Tabulate ratios for 1..n permutations");
  coverage->add_option("--target", co.target, "Invert: smallest budget reaching this coverage");

  SalaryOpts so;
  CLI::App* salary = app.add_subcommand("salary-compare",
                                        "Interventional vs observational attributions on the "
                                        "salary model");
  salary->fallthrough();
  salary->add_option("--background", so.background, "Background sample size")
      ->capture_default_str();
  salary->add_option("--mc", so.mc, "Interventional samples per coalition value")
      ->capture_default_str();
  salary->add_flag("--exact-only", so.exact_only, "Skip the sampled replication study");

  GraphGenOpts go;
  CLI::App* graphgen = app.add_subcommand("graphgen", "Sample admissible random DAGs");
  graphgen->fallthrough();
  graphgen->add_option("--k", go.k, "Feature count")->capture_default_str();
  graphgen->add_option("--p", go.p, "Edge density")->capture_default_str();
  graphgen->add_option("--count", go.count, "Number of graphs")->capture_default_str();
  graphgen->add_option("--max-tries", go.max_tries,
                       "Rejection-sampling budget per graph")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*explain) return cmd_explain(g, eo);
    if (*bench) return cmd_bench_fra(g, bo);
    if (*coverage) return cmd_coverage(g, co);
    if (*salary) return cmd_salary_compare(g, so);
    if (*graphgen) return cmd_graphgen(g, go);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
