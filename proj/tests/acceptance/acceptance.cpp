// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any selected criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cgl/checks.hpp"
#include "cgl/composer.hpp"
#include "cgl/evaluator.hpp"
#include "cgl/gcn.hpp"
#include "cgl/graph.hpp"
#include "cgl/io.hpp"
#include "cgl/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;
using namespace cgl;

constexpr std::uint64_t kSeeds = 5;
constexpr std::uint64_t kPropertySeeds = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
  json data = json::object();
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (double& v : t.values()) v = rng.normal();
  return t;
}

// Default synthetic data set, or the harder regime used for trend comparisons:
// noisier items and fewer training triplets keep the task from saturating.
DatasetConfig default_data(std::uint64_t seed) {
  DatasetConfig c;
  c.seed = seed;
  return c;
}

DatasetConfig trend_data(std::uint64_t seed) {
  DatasetConfig c;
  c.noise_scale = 2.0;
  c.train_triplets = 1024;
  c.seed = seed;
  return c;
}

ComposerSpec spec_for(const std::string& kind, const Dataset& ds, char variant = 'd') {
  return kind == "tirg" ? ComposerSpec::tirg(ds.config.image_dim, ds.config.text_dim)
                        : ComposerSpec::rtic(variant, ds.config.image_dim, ds.config.text_dim);
}

struct RunOutput {
  Session session;
  RetrievalReport report;
  bool finite = true;
};

RunOutput run_training(TrainMode mode, std::uint64_t seed, const Dataset& ds, const ComposerSpec& spec,
                       const GraphBundle* bundle = nullptr, Composer* transfer = nullptr) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.evaluate_each_epoch = false;
  if (transfer) cfg.init_from = InitFrom::kTransfer;
  RunOutput out{make_session(cfg, ds, spec, bundle, transfer), {}, true};
  const TrainResult r = train(out.session, ds);
  for (const auto& s : r.steps) out.finite = out.finite && std::isfinite(s.loss_final);
  out.report = evaluate(*out.session.main, ds, ds.eval, build_index(ds));
  return out;
}

std::string checkpoint_hash(Session& s) { return io::sha256_hex(checkpoint_archive(s).serialize()); }

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradient_correctness() {
  Outcome o{true, "", json::object()};
  double worst = 0.0;
  std::size_t checks = 0;
  std::vector<std::string> failures;
  GradcheckOptions options;
  options.tolerance = 1e-3;
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    options.seed = seed;
    for (char v : {'a', 'b', 'c', 'd', 'e'}) {
      const GradcheckReport r = composer_gradcheck("rtic", v, seed, options);
      worst = std::max(worst, r.max_rel_error());
      ++checks;
      if (!r.passed()) failures.push_back(fmt("rtic-%c seed %llu", v, static_cast<unsigned long long>(seed)));
    }
    const GradcheckReport g = gcn_gradcheck(seed, options);
    worst = std::max(worst, g.max_rel_error());
    ++checks;
    if (!g.passed()) failures.push_back(fmt("gcn seed %llu", static_cast<unsigned long long>(seed)));
  }
  o.pass = failures.empty() && worst < 1e-3;
  o.detail = fmt("%zu checks (5 variants + GCN x 20 seeds), max rel error %.2e", checks, worst);
  if (!failures.empty()) o.detail += ", failing: " + failures.front();
  o.data = {{"checks", checks}, {"max_rel_error", worst}};
  return o;
}

// ---------------------------------------------------------------------------
// 2. Row-sum law of the reweighted graph

Outcome row_sum_law() {
  Rng rng(2024, "row-sum");
  double worst = 0.0;
  std::size_t rows = 0;
  std::size_t isolated = 0;
  bool ok = true;
  for (int g = 0; g < 100; ++g) {
    const std::size_t n = 4 + rng.below(253);
    const double p = rng.uniform(0.0, 0.4);
    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      a.at(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double e = rng.uniform() < p ? 1.0 : 0.0;
        a.at(i, j) = e;
        a.at(j, i) = e;
      }
    }
    const CorrelationMatrix w = reweight(CorrelationMatrix(MatrixState::kBinarized, a));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += i == j ? 0.0 : w.at(i, j);
      const double err = std::min(std::abs(s), std::abs(s - kNeighborMass));
      worst = std::max(worst, err);
      ok = ok && err <= 1e-12;
      isolated += s == 0.0;
      ++rows;
    }
  }
  return {ok, fmt("100 graphs, %zu rows (%zu isolated), max deviation %.2e", rows, isolated, worst),
          {{"rows", rows}, {"max_deviation", worst}}};
}

// ---------------------------------------------------------------------------
// 3. Density targeting

Outcome density_targeting() {
  bool ok = true;
  std::string detail;
  json data = json::array();
  for (std::size_t n : {20, 64, 128, 256}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed, "density");
      const CorrelationMatrix raw = target_correlations(random_matrix(n, 16, rng)).matrix;
      const TauChoice t = choose_tau(raw, 0.15);
      const CorrelationMatrix bin = binarize(raw, t.tau);
      double edges = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) edges += i != j ? bin.at(i, j) : 0.0;
      }
      const double degree = edges / static_cast<double>(n);
      worst = std::max(worst, std::abs(degree - 0.15 * static_cast<double>(n)));
      data.push_back({{"n", n}, {"seed", seed}, {"mean_degree", degree}, {"target", 0.15 * n}});
    }
    ok = ok && worst <= 1.0;
    detail += fmt("%sN=%zu max |deg-0.15N| %.3f", detail.empty() ? "" : ", ", n, worst);
  }
  return {ok, detail, data};
}

// ---------------------------------------------------------------------------
// 4. Gating identities

Outcome gating_identities() {
  std::size_t checks = 0;
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    Rng rng(seed, "gating");
    const std::size_t b = 2 + rng.below(30);
    const Var src(random_matrix(b, 64, rng));
    const Var txt(random_matrix(b, 32, rng));
    Rng init(seed, "composer");
    RticComposer d(ComposerConfig::variant('d'), init);
    if (seed % 2) d.set_mode(Mode::kEval);
    ++checks;
    failures += !(d.trace(src, txt, 1.0).output.value() == src.value());
    const ComposeTrace zero = d.trace(src, txt, 0.0);
    ++checks;
    failures += !(zero.output.value() == zero.residual.value());
    for (char v : {'a', 'c', 'd', 'e'}) {
      Rng vinit(seed, "composer");
      RticComposer c(ComposerConfig::variant(v), vinit);
      for (auto& e : c.error_blocks()) {
        e.out.weight.var.mutable_value().fill(0.0);
        e.out.bias.var.mutable_value().fill(0.0);
      }
      const ComposeTrace tr = c.trace(src, txt);
      ++checks;
      failures += !(tr.residual.value() == tr.fused.value());
    }
  }
  return {failures == 0, fmt("%zu bitwise identity checks over 20 seeds, %zu mismatches", checks, failures),
          {{"checks", checks}, {"mismatches", failures}}};
}

// ---------------------------------------------------------------------------
// 5. Brute-force oracles

long double dot(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  long double s = 0;
  for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a.at(i, k)) * b.at(j, k);
  return s;
}

Outcome brute_force_oracles() {
  double corr = 0, logits = 0, dml = 0, recall = 0;
  std::size_t rank_mismatch = 0;
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    Rng rng(seed, "oracle");
    const std::size_t n = 2 + rng.below(63);
    const std::size_t d = 1 + rng.below(64);
    const Tensor f = random_matrix(n, d, rng);
    const CorrelationMatrix c = target_correlations(f).matrix;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const long double ref = i == j ? 1.0L : dot(f, i, f, j) / std::sqrt(dot(f, i, f, i) * dot(f, j, f, j));
        corr = std::max(corr, static_cast<double>(std::abs(c.at(i, j) - ref)));
      }
    }

    const std::size_t b = 1 + rng.below(64);
    const Tensor x = random_matrix(b, d, rng);
    const Tensor l = node_logits(Var(x), Var(f)).value();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < n; ++j) logits = std::max(logits, std::abs(l.at(i, j) - double(dot(x, i, f, j))));
    }

    const std::size_t bb = 2 + rng.below(63);
    const Tensor comp = random_matrix(bb, d, rng);
    const Tensor trg = random_matrix(bb, d, rng);
    long double total = 0;
    for (std::size_t i = 0; i < bb; ++i) {
      std::vector<long double> row;
      long double z = 0;
      for (std::size_t j = 0; j < bb; ++j) {
        row.push_back(10.0L * dot(comp, i, trg, j) / std::sqrt(dot(comp, i, comp, i) * dot(trg, j, trg, j)));
        z += std::exp(row.back());
      }
      total += std::log(z) - row[i];
    }
    dml = std::max(dml, std::abs(dml_loss(Var(comp), Var(trg), 10.0).value()[0] - double(total / bb)));

    const std::size_t q = 1 + rng.below(64);
    const Tensor queries = random_matrix(q, d, rng);
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < q; ++i) targets.push_back(rng.below(n));
    const std::vector<std::size_t> ks{1, 5, 10, 50};
    const RetrievalReport r = evaluate_features(queries, targets, build_index(f), ks);
    for (std::size_t i = 0; i < q; ++i) {
      std::vector<std::pair<long double, std::size_t>> order;
      for (std::size_t j = 0; j < n; ++j) {
        order.emplace_back(dot(queries, i, f, j) / std::sqrt(dot(queries, i, queries, i) * dot(f, j, f, j)), j);
      }
      std::sort(order.begin(), order.end(), [](const auto& u, const auto& v) {
        return u.first != v.first ? u.first > v.first : u.second < v.second;
      });
      std::size_t rank = 0;
      while (order[rank].second != targets[i]) ++rank;
      rank_mismatch += r.ranks[i] != rank + 1;
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      std::size_t hits = 0;
      for (std::size_t rank : r.ranks) hits += rank <= ks[k];
      recall = std::max(recall, std::abs(r.recall[k] - 100.0 * double(hits) / double(q)));
    }
  }
  const bool ok = corr <= 1e-10 && logits <= 1e-10 && dml <= 1e-10 && recall <= 1e-10 && rank_mismatch == 0;
  return {ok,
          fmt("max |err| correlation %.1e, node_logits %.1e, dml_loss %.1e, recall %.1e; rank mismatches %zu", corr,
              logits, dml, recall, rank_mismatch),
          {{"correlation", corr}, {"node_logits", logits}, {"dml_loss", dml}, {"recall", recall}, {"rank_mismatches", rank_mismatch}}};
}

// ---------------------------------------------------------------------------
// 6. Learning works

Outcome learning_works() {
  std::vector<double> r10;
  std::size_t gallery = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const Dataset ds = generate_dataset(default_data(seed));
    gallery = ds.items.size();
    r10.push_back(run_training(TrainMode::kStage1, seed, ds, spec_for("rtic", ds)).report.recall_at(10));
  }
  const double baseline = 10.0 * 100.0 / static_cast<double>(gallery);
  const double m = mean(r10);
  return {m >= 5.0 * baseline, fmt("mean R@10 %.2f vs 5x random %.2f (G=%zu)", m, 5.0 * baseline, gallery),
          {{"recall@10", r10}, {"baseline", baseline}}};
}

// ---------------------------------------------------------------------------
// 7 and 8 share stage-1 runs on the trend data.

struct TrendCache {
  std::vector<Dataset> data;
  std::map<std::pair<std::string, std::uint64_t>, RunOutput> stage1;

  const Dataset& dataset(std::uint64_t seed) {
    while (data.size() <= seed) data.push_back(generate_dataset(trend_data(data.size())));
    return data[seed];
  }
  RunOutput& stage1_run(const std::string& key, std::uint64_t seed) {
    auto it = stage1.find({key, seed});
    if (it != stage1.end()) return it->second;
    const Dataset& ds = dataset(seed);
    const ComposerSpec spec = key == "tirg" ? spec_for("tirg", ds) : spec_for("rtic", ds, key[0]);
    return stage1.emplace(std::make_pair(key, seed), run_training(TrainMode::kStage1, seed, ds, spec))
        .first->second;
  }
};

TrendCache& trend() {
  static TrendCache cache;
  return cache;
}

Outcome skip_trend() {
  std::vector<double> d, b;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    d.push_back(*trend().stage1_run("d", seed).report.composite);
    b.push_back(*trend().stage1_run("b", seed).report.composite);
  }
  const double pooled = std::sqrt((sample_std(d) * sample_std(d) + sample_std(b) * sample_std(b)) / 2.0);
  const double margin = mean(d) - mean(b);
  return {margin > pooled,
          fmt("composite d %.2f (sd %.2f) vs b %.2f (sd %.2f), margin %.2f vs pooled sd %.2f", mean(d), sample_std(d),
              mean(b), sample_std(b), margin, pooled),
          {{"d", d}, {"b", b}, {"pooled_std", pooled}}};
}

Outcome joint_trend() {
  bool ok = true;
  std::string detail;
  json data = json::object();
  for (const std::string kind : {"rtic", "tirg"}) {
    const std::string key = kind == "rtic" ? "d" : "tirg";
    std::vector<double> stage1, joint, transfer;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const Dataset& ds = trend().dataset(seed);
      RunOutput& base = trend().stage1_run(key, seed);
      const GraphBundle bundle = build_graph(ds, checkpoint_hash(base.session));
      const ComposerSpec spec = spec_for(kind, ds);
      stage1.push_back(base.report.recall_at(10));
      joint.push_back(run_training(TrainMode::kJoint, seed, ds, spec, &bundle).report.recall_at(10));
      transfer.push_back(
          run_training(TrainMode::kJoint, seed, ds, spec, &bundle, base.session.main.get()).report.recall_at(10));
      std::fprintf(stderr, "  %s seed %llu: stage1 %.2f joint %.2f transfer %.2f\n", kind.c_str(),
                   static_cast<unsigned long long>(seed), stage1.back(), joint.back(), transfer.back());
    }
    const bool holds = mean(joint) >= mean(stage1) - 0.5 * sample_std(stage1) && mean(transfer) >= mean(stage1);
    ok = ok && holds;
    detail += fmt("%s%s R@10 stage1 %.2f (sd %.2f), joint %.2f, transfer %.2f", detail.empty() ? "" : "; ",
                  kind.c_str(), mean(stage1), sample_std(stage1), mean(joint), mean(transfer));
    data[kind] = {{"stage1", stage1}, {"joint", joint}, {"transfer", transfer}};
  }
  return {ok, detail, data};
}

// ---------------------------------------------------------------------------
// CLI helpers for 9 and 11

class Workdir {
 public:
  Workdir() {
    path_ = fs::temp_directory_path() / ("cgl_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Workdir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(CGL_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Small pipeline shared by 9 and 11.
struct Pipeline {
  std::string data, stage1, graph, joint;
};

std::vector<std::pair<std::string, std::string>> pipeline_commands(const fs::path& root, Pipeline& p) {
  p.data = (root / "data").string();
  p.stage1 = (root / "stage1").string();
  p.graph = (root / "graph.bin").string();
  p.joint = (root / "joint").string();
  const std::string data = " --data " + p.data;
  return {
      {"gen-data", "gen-data --out " + p.data + " --items 128 --triplets 192 --eval-triplets 64 --seed 5"},
      {"train stage1", "train" + data + " --out " + p.stage1 + " --epochs 3 --seed 5"},
      {"build-graph", "build-graph" + data + " --checkpoint " + p.stage1 + "/checkpoint.bin --out " + p.graph},
      {"train joint", "train" + data + " --out " + p.joint + " --mode joint --graph " + p.graph + " --epochs 2 --seed 5"},
      {"train linear-bce", "train" + data + " --out " + (root / "linear").string() + " --mode linear-bce --graph " +
                               p.graph + " --epochs 2 --seed 5"},
      {"train pseudo-pairs",
       "train" + data + " --out " + (root / "pseudo").string() + " --mode pseudo-pairs --epochs 2 --seed 5"},
      {"eval", "eval" + data + " --checkpoint " + p.joint + "/checkpoint.bin --out " + (root / "eval").string()},
      {"export-features", "export-features" + data + " --checkpoint " + p.joint +
                              "/checkpoint.bin --samples 20 --out " + (root / "features.csv").string()},
      {"gradcheck", "gradcheck --variant all --gcn --seeds 2 --out " + (root / "gradcheck.json").string()},
  };
}

fs::path manifest_of(const fs::path& root, const std::string& name) {
  static const std::map<std::string, std::string> where = {
      {"gen-data", "data/manifest.json"},          {"train stage1", "stage1/manifest.json"},
      {"build-graph", "graph.bin.manifest.json"},  {"train joint", "joint/manifest.json"},
      {"train linear-bce", "linear/manifest.json"}, {"train pseudo-pairs", "pseudo/manifest.json"},
      {"eval", "eval/manifest.json"},              {"export-features", "features.csv.manifest.json"},
      {"gradcheck", "gradcheck.json.manifest.json"},
  };
  return root / where.at(name);
}

// ---------------------------------------------------------------------------
// 9. Inference parity

Outcome inference_parity() {
  Workdir w;
  Pipeline p;
  const auto commands = pipeline_commands(w.path(), p);
  for (std::size_t i = 0; i < 4; ++i) {
    if (cli(commands[i].second).code != 0) return {false, "pipeline step failed: " + commands[i].first, {}};
  }
  const std::string base = "eval --data " + p.data + " --checkpoint " + p.joint + "/checkpoint.bin --out ";
  const fs::path plain = w.path() / "plain";
  const fs::path stream = w.path() / "stream";
  const CliResult a = cli(base + plain.string());
  const CliResult b = cli(base + stream.string() + " --with-stream --graph " + p.graph);
  if (a.code != 0 || b.code != 0) return {false, "eval failed", {}};
  const std::string ra = io::read_file(plain / "report.json");
  const std::string rb = io::read_file(stream / "report.json");
  const bool same = ra == rb && a.out == b.out && io::read_file(plain / "report.csv") == io::read_file(stream / "report.csv");
  return {same, fmt("joint checkpoint reports %s (sha256 %.12s)", same ? "bitwise identical" : "DIFFER",
                    io::sha256_hex(ra).c_str()),
          {{"report_sha256", io::sha256_hex(ra)}}};
}

// ---------------------------------------------------------------------------
// 10. Appendix baselines

Outcome baselines() {
  const Dataset ds = generate_dataset(default_data(0));
  const GraphBundle bundle = build_graph(ds, "baseline");
  const ComposerSpec spec = spec_for("rtic", ds);
  RunOutput stage1 = run_training(TrainMode::kStage1, 0, ds, spec);
  RunOutput linear = run_training(TrainMode::kLinearBce, 0, ds, spec, &bundle);
  RunOutput pseudo = run_training(TrainMode::kPseudoPairs, 0, ds, spec);

  // Audit of the augmented set: originals first, then swapped pairs.
  const auto& set = pseudo.session.train_set;
  const std::size_t n = ds.train.size();
  bool audit = set.size() == n + pseudo.session.swapped && pseudo.session.swapped > 0;
  for (std::size_t k = 0; k < n && audit; ++k) {
    audit = set[k].source_id == ds.train[k].source_id && set[k].text == ds.train[k].text &&
            set[k].target_id == ds.train[k].target_id;
  }
  std::map<std::pair<std::size_t, std::string>, std::set<std::size_t>> originals;
  std::set<std::size_t> original_targets;
  for (const auto& t : ds.train) {
    std::string text;
    for (const auto& tok : t.text.tokens) text += tok + " ";
    originals[{t.source_id, text}].insert(t.target_id);
    original_targets.insert(t.target_id);
  }
  std::size_t bad = 0;
  for (std::size_t k = n; k < set.size(); ++k) {
    std::string text;
    for (const auto& tok : set[k].text.tokens) text += tok + " ";
    auto it = originals.find({set[k].source_id, text});
    bad += it == originals.end() || it->second.count(set[k].target_id) != 0 ||
           original_targets.count(set[k].target_id) == 0;
  }
  audit = audit && bad == 0;
  const bool finite = linear.finite && pseudo.finite;
  const bool reports = linear.report.queries == ds.eval.size() && pseudo.report.queries == ds.eval.size();
  return {finite && reports && audit,
          fmt("finite losses %s; R@10 stage1 %.2f, linear-bce %.2f, pseudo-pairs %.2f; %zu swapped records, %zu "
              "audit violations",
              finite ? "yes" : "NO", stage1.report.recall_at(10), linear.report.recall_at(10),
              pseudo.report.recall_at(10), pseudo.session.swapped, bad),
          {{"stage1", stage1.report.recall_at(10)},
           {"linear_bce", linear.report.recall_at(10)},
           {"pseudo_pairs", pseudo.report.recall_at(10)},
           {"swapped", pseudo.session.swapped}}};
}

// ---------------------------------------------------------------------------
// 11. Determinism

Outcome determinism() {
  Workdir w;
  Pipeline p;
  const auto commands = pipeline_commands(w.path(), p);
  std::size_t identical = 0;
  std::string differing;
  for (const auto& [name, args] : commands) {
    if (cli(args).code != 0) return {false, "command failed: " + name, {}};
    const json first = json::parse(io::read_file(manifest_of(w.path(), name)))["outputs"];
    if (cli(args).code != 0) return {false, "rerun failed: " + name, {}};
    const json second = json::parse(io::read_file(manifest_of(w.path(), name)))["outputs"];
    if (first == second && !first.empty()) {
      ++identical;
    } else {
      differing += (differing.empty() ? "" : ", ") + name;
    }
  }
  return {identical == commands.size(),
          fmt("%zu/%zu commands rerun with identical output hashes%s%s", identical, commands.size(),
              differing.empty() ? "" : "; differing: ", differing.c_str()),
          {{"commands", commands.size()}, {"identical", identical}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string json_out;
  app.add_option("criteria", only, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 11));
  app.add_option("--json", json_out, "Write the results as JSON");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "gradient correctness", 120, gradient_correctness},
      {2, "row-sum law", 60, row_sum_law},
      {3, "density targeting", 60, density_targeting},
      {4, "gating identities", 60, gating_identities},
      {5, "brute-force oracles", 60, brute_force_oracles},
      {6, "learning works", 15 * 60, learning_works},
      {7, "skip ablation trend", 30 * 60, skip_trend},
      {8, "graph stream trend", 45 * 60, joint_trend},
      {9, "inference parity", 60, inference_parity},
      {10, "baseline modes", 20 * 60, baselines},
      {11, "determinism", 10 * 60, determinism},
  };
  json results = json::array();
  bool ok = true;
  for (const Criterion& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what(), {}};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    ok = ok && pass;
    std::printf("%s criterion %2d %-22s %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
    results.push_back({{"criterion", c.id}, {"name", c.name}, {"pass", pass}, {"seconds", seconds},
                       {"detail", o.detail}, {"data", o.data}});
  }
  if (!json_out.empty()) io::write_file_atomic(json_out, results.dump(2) + "\n");
  return ok ? 0 : 1;
}
