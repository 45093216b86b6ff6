// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: dataset generation, training, graph construction,
// evaluation, feature export and gradient checks.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cgl/checks.hpp"
#include "cgl/error.hpp"
#include "cgl/evaluator.hpp"
#include "cgl/graph.hpp"
#include "cgl/io.hpp"
#include "cgl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;
namespace io = cgl::io;

/// One manifest per invocation: resolved configuration plus input/output hashes.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : start_(Clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  json& operator[](const std::string& key) { return j_[key]; }
  void input(const fs::path& path) { j_["inputs"][path.string()] = io::sha256_file(path); }
  void output(const fs::path& path) { j_["outputs"][path.string()] = io::sha256_file(path); }

  void write(const fs::path& path) {
    j_["wall_clock_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    io::write_file_atomic(path, j_.dump(2) + "\n");
  }

 private:
  json j_;
  Clock::time_point start_;
};

std::uint64_t resolve_seed(std::uint64_t flag) {
  const char* env = std::getenv("CGL_SEED");
  if (!env || !*env) return flag;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw cgl::UsageError(std::string("CGL_SEED is not an integer: ") + env);
  return v;
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw cgl::UsageError(what + " not found: " + path.string());
}

void require_dir(const fs::path& path, const std::string& what) {
  if (!fs::is_directory(path)) throw cgl::UsageError(what + " not found: " + path.string());
}

cgl::Dataset load_dataset(const fs::path& dir, Manifest& manifest) {
  require_dir(dir, "dataset directory");
  for (const char* name : {cgl::files::kItems, cgl::files::kTrain, cgl::files::kEval, cgl::files::kVocab,
                           cgl::files::kEncoders}) {
    require_file(dir / name, "dataset file");
    manifest.input(dir / name);
  }
  return cgl::read_dataset(dir);
}

void make_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw cgl::UsageError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string out;
  cgl::DatasetConfig config;
};

int gen_data(GenDataArgs& a, Manifest& manifest) {
  a.config.seed = resolve_seed(a.config.seed);
  cgl::Dataset ds = cgl::generate_dataset(a.config);
  const std::size_t bad = cgl::count_inconsistent(ds, ds.train) + cgl::count_inconsistent(ds, ds.eval);
  if (bad) throw cgl::ValidationError(std::to_string(bad) + " generated triplets are inconsistent");

  const fs::path out(a.out);
  make_output_dir(out);
  cgl::write_dataset(ds, out);
  for (const char* name : {cgl::files::kItems, cgl::files::kTrain, cgl::files::kEval, cgl::files::kVocab,
                           cgl::files::kEncoders}) {
    manifest.output(out / name);
  }
  manifest["seed"] = a.config.seed;
  manifest["config"] = {{"items", a.config.items},
                        {"train_triplets", a.config.train_triplets},
                        {"eval_triplets", a.config.eval_triplets},
                        {"changes_per_text", a.config.changes_per_text},
                        {"image_dim", a.config.image_dim},
                        {"text_dim", a.config.text_dim},
                        {"noise_scale", a.config.noise_scale}};
  manifest.write(out / "manifest.json");
  std::printf("wrote %zu items, %zu train and %zu eval triplets to %s\n", ds.items.size(), ds.train.size(),
              ds.eval.size(), out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string mode = "stage1";
  std::string composer = "rtic";
  std::string stream_composer;
  std::string variant = "d";
  std::string init = "scratch";
  std::string init_checkpoint;
  std::string graph;
  cgl::TrainConfig config;
};

cgl::ComposerSpec composer_spec(const std::string& kind, const std::string& variant, const cgl::Dataset& ds) {
  if (kind == "rtic") {
    if (variant.size() != 1) throw cgl::UsageError("--variant must be one of a..e");
    return cgl::ComposerSpec::rtic(variant[0], ds.config.image_dim, ds.config.text_dim);
  }
  if (kind == "tirg") return cgl::ComposerSpec::tirg(ds.config.image_dim, ds.config.text_dim);
  throw cgl::UsageError("--composer must be rtic or tirg");
}

int train(TrainArgs& a, Manifest& manifest) {
  cgl::TrainConfig cfg = a.config;
  cfg.seed = resolve_seed(cfg.seed);
  try {
    cfg.mode = cgl::train_mode_from_string(a.mode);
    cfg.init_from = cgl::init_from_string(a.init);
  } catch (const cgl::ValidationError& e) {
    throw cgl::UsageError(e.what());
  }
  const bool graph_mode = cfg.mode == cgl::TrainMode::kJoint || cfg.mode == cgl::TrainMode::kLinearBce;
  if (graph_mode && a.graph.empty()) throw cgl::UsageError("--mode " + a.mode + " requires --graph");
  if (cfg.init_from == cgl::InitFrom::kTransfer && a.init_checkpoint.empty()) {
    throw cgl::UsageError("--init transfer requires --init-checkpoint");
  }

  cgl::Dataset ds = load_dataset(a.data, manifest);
  const cgl::ComposerSpec main_spec = composer_spec(a.composer, a.variant, ds);
  std::optional<cgl::ComposerSpec> stream_spec;
  if (!a.stream_composer.empty()) stream_spec = composer_spec(a.stream_composer, a.variant, ds);

  std::optional<cgl::GraphBundle> bundle;
  if (graph_mode) {
    require_file(a.graph, "graph bundle");
    manifest.input(a.graph);
    bundle = cgl::read_graph(a.graph);
  }
  std::optional<cgl::LoadedCheckpoint> source;
  if (cfg.init_from == cgl::InitFrom::kTransfer) {
    require_file(a.init_checkpoint, "initial checkpoint");
    manifest.input(a.init_checkpoint);
    source = cgl::load_checkpoint(a.init_checkpoint);
  }
  cgl::Session session = cgl::make_session(cfg, ds, main_spec, bundle ? &*bundle : nullptr,
                                           source ? source->main.get() : nullptr, stream_spec);
  for (const auto& w : session.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  const fs::path out(a.out);
  const fs::path ckpt_dir = out / "checkpoints";
  make_output_dir(ckpt_dir);
  const fs::path metrics_path = out / "metrics.jsonl";
  const fs::path steps_path = out / "steps.jsonl";
  std::string metrics;
  std::string steps;
  std::vector<fs::path> epoch_checkpoints;

  cgl::TrainHooks hooks;
  hooks.on_step = [&](const cgl::StepRecord& r) {
    steps += json{{"epoch", r.epoch},           {"step", r.step},         {"lr", r.lr},
                  {"loss_pair", r.loss_pair},   {"loss_bce", r.loss_bce}, {"loss_final", r.loss_final}}
                 .dump() +
             "\n";
  };
  hooks.on_epoch = [&](const cgl::EpochRecord& r) {
    metrics += r.to_json().dump() + "\n";
    io::write_file_atomic(metrics_path, metrics);
    if (r.epoch > 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu.bin", r.epoch);
      epoch_checkpoints.push_back(ckpt_dir / name);
      cgl::write_checkpoint(session, epoch_checkpoints.back(), {{"epoch", r.epoch}});
    }
    std::fprintf(stderr, "epoch %zu lr %.6g loss %s recall@10 %s\n", r.epoch, r.lr,
                 r.loss_final ? std::to_string(*r.loss_final).c_str() : "-",
                 r.report ? std::to_string(r.report->recall_at(10)).c_str() : "-");
  };
  const cgl::TrainResult result = cgl::train(session, ds, hooks);

  const fs::path final_path = out / "checkpoint.bin";
  cgl::write_checkpoint(session, final_path, {{"epoch", cfg.epochs}});
  io::write_file_atomic(steps_path, steps);

  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_json();
  manifest["composer"] = {{"kind", main_spec.kind}, {"config", main_spec.config}};
  if (session.stream_spec) {
    manifest["stream_composer"] = {{"kind", session.stream_spec->kind}, {"config", session.stream_spec->config}};
  }
  manifest["train_triplets"] = session.train_set.size();
  if (cfg.mode == cgl::TrainMode::kPseudoPairs) {
    manifest["augmented_triplets"] = session.train_set.size();
    manifest["swapped_records"] = session.swapped;
  }
  if (!result.log.empty() && result.log.back().report) {
    manifest["final_report"] = result.log.back().report->to_json(false);
  }
  manifest.output(final_path);
  manifest.output(metrics_path);
  manifest.output(steps_path);
  for (const auto& p : epoch_checkpoints) manifest.output(p);
  manifest.write(out / "manifest.json");
  std::printf("trained %zu epochs (%s), checkpoint %s\n", cfg.epochs, a.mode.c_str(), final_path.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// build-graph

struct GraphArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  double density = 0.15;
  std::string normalization = "symmetric";
};

int build_graph(GraphArgs& a, Manifest& manifest) {
  cgl::GraphOptions options;
  options.density = a.density;
  try {
    options.normalization = cgl::normalization_from_string(a.normalization);
  } catch (const cgl::ValidationError& e) {
    throw cgl::UsageError(e.what());
  }
  if (!(a.density > 0.0 && a.density < 1.0)) throw cgl::UsageError("--density must lie in (0, 1)");
  if (a.checkpoint.empty()) throw cgl::UsageError("build-graph requires --checkpoint (stage-1 output)");
  require_file(a.checkpoint, "stage-1 checkpoint");
  cgl::Dataset ds = load_dataset(a.data, manifest);
  manifest.input(a.checkpoint);
  cgl::load_checkpoint(a.checkpoint);  // must be a readable checkpoint

  const cgl::GraphBundle bundle = cgl::build_graph(ds, io::sha256_file(a.checkpoint), options);
  for (const auto& w : bundle.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const fs::path out(a.out);
  if (out.has_parent_path()) make_output_dir(out.parent_path());
  cgl::write_graph(bundle, out);

  const double achieved = bundle.mean_degree / static_cast<double>(bundle.n);
  manifest["config"] = {{"density", a.density}, {"normalization", a.normalization}};
  manifest["graph"] = {{"nodes", bundle.n},
                       {"tau", bundle.tau},
                       {"mean_degree", bundle.mean_degree},
                       {"target_degree", a.density * static_cast<double>(bundle.n)},
                       {"achieved_density", achieved},
                       {"fingerprint", bundle.fingerprint}};
  manifest.output(out);
  fs::path manifest_path = out;
  manifest_path += ".manifest.json";
  manifest.write(manifest_path);
  std::printf("N %zu\ntau %.17g\nmean degree %.6f (target %.6f)\nachieved density %.6f\n", bundle.n, bundle.tau,
              bundle.mean_degree, a.density * static_cast<double>(bundle.n), achieved);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string data;
  std::vector<std::string> checkpoints;
  std::size_t seeds = 1;
  std::string split = "eval";
  std::string out;
  std::string graph;
  bool with_stream = false;
  bool oracle = false;
};

int eval(EvalArgs& a, Manifest& manifest) {
  if (a.split != "eval" && a.split != "train") throw cgl::UsageError("--split must be eval or train");
  if (a.oracle && !a.checkpoints.empty()) throw cgl::UsageError("--oracle takes no --checkpoint");
  if (!a.oracle) {
    if (a.checkpoints.empty()) throw cgl::UsageError("eval requires --checkpoint (or --oracle)");
    if (a.seeds != a.checkpoints.size()) {
      throw cgl::UsageError("--seeds " + std::to_string(a.seeds) + " needs that many checkpoints, got " +
                            std::to_string(a.checkpoints.size()));
    }
    for (const auto& c : a.checkpoints) require_file(c, "checkpoint");
  }
  if (a.with_stream && a.graph.empty()) throw cgl::UsageError("--with-stream requires --graph");

  cgl::Dataset ds = load_dataset(a.data, manifest);
  const auto& triplets = a.split == "eval" ? ds.eval : ds.train;
  const cgl::GalleryIndex index = cgl::build_index(ds);
  std::optional<cgl::GraphBundle> bundle;
  if (a.with_stream) {
    require_file(a.graph, "graph bundle");
    manifest.input(a.graph);
    bundle = cgl::read_graph(a.graph);
  }

  std::vector<cgl::RetrievalReport> reports;
  if (a.oracle) {
    std::vector<std::size_t> targets;
    for (const auto& t : triplets) targets.push_back(t.target_id);
    reports.push_back(cgl::evaluate_features(cgl::gather_rows(cgl::encode_items(ds), targets), targets, index, {}));
    reports.back().echo = {{"composer", "oracle"}, {"split", a.split}};
  } else {
    for (const auto& path : a.checkpoints) {
      manifest.input(path);
      cgl::LoadedCheckpoint ckpt = cgl::load_checkpoint(path);
      std::unique_ptr<cgl::NodeProjection> aux;
      if (bundle) aux = cgl::load_auxiliary(ckpt, *bundle);
      reports.push_back(cgl::evaluate(*ckpt.main, ds, triplets, index));
      reports.back().echo = {{"checkpoint", path}, {"split", a.split}, {"composer", cgl::describe(*ckpt.main)}};
      if (aux) std::fprintf(stderr, "constructed graph stream with %zu parameters\n", aux->parameters().size());
    }
  }

  json result;
  if (reports.size() == 1) {
    result = reports.front().to_json(false);
  } else {
    result = {{"runs", reports.size()}, {"summary", cgl::summarize(reports)}};
  }
  if (!a.out.empty()) {
    const fs::path out(a.out);
    make_output_dir(out);
    std::string csv = reports.front().csv_header() + "\n";
    for (const auto& r : reports) csv += r.csv_row() + "\n";
    io::write_file_atomic(out / "report.csv", csv);
    manifest.output(out / "report.csv");
    if (reports.size() == 1) {
      io::write_file_atomic(out / "report.json", reports.front().to_json().dump(2) + "\n");
      manifest.output(out / "report.json");
    } else {
      json all = json::array();
      for (const auto& r : reports) all.push_back(r.to_json());
      io::write_file_atomic(out / "reports.json", all.dump(2) + "\n");
      io::write_file_atomic(out / "summary.json", result.dump(2) + "\n");
      manifest.output(out / "reports.json");
      manifest.output(out / "summary.json");
    }
    manifest["config"] = {{"split", a.split}, {"seeds", a.seeds}, {"oracle", a.oracle}, {"with_stream", a.with_stream}};
    manifest.write(out / "manifest.json");
  }
  std::cout << result.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// export-features

struct ExportArgs {
  std::string data;
  std::string checkpoint;
  std::string block = "composed";
  std::string label_attribute = "color";
  std::size_t samples = 250;
  std::uint64_t seed = 0;
  std::string out;
};

int export_features(ExportArgs& a, Manifest& manifest) {
  if (a.block != "composed" && a.block != "error_encoding") {
    throw cgl::UsageError("--block must be composed or error_encoding, got '" + a.block + "'");
  }
  if (a.checkpoint.empty()) throw cgl::UsageError("export-features requires --checkpoint");
  require_file(a.checkpoint, "checkpoint");
  a.seed = resolve_seed(a.seed);
  cgl::Dataset ds = load_dataset(a.data, manifest);
  manifest.input(a.checkpoint);
  cgl::LoadedCheckpoint ckpt = cgl::load_checkpoint(a.checkpoint);

  const auto& attrs = ds.config.attributes;
  auto attr = std::find_if(attrs.begin(), attrs.end(), [&](const auto& s) { return s.name == a.label_attribute; });
  if (attr == attrs.end()) throw cgl::UsageError("unknown attribute '" + a.label_attribute + "'");
  if (a.samples < 1 || a.samples > ds.items.size()) {
    throw cgl::UsageError("--samples must lie in [1, " + std::to_string(ds.items.size()) + "]");
  }

  std::vector<std::size_t> pool(ds.items.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  cgl::Rng rng(a.seed, "export");
  rng.shuffle(std::span<std::size_t>(pool));
  pool.resize(a.samples);
  std::sort(pool.begin(), pool.end());

  std::vector<cgl::TripletRecord> queries;
  std::vector<std::string> labels;
  for (std::size_t value = 0; value < attr->values.size(); ++value) {
    for (std::size_t item : pool) {
      queries.push_back({queries.size(), item, item, cgl::change_text(*attr, value)});
      labels.push_back(attr->values[value]);
    }
  }
  const cgl::Tensor features = a.block == "composed" ? cgl::compose_queries(*ckpt.main, ds, queries)
                                                     : cgl::residual_features(*ckpt.main, ds, queries);
  std::string csv = "item_id,label";
  for (std::size_t d = 0; d < features.cols(); ++d) csv += ",f" + std::to_string(d);
  csv += "\n";
  char buf[40];
  for (std::size_t r = 0; r < queries.size(); ++r) {
    csv += std::to_string(queries[r].source_id) + "," + labels[r];
    for (double v : features.row(r)) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      csv += buf;
    }
    csv += "\n";
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) make_output_dir(out.parent_path());
  io::write_file_atomic(out, csv);
  manifest["seed"] = a.seed;
  manifest["config"] = {{"block", a.block}, {"label_attribute", a.label_attribute}, {"samples", a.samples}};
  manifest["rows"] = queries.size();
  manifest.output(out);
  fs::path manifest_path = out;
  manifest_path += ".manifest.json";
  manifest.write(manifest_path);
  std::printf("wrote %zu rows (%zu items x %zu labels) to %s\n", queries.size(), pool.size(), attr->values.size(),
              out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string composer = "rtic";
  std::string variant = "d";
  bool gcn = false;
  std::size_t seeds = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  double corrupt = 1.0;
  std::string out;
};

int gradcheck(GradcheckArgs& a, Manifest& manifest) {
  std::string variants = a.variant == "all" ? "abcde" : a.variant;
  if (a.composer == "tirg") variants = "-";
  if (a.composer != "rtic" && a.composer != "tirg") throw cgl::UsageError("--composer must be rtic or tirg");
  for (char v : variants) {
    if (a.composer == "rtic" && (v < 'a' || v > 'e')) throw cgl::UsageError("--variant must be a..e or all");
  }
  if (a.seeds < 1) throw cgl::UsageError("--seeds must be positive");
  a.seed = resolve_seed(a.seed);

  cgl::GradcheckOptions options;
  options.tolerance = a.tolerance;
  options.corrupt_first = a.corrupt;
  json runs = json::array();
  bool ok = true;
  auto record = [&](const std::string& target, std::uint64_t seed, const cgl::GradcheckReport& r) {
    ok = ok && r.passed();
    runs.push_back({{"target", target}, {"seed", seed}, {"max_rel_error", r.max_rel_error()},
                    {"passed", r.passed()}, {"failing", r.failing()}});
    std::printf("%-10s seed %-4llu max rel error %.3e %s\n", target.c_str(), static_cast<unsigned long long>(seed),
                r.max_rel_error(), r.passed() ? "ok" : "FAILED");
  };
  for (std::size_t s = 0; s < a.seeds; ++s) {
    const std::uint64_t seed = a.seed + s;
    options.seed = seed;
    for (char v : variants) {
      const std::string target = a.composer == "tirg" ? "tirg" : std::string("rtic-") + v;
      record(target, seed, cgl::composer_gradcheck(a.composer, v, seed, options));
    }
    if (a.gcn) record("gcn", seed, cgl::gcn_gradcheck(seed, options));
  }
  if (!a.out.empty()) {
    const fs::path out(a.out);
    if (out.has_parent_path()) make_output_dir(out.parent_path());
    io::write_file_atomic(out, json{{"passed", ok}, {"tolerance", a.tolerance}, {"runs", runs}}.dump(2) + "\n");
    manifest["seed"] = a.seed;
    manifest["config"] = {{"composer", a.composer}, {"variant", a.variant}, {"gcn", a.gcn}, {"seeds", a.seeds},
                          {"tolerance", a.tolerance}, {"corrupt", a.corrupt}};
    manifest.output(out);
    fs::path manifest_path = out;
    manifest_path += ".manifest.json";
    manifest.write(manifest_path);
  }
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? 0 : static_cast<int>(cgl::ErrorKind::kNumerical);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image-text retrieval with a graph-convolutional training stream"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic attribute dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--items", gen.config.items, "Number of items")->capture_default_str();
  gen_cmd->add_option("--triplets", gen.config.train_triplets, "Training triplets")->capture_default_str();
  gen_cmd->add_option("--eval-triplets", gen.config.eval_triplets, "Evaluation triplets")->capture_default_str();
  gen_cmd->add_option("--changes", gen.config.changes_per_text, "Attribute changes per text")->capture_default_str();
  gen_cmd->add_option("--image-dim", gen.config.image_dim, "Image feature width")->capture_default_str();
  gen_cmd->add_option("--text-dim", gen.config.text_dim, "Text feature width")->capture_default_str();
  gen_cmd->add_option("--noise", gen.config.noise_scale, "Item noise relative to the signal norm")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.config.seed, "Random seed (CGL_SEED overrides)")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a composer");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--mode", tr.mode, "stage1 | joint | linear-bce | pseudo-pairs")->capture_default_str();
  train_cmd->add_option("--composer", tr.composer, "rtic | tirg")->capture_default_str();
  train_cmd->add_option("--stream-composer", tr.stream_composer, "Composer of the graph stream (default: --composer)");
  train_cmd->add_option("--variant", tr.variant, "RTIC variant a..e")->capture_default_str();
  train_cmd->add_option("--init", tr.init, "scratch | transfer")->capture_default_str();
  train_cmd->add_option("--init-checkpoint", tr.init_checkpoint, "Stage-1 checkpoint for --init transfer");
  train_cmd->add_option("--graph", tr.graph, "Graph bundle (joint, linear-bce)");
  train_cmd->add_option("--epochs", tr.config.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tr.config.lr)->capture_default_str();
  train_cmd->add_option("--lr-step", tr.config.lr_step, "Epochs between decays")->capture_default_str();
  train_cmd->add_option("--lr-factor", tr.config.lr_factor, "Decay factor")->capture_default_str();
  train_cmd->add_option("--lambda-pair", tr.config.lambda_pair)->capture_default_str();
  train_cmd->add_option("--lambda-bce", tr.config.lambda_bce)->capture_default_str();
  train_cmd->add_option("--temperature", tr.config.temperature, "Ranking loss scale")->capture_default_str();
  train_cmd->add_option("--gcn-depth", tr.config.gcn_depth)->capture_default_str();
  train_cmd->add_option("--gcn-hidden", tr.config.gcn_hidden, "0 = image width")->capture_default_str();
  train_cmd->add_option("--pseudo-threshold", tr.config.pseudo_pair_threshold)->capture_default_str();
  train_cmd->add_option("--seed", tr.config.seed, "Random seed (CGL_SEED overrides)")->capture_default_str();

  GraphArgs gr;
  auto* graph_cmd = app.add_subcommand("build-graph", "Build the correlation graph over training triplets");
  graph_cmd->add_option("--data", gr.data, "Dataset directory")->required();
  graph_cmd->add_option("--checkpoint", gr.checkpoint, "Stage-1 checkpoint");
  graph_cmd->add_option("--out", gr.out, "Output bundle file")->required();
  graph_cmd->add_option("--density", gr.density, "Target fraction of activated edges per node")
      ->capture_default_str();
  graph_cmd->add_option("--normalization", gr.normalization, "symmetric | printed")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval recall");
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoints, "Checkpoint(s), one per seed");
  eval_cmd->add_option("--seeds", ev.seeds, "Number of trained checkpoints to aggregate")->capture_default_str();
  eval_cmd->add_option("--split", ev.split, "eval | train")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Directory for report files");
  eval_cmd->add_option("--graph", ev.graph, "Graph bundle for --with-stream");
  eval_cmd->add_flag("--with-stream", ev.with_stream, "Also construct the graph-stream objects");
  eval_cmd->add_flag("--oracle", ev.oracle, "Use the exact target features as queries");

  ExportArgs ex;
  auto* export_cmd = app.add_subcommand("export-features", "Export intermediate features as CSV");
  export_cmd->add_option("--data", ex.data, "Dataset directory")->required();
  export_cmd->add_option("--checkpoint", ex.checkpoint, "Checkpoint");
  export_cmd->add_option("--block", ex.block, "error_encoding | composed")->capture_default_str();
  export_cmd->add_option("--labels", ex.label_attribute, "Attribute whose values condition the items")
      ->capture_default_str();
  export_cmd->add_option("--samples", ex.samples, "Items sampled")->capture_default_str();
  export_cmd->add_option("--seed", ex.seed, "Sampling seed (CGL_SEED overrides)")->capture_default_str();
  export_cmd->add_option("--out", ex.out, "Output CSV")->required();

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc_cmd->add_option("--composer", gc.composer, "rtic | tirg")->capture_default_str();
  gc_cmd->add_option("--variant", gc.variant, "a..e or all")->capture_default_str();
  gc_cmd->add_flag("--gcn", gc.gcn, "Also check the GCN stack");
  gc_cmd->add_option("--seeds", gc.seeds, "Random problems per target")->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "First seed (CGL_SEED overrides)")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
  gc_cmd->add_option("--corrupt", gc.corrupt, "Scale the first analytic gradient (fault injection)")
      ->capture_default_str();
  gc_cmd->add_option("--out", gc.out, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(cgl::ErrorKind::kUsage);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest(sub->get_name(), argc, argv);
    if (sub == gen_cmd) return gen_data(gen, manifest);
    if (sub == train_cmd) return train(tr, manifest);
    if (sub == graph_cmd) return build_graph(gr, manifest);
    if (sub == eval_cmd) return eval(ev, manifest);
    if (sub == export_cmd) return export_features(ex, manifest);
    if (sub == gc_cmd) return gradcheck(gc, manifest);
  } catch (const cgl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed input: %s\n", e.what());
    return static_cast<int>(cgl::ErrorKind::kValidation);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(cgl::ErrorKind::kNumerical);
  }
  return static_cast<int>(cgl::ErrorKind::kUsage);
}
