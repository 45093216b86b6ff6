// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "cgl/error.hpp"
#include "cgl/ops.hpp"
#include "cgl/optim.hpp"

namespace cgl {

using nlohmann::json;

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kStage1: return "stage1";
    case TrainMode::kJoint: return "joint";
    case TrainMode::kLinearBce: return "linear-bce";
    case TrainMode::kPseudoPairs: return "pseudo-pairs";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "stage1") return TrainMode::kStage1;
  if (name == "joint") return TrainMode::kJoint;
  if (name == "linear-bce" || name == "linear_bce") return TrainMode::kLinearBce;
  if (name == "pseudo-pairs" || name == "pseudo_pairs") return TrainMode::kPseudoPairs;
  throw ValidationError("unknown training mode '" + name + "'");
}

std::string to_string(InitFrom init) { return init == InitFrom::kScratch ? "scratch" : "transfer"; }

InitFrom init_from_string(const std::string& name) {
  if (name == "scratch") return InitFrom::kScratch;
  if (name == "transfer") return InitFrom::kTransfer;
  throw ValidationError("unknown init '" + name + "', expected scratch or transfer");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ValidationError("batch size must be at least 2");
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  if (lr_step < 1) throw ValidationError("lr step size must be positive");
  if (!(lambda_pair >= 0.0 && lambda_bce >= 0.0)) throw ValidationError("loss weights must be non-negative");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (gcn_depth < 1) throw ValidationError("GCN depth must be at least 1");
  if (!(pseudo_pair_threshold > 0.0 && pseudo_pair_threshold <= 1.0)) {
    throw ValidationError("pseudo-pair threshold must lie in (0, 1]");
  }
}

double TrainConfig::lr_at(std::size_t epoch) const { return step_lr(lr, epoch, lr_step, lr_factor); }

json TrainConfig::to_json() const {
  return {{"mode", to_string(mode)},
          {"init_from", to_string(init_from)},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"lr", lr},
          {"lr_policy", {{"type", "step"}, {"step_size", lr_step}, {"factor", lr_factor}}},
          {"lambda_pair", lambda_pair},
          {"lambda_bce", lambda_bce},
          {"temperature", temperature},
          {"seed", seed},
          {"gcn_depth", gcn_depth},
          {"gcn_hidden", gcn_hidden},
          {"pseudo_pair_threshold", pseudo_pair_threshold},
          {"evaluate_each_epoch", evaluate_each_epoch}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.mode = train_mode_from_string(j.at("mode").get<std::string>());
  c.init_from = init_from_string(j.at("init_from").get<std::string>());
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.lr_step = j.at("lr_policy").at("step_size").get<std::size_t>();
  c.lr_factor = j.at("lr_policy").at("factor").get<double>();
  c.lambda_pair = j.at("lambda_pair").get<double>();
  c.lambda_bce = j.at("lambda_bce").get<double>();
  c.temperature = j.at("temperature").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.gcn_depth = j.at("gcn_depth").get<std::size_t>();
  c.gcn_hidden = j.at("gcn_hidden").get<std::size_t>();
  c.pseudo_pair_threshold = j.at("pseudo_pair_threshold").get<double>();
  c.evaluate_each_epoch = j.at("evaluate_each_epoch").get<bool>();
  c.validate();
  return c;
}

Var dml_loss(const Var& composed, const Var& targets, double temperature) {
  if (composed.shape() != targets.shape()) {
    throw DimensionError("dml_loss shapes differ: " + shape_string(composed.shape()) + " vs " +
                         shape_string(targets.shape()));
  }
  const std::size_t b = composed.value().rows();
  if (b < 2) throw ValidationError("dml_loss needs a batch of at least 2");
  Var logits = scale(matmul_transposed(l2_normalize_rows(composed), l2_normalize_rows(targets)), temperature);
  std::vector<std::size_t> diagonal(b);
  std::iota(diagonal.begin(), diagonal.end(), std::size_t{0});
  return softmax_cross_entropy_rows(logits, diagonal);
}

std::vector<std::vector<std::size_t>> batch_sample(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1 || batch_size > n) {
    throw ValidationError("batch size " + std::to_string(batch_size) + " must lie in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    if (end - begin < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::pair<TripletRecord, TripletRecord> swap_targets(const TripletRecord& a, const TripletRecord& b) {
  TripletRecord x = a;
  TripletRecord y = b;
  x.target_id = b.target_id;
  y.target_id = a.target_id;
  return {x, y};
}

PseudoPairResult generate_pseudo_pairs(std::span<const TripletRecord> triplets, const Tensor& item_features,
                                       double threshold, std::size_t quota) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("pseudo-pair threshold must lie in (0, 1]");
  const std::size_t n = triplets.size();
  if (quota == 0) quota = n;
  PseudoPairResult out;
  out.triplets.assign(triplets.begin(), triplets.end());
  if (n >= 2) {
    std::vector<std::size_t> targets;
    for (const auto& t : triplets) targets.push_back(t.target_id);
    const RawCorrelations raw = target_correlations(gather_rows(item_features, targets));
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (triplets[i].target_id == triplets[j].target_id) continue;
        const double s = raw.matrix.at(i, j);
        if (s >= threshold) pairs.emplace_back(s, i, j);
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      return std::make_pair(std::get<1>(a), std::get<2>(a)) < std::make_pair(std::get<1>(b), std::get<2>(b));
    });
    for (const auto& [s, i, j] : pairs) {
      if (out.swapped + 2 > quota) break;
      auto [x, y] = swap_targets(triplets[i], triplets[j]);
      out.triplets.push_back(x);
      out.triplets.push_back(y);
      out.swapped += 2;
      out.lowest_similarity = s;
    }
  }
  if (out.swapped == 0) out.warnings.push_back("no triplet pairs reach the similarity threshold");
  for (std::size_t k = 0; k < out.triplets.size(); ++k) out.triplets[k].key = k;
  return out;
}

json EpochRecord::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"epoch", epoch}, {"lr", lr}, {"loss_pair", opt(loss_pair)}, {"loss_bce", opt(loss_bce)},
         {"loss_final", opt(loss_final)}};
  for (std::size_t k : {1, 5, 10}) {
    j["recall@" + std::to_string(k)] = report ? json(report->recall_at(k)) : json(nullptr);
  }
  if (report && report->composite) j["composite"] = *report->composite;
  return j;
}

ComposerSpec ComposerSpec::rtic(char variant, std::size_t d_v, std::size_t d_t) {
  return {"rtic", ComposerConfig::variant(variant, d_v, d_t).to_json()};
}

ComposerSpec ComposerSpec::tirg(std::size_t d_v, std::size_t d_t) {
  TirgConfig c;
  c.d_v = d_v;
  c.d_t = d_t;
  return {"tirg", c.to_json()};
}

std::vector<Parameter*> Session::parameters() {
  std::vector<Parameter*> out = main->parameters();
  if (aux) {
    auto more = aux->parameters();
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

Session make_session(const TrainConfig& config, const Dataset& ds, const ComposerSpec& main_spec,
                     const GraphBundle* bundle, Composer* transfer_source, std::optional<ComposerSpec> stream) {
  config.validate();
  Session s;
  s.config = config;
  Rng main_rng(config.seed, "composer.main");
  s.main = make_composer(main_spec.kind, main_spec.config, main_rng);
  if (s.main->image_dim() != ds.config.image_dim || s.main->text_dim() != ds.config.text_dim) {
    throw ValidationError("composer dimensions do not match the dataset features");
  }
  if (config.init_from == InitFrom::kTransfer) {
    if (!transfer_source) throw UsageError("init from transfer requires a stage-1 checkpoint");
    transfer_weights(*transfer_source, *s.main);
  }

  const bool graph_mode = config.mode == TrainMode::kJoint || config.mode == TrainMode::kLinearBce;
  if (graph_mode) {
    if (!bundle) throw UsageError(to_string(config.mode) + " training requires a graph bundle");
    if (fingerprint_dataset_part(bundle->fingerprint) != dataset_fingerprint(ds)) {
      throw ValidationError("graph bundle was built from a different dataset (stale graph " + bundle->fingerprint + ")");
    }
    if (bundle->n != ds.train.size() || bundle->d_v != ds.config.image_dim || bundle->d_t != ds.config.text_dim) {
      throw ValidationError("graph bundle does not match the training split");
    }
    s.labels = bundle->lambda_prime;
    s.graph_fingerprint = bundle->fingerprint;
  }
  if (config.mode == TrainMode::kJoint) {
    s.stream_spec = stream.value_or(main_spec);
    Rng stream_rng(config.seed, "composer.stream");
    auto composer = make_composer(s.stream_spec->kind, s.stream_spec->config, stream_rng);
    Rng gcn_rng(config.seed, "gcn");
    s.aux = std::make_unique<GcnStream>(*bundle, std::move(composer), gcn_rng, config.gcn_depth, config.gcn_hidden);
  } else if (config.mode == TrainMode::kLinearBce) {
    Rng head_rng(config.seed, "linear_head");
    s.aux = std::make_unique<LinearHead>(bundle->n, bundle->d_v, head_rng);
  }

  if (config.mode == TrainMode::kPseudoPairs) {
    PseudoPairResult pp = generate_pseudo_pairs(ds.train, encode_items(ds), config.pseudo_pair_threshold);
    s.train_set = std::move(pp.triplets);
    s.swapped = pp.swapped;
    s.warnings = std::move(pp.warnings);
  } else {
    s.train_set = ds.train;
  }
  if (config.batch_size > s.train_set.size()) {
    throw ValidationError("batch size exceeds the number of training triplets");
  }
  return s;
}

TrainResult train(Session& s, const Dataset& ds, const TrainHooks& hooks) {
  const TrainConfig& cfg = s.config;
  const Tensor items = encode_items(ds);
  const Tensor texts = encode_texts(ds, s.train_set);
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;
  for (const auto& t : s.train_set) {
    sources.push_back(t.source_id);
    targets.push_back(t.target_id);
  }
  const GalleryIndex index = build_index(items);
  std::vector<Parameter*> params = s.parameters();
  zero_grad(params);

  TrainResult result;
  auto evaluate_now = [&](EpochRecord& rec) {
    if (cfg.evaluate_each_epoch && !ds.eval.empty()) {
      rec.report = evaluate(*s.main, ds, ds.eval, index);
    }
  };
  auto emit = [&](EpochRecord rec) {
    if (hooks.on_epoch) hooks.on_epoch(rec);
    result.log.push_back(std::move(rec));
  };

  EpochRecord initial;
  initial.epoch = 0;
  initial.lr = cfg.lr_at(0);
  evaluate_now(initial);
  emit(std::move(initial));

  Rng batch_rng(cfg.seed, "batches");
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    s.main->set_mode(Mode::kTrain);
    if (s.aux) s.aux->set_mode(Mode::kTrain);
    double sum_pair = 0.0;
    double sum_bce = 0.0;
    double sum_final = 0.0;
    const auto batches = batch_sample(s.train_set.size(), cfg.batch_size, batch_rng);
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const auto& keys = batches[step];
      std::vector<std::size_t> src_rows;
      std::vector<std::size_t> trg_rows;
      for (std::size_t k : keys) {
        src_rows.push_back(sources[k]);
        trg_rows.push_back(targets[k]);
      }
      Var composed = s.main->compose(Var(gather_rows(items, src_rows)), Var(gather_rows(texts, keys)));
      Var l_pair = dml_loss(composed, Var(gather_rows(items, trg_rows)), cfg.temperature);
      Var l_final = scale(l_pair, cfg.lambda_pair);
      double bce_value = 0.0;
      if (s.aux) {
        Var logits = node_logits(composed, s.aux->forward());
        Var l_bce = bce_with_logits(logits, pseudo_labels(s.labels, keys));
        bce_value = l_bce.value()[0];
        l_final = add(l_final, scale(l_bce, cfg.lambda_bce));
      }
      const double final_value = l_final.value()[0];
      if (!std::isfinite(final_value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + " step " +
                             std::to_string(step));
      }
      l_final.backward();
      sgd_step(params, lr);

      StepRecord rec{epoch + 1, step, lr, l_pair.value()[0], bce_value, final_value};
      sum_pair += rec.loss_pair;
      sum_bce += rec.loss_bce;
      sum_final += rec.loss_final;
      if (hooks.on_step) hooks.on_step(rec);
      result.steps.push_back(rec);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    const double count = static_cast<double>(std::max<std::size_t>(1, batches.size()));
    rec.loss_pair = sum_pair / count;
    rec.loss_bce = sum_bce / count;
    rec.loss_final = sum_final / count;
    evaluate_now(rec);
    emit(std::move(rec));
  }
  s.main->set_mode(Mode::kEval);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

io::Archive checkpoint_archive(Session& s, const json& extra) {
  io::Archive archive;
  archive.kind = io::Archive::Kind::kCheckpoint;
  json meta{{"main", describe(*s.main)}, {"train_config", s.config.to_json()}};
  if (auto* stream = dynamic_cast<GcnStream*>(s.aux.get())) {
    meta["aux"] = {{"type", "gcn"},
                   {"composer", describe(stream->composer())},
                   {"depth", s.config.gcn_depth},
                   {"hidden", s.config.gcn_hidden}};
  } else if (s.aux) {
    meta["aux"] = {{"type", "linear"}};
  } else {
    meta["aux"] = nullptr;
  }
  if (!s.graph_fingerprint.empty()) meta["graph_fingerprint"] = s.graph_fingerprint;
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  archive.metadata = meta.dump();
  export_state(*s.main, "main", archive);
  if (s.aux) export_state(*s.aux, "stream", archive);
  return archive;
}

void write_checkpoint(Session& s, const std::filesystem::path& path, const json& extra) {
  io::write_file_atomic(path, checkpoint_archive(s, extra).serialize());
}

LoadedCheckpoint load_checkpoint_archive(io::Archive archive) {
  if (archive.kind != io::Archive::Kind::kCheckpoint) throw ValidationError("archive is not a checkpoint");
  LoadedCheckpoint out;
  try {
    out.metadata = json::parse(archive.metadata);
    out.main = composer_from_description(out.metadata.at("main"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad checkpoint metadata: ") + e.what());
  }
  import_state(*out.main, "main", archive);
  out.main->set_mode(Mode::kEval);
  out.archive = std::move(archive);
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return load_checkpoint_archive(io::Archive::parse(io::read_file(path), path.string()));
}

std::unique_ptr<NodeProjection> load_auxiliary(const LoadedCheckpoint& ckpt, const GraphBundle& bundle) {
  const json& aux = ckpt.metadata.at("aux");
  if (aux.is_null()) throw ValidationError("checkpoint has no auxiliary branch");
  Rng placeholder(0, "restore");
  std::unique_ptr<NodeProjection> out;
  if (aux.at("type") == "gcn") {
    out = std::make_unique<GcnStream>(bundle, composer_from_description(aux.at("composer")), placeholder,
                                      aux.at("depth").get<std::size_t>(), aux.at("hidden").get<std::size_t>());
  } else {
    out = std::make_unique<LinearHead>(bundle.n, bundle.d_v, placeholder);
  }
  import_state(*out, "stream", ckpt.archive);
  out->set_mode(Mode::kEval);
  return out;
}

}  // namespace cgl
