// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "cgl/error.hpp"
#include "cgl/io.hpp"
#include "cgl/rng.hpp"

namespace cgl {

using nlohmann::json;

std::vector<AttributeSpec> default_attributes() {
  return {
      {"color", {"yellow", "black", "red", "blue", "green", "brown", "orange", "pink"}},
      {"pattern", {"striped", "dotted", "floral", "plaid", "solid", "checked", "paisley", "graphic"}},
      {"shape", {"shirt", "dress", "toptee", "coat"}},
  };
}

Vocabulary::Vocabulary(std::span<const AttributeSpec> attributes) {
  auto add = [this](const std::string& token) {
    if (lookup_.count(token)) throw ValidationError("duplicate vocabulary token '" + token + "'");
    lookup_[token] = tokens_.size();
    tokens_.push_back(token);
  };
  add("make");
  for (const auto& a : attributes) add(a.name);
  for (const auto& a : attributes) {
    for (const auto& v : a.values) add(v);
  }
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = lookup_.find(token);
  if (it == lookup_.end()) throw ValidationError("out-of-vocabulary token '" + token + "'");
  return it->second;
}

ModificationText change_text(const AttributeSpec& attribute, std::size_t value) {
  return {{"make", attribute.name, attribute.values.at(value)}};
}

std::vector<std::size_t> apply_text(std::span<const AttributeSpec> attributes,
                                    std::span<const std::size_t> source,
                                    const ModificationText& text) {
  std::vector<std::size_t> out(source.begin(), source.end());
  const auto& tokens = text.tokens;
  if (tokens.size() % 3 != 0) throw ValidationError("modification text must be groups of 3 tokens");
  for (std::size_t i = 0; i < tokens.size(); i += 3) {
    if (tokens[i] != "make") throw ValidationError("change must start with 'make'");
    auto attr = std::find_if(attributes.begin(), attributes.end(),
                             [&](const AttributeSpec& a) { return a.name == tokens[i + 1]; });
    if (attr == attributes.end()) throw ValidationError("unknown attribute '" + tokens[i + 1] + "'");
    auto val = std::find(attr->values.begin(), attr->values.end(), tokens[i + 2]);
    if (val == attr->values.end()) {
      throw ValidationError("'" + tokens[i + 2] + "' is not a value of " + attr->name);
    }
    out[static_cast<std::size_t>(attr - attributes.begin())] =
        static_cast<std::size_t>(val - attr->values.begin());
  }
  return out;
}

namespace {

std::size_t combo_count(const std::vector<AttributeSpec>& attributes) {
  std::size_t count = 1;
  for (const auto& a : attributes) count *= a.values.size();
  return count;
}

std::vector<std::size_t> decode_combo(std::size_t code, const std::vector<AttributeSpec>& attributes) {
  std::vector<std::size_t> out(attributes.size());
  for (std::size_t a = attributes.size(); a-- > 0;) {
    out[a] = code % attributes[a].values.size();
    code /= attributes[a].values.size();
  }
  return out;
}

std::size_t encode_combo(std::span<const std::size_t> attrs, const std::vector<AttributeSpec>& attributes) {
  std::size_t code = 0;
  for (std::size_t a = 0; a < attributes.size(); ++a) code = code * attributes[a].values.size() + attrs[a];
  return code;
}

void validate_config(const DatasetConfig& c) {
  if (c.attributes.size() < 2) throw ValidationError("need at least two attributes");
  for (const auto& a : c.attributes) {
    if (a.values.size() < 2) throw ValidationError("attribute '" + a.name + "' needs >= 2 values");
  }
  if (c.items < 2) throw ValidationError("need at least 2 items");
  if (c.train_triplets < 1) throw ValidationError("need at least 1 training triplet");
  if (c.changes_per_text < 1 || c.changes_per_text >= c.attributes.size()) {
    throw ValidationError("changes per text must be >= 1 and below the attribute count");
  }
  if (c.image_dim < 2 || c.text_dim < 1) throw ValidationError("feature dimensions too small");
  if (!(c.noise_scale >= 0.0)) throw ValidationError("noise scale must be non-negative");
}

StubEncoders make_encoders(const DatasetConfig& c, const Vocabulary& vocab) {
  StubEncoders enc;
  enc.seed = c.seed;
  std::size_t total = 0;
  for (const auto& a : c.attributes) {
    enc.attribute_offsets.push_back(total);
    total += a.values.size();
  }
  Rng image_rng(c.seed, "image_projection");
  enc.image_projection = Tensor({c.image_dim, total});
  const double image_scale = 1.0 / std::sqrt(static_cast<double>(c.image_dim));
  for (double& v : enc.image_projection.values()) v = image_rng.normal() * image_scale;

  Rng text_rng(c.seed, "text_projection");
  enc.text_projection = Tensor({c.text_dim, vocab.size()});
  const double text_scale = 1.0 / std::sqrt(static_cast<double>(c.text_dim));
  for (double& v : enc.text_projection.values()) v = text_rng.normal() * text_scale;
  return enc;
}

std::vector<double> attribute_signal(std::span<const std::size_t> attrs, const StubEncoders& enc) {
  const std::size_t dim = enc.image_dim();
  std::vector<double> out(dim, 0.0);
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    const std::size_t col = enc.attribute_offsets[a] + attrs[a];
    for (std::size_t d = 0; d < dim; ++d) out[d] += enc.image_projection.at(d, col);
  }
  return out;
}

void add_item_noise(StubEncoders& enc, const std::vector<Item>& items, double scale, std::uint64_t seed) {
  const std::size_t dim = enc.image_dim();
  enc.item_noise = Tensor({items.size(), dim});
  Rng rng(seed, "item_noise");
  for (const Item& item : items) {
    std::vector<double> signal = attribute_signal(item.attributes, enc);
    std::vector<double> g(dim);
    double gnorm = 0.0;
    double snorm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      g[d] = rng.normal();
      gnorm += g[d] * g[d];
      snorm += signal[d] * signal[d];
    }
    const double factor = gnorm > 0.0 ? scale * std::sqrt(snorm) / std::sqrt(gnorm) : 0.0;
    for (std::size_t d = 0; d < dim; ++d) enc.item_noise.at(item.id, d) = g[d] * factor;
  }
}

void check_distinct_features(const Dataset& ds) {
  Tensor features = encode_items(ds);
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto row_less = [&](std::size_t a, std::size_t b) {
    auto ra = features.row(a);
    auto rb = features.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), row_less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const std::size_t a = order[i - 1];
    const std::size_t b = order[i];
    if (!row_less(a, b) && ds.items[a].attributes != ds.items[b].attributes) {
      throw ValidationError("stub encoder maps items " + std::to_string(a) + " and " +
                            std::to_string(b) + " to the same vector");
    }
  }
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& config) {
  validate_config(config);
  Dataset ds;
  ds.config = config;
  ds.vocabulary = Vocabulary(config.attributes);

  const auto& attrs = config.attributes;
  const std::size_t combos = combo_count(attrs);
  std::vector<std::size_t> combo_order(combos);
  std::iota(combo_order.begin(), combo_order.end(), std::size_t{0});
  Rng item_rng(config.seed, "items");
  item_rng.shuffle(std::span<std::size_t>(combo_order));

  std::map<std::size_t, std::vector<std::size_t>> items_by_combo;
  for (std::size_t i = 0; i < config.items; ++i) {
    const std::size_t code = combo_order[i % combos];
    ds.items.push_back({i, decode_combo(code, attrs)});
    items_by_combo[code].push_back(i);
  }

  ds.encoders = make_encoders(config, ds.vocabulary);
  add_item_noise(ds.encoders, ds.items, config.noise_scale, config.seed);
  check_distinct_features(ds);

  const std::size_t wanted = config.train_triplets + config.eval_triplets;
  const std::size_t max_attempts = 64 * wanted + 4096;
  Rng rng(config.seed, "triplets");
  std::set<std::tuple<std::size_t, std::size_t, std::vector<std::string>>> seen;
  std::vector<TripletRecord> records;
  std::vector<std::size_t> attr_order(attrs.size());
  for (std::size_t attempt = 0; records.size() < wanted; ++attempt) {
    if (attempt >= max_attempts) {
      throw ValidationError("cannot generate " + std::to_string(wanted) +
                            " distinct consistent triplets from this configuration");
    }
    const Item& source = ds.items[rng.below(ds.items.size())];
    std::iota(attr_order.begin(), attr_order.end(), std::size_t{0});
    for (std::size_t i = 0; i < config.changes_per_text; ++i) {
      std::swap(attr_order[i], attr_order[i + rng.below(attrs.size() - i)]);
    }
    std::vector<std::size_t> changed(attr_order.begin(), attr_order.begin() + config.changes_per_text);
    std::sort(changed.begin(), changed.end());

    ModificationText text;
    std::vector<std::size_t> target_attrs = source.attributes;
    for (std::size_t a : changed) {
      const std::size_t card = attrs[a].values.size();
      std::size_t value = rng.below(card - 1);
      if (value >= source.attributes[a]) ++value;
      target_attrs[a] = value;
      auto tokens = change_text(attrs[a], value).tokens;
      text.tokens.insert(text.tokens.end(), tokens.begin(), tokens.end());
    }
    auto candidates = items_by_combo.find(encode_combo(target_attrs, attrs));
    if (candidates == items_by_combo.end()) continue;
    const std::size_t target = candidates->second[rng.below(candidates->second.size())];
    if (!seen.emplace(source.id, target, text.tokens).second) continue;
    records.push_back({0, source.id, target, std::move(text)});
  }

  ds.train.assign(records.begin(), records.begin() + config.train_triplets);
  ds.eval.assign(records.begin() + config.train_triplets, records.end());
  for (std::size_t i = 0; i < ds.train.size(); ++i) ds.train[i].key = i;
  for (std::size_t i = 0; i < ds.eval.size(); ++i) ds.eval[i].key = i;
  return ds;
}

std::vector<double> encode_image(const Item& item, const StubEncoders& encoders) {
  if (item.id >= encoders.item_noise.rows()) {
    throw ValidationError("unknown item id " + std::to_string(item.id));
  }
  if (item.attributes.size() != encoders.attribute_offsets.size()) {
    throw ValidationError("item " + std::to_string(item.id) + " has the wrong attribute count");
  }
  for (std::size_t a = 0; a < item.attributes.size(); ++a) {
    const std::size_t end = a + 1 < encoders.attribute_offsets.size()
                                ? encoders.attribute_offsets[a + 1]
                                : encoders.image_projection.cols();
    if (encoders.attribute_offsets[a] + item.attributes[a] >= end) {
      throw ValidationError("item " + std::to_string(item.id) + " attribute out of range");
    }
  }
  std::vector<double> out = attribute_signal(item.attributes, encoders);
  auto noise = encoders.item_noise.row(item.id);
  for (std::size_t d = 0; d < out.size(); ++d) out[d] += noise[d];
  return out;
}

std::vector<double> encode_text(const ModificationText& text, const Vocabulary& vocabulary,
                                const StubEncoders& encoders) {
  std::vector<double> counts(vocabulary.size(), 0.0);
  for (const auto& token : text.tokens) counts[vocabulary.index(token)] += 1.0;
  const std::size_t dim = encoders.text_dim();
  if (encoders.text_projection.cols() != vocabulary.size()) {
    throw ValidationError("text projection does not match the vocabulary");
  }
  std::vector<double> out(dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (std::size_t v = 0; v < counts.size(); ++v) acc += encoders.text_projection.at(d, v) * counts[v];
    out[d] = acc;
  }
  return out;
}

Tensor encode_items(const Dataset& dataset) {
  Tensor out({dataset.items.size(), dataset.encoders.image_dim()});
  for (const Item& item : dataset.items) {
    auto v = encode_image(item, dataset.encoders);
    std::copy(v.begin(), v.end(), out.row(item.id).begin());
  }
  return out;
}

Tensor encode_texts(const Dataset& dataset, std::span<const TripletRecord> triplets) {
  Tensor out({triplets.size(), dataset.encoders.text_dim()});
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    auto v = encode_text(triplets[i].text, dataset.vocabulary, dataset.encoders);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

std::size_t count_inconsistent(const Dataset& dataset, std::span<const TripletRecord> triplets) {
  std::size_t bad = 0;
  for (const auto& t : triplets) {
    if (t.source_id >= dataset.items.size() || t.target_id >= dataset.items.size()) {
      ++bad;
      continue;
    }
    const auto applied =
        apply_text(dataset.config.attributes, dataset.items[t.source_id].attributes, t.text);
    if (applied != dataset.items[t.target_id].attributes) ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Files

namespace {

json config_json(const DatasetConfig& c) {
  json attrs = json::array();
  for (const auto& a : c.attributes) attrs.push_back({{"name", a.name}, {"values", a.values}});
  return {{"attributes", attrs},
          {"items", c.items},
          {"train_triplets", c.train_triplets},
          {"eval_triplets", c.eval_triplets},
          {"changes_per_text", c.changes_per_text},
          {"image_dim", c.image_dim},
          {"text_dim", c.text_dim},
          {"noise_scale", c.noise_scale},
          {"seed", c.seed}};
}

DatasetConfig config_from_json(const json& j) {
  DatasetConfig c;
  c.attributes.clear();
  for (const auto& a : j.at("attributes")) {
    c.attributes.push_back({a.at("name").get<std::string>(), a.at("values").get<std::vector<std::string>>()});
  }
  c.items = j.at("items").get<std::size_t>();
  c.train_triplets = j.at("train_triplets").get<std::size_t>();
  c.eval_triplets = j.at("eval_triplets").get<std::size_t>();
  c.changes_per_text = j.at("changes_per_text").get<std::size_t>();
  c.image_dim = j.at("image_dim").get<std::size_t>();
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.noise_scale = j.at("noise_scale").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json header_json(const std::string& kind, const DatasetConfig& c) {
  return {{"header", true}, {"kind", kind}, {"format", 1}, {"config", config_json(c)}, {"seed", c.seed}};
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty() || !out.front().value("header", false)) {
    throw ValidationError(path.string() + ": missing header record");
  }
  return out;
}

std::vector<TripletRecord> triplets_from_lines(const std::vector<json>& lines,
                                               const std::filesystem::path& path) {
  std::vector<TripletRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const json& j = lines[i];
    try {
      TripletRecord t;
      t.key = j.at("key").get<std::size_t>();
      t.source_id = j.at("source_id").get<std::size_t>();
      t.target_id = j.at("target_id").get<std::size_t>();
      t.text.tokens = j.at("tokens").get<std::vector<std::string>>();
      if (t.key != out.size()) throw ValidationError("keys must be 0..N-1 in order");
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": bad triplet record: " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string triplets_jsonl(std::span<const TripletRecord> triplets, const std::string& split,
                           const DatasetConfig& config) {
  std::string out = header_json("triplets_" + split, config).dump() + "\n";
  for (const auto& t : triplets) {
    json j{{"key", t.key}, {"source_id", t.source_id}, {"target_id", t.target_id}, {"tokens", t.text.tokens}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<TripletRecord> read_triplets(const std::filesystem::path& path) {
  return triplets_from_lines(read_jsonl(path), path);
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::string items = header_json("items", ds.config).dump() + "\n";
  for (const Item& item : ds.items) {
    json attrs = json::object();
    for (std::size_t a = 0; a < item.attributes.size(); ++a) attrs[ds.config.attributes[a].name] = item.attributes[a];
    items += json{{"id", item.id}, {"attributes", attrs}}.dump() + "\n";
  }

  json attrs = json::array();
  for (const auto& a : ds.config.attributes) attrs.push_back({{"name", a.name}, {"values", a.values}});
  const std::string vocab = json{{"tokens", ds.vocabulary.tokens()}, {"attributes", attrs}}.dump(2) + "\n";

  io::Archive archive;
  archive.kind = io::Archive::Kind::kEncoders;
  archive.metadata = json{{"seed", ds.encoders.seed},
                          {"attribute_offsets", ds.encoders.attribute_offsets}}
                         .dump();
  archive.entries.push_back({"image_projection", ds.encoders.image_projection});
  archive.entries.push_back({"item_noise", ds.encoders.item_noise});
  archive.entries.push_back({"text_projection", ds.encoders.text_projection});

  io::write_file_atomic(dir / files::kItems, items);
  io::write_file_atomic(dir / files::kTrain, triplets_jsonl(ds.train, "train", ds.config));
  io::write_file_atomic(dir / files::kEval, triplets_jsonl(ds.eval, "eval", ds.config));
  io::write_file_atomic(dir / files::kVocab, vocab);
  io::write_file_atomic(dir / files::kEncoders, archive.serialize());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  const auto item_lines = read_jsonl(dir / files::kItems);
  ds.config = config_from_json(item_lines.front().at("config"));
  ds.vocabulary = Vocabulary(ds.config.attributes);
  for (std::size_t i = 1; i < item_lines.size(); ++i) {
    const json& j = item_lines[i];
    Item item;
    item.id = j.at("id").get<std::size_t>();
    if (item.id != ds.items.size()) throw ValidationError("item ids must be contiguous from 0");
    for (const auto& a : ds.config.attributes) {
      const std::size_t v = j.at("attributes").at(a.name).get<std::size_t>();
      if (v >= a.values.size()) throw ValidationError("item attribute out of range");
      item.attributes.push_back(v);
    }
    ds.items.push_back(std::move(item));
  }
  ds.train = read_triplets(dir / files::kTrain);
  ds.eval = read_triplets(dir / files::kEval);

  const json vocab = json::parse(io::read_file(dir / files::kVocab));
  if (vocab.at("tokens").get<std::vector<std::string>>() != ds.vocabulary.tokens()) {
    throw ValidationError("vocab.json does not match the attribute schema");
  }

  const std::filesystem::path enc_path = dir / files::kEncoders;
  io::Archive archive = io::Archive::parse(io::read_file(enc_path), enc_path.string());
  if (archive.kind != io::Archive::Kind::kEncoders) throw ValidationError(enc_path.string() + ": not an encoder file");
  const json meta = json::parse(archive.metadata);
  ds.encoders.seed = meta.at("seed").get<std::uint64_t>();
  ds.encoders.attribute_offsets = meta.at("attribute_offsets").get<std::vector<std::size_t>>();
  auto take = [&](const char* name) {
    const Tensor* t = archive.find(name);
    if (!t) throw ValidationError(enc_path.string() + ": missing array " + name);
    return *t;
  };
  ds.encoders.image_projection = take("image_projection");
  ds.encoders.item_noise = take("item_noise");
  ds.encoders.text_projection = take("text_projection");
  if (ds.encoders.item_noise.rows() != ds.items.size()) {
    throw ValidationError("encoder noise table does not match the item count");
  }
  if (ds.encoders.image_dim() != ds.config.image_dim || ds.encoders.text_dim() != ds.config.text_dim ||
      ds.encoders.text_projection.cols() != ds.vocabulary.size()) {
    throw ValidationError(enc_path.string() + ": encoder shapes do not match the dataset config");
  }
  for (const auto* split : {&ds.train, &ds.eval}) {
    for (const auto& t : *split) {
      for (const auto& token : t.text.tokens) ds.vocabulary.index(token);
    }
    if (const std::size_t bad = count_inconsistent(ds, *split)) {
      throw ValidationError(std::to_string(bad) + " triplets do not map their source onto their target");
    }
  }
  return ds;
}

}  // namespace cgl
