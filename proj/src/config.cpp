// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "sparsify/errors.hpp"

namespace sparsify {

using Json = nlohmann::ordered_json;

namespace {

// Typed access to one JSON object that remembers its dotted path and rejects
// keys it was not told about.
class Section {
 public:
  Section(const Json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object())
      throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      bool known = false;
      for (const char* k : keys) known = known || item.key() == k;
      if (!known) throw UnknownKeyError(key(item.key()));
    }
  }

  bool has(const char* k) const { return node_ && node_->contains(k); }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  Section child(const char* k) const {
    return Section(has(k) ? &node_->at(k) : nullptr, key(k));
  }

  template <typename V>
  void read(const char* k, V& out) const {
    if (!has(k)) return;
    const Json& v = node_->at(k);
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) throw ValidationError(key(k), "expected true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) throw ValidationError(key(k), "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) throw ValidationError(key(k), "expected a number");
      out = v.get<V>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer())
        throw ValidationError(key(k), "expected an integer");
      if (std::is_unsigned_v<V> && v.get<long long>() < 0 && !v.is_number_unsigned())
        throw ValidationError(key(k), "must be non-negative");
      out = v.get<V>();
    } else if constexpr (std::is_same_v<V, std::vector<std::size_t>>) {
      if (!v.is_array()) throw ValidationError(key(k), "expected an array");
      out.clear();
      for (const Json& e : v) {
        if (!e.is_number_integer() || e.get<long long>() <= 0)
          throw ValidationError(key(k), "expected positive integers");
        out.push_back(e.get<std::size_t>());
      }
    } else if constexpr (std::is_same_v<V, std::vector<std::string>>) {
      if (!v.is_array()) throw ValidationError(key(k), "expected an array");
      out.clear();
      for (const Json& e : v) {
        if (!e.is_string()) throw ValidationError(key(k), "expected strings");
        out.push_back(e.get<std::string>());
      }
    }
  }

 private:
  const Json* node_;
  std::string path_;
};

void position_of(const std::string& text, std::size_t byte, std::size_t& line,
                 std::size_t& column) {
  line = 1;
  column = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

bool parse_wrn(const std::string& kind, std::size_t& depth, std::size_t& k) {
  if (kind.rfind("wrn-", 0) != 0) return false;
  const auto dash = kind.find('-', 4);
  if (dash == std::string::npos) return false;
  try {
    std::size_t p1 = 0, p2 = 0;
    const std::string d = kind.substr(4, dash - 4), w = kind.substr(dash + 1);
    depth = std::stoul(d, &p1);
    k = std::stoul(w, &p2);
    return p1 == d.size() && p2 == w.size() && !d.empty() && !w.empty();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (precision != 32 && precision != 64)
    throw ValidationError("precision", "must be 32 or 64");
  const bool fixed = train.mode == TrainMode::FixedBS || train.mode == TrainMode::FixedGA;
  if (fixed && !has_target)
    throw ValidationError("target.s", "required by mode " + to_string(train.mode));
  if (!fixed && has_target)
    throw ValidationError("target", "only valid with mode fixed_bs or fixed_ga");
  if (train.mode == TrainMode::Adaptive && !has_objective)
    throw ValidationError("objective.variant", "required by mode adaptive");
  if (train.mode != TrainMode::Adaptive && has_objective)
    throw ValidationError("objective", "only valid with mode adaptive");
  train.validate();

  const auto& d = dataset;
  if (d.kind != "two_gaussians" && d.kind != "rings" && d.kind != "patterns" &&
      d.kind != "manifest")
    throw ValidationError("dataset.kind", "unknown dataset '" + d.kind + "'");
  if (d.kind == "manifest") {
    if (d.path.empty()) throw ValidationError("dataset.path", "required by manifest");
    if (d.image_shape.size() != 3)
      throw ValidationError("dataset.image_shape", "manifest needs [C, H, W]");
  } else {
    if (d.train_size == 0) throw ValidationError("dataset.train_size", "must be positive");
    if (d.test_size == 0) throw ValidationError("dataset.test_size", "must be positive");
    if (!(d.noise >= 0.0)) throw ValidationError("dataset.noise", "must be non-negative");
  }
  if (d.kind == "patterns") {
    if (d.image_shape.size() != 3)
      throw ValidationError("dataset.image_shape", "patterns needs [C, H, W]");
    if (d.classes < 2) throw ValidationError("dataset.classes", "must be at least 2");
  }
  if (d.kind == "two_gaussians" && d.dims == 0)
    throw ValidationError("dataset.dims", "must be positive");

  std::size_t depth = 0, k = 0;
  const bool image = d.kind == "patterns" || d.kind == "manifest";
  if (arch.kind == "mlp") {
    if (image) throw ValidationError("arch.kind", "mlp needs a flat (vector) dataset");
  } else if (arch.kind == "cnn-small") {
    if (!image) throw ValidationError("arch.kind", "cnn-small needs an image dataset");
    if (arch.conv1 == 0 || arch.conv2 == 0 || arch.conv2_stride == 0)
      throw ValidationError("arch.conv1", "channel counts and stride must be positive");
  } else if (parse_wrn(arch.kind, depth, k)) {
    if (!image) throw ValidationError("arch.kind", "wrn needs an image dataset");
    if (depth < 10 || (depth - 4) % 6 != 0 || k == 0)
      throw ValidationError("arch.kind", "wrn depth must be 6n + 4 and width positive");
  } else {
    throw ValidationError("arch.kind", "unknown architecture '" + arch.kind +
                                           "' (mlp, cnn-small, wrn-<depth>-<k>)");
  }
  if (out_dir.empty()) throw ValidationError("output.dir", "must not be empty");
  if (checkpoint_every < 0)
    throw ValidationError("output.checkpoint_every", "must be non-negative");
}

ExperimentConfig parse_config_text(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 0, column = 0;
    position_of(text, e.byte, line, column);
    throw ConfigSyntaxError("syntax error at line " + std::to_string(line) +
                                ", column " + std::to_string(column) + ": " + e.what(),
                            line, column);
  }
  ExperimentConfig c;
  const Section top(&root, "");
  top.allow({"seed", "precision", "mode", "dataset", "arch", "train", "target",
             "objective", "output"});
  top.read("seed", c.seed);
  top.read("precision", c.precision);
  std::string mode = "dense";
  top.read("mode", mode);
  c.train.mode = parse_mode(mode);

  const Section ds = top.child("dataset");
  ds.allow({"kind", "path", "train_size", "test_size", "noise", "separation", "dims",
            "classes", "image_shape", "seed"});
  ds.read("kind", c.dataset.kind);
  ds.read("path", c.dataset.path);
  ds.read("train_size", c.dataset.train_size);
  ds.read("test_size", c.dataset.test_size);
  ds.read("noise", c.dataset.noise);
  ds.read("separation", c.dataset.separation);
  ds.read("dims", c.dataset.dims);
  ds.read("classes", c.dataset.classes);
  ds.read("image_shape", c.dataset.image_shape);
  if (ds.has("seed")) {
    std::uint64_t s = 0;
    ds.read("seed", s);
    c.dataset.seed = s;
  }

  const Section ar = top.child("arch");
  ar.allow({"kind", "hidden", "conv1", "conv2", "conv2_stride", "exempt"});
  ar.read("kind", c.arch.kind);
  ar.read("hidden", c.arch.hidden);
  ar.read("conv1", c.arch.conv1);
  ar.read("conv2", c.arch.conv2);
  ar.read("conv2_stride", c.arch.conv2_stride);
  ar.read("exempt", c.arch.exempt);

  TrainConfig& t = c.train;
  const Section tr = top.child("train");
  tr.allow({"lr", "lr_min", "momentum", "weight_decay", "epochs", "batch_size",
            "restart_period", "recompute_period", "log_interval", "gradient",
            "mean_mode", "bound_init_sparsity", "bound_lr_scale"});
  tr.read("lr", t.lr);
  tr.read("lr_min", t.lr_min);
  tr.read("momentum", t.momentum);
  tr.read("weight_decay", t.weight_decay);
  tr.read("epochs", t.epochs);
  tr.read("batch_size", t.batch_size);
  tr.read("restart_period", t.restart_period);
  tr.read("recompute_period", t.recompute_period);
  tr.read("log_interval", t.log_interval);
  tr.read("bound_init_sparsity", t.bound_init_sparsity);
  tr.read("bound_lr_scale", t.bound_lr_scale);
  std::string gradient = "ste", mean_mode = "assume_zero";
  tr.read("gradient", gradient);
  tr.read("mean_mode", mean_mode);
  if (gradient == "ste") t.gradient = prune::GradientMode::StraightThrough;
  else if (gradient == "masked") t.gradient = prune::GradientMode::Masked;
  else throw ValidationError("train.gradient", "must be ste or masked");
  if (mean_mode == "assume_zero") t.mean_mode = prune::MeanMode::AssumeZero;
  else if (mean_mode == "center") t.mean_mode = prune::MeanMode::Center;
  else throw ValidationError("train.mean_mode", "must be assume_zero or center");

  const Section tg = top.child("target");
  tg.allow({"s", "epsilon", "max_iters"});
  c.has_target = top.has("target");
  if (c.has_target && !tg.has("s"))
    throw ValidationError("target.s", "required when target is given");
  tg.read("s", t.target.s);
  tg.read("epsilon", t.target.epsilon);
  tg.read("max_iters", t.target.max_iters);

  const Section ob = top.child("objective");
  ob.allow({"variant", "lambda", "lambda_p", "lambda_f", "budget_p", "budget_f",
            "weighting"});
  c.has_objective = top.has("objective");
  if (c.has_objective) {
    if (!ob.has("variant"))
      throw ValidationError("objective.variant", "required when objective is given");
    std::string variant;
    ob.read("variant", variant);
    try {
      t.objective.variant = sparsity::parse_variant(variant);
    } catch (const ContractError& e) {
      throw ValidationError("objective.variant", e.what());
    }
    const bool budget = t.objective.variant == sparsity::Variant::BudgetQuadratic ||
                        t.objective.variant == sparsity::Variant::BudgetHinge;
    if (budget && !ob.has("budget_p"))
      throw ValidationError("objective.budget_p", "required by variant " + variant);
    if (!ob.has("lambda_f") && !ob.has("budget_f")) t.objective.lambda_f = 0.0;
    ob.read("lambda", t.objective.lambda);
    ob.read("lambda_p", t.objective.lambda_p);
    ob.read("lambda_f", t.objective.lambda_f);
    ob.read("budget_p", t.objective.budget_p);
    ob.read("budget_f", t.objective.budget_f);
    std::string weighting = "params";
    ob.read("weighting", weighting);
    if (weighting == "params") t.weighting = sparsity::Resource::Params;
    else if (weighting == "flops") t.weighting = sparsity::Resource::Flops;
    else throw ValidationError("objective.weighting", "must be params or flops");
  }

  const Section out = top.child("output");
  out.allow({"dir", "checkpoint_every"});
  out.read("dir", c.out_dir);
  out.read("checkpoint_every", c.checkpoint_every);

  t.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  Json j;
  j["seed"] = c.seed;
  j["precision"] = c.precision;
  j["mode"] = to_string(t.mode);
  Json d;
  d["kind"] = c.dataset.kind;
  if (!c.dataset.path.empty()) d["path"] = c.dataset.path;
  d["train_size"] = c.dataset.train_size;
  d["test_size"] = c.dataset.test_size;
  d["noise"] = c.dataset.noise;
  d["separation"] = c.dataset.separation;
  d["dims"] = c.dataset.dims;
  d["classes"] = c.dataset.classes;
  d["image_shape"] = c.dataset.image_shape;
  if (c.dataset.seed) d["seed"] = *c.dataset.seed;
  j["dataset"] = d;
  Json a;
  a["kind"] = c.arch.kind;
  a["hidden"] = c.arch.hidden;
  a["conv1"] = c.arch.conv1;
  a["conv2"] = c.arch.conv2;
  a["conv2_stride"] = c.arch.conv2_stride;
  a["exempt"] = c.arch.exempt;
  j["arch"] = a;
  Json tr;
  tr["lr"] = t.lr;
  tr["lr_min"] = t.lr_min;
  tr["momentum"] = t.momentum;
  tr["weight_decay"] = t.weight_decay;
  tr["epochs"] = t.epochs;
  tr["batch_size"] = t.batch_size;
  tr["restart_period"] = t.restart_period;
  tr["recompute_period"] = t.recompute_period;
  tr["log_interval"] = t.log_interval;
  tr["gradient"] = t.gradient == prune::GradientMode::Masked ? "masked" : "ste";
  tr["mean_mode"] = t.mean_mode == prune::MeanMode::Center ? "center" : "assume_zero";
  tr["bound_init_sparsity"] = t.bound_init_sparsity;
  tr["bound_lr_scale"] = t.bound_lr_scale;
  j["train"] = tr;
  if (c.has_target)
    j["target"] = {{"s", t.target.s},
                   {"epsilon", t.target.epsilon},
                   {"max_iters", t.target.max_iters}};
  if (c.has_objective)
    j["objective"] = {
        {"variant", sparsity::to_string(t.objective.variant)},
        {"lambda", t.objective.lambda},
        {"lambda_p", t.objective.lambda_p},
        {"lambda_f", t.objective.lambda_f},
        {"budget_p", t.objective.budget_p},
        {"budget_f", t.objective.budget_f},
        {"weighting", t.weighting == sparsity::Resource::Flops ? "flops" : "params"}};
  j["output"] = {{"dir", c.out_dir}, {"checkpoint_every", c.checkpoint_every}};
  return j.dump(2) + "\n";
}

void write_config_echo(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / "config.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(cfg);
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  if (d.kind == "manifest") return load_manifest(d.path, d.image_shape);
  SyntheticOptions o;
  o.train_size = d.train_size;
  o.test_size = d.test_size;
  o.seed = d.seed.value_or(cfg.seed);
  o.noise = d.noise;
  o.separation = d.separation;
  o.dims = d.dims;
  o.classes = d.classes;
  o.image_shape = d.image_shape;
  if (d.kind == "two_gaussians") return make_two_gaussians(o);
  if (d.kind == "rings") return make_rings(o);
  if (d.kind == "patterns") return make_patterns(o);
  throw ValidationError("dataset.kind", "unknown dataset '" + d.kind + "'");
}

NetworkSpec build_network_spec(const ArchConfig& arch, const Dataset& data) {
  NetworkSpec spec;
  std::size_t depth = 0, k = 0;
  if (arch.kind == "mlp") {
    if (data.is_image()) throw ValidationError("arch.kind", "mlp needs a flat dataset");
    spec = build_mlp(data.sample_size(), arch.hidden, data.classes);
  } else if (arch.kind == "cnn-small") {
    if (!data.is_image()) throw ValidationError("arch.kind", "cnn-small needs images");
    SmallCnnOptions o;
    o.in_channels = data.sample_shape[0];
    o.height = data.sample_shape[1];
    o.width = data.sample_shape[2];
    o.conv1_channels = arch.conv1;
    o.conv2_channels = arch.conv2;
    o.conv2_stride = arch.conv2_stride;
    o.classes = data.classes;
    spec = build_cnn_small(o);
  } else if (parse_wrn(arch.kind, depth, k)) {
    if (!data.is_image()) throw ValidationError("arch.kind", "wrn needs images");
    spec = build_wrn(depth, k, data.classes, data.sample_shape[0],
                     data.sample_shape[1], data.sample_shape[2]);
  } else {
    throw ValidationError("arch.kind", "unknown architecture '" + arch.kind + "'");
  }
  try {
    exempt_layers(spec, arch.exempt);
  } catch (const ContractError& e) {
    throw ValidationError("arch.exempt", e.what());
  }
  return spec;
}

}  // namespace sparsify
