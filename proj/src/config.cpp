#include "cg/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cg/tensor.hpp"
#include "json.hpp"

namespace cg {

using json = nlohmann::ordered_json;

void ModelConfig::validate() const {
  check(embed_dim > 0, "model config: embed_dim must be positive");
  check(c_q > 0 && c_q % 2 == 0, "model config: c_q must be positive and even");
  check(channels.size() == 4, "model config: expects 4 backbone stages");
  for (int ch : channels) check(ch > 0, "model config: bad channel width");
  check(c > 0 && c_k > 0, "model config: c and c_k must be positive");
  check(!strides.empty(), "model config: needs at least one pyramid level");
  for (size_t i = 0; i < strides.size(); ++i) {
    check(strides[i] == 4 || strides[i] == 8 || strides[i] == 16 || strides[i] == 32,
          "model config: strides must come from {4,8,16,32}");
    if (i) check(strides[i] == strides[i - 1] * 2,
                 "model config: strides must double level to level");
  }
  check(bank_momentum > 0 && bank_momentum < 1, "model config: momentum must be in (0,1)");
  check(bank_temperature > 0, "model config: temperature must be positive");
  check(head_tower_convs >= 0, "model config: negative tower depth");
}

void TrainConfig::validate() const {
  check(epochs >= 1, "train config: epochs must be positive");
  check(batch_size >= 1, "train config: batch size must be positive");
  check(lr >= 0, "train config: learning rate must be non-negative");
  for (int d : decay_epochs)
    check(d >= 1 && d < epochs, "train config: decay epochs must lie before the last epoch");
  check(decay_factor > 0 && decay_factor <= 1, "train config: bad decay factor");
  check(loss_variant == "aco" || loss_variant == "triplet" || loss_variant == "moco_all" ||
            loss_variant == "aco_no_bank",
        "train config: unknown loss variant '" + loss_variant + "'");
  check(arch_variant == "full" || arch_variant == "amd_only" ||
            arch_variant == "flat_fusion",
        "train config: unknown arch variant '" + arch_variant + "'");
  check(expr_mode == "full" || expr_mode == "none" || expr_mode == "subject" ||
            expr_mode == "nouns",
        "train config: unknown expression mode '" + expr_mode + "'");
  model.validate();
}

double TrainConfig::lr_at_epoch(int epoch) const {
  double v = lr;
  for (int d : decay_epochs)
    if (epoch > d) v *= decay_factor;
  return v;
}

std::string TrainConfig::to_json_string() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["decay_epochs"] = decay_epochs;
  j["decay_factor"] = decay_factor;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["clip_norm"] = clip_norm;
  j["backbone_lr_mult"] = backbone_lr_mult;
  j["seed"] = seed;
  j["loss_variant"] = loss_variant;
  j["arch_variant"] = arch_variant;
  j["expr_mode"] = expr_mode;
  j["w_det"] = w_det;
  j["w_aco"] = w_aco;
  j["w_ace"] = w_ace;
  j["eval_every"] = eval_every;
  j["workers"] = workers;
  j["schema_path"] = schema_path;
  json m;
  m["embed_dim"] = model.embed_dim;
  m["c_q"] = model.c_q;
  m["channels"] = model.channels;
  m["c"] = model.c;
  m["c_k"] = model.c_k;
  m["strides"] = model.strides;
  m["relation_softmax"] = model.relation_softmax;
  m["bank_momentum"] = model.bank_momentum;
  m["bank_temperature"] = model.bank_temperature;
  m["triplet_margin"] = model.triplet_margin;
  m["head_tower_convs"] = model.head_tower_convs;
  m["focal_alpha"] = model.focal_alpha;
  m["focal_gamma"] = model.focal_gamma;
  m["center_sampling"] = model.center_sampling;
  m["center_radius"] = model.center_radius;
  m["level_range_factor"] = model.level_range_factor;
  j["model"] = m;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("bad train config: ") + e.what());
  }
  TrainConfig c;
  auto get = [](const json& obj, const char* key, auto& field) {
    if (obj.contains(key) && !obj[key].is_null())
      field = obj[key].get<std::decay_t<decltype(field)>>();
  };
  get(j, "epochs", c.epochs);
  get(j, "batch_size", c.batch_size);
  get(j, "lr", c.lr);
  get(j, "decay_epochs", c.decay_epochs);
  get(j, "decay_factor", c.decay_factor);
  get(j, "momentum", c.momentum);
  get(j, "weight_decay", c.weight_decay);
  get(j, "clip_norm", c.clip_norm);
  get(j, "backbone_lr_mult", c.backbone_lr_mult);
  get(j, "seed", c.seed);
  get(j, "loss_variant", c.loss_variant);
  get(j, "arch_variant", c.arch_variant);
  get(j, "expr_mode", c.expr_mode);
  get(j, "w_det", c.w_det);
  get(j, "w_aco", c.w_aco);
  get(j, "w_ace", c.w_ace);
  get(j, "eval_every", c.eval_every);
  get(j, "workers", c.workers);
  get(j, "schema_path", c.schema_path);
  if (j.contains("model")) {
    const auto& m = j["model"];
    get(m, "embed_dim", c.model.embed_dim);
    get(m, "c_q", c.model.c_q);
    get(m, "channels", c.model.channels);
    get(m, "c", c.model.c);
    get(m, "c_k", c.model.c_k);
    get(m, "strides", c.model.strides);
    get(m, "relation_softmax", c.model.relation_softmax);
    get(m, "bank_momentum", c.model.bank_momentum);
    get(m, "bank_temperature", c.model.bank_temperature);
    get(m, "triplet_margin", c.model.triplet_margin);
    get(m, "head_tower_convs", c.model.head_tower_convs);
    get(m, "focal_alpha", c.model.focal_alpha);
    get(m, "focal_gamma", c.model.focal_gamma);
    get(m, "center_sampling", c.model.center_sampling);
    get(m, "center_radius", c.model.center_radius);
    get(m, "level_range_factor", c.model.level_range_factor);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open train config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace cg
