#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cg {

struct ModelConfig {
  // language encoder
  int embed_dim = 256;
  int c_q = 1024;  // concatenated forward+backward hidden width

  // visual encoder: stride-2 stages, then a pyramid over `strides`
  std::vector<int> channels = {32, 64, 128, 256};
  int c = 256;    // pyramid width
  int c_k = 256;  // per-type decomposition width
  std::vector<int> strides = {8, 16, 32};

  // fusion
  std::string relation_softmax = "spatial";  // or "across_types"

  // fine-grained attention / bank
  double bank_momentum = 0.999;
  double bank_temperature = 0.2;
  double triplet_margin = 0.1;

  // detection head
  int head_tower_convs = 2;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  bool center_sampling = true;
  double center_radius = 1.5;  // in strides
  double level_range_factor = 4.0;  // level i accepts max side <= factor*stride

  void validate() const;
};

struct TrainConfig {
  int epochs = 12;
  int batch_size = 16;
  double lr = 0.02;
  std::vector<int> decay_epochs = {8, 11};
  double decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 10.0;
  double backbone_lr_mult = 1.0;
  uint64_t seed = 1;

  std::string loss_variant = "aco";   // aco | triplet | moco_all | aco_no_bank
  std::string arch_variant = "full";  // full | amd_only | flat_fusion
  std::string expr_mode = "full";     // full | none | subject | nouns

  double w_det = 1.0, w_aco = 1.0, w_ace = 1.0;
  int eval_every = 1;  // 0 = only after the last epoch
  int workers = 0;     // 0 = all processors
  std::string schema_path;  // empty = <data>/schema.json

  ModelConfig model;

  void validate() const;
  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
  static TrainConfig load(const std::string& path);

  double lr_at_epoch(int epoch) const;  // 1-based
};

}  // namespace cg
