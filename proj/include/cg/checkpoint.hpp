#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cg/network.hpp"

namespace cg {

// Binary snapshot of everything training mutates: parameters, optimizer
// velocity, memory bank, epoch counter, plus the config/schema/vocabulary
// needed to rebuild the model. Reload reproduces forward outputs bit for bit.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  TrainConfig cfg;
  std::string schema_json;
  std::vector<std::string> vocab_words;
  int epoch = 0;
  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<Tensor> velocity;  // same order as params; may be empty
  MemoryBank bank;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  static Checkpoint snapshot(const GroundingModel& model, const Vocabulary& vocab,
                             const std::vector<Tensor>& velocity, int epoch);
};

struct RestoredModel {
  std::unique_ptr<GroundingModel> model;
  Vocabulary vocab;
  std::vector<Tensor> velocity;
  int epoch = 0;
};

RestoredModel restore_model(const Checkpoint& ckpt);

}  // namespace cg
