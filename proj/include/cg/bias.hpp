#pragma once

#include <map>
#include <string>
#include <vector>

#include "cg/evaluation.hpp"
#include "cg/train.hpp"

namespace cg {

// Expression-degradation comparison rows. Checkpoints are keyed by variant
// name: "full", "none", "subject", "nouns". The Random row draws uniformly
// among the top-10 scoring boxes of the expression-blind ("none") model.
struct BiasRow {
  std::string name;
  bool present = false;
  EvalReport report;
};

std::vector<BiasRow> bias_suite(const Dataset& data,
                                const std::map<std::string, std::string>& ckpt_paths,
                                const std::string& split, uint64_t seed,
                                std::vector<std::string>* warnings = nullptr);

// Random-pick predictions from an expression-blind model's top-k boxes.
std::vector<Prediction> random_baseline_predictions(
    const GroundingModel& blind_model, const Dataset& data,
    const std::vector<const GroundingSample*>& samples, const Vocabulary& vocab,
    int top_k, uint64_t seed);

void write_bias_report(const std::vector<BiasRow>& rows, const std::string& csv_path,
                       const std::string& text_path);

}  // namespace cg
