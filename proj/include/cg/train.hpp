#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cg/checkpoint.hpp"
#include "cg/evaluation.hpp"
#include "cg/network.hpp"

namespace cg {

// Expression degradation for the bias harness: full keeps every word, none
// suppresses the language input entirely, subject keeps the head noun
// phrase, nouns keeps all noun words.
std::vector<std::string> degrade_words(const std::vector<std::string>& words,
                                       const std::string& mode, const Lexicon& lexicon);

// Token ids a model consumes for one sample under a mode (may be empty,
// which the model maps to a zero language feature).
std::vector<int> tokens_for_mode(const GroundingSample& sample, const std::string& mode,
                                 const Lexicon& lexicon, const Vocabulary& vocab);

struct EpochStats {
  int epoch = 0;
  double lr = 0, det = 0, aco = 0, ace = 0, total = 0;
  double acc50 = -1, acc75 = -1, macc = -1;  // -1 when val was not scored
};

struct TrainResult {
  std::shared_ptr<GroundingModel> model;
  Vocabulary vocab;
  std::vector<EpochStats> history;
  std::vector<Tensor> velocity;
  double train_seconds = 0;
};

// SGD with momentum, the stepped schedule, gradient clipping, and bank
// updates serialized after each optimizer step. Deterministic in (seed,
// config); when out_dir is non-empty writes checkpoint.bin, metrics.csv and
// vocab.txt there.
TrainResult train_model(const Dataset& data, TrainConfig cfg,
                        const std::string& out_dir = "");

// Forward + argmax decode for a list of samples (parallel across samples).
std::vector<Prediction> predict_samples(const GroundingModel& model, const Dataset& data,
                                        const std::vector<const GroundingSample*>& samples,
                                        const Vocabulary& vocab,
                                        const std::string& expr_mode);

void write_metrics_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace cg
