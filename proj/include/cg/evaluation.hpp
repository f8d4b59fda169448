#pragma once

#include <array>
#include <string>
#include <vector>

#include "cg/dataset.hpp"
#include "cg/geometry.hpp"

namespace cg {

struct Prediction {
  std::string sample_id;
  BoundingBox box;
  double score = 0;
};

// the closed threshold list {0.50, 0.55, ..., 0.95}
std::array<double, 10> eval_thresholds();

struct EvalReport {
  std::array<double, 10> acc{};  // Acc@t per threshold
  double acc50 = 0, acc75 = 0, macc = 0;
  int64_t count = 0;
  struct Row {
    std::string sample_id;
    double iou = 0, score = 0;
  };
  std::vector<Row> per_sample;
};

// Acc@t = fraction of samples whose predicted box reaches IoU >= t; a sample
// without a prediction scores IoU 0. Duplicate prediction ids are an error.
EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<const GroundingSample*>& ground_truth);

void write_predictions_jsonl(const std::vector<Prediction>& preds,
                             const std::string& path);
std::vector<Prediction> read_predictions_jsonl(const std::string& path);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_per_sample_csv(const EvalReport& report, const std::string& path);

// one line per labelled report, percentages with two decimals
std::string format_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace cg
