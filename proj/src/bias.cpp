#include "cg/bias.hpp"

#include <fstream>

#include "cg/checkpoint.hpp"

namespace cg {

std::vector<Prediction> random_baseline_predictions(
    const GroundingModel& blind_model, const Dataset& data,
    const std::vector<const GroundingSample*>& samples, const Vocabulary& vocab,
    int top_k, uint64_t seed) {
  (void)vocab;
  std::vector<Prediction> preds(samples.size());
  for (const auto* s : samples) data.image(s->image_id);
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(samples.size()); ++i) {
    NoGrad guard;
    const auto* s = samples[i];
    auto fwd = blind_model.forward(data.image(s->image_id).to_tensor(), {});
    std::vector<DetectionHead::LevelOut> outs;
    for (const auto& lvl : fwd.levels) outs.push_back(lvl.det);
    auto top = decode_topk(extract_output(outs, fwd.image_width, fwd.image_height), top_k);
    Rng rng(Rng::child_seed(seed, static_cast<uint64_t>(i)));
    const auto& pick = top[rng.uniform_int(0, static_cast<int>(top.size()) - 1)];
    preds[i] = {s->sample_id, pick.first, pick.second};
  }
  return preds;
}

std::vector<BiasRow> bias_suite(const Dataset& data,
                                const std::map<std::string, std::string>& ckpt_paths,
                                const std::string& split, uint64_t seed,
                                std::vector<std::string>* warnings) {
  auto samples = data.split_samples(split);
  check(!samples.empty(), "bias suite: split '" + split + "' has no samples");

  struct VariantSpec {
    const char* row_name;
    const char* key;
  };
  const VariantSpec specs[] = {
      {"Random", "none"},
      {"w/o Expressions", "none"},
      {"Subject Expressions", "subject"},
      {"Partial Expressions", "nouns"},
      {"Full", "full"},
  };

  std::vector<BiasRow> rows;
  for (const auto& spec : specs) {
    BiasRow row;
    row.name = spec.row_name;
    auto it = ckpt_paths.find(spec.key);
    if (it == ckpt_paths.end()) {
      if (warnings)
        warnings->push_back("bias suite: missing checkpoint for variant '" +
                            std::string(spec.key) + "'; row '" + row.name +
                            "' omitted");
      rows.push_back(row);
      continue;
    }
    auto restored = restore_model(Checkpoint::load(it->second));
    std::vector<Prediction> preds;
    if (row.name == "Random") {
      preds = random_baseline_predictions(*restored.model, data, samples,
                                          restored.vocab, 10, seed);
    } else {
      preds = predict_samples(*restored.model, data, samples, restored.vocab,
                              restored.model->cfg.expr_mode);
    }
    row.report = evaluate(preds, samples);
    row.present = true;
    rows.push_back(row);
  }
  return rows;
}

void write_bias_report(const std::vector<BiasRow>& rows, const std::string& csv_path,
                       const std::string& text_path) {
  {
    std::ofstream f(csv_path);
    check(f.good(), "cannot write bias report: " + csv_path);
    f << "method";
    const auto thresholds = eval_thresholds();
    for (double t : thresholds) f << ",acc_" << t;
    f << ",mAcc\n";
    for (const auto& row : rows) {
      if (!row.present) continue;
      f << row.name;
      for (double a : row.report.acc) f << "," << a;
      f << "," << row.report.macc << "\n";
    }
  }
  {
    std::vector<std::pair<std::string, EvalReport>> table;
    for (const auto& row : rows)
      if (row.present) table.push_back({row.name, row.report});
    std::ofstream f(text_path);
    check(f.good(), "cannot write bias table: " + text_path);
    f << format_report_table(table);
  }
}

}  // namespace cg
