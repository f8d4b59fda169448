#include "cg/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace cg {

using json = nlohmann::ordered_json;

std::array<double, 10> eval_thresholds() {
  std::array<double, 10> t;
  for (int i = 0; i < 10; ++i) t[i] = (50 + 5 * i) / 100.0;
  return t;
}

EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<const GroundingSample*>& ground_truth) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    auto [it, inserted] = by_id.insert({p.sample_id, &p});
    (void)it;
    check(inserted, "duplicate prediction for sample " + p.sample_id);
  }

  EvalReport rep;
  rep.count = static_cast<int64_t>(ground_truth.size());
  const auto thresholds = eval_thresholds();
  std::array<int64_t, 10> hits{};

  for (const auto* gt : ground_truth) {
    double v = 0, score = 0;
    auto it = by_id.find(gt->sample_id);
    if (it != by_id.end()) {
      v = iou(it->second->box, gt->target);
      score = it->second->score;
    }
    rep.per_sample.push_back({gt->sample_id, v, score});
    for (int i = 0; i < 10; ++i)
      if (v >= thresholds[i]) ++hits[i];
  }

  double sum = 0;
  for (int i = 0; i < 10; ++i) {
    rep.acc[i] = rep.count ? static_cast<double>(hits[i]) / rep.count : 0.0;
    sum += rep.acc[i];
  }
  rep.macc = sum / 10.0;
  rep.acc50 = rep.acc[0];
  rep.acc75 = rep.acc[5];
  return rep;
}

void write_predictions_jsonl(const std::vector<Prediction>& preds,
                             const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot write predictions: " + path);
  for (const auto& p : preds) {
    json j;
    j["sample_id"] = p.sample_id;
    j["box"] = {p.box.x, p.box.y, p.box.w, p.box.h};
    j["score"] = p.score;
    f << j.dump() << "\n";
  }
}

std::vector<Prediction> read_predictions_jsonl(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open predictions: " + path);
  std::vector<Prediction> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw Error("bad prediction line " + std::to_string(lineno) + " in " + path +
                  ": " + e.what());
    }
    Prediction p;
    p.sample_id = j.at("sample_id").get<std::string>();
    const auto& b = j.at("box");
    p.box = BoundingBox(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                        b[3].get<double>());
    p.score = j.value("score", 0.0);
    out.push_back(std::move(p));
  }
  return out;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot write report: " + path);
  const auto thresholds = eval_thresholds();
  for (int i = 0; i < 10; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "acc_%.2f", thresholds[i]);
    f << buf << ",";
  }
  f << "mAcc,samples\n";
  for (int i = 0; i < 10; ++i) f << report.acc[i] << ",";
  f << report.macc << "," << report.count << "\n";
}

void write_per_sample_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot write per-sample table: " + path);
  f << "sample_id,iou,score\n";
  for (const auto& r : report.per_sample)
    f << r.sample_id << "," << r.iou << "," << r.score << "\n";
}

std::string format_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-24s %8s %8s %8s %10s\n", "method", "Acc50",
                "Acc75", "mAcc", "samples");
  os << buf;
  os << std::string(62, '-') << "\n";
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %8.2f %8.2f %8.2f %10lld\n", name.c_str(),
                  100 * r.acc50, 100 * r.acc75, 100 * r.macc,
                  static_cast<long long>(r.count));
    os << buf;
  }
  return os.str();
}

}  // namespace cg
