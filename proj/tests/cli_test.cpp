#include <filesystem>
#include <fstream>
#include <sstream>

#include "cg/cli.hpp"
#include "cg/dataset.hpp"
#include "cg/evaluation.hpp"
#include "cg/generator.hpp"
#include "doctest.h"

using namespace cg;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("cg_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string write_gen_config(const std::string& dir) {
  SceneConfig cfg;
  cfg.image_width = 80;
  cfg.image_height = 64;
  cfg.persons_min = 3;
  cfg.persons_max = 6;
  cfg.train_scenes = 3;
  cfg.val_scenes = 1;
  cfg.test_scenes = 2;
  const auto path = dir + "/gen.json";
  std::ofstream(path) << cfg.to_json_string();
  return path;
}

}  // namespace

TEST_CASE("generate-data twice with the same seed is byte-identical") {
  auto work = temp_dir("gen");
  auto cfg_path = write_gen_config(work);
  auto out1 = work + "/d1";
  auto out2 = work + "/d2";
  CHECK(cli_run({"generate-data", "--config", cfg_path, "--out", out1, "--seed", "7"}) == 0);
  CHECK(cli_run({"generate-data", "--config", cfg_path, "--out", out2, "--seed", "7"}) == 0);
  CHECK(slurp(out1 + "/annotations.json") == slurp(out2 + "/annotations.json"));
  CHECK(slurp(out1 + "/manifest.json") == slurp(out2 + "/manifest.json"));
  CHECK(slurp(out1 + "/images/img_000000.ppm") == slurp(out2 + "/images/img_000000.ppm"));
  CHECK(fs::exists(out1 + "/effective_config.json"));

  SUBCASE("a different seed changes the dataset") {
    auto out3 = work + "/d3";
    CHECK(cli_run({"generate-data", "--config", cfg_path, "--out", out3, "--seed", "8"}) == 0);
    CHECK(slurp(out1 + "/annotations.json") != slurp(out3 + "/annotations.json"));
  }
}

TEST_CASE("eval scores an existing prediction file") {
  auto work = temp_dir("eval");
  auto cfg_path = write_gen_config(work);
  auto data_dir = work + "/data";
  REQUIRE(cli_run({"generate-data", "--config", cfg_path, "--out", data_dir}) == 0);

  // perfect predictions straight from the ground truth
  auto ds = load_dataset(data_dir, AttributeSchema::load(data_dir + "/schema.json"));
  std::vector<Prediction> preds;
  for (const auto* s : ds.split_samples("test"))
    preds.push_back({s->sample_id, s->target, 1.0});
  const auto pred_path = work + "/preds.jsonl";
  write_predictions_jsonl(preds, pred_path);

  auto rep_dir = work + "/rep";
  CHECK(cli_run({"eval", "--data", data_dir, "--pred", pred_path, "--out", rep_dir}) == 0);
  const std::string csv = slurp(rep_dir + "/report.csv");
  CHECK(csv.find("acc_0.50") != std::string::npos);
  CHECK(csv.find("acc_0.95") != std::string::npos);
  CHECK(csv.find("mAcc") != std::string::npos);
  std::istringstream lines(csv);
  std::string header, values;
  std::getline(lines, header);
  std::getline(lines, values);
  CHECK(values.rfind("1,1,1,1,1,1,1,1,1,1,1,", 0) == 0);  // all Acc@t = 1, mAcc = 1
  CHECK(fs::exists(rep_dir + "/per_sample.csv"));
  CHECK(fs::exists(rep_dir + "/effective_config.json"));
}

TEST_CASE("analyze writes the statistics bundle") {
  auto work = temp_dir("analyze");
  auto cfg_path = write_gen_config(work);
  auto data_dir = work + "/data";
  REQUIRE(cli_run({"generate-data", "--config", cfg_path, "--out", data_dir}) == 0);
  auto out = work + "/stats";
  CHECK(cli_run({"analyze", "--data", data_dir, "--out", out}) == 0);
  CHECK(fs::exists(out + "/persons_per_image.csv"));
  CHECK(fs::exists(out + "/attributes_per_person.csv"));
  CHECK(fs::exists(out + "/expression_length_per_expression.csv"));
  CHECK(fs::exists(out + "/word_frequency.csv"));
  CHECK(slurp(out + "/summary.txt").find("avg persons/image") != std::string::npos);
}

TEST_CASE("usage and runtime failures map to exit codes 2 and 1") {
  CHECK(cli_run({"generate-data", "--nonsense-flag", "x"}) == 2);
  CHECK(cli_run({"no-such-subcommand"}) == 2);
  CHECK(cli_run({}) == 2);
  auto work = temp_dir("err");
  CHECK(cli_run({"analyze", "--data", work + "/missing", "--out", work + "/o"}) == 1);
  CHECK(cli_run({"eval", "--data", work + "/missing", "--out", work + "/o"}) == 1);
}
