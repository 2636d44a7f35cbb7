#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

#include "ovxai/pipeline.hpp"
#include "test_util.hpp"

using namespace ovxai;
namespace pl = ovxai::pipeline;
namespace fs = std::filesystem;
using ovxai::testing::read_file;
using ovxai::testing::scratch_dir;
using ovxai::testing::write_file;

namespace {

nlohmann::json small_config(const fs::path& out) {
  return {{"seed", 7},
          {"k_folds", 3},
          {"ga", {{"population", 6}, {"generations", 2}, {"fitness_folds", 3}}},
          {"gbdt", {{"n_rounds", 10}}},
          {"background_rows", 10},
          {"force_top_correct", 1},
          {"output_dir", out.string()}};
}

fs::path synth_csv(const fs::path& dir, std::size_t rows) {
  const auto spec = dir / "spec.json";
  write_file(spec, nlohmann::json({{"n_rows", rows}, {"n_informative", 2}, {"n_noise", 2},
                                   {"class_separation", 3.0}, {"missing_rate", 0.05}, {"seed", 3}})
                       .dump());
  const auto csv = dir / "data.csv";
  EXPECT_EQ(pl::cmd_synth(spec.string(), csv.string()), 0);
  return csv;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST(Config, RejectsBadFoldCountNamingField) {
  try {
    pl::parse_config({{"k_folds", 1}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("k_folds"), std::string::npos);
  }
  EXPECT_THROW(pl::parse_config({{"cutoffs", "nope"}}), ConfigError);
  EXPECT_THROW(pl::parse_config({{"seed", "abc"}}), ConfigError);
  EXPECT_THROW(pl::parse_config(nlohmann::json::array()), ConfigError);
}

TEST(Config, OvarianSchemaSetsColumnDefaults) {
  auto c = pl::parse_config({{"schema", "ovarian"}});
  EXPECT_EQ(c.label_column, "TYPE");
  EXPECT_EQ(c.stratum_column, "Menopause");
}

TEST(Config, RoundTripAndHash) {
  auto a = pl::parse_config({{"seed", 3}});
  auto b = pl::parse_config(pl::to_json(a));
  EXPECT_EQ(pl::to_json(a), pl::to_json(b));
  EXPECT_EQ(pl::config_hash(a), pl::config_hash(b));
  EXPECT_EQ(pl::config_hash(a).size(), 16u);
  b.ga.population = 50;
  EXPECT_NE(pl::config_hash(a), pl::config_hash(b));
}

TEST(FileToken, DistinguishesHashAndPercent) {
  EXPECT_EQ(pl::file_token("BASO#"), "BASO_abs");
  EXPECT_EQ(pl::file_token("BASO%"), "BASO_pct");
  EXPECT_EQ(pl::file_token("Age"), "Age");
  EXPECT_EQ(pl::file_token("a b/c"), "a_b_c");
}

TEST(Commands, ExitCodes) {
  const auto dir = scratch_dir("exit_codes");
  std::ostringstream err;
  write_file(dir / "bad.json", R"({"k_folds": 1})");
  EXPECT_EQ(pl::cmd_run((dir / "bad.json").string(), (dir / "none.csv").string(), {}, err),
            pl::kConfigError);
  EXPECT_NE(err.str().find("k_folds"), std::string::npos);
  const auto msg = err.str();
  EXPECT_EQ(std::count(msg.begin(), msg.end(), '\n'), 1);

  write_file(dir / "ok.json", "{}");
  EXPECT_EQ(pl::cmd_run((dir / "ok.json").string(), (dir / "none.csv").string(), {}, err),
            pl::kDataError);
  EXPECT_EQ(pl::cmd_run((dir / "missing.json").string(), (dir / "none.csv").string(), {}, err),
            pl::kConfigError);
  EXPECT_EQ(pl::cmd_roma((dir / "none.csv").string(), "bogus", dir.string(), {}, err),
            pl::kConfigError);
  write_file(dir / "spec.json", R"({"n_rows": 0})");
  EXPECT_EQ(pl::cmd_synth((dir / "spec.json").string(), (dir / "x.csv").string(), {}, err),
            pl::kConfigError);
}

TEST(Commands, RomaOnMarkerTable) {
  const auto dir = scratch_dir("roma_cmd");
  write_file(dir / "d.csv",
             "HE4,CA125,label,stratum\n"
             "50,30,0,pre\n40,20,0,pre\n900,800,1,pre\n700,,1,pre\n"
             "200,100,1,post\n60,10,0,post\n45,12,0,post\n500,300,1,post\n");
  ASSERT_EQ(pl::cmd_roma((dir / "d.csv").string(), "standard", dir.string()), 0);
  auto j = nlohmann::json::parse(read_file(dir / "roma_metrics.json"));
  EXPECT_EQ(j["cutoffs"]["label"], "standard");
  EXPECT_EQ(j["premenopausal"]["scored"], 4);
  const auto scores = read_file(dir / "roma_scores.csv");
  EXPECT_EQ(std::count(scores.begin(), scores.end(), '\n'), 9);
  EXPECT_NE(scores.find("\n0,pre,0,"), std::string::npos);
}

TEST(Commands, ExplainBiasOnlyModelGivesZeroAttributions) {
  const auto dir = scratch_dir("explain_cmd");
  gbdt::Ensemble e;
  e.bias = 0.3;
  e.feature_count = 2;
  e.feature_names = {"a", "b"};
  pl::write_json(dir / "model.json", e);
  write_file(dir / "x.csv", "a,b,label\n1,2,0\n3,4,1\n5,6,0\n");
  ASSERT_EQ(pl::cmd_explain((dir / "model.json").string(), (dir / "x.csv").string(),
                            (dir / "out").string()),
            0);
  const auto csv = read_file(dir / "out" / "attributions.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,phi_a,phi_b,base_value,model_output");
  EXPECT_NE(csv.find("\n0,0,0,0.29999999999999999,0.29999999999999999\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "force_2.svg"));

  e.feature_names.clear();
  pl::write_json(dir / "anon.json", e);
  std::ostringstream err;
  EXPECT_EQ(pl::cmd_explain((dir / "anon.json").string(), (dir / "x.csv").string(),
                            (dir / "out").string(), {}, err),
            pl::kDataError);
}

TEST(Run, WritesDeclaredFilesDeterministically) {
  const auto dir = scratch_dir("run_small");
  const auto csv = synth_csv(dir, 90);
  const auto out = dir / "out";
  write_file(dir / "cfg.json", small_config(out).dump());
  ASSERT_EQ(pl::cmd_run((dir / "cfg.json").string(), csv.string()), 0);
  const auto first = snapshot(out);

  auto manifest = nlohmann::json::parse(first.at("manifest.json"));
  for (const auto& f : manifest["files"]) EXPECT_TRUE(first.count(f.get<std::string>())) << f;
  for (const char* f : {"metrics.json", "metrics.csv", "selected_features.json", "ga_history.json",
                        "roma_metrics.json", "premenopausal/model.json",
                        "postmenopausal/attributions.csv", "postmenopausal/force_index.json"})
    EXPECT_TRUE(first.count(f)) << f;
  EXPECT_EQ(manifest["strata_rows"]["premenopausal"].get<int>() + manifest["strata_rows"]["postmenopausal"].get<int>(), 90);

  auto metrics = nlohmann::json::parse(first.at("metrics.json"));
  EXPECT_GE(metrics["total_average"]["xgboost"]["accuracy"].get<double>(), 0.8);
  EXPECT_FALSE(nlohmann::json::parse(first.at("roma_metrics.json"))["available"].get<bool>());
  const auto& mcsv = first.at("metrics.csv");
  EXPECT_EQ(std::count(mcsv.begin(), mcsv.end(), '\n'), 7);
  EXPECT_NE(mcsv.find("XGBoost + GA,Total Average,"), std::string::npos);

  fs::remove_all(out);
  ASSERT_EQ(pl::cmd_run((dir / "cfg.json").string(), csv.string()), 0);
  EXPECT_EQ(snapshot(out), first);
}

TEST(Run, LeakSafeAndNestedModesComplete) {
  const auto dir = scratch_dir("run_modes");
  const auto csv = synth_csv(dir, 60);
  write_file(dir / "cfg.json", small_config(dir / "out").dump());
  pl::RunOverrides o;
  o.leak_safe = true;
  o.nested = true;
  ASSERT_EQ(pl::cmd_run((dir / "cfg.json").string(), csv.string(), o), 0);
  auto sel = nlohmann::json::parse(read_file(dir / "out" / "selected_features.json"));
  EXPECT_EQ(sel["premenopausal"]["fold_features"].size(), 3u);
  auto man = nlohmann::json::parse(read_file(dir / "out" / "manifest.json"));
  EXPECT_TRUE(man["config"]["leak_safe"].get<bool>());
}

TEST(Run, TooFewRowsPerClassIsDataError) {
  const auto dir = scratch_dir("run_small_strata");
  const auto csv = synth_csv(dir, 12);
  auto cfg = small_config(dir / "out");
  cfg["k_folds"] = 5;
  write_file(dir / "cfg.json", cfg.dump());
  std::ostringstream err;
  EXPECT_EQ(pl::cmd_run((dir / "cfg.json").string(), csv.string(), {}, err), pl::kDataError);
}

TEST(Cli, SynthAndHelp) {
  const auto dir = scratch_dir("cli");
  write_file(dir / "spec.json", R"({"n_rows": 20, "seed": 1})");
  const std::string cli = OVXAI_CLI_PATH;
  const auto out = dir / "d.csv";
  EXPECT_EQ(std::system((cli + " synth --spec " + (dir / "spec.json").string() + " --out " +
                         out.string() + " --seed 9")
                            .c_str()),
            0);
  const auto text = read_file(out);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 21);
  const auto status = std::system((cli + " run --config " + (dir / "nope.json").string() +
                                   " --data " + out.string() + " 2>/dev/null")
                                      .c_str());
  EXPECT_EQ(WEXITSTATUS(status), 3);
  EXPECT_EQ(std::system((cli + " --help > /dev/null").c_str()), 0);
}
