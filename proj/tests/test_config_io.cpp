#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "emgesture/config.hpp"
#include "emgesture/io.hpp"
#include "emgesture/plot.hpp"
#include "test_util.hpp"

using namespace emg;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ml::EvalReport small_report() {
  ml::EvalReport r;
  r.model_name = "random-forest";
  r.class_names = {"a", "b", "c"};
  r.confusion = {{4, 0, 0}, {1, 3, 0}, {0, 0, 4}};
  r.n_test = 12;
  r.accuracy = 11.0 / 12.0;
  r.per_class_recall = {1.0, 0.75, 1.0};
  return r;
}

AveragePowerSpectrum row(std::vector<double> p, SpectrumSource s, std::string label) {
  return {std::move(p), 100.0, 50, s, std::move(label)};
}

}  // namespace

TEST(ScenarioJson, RoundTrip) {
  auto c = reference_scenario();
  c.seed = 42;
  c.train.model = "knn";
  c.denoise.mode = DenoiseMode::whole;
  c.features.window = WindowKind::hann;
  const auto back = scenario_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(ScenarioJson, ShippedConfigsMatchLibraryDefaults) {
  const std::filesystem::path dir = EMGESTURE_SOURCE_DIR "/configs";
  EXPECT_EQ(read_json_file(dir / "reference.json").dump(), to_json(reference_scenario()).dump());
  EXPECT_EQ(read_json_file(dir / "fidelity.json").dump(), to_json(fidelity_scenario()).dump());
  const auto smoke = scenario_from_json(read_json_file(dir / "smoke.json"));
  EXPECT_EQ(smoke.duration_s, 4.0);
  EXPECT_EQ(smoke.train.forest.n_trees, 30);
}

TEST(ScenarioJson, PartialOverridesKeepBase) {
  const auto c = scenario_from_json(json{{"train", {{"pool_bins", 128}}}});
  EXPECT_EQ(c.train.pool_bins, 128u);
  EXPECT_EQ(c.synth.carrier_bands.size(), 4u);
  EXPECT_EQ(c.denoise.vmd.k_modes, 1);
}

TEST(ScenarioJson, RejectsBadInput) {
  EXPECT_ERROR_CODE(scenario_from_json(json{{"sead", 1}}), "bad_config");
  EXPECT_ERROR_CODE(scenario_from_json(json{{"train", {{"modle", "rf"}}}}), "bad_config");
  EXPECT_ERROR_CODE(scenario_from_json(json{{"train", {{"model", "svm"}}}}), "bad_config");
  EXPECT_ERROR_CODE(scenario_from_json(json{{"denoise", {{"mode", "magic"}}}}), "bad_config");
  EXPECT_ERROR_CODE(scenario_from_json(json{{"duration_s", -1}}), "bad_config");
  EXPECT_ERROR_CODE(scenario_from_json(json::array()), "bad_config");
}

TEST(ScenarioJson, FileLoadsConfigOrManifest) {
  const auto dir = make_temp_dir("cfg");
  auto c = reference_scenario();
  c.seed = 5;
  write_json_file(dir / "c.json", to_json(c));
  EXPECT_EQ(scenario_from_file(dir / "c.json", reference_scenario()).seed, 5u);
  Manifest m(dir, to_json(c));
  m.finalize(dir / "manifest.json");
  EXPECT_EQ(scenario_from_file(dir / "manifest.json", reference_scenario()).seed, 5u);
  EXPECT_ERROR_CODE(scenario_from_file(dir / "absent.json", reference_scenario()), "missing_file");
}

TEST(ManifestTest, RecordsOutputsAndChecksThem) {
  const auto dir = make_temp_dir("manifest");
  const json cfg = to_json(reference_scenario());
  Manifest m(dir, cfg);
  std::ofstream(dir / "a.csv") << "x\n";
  m.add_output("features", dir / "a.csv");
  m.stage("features")["rows"] = 3;
  m.finalize(dir / "manifest.json");
  const json j = read_json_file(dir / "manifest.json");
  EXPECT_EQ(j["run_id"], run_id_for(cfg));
  EXPECT_EQ(j["stages"]["features"]["outputs"][0], "a.csv");
  EXPECT_EQ(j["stages"]["features"]["rows"], 3);
  EXPECT_TRUE(j["finished_utc"].is_string());

  Manifest bad(dir, cfg);
  bad.add_output("train", dir / "missing.json");
  EXPECT_ERROR_CODE(bad.finalize(dir / "m2.json"), "missing_output");
}

TEST(ManifestTest, RunIdFollowsConfig) {
  auto c = reference_scenario();
  const auto a = run_id_for(to_json(c));
  EXPECT_EQ(a, run_id_for(to_json(c)));
  c.seed = 8;
  EXPECT_NE(a, run_id_for(to_json(c)));
  EXPECT_EQ(a.size(), 16u);
}

TEST(ReportJson, RoundTripAndCsv) {
  const auto r = small_report();
  const auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.class_names, r.class_names);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.per_class_recall, r.per_class_recall);
  const auto dir = make_temp_dir("report");
  write_confusion_csv(dir / "c.csv", r);
  EXPECT_EQ(slurp(dir / "c.csv"), "true\\predicted,a,b,c\na,4,0,0\nb,1,3,0\nc,0,0,4\n");
}

TEST(Bundle, ThreeRowsPerSample) {
  const std::vector<AveragePowerSpectrum> orig{row({3, 4}, SpectrumSource::gesture, "fist"),
                                               row({5, 6}, SpectrumSource::gesture, "gesture-1")};
  const auto noise = row({1, 1}, SpectrumSource::noise, "noise");
  const std::vector<AveragePowerSpectrum> den{row({2, 3}, SpectrumSource::denoised, "fist"),
                                              row({4, 5}, SpectrumSource::denoised, "gesture-1")};
  const auto rows = make_bundle(orig, noise, den);
  ASSERT_EQ(rows.size(), 6u);
  const auto dir = make_temp_dir("bundle");
  write_aps_csv(dir / "b.csv", rows);
  const auto read = read_aps_csv(dir / "b.csv");
  const auto s = bundle_sample(read, 1);
  EXPECT_EQ(s.original.power, (std::vector<double>{5, 6}));
  EXPECT_EQ(s.noise.label, std::optional<std::string>("gesture-1"));
  EXPECT_EQ(s.denoised.power, (std::vector<double>{4, 5}));
  EXPECT_ERROR_CODE(bundle_sample(read, 2), "bounds");
  EXPECT_ERROR_CODE(bundle_sample(std::span(read).first(5), 0), "bad_bundle");
}

TEST(Plot, DecaySeriesDropsByEPerSkinDepth) {
  const auto s = decay_series(0.002, 5, 2.0);
  ASSERT_EQ(s.size(), 1u);
  ASSERT_EQ(s[0].y.size(), 5u);
  EXPECT_EQ(s[0].y[0], 2.0);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(s[0].y[i] / s[0].y[i - 1], std::exp(-1.0), 1e-12);
  EXPECT_ERROR_CODE(decay_series(0.002, 1), "bad_argument");
}

TEST(Plot, ConfusionSeriesCarriesCounts) {
  const auto s = confusion_series(small_report());
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1].name, "b");
  EXPECT_EQ(s[1].x, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(s[1].y, (std::vector<double>{1, 3, 0}));
}

TEST(Plot, SpectrumSeriesInHertz) {
  const std::vector<AveragePowerSpectrum> a{row({1, 2}, SpectrumSource::gesture, "g"),
                                            row({0, 1}, SpectrumSource::noise, "n"),
                                            row({1, 1}, SpectrumSource::denoised, "g")};
  const std::vector<std::string> names{"original", "noise", "denoised"};
  const auto s = spectrum_series(a, names);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[2].name, "denoised");
  EXPECT_EQ(s[0].x[1], format_double(100.0));
}

TEST(Plot, WritesTidyCsvAndSvg) {
  const auto dir = make_temp_dir("plot");
  const std::vector<Series> s{{"a", {"1", "2"}, {0.5, 1.5}}, {"b,c", {"1"}, {2.0}}};
  write_tidy_csv(dir / "p.csv", s);
  EXPECT_EQ(slurp(dir / "p.csv"),
            "x,y,series\n1," + format_double(0.5) + ",a\n2," + format_double(1.5) + ",a\n1," + format_double(2.0) +
                ",\"b,c\"\n");
  write_svg_lines(dir / "p.svg", s, "t<1>", true);
  const auto svg = slurp(dir / "p.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("t&lt;1&gt;"), std::string::npos);
  write_svg_confusion(dir / "c.svg", small_report());
  EXPECT_TRUE(std::filesystem::exists(dir / "c.svg"));
  EXPECT_ERROR_CODE(plot_kind_from_string("pie"), "unknown_kind");
  const std::vector<Series> ragged{{"r", {"1"}, {}}};
  EXPECT_ERROR_CODE(write_tidy_csv(dir / "r.csv", ragged), "bad_series");
}
