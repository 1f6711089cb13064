#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpmc/config.hpp"
#include "dpmc/experiment.hpp"
#include "dpmc/report.hpp"
#include "dpmc/verify.hpp"

using namespace dpmc;
using nlohmann::json;

namespace {

json small_config() {
  return json::parse(R"({
    "task": "unit",
    "prior": {"kind": "gmm", "weights": [0.5, 0.5], "means": [[-1, 0], [1, 0.5]],
              "covariances": [0.2, [[0.3, 0.05], [0.05, 0.2]]]},
    "operator": {"kind": "mask", "kept": [0]},
    "sigma": 0.05,
    "sampler": {"method": "dpmc", "T": 20, "K": 2, "eta": 5, "xi": 2, "xi_exponent": 1},
    "metrics": {"n_samples": 64, "n_proj": 16},
    "seeds": [1, 2],
    "output_dir": "unused"
  })");
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CorruptAdjoint final : public ForwardOperator {
 public:
  explicit CorruptAdjoint(OperatorPtr inner) : inner_(std::move(inner)) {}
  std::string kind() const override { return inner_->kind(); }
  int in_dim() const override { return inner_->in_dim(); }
  int out_dim() const override { return inner_->out_dim(); }
  bool linear() const override { return inner_->linear(); }
  Vector apply(const Vector& x) const override { return inner_->apply(x); }
  Vector vjp(const Vector& x, const Vector& v) const override { return 1.01 * inner_->vjp(x, v); }
  Matrix matrix() const override { return inner_->matrix(); }

 private:
  OperatorPtr inner_;
};

}  // namespace

TEST(Config, RoundTripIsIdentity) {
  const ExperimentConfig a = parse_config(small_config());
  const json once = to_json(a);
  const json twice = to_json(parse_config(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(a.prior.gmm.covariances[0], 0.2 * Matrix::Identity(2, 2));
  EXPECT_EQ(a.dim(), 2);
}

TEST(Config, UnknownKeysAreHardErrors) {
  json j = small_config();
  j["sampler"]["kk"] = 4;
  j["sigmaa"] = 0.1;
  try {
    parse_config(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.problems().size(), 2u);
    EXPECT_NE(std::string(e.what()).find("sampler.kk"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("sigmaa"), std::string::npos);
  }
}

TEST(Config, SemanticViolationsAreAllListed) {
  json j = small_config();
  j["operator"] = {{"kind", "mask"}, {"kept", {5}}};
  j["sigma"] = -1;
  j["seeds"] = json::array();
  try {
    parse_config(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.problems().size(), 3u) << e.what();
  }
}

TEST(Config, MethodSpecificKeysAreChecked) {
  json j = small_config();
  j["sampler"] = {{"method", "dps"}, {"T", 10}, {"K", 2}, {"zeta", 0.1}};
  EXPECT_THROW(parse_config(j), ConfigError);
  j["sampler"].erase("K");
  EXPECT_NO_THROW(parse_config(j));
}

TEST(Harness, RowsCarryAccountedNfe) {
  const auto cfg = parse_config(small_config());
  const auto results = run_experiment(cfg);
  ASSERT_EQ(results.size(), 2u);
  for (const auto& r : results) {
    EXPECT_EQ(r.row.nfe, nfe_of(cfg.sampler.dpmc()));
    EXPECT_TRUE(r.oracle);
    EXPECT_GT(r.row.sliced_w2, 0.0);
    EXPECT_EQ(r.samples.size(), 64u);
  }
}

TEST(Harness, CsvIsByteIdenticalAcrossRunsAndThreadCounts) {
  const auto cfg = parse_config(small_config());
  const auto dir = std::filesystem::temp_directory_path() / "dpmc_unit_csv";
  RunOptions one;
  one.threads = 1;
  RunOptions many;
  many.threads = 4;
  run_command(cfg, (dir / "a").string(), one);
  run_command(cfg, (dir / "b").string(), many);
  const std::string a = read_file(dir / "a" / "results.csv");
  EXPECT_EQ(a, read_file(dir / "b" / "results.csv"));
  EXPECT_EQ(a.substr(0, a.find('\n')), kCsvHeader);
  std::filesystem::remove_all(dir);
}

TEST(Harness, UnobservedDimensionsGetNanMetrics) {
  json j = small_config();
  j["operator"] = {{"kind", "phase_retrieval"}, {"oversample", 2}};
  j["metrics"]["n_samples"] = 4;
  const auto r = run_seed(parse_config(j), *build_model(parse_config(j)), 3);
  EXPECT_FALSE(r.oracle);
  EXPECT_TRUE(std::isnan(r.row.sliced_w2));
  EXPECT_TRUE(std::isfinite(r.row.residual_mean));
}

TEST(Harness, FormatDoubleIsLossless) {
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(NAN), "nan");
}

TEST(Ablation, TrendRuleAllowsOneMad) {
  EXPECT_TRUE(non_increasing_within_mad({{1, 0.3, 0.02, 5}, {2, 0.31, 0.01, 5}, {4, 0.2, 0.01, 5}}));
  EXPECT_FALSE(non_increasing_within_mad({{1, 0.3, 0.02, 5}, {2, 0.33, 0.01, 5}}));
  EXPECT_DOUBLE_EQ(median({3, 1, 2, 10}), 2.5);
  EXPECT_DOUBLE_EQ(mad({1, 2, 3, 4, 100}), 1.0);
}

TEST(Ablation, AxisOverridesOneField) {
  const auto cfg = parse_config(small_config());
  EXPECT_EQ(with_axis(cfg, "K", 6).sampler.K, 6);
  EXPECT_EQ(with_axis(cfg, "T", 50).sampler.T, 50);
  EXPECT_EQ(with_axis(cfg, "xi_exponent", 3).sampler.xi_exponent, 3.0);
  EXPECT_THROW(with_axis(cfg, "eta", 1), std::invalid_argument);
  EXPECT_THROW(run_ablation(cfg, "K", {}), std::invalid_argument);
}

TEST(Verify, CorruptedAdjointFailsNamedCheck) {
  VerifyOptions o;
  o.wrap_operator = [](OperatorPtr op) -> OperatorPtr { return std::make_shared<CorruptAdjoint>(op); };
  bool named = false;
  for (const auto& c : verify_gradients(o)) {
    if (c.name == "gradients.adjoint.mask") {
      named = true;
      EXPECT_FALSE(c.pass);
    }
  }
  EXPECT_TRUE(named);
}

TEST(Verify, CleanGradientSuitePasses) {
  for (const auto& c : verify_gradients()) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
}

TEST(Verify, UnknownSuiteThrows) { EXPECT_THROW(run_suite("everything"), std::invalid_argument); }
