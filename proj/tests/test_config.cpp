#include <gtest/gtest.h>

#include "slds/config.hpp"

using namespace slds;

TEST(ModelJson, CaseStudyShorthand) {
  const auto mb = model_from_json(Json::parse(R"({"case_study": {"n": 2, "gamma_root": 0.9, "c_root": 2, "rho": 10}})"));
  EXPECT_EQ(mb.model.n(), 2);
  EXPECT_EQ(mb.rho_ball, 10.0);
  EXPECT_TRUE(mb.cl.ahat(0).isApprox(0.9 * MatrixXd::Identity(2, 2)));
}

TEST(ModelJson, FullSchemaRoundTrip) {
  const auto j = Json::parse(R"({
    "n": 2, "p": 1, "rho": 3,
    "regions": [
      {"kind": "polyhedral", "L": [[1, 0]], "C": [0], "declared_unbounded": true},
      {"kind": "radial_shell", "r_lo": 0, "r_hi": "inf"}
    ],
    "A": [[[0.5, 0], [0, 0.5]], [[0.2, 0.1], [0, 0.3]]],
    "B": [[[1], [0]], [[0], [1]]],
    "pi": [[-0.1, 0]],
    "Q": [[1, 0], [0, 2]],
    "R": [[1]],
    "normalize_reward": false
  })");
  const auto a = model_from_json(j);
  const auto b = model_from_json(model_to_json(a));
  ASSERT_EQ(a.cl.size(), b.cl.size());
  for (std::size_t k = 0; k < a.cl.size(); ++k) EXPECT_TRUE(a.cl.ahat(k).isApprox(b.cl.ahat(k), 0));
  EXPECT_TRUE(a.spec.effective().isApprox(b.spec.effective(), 0));
  VectorXd x(2);
  x << 1, 0.5;
  EXPECT_EQ(region_of(a.model, x), 1u);
  EXPECT_EQ(region_of(b.model, x), 1u);
  EXPECT_EQ(a.rho_ball, b.rho_ball);
}

TEST(ModelJson, Errors) {
  EXPECT_THROW(model_from_json(Json::parse(R"({"n": 1})")), ConfigParse);
  EXPECT_THROW(model_from_json(Json::parse(R"([1, 2])")), ConfigParse);
  EXPECT_THROW(load_model("/no/such/model.json"), ConfigParse);
  EXPECT_THROW(model_from_json(Json::parse(R"({"case_study": {"n": 0, "gamma_root": 0.9, "c_root": 2, "rho": 10}})")),
               Error);
}

TEST(CertificateJson, RoundTrip) {
  const auto mb = model_from_json(Json::parse(R"({"case_study": {"n": 1, "gamma_root": 0.9, "c_root": 2, "rho": 10}})"));
  const auto c = certify(mb.cl, classify_regions(mb.model, 10.0), 10.0, 1);
  const auto d = certificate_from_json(certificate_to_json(c));
  EXPECT_EQ(d.gamma, c.gamma);
  EXPECT_EQ(d.K, c.K);
  EXPECT_EQ(d.r_hat, c.r_hat);
  EXPECT_EQ(d.log_beta, c.log_beta);
  EXPECT_EQ(d.lambda, c.lambda);
  EXPECT_EQ(d.drift2_verified, c.drift2_verified);
}

TEST(ConstantsJson, PartialOverride) {
  const auto k = constants_from_json(Json::parse(R"({"o3": 0, "c_10as": 2.5})"));
  EXPECT_EQ(k.o3, 0.0);
  EXPECT_EQ(k.c_10as, 2.5);
  EXPECT_EQ(k.o1, 1.0);
  EXPECT_EQ(constants_from_json(constants_to_json(k)).c_10as, 2.5);
  EXPECT_THROW(constants_from_json(Json::parse(R"({"o1": -1})")), Error);
}

TEST(SweepJson, Grids) {
  const auto c = sweep_from_json(
      Json::parse(R"({"dims": {"start": 25, "stop": 200, "step": 25}, "gammas": {"start": 0.5, "stop": 0.9, "step": 0.05}})"),
      SweepConfig{});
  EXPECT_EQ(c.dims.size(), 8u);
  EXPECT_EQ(c.dims.back(), 200);
  ASSERT_EQ(c.gammas.size(), 9u);
  EXPECT_EQ(c.gammas[1], 0.55);
  EXPECT_EQ(c.gammas.back(), 0.9);
  const auto d = sweep_from_json(sweep_to_json(c), SweepConfig{});
  EXPECT_EQ(d.gammas, c.gammas);
  EXPECT_EQ(d.dims, c.dims);
}

TEST(PipelineJson, Sections) {
  const auto p = pipeline_from_json(Json::parse(R"({"master_seed": 5, "gamma_sweep": {"trials": 3}})"));
  EXPECT_FALSE(p.dimension);
  ASSERT_TRUE(p.gamma);
  EXPECT_EQ(p.gamma->trials, 3u);
  EXPECT_EQ(p.gamma->master_seed, 5u);
  EXPECT_EQ(p.gamma->gammas, SweepConfig::desk_gamma().gammas);
  EXPECT_THROW(pipeline_from_json(Json::parse(R"({"master_seed": 5})")), ConfigParse);
  EXPECT_THROW(pipeline_from_json(Json::parse(R"({"gamma_sweep": {"trials": "many"}})")), ConfigParse);
}
