#include "doctest.h"

#include "semcom/config.hpp"
#include "semcom/error.hpp"

using namespace semcom;
using config::ExperimentConfig;

TEST_CASE("default config validates and round-trips through JSON") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  const auto j = config::to_json(c);
  const auto back = config::from_json(j);
  CHECK(config::to_json(back) == j);
  CHECK(c.model.dims.r == 64);
  CHECK(c.channel.power.of(model::Scheme::Noma) == doctest::Approx(0.5));
  CHECK(c.channel.power.of(model::Scheme::Oma) == doctest::Approx(1.0));
}

TEST_CASE("unknown keys are rejected with their path") {
  auto j = config::to_json(ExperimentConfig{});
  j["training"]["t2"]["epoch"] = 5;
  try {
    config::from_json(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("training.t2.epoch") != std::string::npos);
  }
  auto top = config::to_json(ExperimentConfig{});
  top["extra"] = 1;
  CHECK_THROWS_AS(config::from_json(top), ValidationError);
}

TEST_CASE("partial documents fill defaults") {
  const auto c = config::from_json(nlohmann::json::parse(R"({"dataset": {"seed": 9}})"));
  CHECK(c.dataset.seed == 9);
  CHECK(c.dataset.p == 64);
}

TEST_CASE("invariants") {
  SUBCASE("duplicate seeds") {
    ExperimentConfig c;
    c.eval.seeds = {1, 2, 1};
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  SUBCASE("odd bandwidth with OMA") {
    ExperimentConfig c;
    c.channel.q_total = 63;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.eval.schemes = {model::Scheme::Noma};
    c.eval.mismatch_schemes = {model::Scheme::Noma};
    c.eval.bandwidths = {16};
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("odd grid bandwidth") {
    ExperimentConfig c;
    c.eval.bandwidths = {16, 33};
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  SUBCASE("fading-aware needs receiver CSI") {
    ExperimentConfig c;
    c.channel.kind = channel::Kind::Rayleigh;
    c.model.variant = nets::Variant::FadingAware;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.channel.csi_mode = channel::CsiMode::Receiver;
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("wrong types") {
    auto j = config::to_json(ExperimentConfig{});
    j["dataset"]["p"] = "sixty-four";
    CHECK_THROWS_AS(config::from_json(j), ValidationError);
  }
}

TEST_CASE("system specs follow the power table and dataset") {
  ExperimentConfig c;
  const auto s = c.system_spec(model::Scheme::Single);
  CHECK(s.devices() == 1);
  CHECK(s.power == doctest::Approx(1.0));
  CHECK(s.dims.classes == c.dataset.n_train_ids);
  CHECK(s.dims.p == c.dataset.p);
  const auto n = c.system_spec(model::Scheme::Noma, nets::Variant::SnrAware, 32);
  CHECK(n.q_total == 32);
  CHECK(n.power == doctest::Approx(0.5));
}

TEST_CASE("load reports missing files and bad JSON") {
  CHECK_THROWS_AS(config::load("/nonexistent/config.json"), Error);
}
