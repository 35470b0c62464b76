#include <filesystem>
#include <set>

#include "doctest.h"

#include "semcom/error.hpp"
#include "semcom/experiment.hpp"

using namespace semcom;
using experiment::Axis;
using experiment::ResultRow;
using model::Scheme;

namespace {

config::ExperimentConfig tiny() {
  config::ExperimentConfig c;
  c.dataset.n_train_ids = 12;
  c.dataset.n_test_ids = 6;
  c.dataset.p = 16;
  c.dataset.d = 4;
  c.model.dims.r = 8;
  c.model.dims.feature_hidden = {16};
  c.model.dims.encoder_hidden = {16};
  c.model.dims.decoder_hidden = {16};
  c.model.dims.af_hidden = 4;
  c.channel.q_total = 8;
  auto& t = c.training;
  t.t1_epochs = 2;
  t.t2_epochs = 2;
  t.t3_epochs = 1;
  t.digital_epochs = 1;
  c.eval.snr_test_db = {0, 6};
  c.eval.seeds = {1, 2};
  c.eval.bandwidths = {4, 8};
  c.eval.lambda_cos = {0, 0.1, 1};
  c.eval.mismatch_train_db = {0, 6};
  c.eval.mismatch_test_db = {-3, 3, 9};
  c.eval.lambda_rate = {1e-3, 1e-2};
  c.validate();
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("semcom_test_experiment_" + name);
  std::filesystem::remove_all(p);
  return p;
}

const std::vector<Scheme> kAll{Scheme::Single, Scheme::Oma, Scheme::Noma, Scheme::Digital};

}  // namespace

TEST_CASE("axis names") {
  for (auto a : {Axis::Snr, Axis::Bandwidth, Axis::LambdaCos, Axis::SnrMismatch}) {
    CHECK(experiment::parse_axis(experiment::to_string(a)) == a);
  }
  CHECK(experiment::to_string(Axis::SnrMismatch) == "snr_mismatch");
  CHECK_THROWS_AS(experiment::parse_axis("frequency"), ValidationError);
}

TEST_CASE("csv layout") {
  CHECK(experiment::csv_header() ==
        "scheme,channel,csi_mode,snr_train_db,snr_test_db,q_total,lambda_cos,seed,top1,cos_sq,outage_rate");
  ResultRow r;
  r.scheme = Scheme::Oma;
  r.channel = "awgn";
  r.csi_mode = "none";
  r.snr_train_db = "6";
  r.snr_test_db = -3;
  r.q_total = 64;
  r.lambda_cos = 0.1;
  r.seed = 4;
  r.top1 = 0.5;
  r.cos_sq = 0.25;
  CHECK(experiment::csv_line(r) == "oma,awgn,none,6,-3,64,0.10000000000000001,4,0.5,0.25,0");
}

TEST_CASE("canonical sort: scheme, training SNR (na, numbers, aware), then test SNR and seed") {
  const auto row = [](Scheme s, std::string train, double test, std::uint64_t seed) {
    ResultRow r;
    r.scheme = s;
    r.snr_train_db = std::move(train);
    r.snr_test_db = test;
    r.seed = seed;
    return r;
  };
  std::vector<ResultRow> rows{row(Scheme::Noma, "aware", 0, 1), row(Scheme::Noma, "12", 0, 1),
                              row(Scheme::Noma, "-6", 3, 2),   row(Scheme::Noma, "-6", 3, 1),
                              row(Scheme::Single, "0", 0, 1),  row(Scheme::Digital, "na", 0, 1)};
  experiment::sort_rows(rows);
  std::vector<std::string> got;
  for (auto& r : rows) got.push_back(model::to_string(r.scheme) + ":" + r.snr_train_db + ":" + std::to_string(r.seed));
  CHECK(got == std::vector<std::string>{"single:0:1", "noma:-6:1", "noma:-6:2", "noma:12:1", "noma:aware:1",
                                        "digital:na:1"});
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<int> hits(50, 0);
  experiment::parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(experiment::parallel_for(10, 3,
                                           [](std::size_t i) {
                                             if (i == 7) throw NumericError("boom");
                                           }),
                  NumericError);
}

TEST_CASE("sweep row counts follow the grids") {
  const auto cfg = tiny();
  experiment::Workspace ws(cfg, data::generate(cfg.dataset));
  const auto run = [&](Axis a, std::vector<Scheme> s) {
    return experiment::run_sweep(ws, {.axis = a, .schemes = s, .seeds = cfg.eval.seeds, .jobs = 1});
  };
  const std::size_t seeds = cfg.eval.seeds.size();

  const auto snr = run(Axis::Snr, kAll);
  CHECK(snr.size() == 4 * cfg.eval.snr_test_db.size() * seeds);
  for (const auto& r : snr) {
    CHECK(r.snr_train_db == (r.scheme == Scheme::Digital ? "na" : experiment::JsccKey{.snr_train_db = r.snr_test_db}.snr_label()));
    CHECK(r.top1 >= 0);
    CHECK(r.top1 <= 1);
  }

  const auto bw = run(Axis::Bandwidth, kAll);
  CHECK(bw.size() == 4 * cfg.eval.bandwidths.size() * seeds);
  std::set<std::size_t> qs;
  for (const auto& r : bw) qs.insert(r.q_total);
  CHECK(qs == std::set<std::size_t>{4, 8});

  const auto lam = run(Axis::LambdaCos, kAll);
  CHECK(lam.size() == (cfg.eval.lambda_cos.size() + 1) * seeds);

  const auto mis = run(Axis::SnrMismatch, {Scheme::Oma, Scheme::Noma});
  CHECK(mis.size() == 2 * (cfg.eval.mismatch_train_db.size() + 1) * cfg.eval.mismatch_test_db.size() * seeds);
  CHECK(std::count_if(mis.begin(), mis.end(), [](auto& r) { return r.snr_train_db == "aware"; }) ==
        static_cast<long>(2 * cfg.eval.mismatch_test_db.size() * seeds));
}

TEST_CASE("rows do not depend on the worker count and survive the disk cache") {
  const auto cfg = tiny();
  const auto dir = scratch("cache");
  const auto data = data::generate(cfg.dataset);
  const std::vector<Scheme> schemes{Scheme::Oma, Scheme::Noma, Scheme::Digital};

  experiment::Workspace a(cfg, data, dir);
  const auto one = experiment::to_csv(
      experiment::run_sweep(a, {.axis = Axis::Snr, .schemes = schemes, .seeds = {1, 2}, .jobs = 1}));

  experiment::Workspace b(cfg, data);
  const auto three = experiment::to_csv(
      experiment::run_sweep(b, {.axis = Axis::Snr, .schemes = schemes, .seeds = {1, 2}, .jobs = 3}));
  CHECK(one == three);

  experiment::Workspace cached(cfg, data, dir, false);
  const auto again = experiment::to_csv(
      experiment::run_sweep(cached, {.axis = Axis::Snr, .schemes = schemes, .seeds = {1, 2}, .jobs = 1}));
  CHECK(one == again);

  CHECK_THROWS_AS(experiment::run_axis(cached, Axis::Snr, {Scheme::Noma}, 3), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cache keys ignore the eval section and the training SNR default") {
  auto cfg = tiny();
  const auto dir = scratch("fingerprint");
  const auto data = data::generate(cfg.dataset);
  {
    experiment::Workspace w(cfg, data, dir);
    w.stage3({.scheme = Scheme::Noma, .q_total = 8, .snr_train_db = 0.0, .seed = 1});
  }
  cfg.eval.snr_test_db = {3};
  cfg.channel.snr_train_db = 9;
  experiment::Workspace w(cfg, data, dir, false);
  CHECK_NOTHROW(w.stage3({.scheme = Scheme::Noma, .q_total = 8, .snr_train_db = 0.0, .seed = 1}));
  cfg.training.t2_epochs = 3;
  experiment::Workspace changed(cfg, data, dir, false);
  CHECK_THROWS_AS(changed.stage3({.scheme = Scheme::Noma, .q_total = 8, .snr_train_db = 0.0, .seed = 1}),
                  ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("digital rows are skipped on a fading channel without receiver CSI") {
  auto cfg = tiny();
  cfg.channel.kind = channel::Kind::Rayleigh;
  experiment::Workspace ws(cfg, data::generate(cfg.dataset));
  const auto rows = experiment::run_axis(ws, Axis::Snr, {Scheme::Digital, Scheme::Noma}, 1);
  CHECK(rows.size() == cfg.eval.snr_test_db.size());
  for (const auto& r : rows) CHECK(r.scheme == Scheme::Noma);
}
