#include "semcom/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

#include "semcom/error.hpp"
#include "semcom/io.hpp"
#include "semcom/training.hpp"

namespace semcom::experiment {

namespace fs = std::filesystem;
using model::Scheme;

std::string to_string(Axis a) {
  switch (a) {
    case Axis::Snr: return "snr";
    case Axis::Bandwidth: return "bandwidth";
    case Axis::LambdaCos: return "lambda_cos";
    case Axis::SnrMismatch: return "snr_mismatch";
  }
  return "?";
}

Axis parse_axis(const std::string& text) {
  for (Axis a : {Axis::Snr, Axis::Bandwidth, Axis::LambdaCos, Axis::SnrMismatch}) {
    if (to_string(a) == text) return a;
  }
  throw ValidationError("unknown axis '" + text + "' (snr, bandwidth, lambda_cos, snr_mismatch)");
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Short form for file names and labels.
std::string short_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

double snr_sort_key(const std::string& s) {
  if (s == "aware") return std::numeric_limits<double>::infinity();
  if (s == "na") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

std::string csv_header() {
  return "scheme,channel,csi_mode,snr_train_db,snr_test_db,q_total,lambda_cos,seed,top1,cos_sq,outage_rate";
}

std::string csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << model::to_string(r.scheme) << ',' << r.channel << ',' << r.csi_mode << ',' << r.snr_train_db << ','
     << num(r.snr_test_db) << ',' << r.q_total << ',' << num(r.lambda_cos) << ',' << r.seed << ','
     << num(r.top1) << ',' << num(r.cos_sq) << ',' << num(r.outage_rate);
  return os.str();
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += csv_line(r) + "\n";
  return out;
}

void sort_rows(std::vector<ResultRow>& rows) {
  const auto key = [](const ResultRow& r) {
    return std::make_tuple(static_cast<int>(r.scheme), snr_sort_key(r.snr_train_db), r.q_total, r.lambda_cos,
                           r.snr_test_db, r.seed);
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) { return key(a) < key(b); });
}

std::string JsccKey::snr_label() const { return snr_train_db ? short_num(*snr_train_db) : "aware"; }

std::string JsccKey::name() const {
  return model::to_string(scheme) + "-" + nets::to_string(variant) + "-q" + std::to_string(q_total) + "-snr" +
         snr_label() + "-lc" + short_num(lambda_cos) + "-s" + std::to_string(seed);
}

Workspace::Workspace(config::ExperimentConfig cfg, data::Dataset data, fs::path cache_dir, bool allow_training)
    : cfg_(std::move(cfg)), data_(std::move(data)), cache_dir_(std::move(cache_dir)), allow_training_(allow_training) {
  auto j = config::to_json(cfg_);
  j.erase("eval");
  j["channel"].erase("snr_train_db");
  j["channel"].erase("q_total");
  const std::string dump = j.dump();
  fingerprint_ = io::hex32(io::crc32(std::vector<std::uint8_t>(dump.begin(), dump.end())));
}

Checkpoint Workspace::memo(const std::string& key, const std::function<Checkpoint()>& make) {
  std::unique_lock lock(mu_);
  if (auto it = done_.find(key); it != done_.end()) {
    auto f = it->second;
    lock.unlock();
    return f.get();
  }
  std::promise<Checkpoint> promise;
  done_.emplace(key, promise.get_future().share());
  lock.unlock();
  try {
    const fs::path dir = cache_dir_.empty() ? fs::path{} : cache_dir_ / fingerprint_ / key;
    Checkpoint c;
    if (!dir.empty() && fs::exists(dir / "manifest.json")) {
      spdlog::debug("loading checkpoint {}", dir.string());
      c = load_checkpoint(dir);
    } else {
      if (!allow_training_) throw ValidationError("missing checkpoint: " + (dir.empty() ? key : dir.string()));
      c = make();
      if (!dir.empty()) save_checkpoint(c, dir);
    }
    promise.set_value(c);
    return c;
  } catch (...) {
    promise.set_exception(std::current_exception());
    throw;
  }
}

Checkpoint Workspace::front(int devices, std::uint64_t seed) {
  const std::string key = "t1-d" + std::to_string(devices) + "-s" + std::to_string(seed);
  return memo(key, [&] {
    spdlog::info("training {}", key);
    auto c = training::initial_checkpoint(cfg_.system_spec(devices == 1 ? Scheme::Single : Scheme::Noma), seed);
    training::MetricLog log;
    training::run_stage1(c, cfg_.training, data_, log);
    std::lock_guard g(mu_);
    logs_[key] = log.csv();
    return c;
  });
}

namespace {

training::TrainConfig train_config_for(const config::ExperimentConfig& cfg, const JsccKey& key) {
  auto t = cfg.train_config(key.snr_train_db.value_or(0.0));
  t.snr.range = !key.snr_train_db.has_value();
  t.lambda_cos = key.lambda_cos;
  return t;
}

}  // namespace

Checkpoint Workspace::stage2(const JsccKey& key) {
  JsccKey k2 = key;
  k2.lambda_cos = 0;
  const std::string name = k2.name() + "-t2";
  return memo(name, [&] {
    const auto spec = cfg_.system_spec(key.scheme, key.variant, key.q_total);
    auto c = training::adopt_front(front(spec.devices(), key.seed), spec);
    spdlog::info("training {}", name);
    training::MetricLog log;
    training::run_stage2(c, train_config_for(cfg_, key), data_, log);
    std::lock_guard g(mu_);
    logs_[name] = log.csv();
    return c;
  });
}

Checkpoint Workspace::stage3(const JsccKey& key) {
  const std::string name = key.name() + "-t3";
  return memo(name, [&] {
    auto c = stage2(key);
    spdlog::info("training {}", name);
    training::MetricLog log;
    training::run_stage3(c, train_config_for(cfg_, key), data_, log);
    std::lock_guard g(mu_);
    logs_[name] = log.csv();
    return c;
  });
}

Checkpoint Workspace::digital(double lambda_rate, std::uint64_t seed) {
  const std::string name = "digital-lr" + short_num(lambda_rate) + "-s" + std::to_string(seed);
  return memo(name, [&] {
    auto c = training::adopt_front(front(2, seed), cfg_.system_spec(Scheme::Digital));
    spdlog::info("training {}", name);
    auto t = cfg_.train_config(0.0);
    t.lambda_rate = lambda_rate;
    training::MetricLog log;
    training::run_digital(c, t, data_, log);
    std::lock_guard g(mu_);
    logs_[name] = log.csv();
    return c;
  });
}

eval::EvalChannel Workspace::eval_channel(double snr_db) const {
  eval::EvalChannel ch;
  ch.kind = cfg_.channel.kind;
  ch.snr_db = snr_db;
  ch.sigma_h2 = cfg_.channel.sigma_h2;
  ch.csi_mode = cfg_.channel.csi_mode;
  ch.repeats = cfg_.eval.repeats;
  ch.digital_power = cfg_.channel.power.digital;
  return ch;
}

std::map<std::string, std::string> Workspace::logs() const {
  std::lock_guard g(mu_);
  return logs_;
}

namespace {

using Task = std::function<std::vector<ResultRow>()>;

ResultRow make_row(const Workspace& ws, Scheme s, std::string snr_train, double snr_test, std::size_t q,
                   double lambda_cos, std::uint64_t seed, const eval::Metrics& m) {
  ResultRow r;
  r.scheme = s;
  r.channel = channel::to_string(ws.config().channel.kind);
  r.csi_mode = channel::to_string(ws.config().channel.csi_mode);
  r.snr_train_db = std::move(snr_train);
  r.snr_test_db = snr_test;
  r.q_total = q;
  r.lambda_cos = lambda_cos;
  r.seed = seed;
  r.top1 = m.top1;
  r.cos_sq = m.cos_sq;
  r.outage_rate = m.outage_rate;
  return r;
}

// JSCC model evaluated at each test SNR.
Task jscc_task(Workspace& ws, JsccKey key, std::vector<double> tests) {
  return [&ws, key, tests] {
    auto c = ws.stage3(key);
    std::vector<ResultRow> rows;
    for (double snr : tests) {
      const auto m = eval::evaluate_scheme(c, ws.eval_channel(snr), ws.data(), key.seed);
      rows.push_back(make_row(ws, key.scheme, key.snr_label(), snr, key.q_total, key.lambda_cos, key.seed, m));
    }
    return rows;
  };
}

// Best rate weight per (bandwidth, SNR) point.
Task digital_task(Workspace& ws, std::size_t q, double snr, std::uint64_t seed) {
  return [&ws, q, snr, seed] {
    eval::Metrics best;
    double best_lambda = 0;
    bool first = true;
    for (double lambda : ws.config().eval.lambda_rate) {
      Checkpoint c;
      try {
        c = ws.digital(lambda, seed);
      } catch (const DivergenceError& e) {
        spdlog::warn("digital lambda_rate {} seed {} skipped: {}", lambda, seed, e.what());
        continue;
      }
      c.spec.q_total = q;
      const auto m = eval::evaluate_scheme(c, ws.eval_channel(snr), ws.data(), seed);
      if (first || m.top1 > best.top1) {
        best = m;
        best_lambda = lambda;
        first = false;
      }
    }
    if (first) throw DivergenceError("every digital lambda_rate diverged for seed " + std::to_string(seed));
    spdlog::debug("digital q={} snr={} seed={}: best lambda_rate {}", q, snr, seed, best_lambda);
    return std::vector<ResultRow>{make_row(ws, Scheme::Digital, "na", snr, q, 0.0, seed, best)};
  };
}

bool digital_supported(const config::ExperimentConfig& cfg) {
  return !(cfg.channel.kind == channel::Kind::Rayleigh && cfg.channel.csi_mode == channel::CsiMode::None);
}

std::vector<Task> plan(Workspace& ws, Axis axis, Scheme scheme, std::uint64_t seed) {
  const auto& cfg = ws.config();
  const auto& ev = cfg.eval;
  std::vector<Task> tasks;
  const bool digital = scheme == Scheme::Digital;
  if (digital && !digital_supported(cfg)) {
    spdlog::warn("skipping digital: a fading channel without receiver CSI has no capacity-achieving code");
    return tasks;
  }
  JsccKey base;
  base.scheme = scheme;
  base.variant = cfg.model.variant;
  base.q_total = cfg.channel.q_total;
  base.lambda_cos = cfg.training.lambda_cos;
  base.seed = seed;
  const bool aware = base.variant == nets::Variant::SnrAware;

  switch (axis) {
    case Axis::Snr:
      for (double snr : ev.snr_test_db) {
        if (digital) {
          tasks.push_back(digital_task(ws, cfg.channel.q_total, snr, seed));
          continue;
        }
        JsccKey k = base;
        if (!aware) k.snr_train_db = snr;
        tasks.push_back(jscc_task(ws, k, {snr}));
      }
      break;
    case Axis::Bandwidth:
      for (std::size_t q : ev.bandwidths) {
        if (digital) {
          tasks.push_back(digital_task(ws, q, ev.bandwidth_snr_db, seed));
          continue;
        }
        JsccKey k = base;
        k.q_total = q;
        if (!aware) k.snr_train_db = ev.bandwidth_snr_db;
        tasks.push_back(jscc_task(ws, k, {ev.bandwidth_snr_db}));
      }
      break;
    case Axis::LambdaCos:
      if (digital || scheme == Scheme::Single) break;
      for (double lambda : ev.lambda_cos) {
        // OMA serves as the unregularized reference only.
        if (scheme == Scheme::Oma && lambda != 0.0) continue;
        JsccKey k = base;
        k.lambda_cos = lambda;
        if (!aware) k.snr_train_db = ev.lambda_cos_snr_db;
        tasks.push_back(jscc_task(ws, k, {ev.lambda_cos_snr_db}));
      }
      break;
    case Axis::SnrMismatch:
      if (digital) break;
      for (double train : ev.mismatch_train_db) {
        JsccKey k = base;
        k.variant = nets::Variant::Plain;
        k.snr_train_db = train;
        tasks.push_back(jscc_task(ws, k, ev.mismatch_test_db));
      }
      {
        JsccKey k = base;
        k.variant = nets::Variant::SnrAware;
        tasks.push_back(jscc_task(ws, k, ev.mismatch_test_db));
      }
      break;
  }
  return tasks;
}

}  // namespace

std::vector<ResultRow> run_axis(Workspace& ws, Axis axis, const std::vector<model::Scheme>& schemes,
                                std::uint64_t seed) {
  SweepOptions o;
  o.axis = axis;
  o.schemes = schemes;
  o.seeds = {seed};
  return run_sweep(ws, o);
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard g(error_mu);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<ResultRow> run_sweep(Workspace& ws, const SweepOptions& opts) {
  std::vector<Task> tasks;
  for (std::uint64_t seed : opts.seeds) {
    for (Scheme s : opts.schemes) {
      for (auto& t : plan(ws, opts.axis, s, seed)) tasks.push_back(std::move(t));
    }
  }
  spdlog::info("sweep {}: {} tasks on {} workers", to_string(opts.axis), tasks.size(), opts.jobs);
  std::vector<std::vector<ResultRow>> parts(tasks.size());
  parallel_for(tasks.size(), opts.jobs, [&](std::size_t i) { parts[i] = tasks[i](); });
  std::vector<ResultRow> rows;
  for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
  sort_rows(rows);
  return rows;
}

}  // namespace semcom::experiment
