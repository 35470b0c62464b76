#include "semcom/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "semcom/error.hpp"
#include "semcom/log.hpp"
#include "semcom/model.hpp"

namespace semcom::training {

using model::Scheme;
using model::SystemSpec;

std::string SnrTrain::label() const {
  if (range) return "aware";
  std::ostringstream os;
  os << fixed_db;
  return os.str();
}

void TrainConfig::validate() const {
  if (batch < 2) throw ValidationError("training.batch must be >= 2 (batch-norm statistics)");
  for (std::size_t e : {t1_epochs, t2_epochs, t3_epochs, digital_epochs}) {
    if (e < 1) throw ValidationError("training epochs must be >= 1");
  }
  for (const LrSchedule* s : {&t1_lr, &t2_lr, &t3_front_lr, &t3_jscc_lr, &digital_lr}) {
    if (!(s->initial > 0) || !(s->final_lr > 0)) throw ValidationError("learning rates must be positive");
  }
  if (momentum < 0 || momentum >= 1) throw ValidationError("training.momentum must be in [0, 1)");
  if (weight_decay < 0) throw ValidationError("training.weight_decay must be >= 0");
  if (lambda_cos < 0) throw ValidationError("training.lambda_cos must be >= 0");
  if (lambda_rate < 0) throw ValidationError("training.lambda_rate must be >= 0");
  if (snr.range && !(snr.lo_db < snr.hi_db)) throw ValidationError("training.snr_range needs lo < hi");
  if (!(sigma_h2 > 0)) throw ValidationError("channel.sigma_h2 must be positive");
}

std::string MetricLog::csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "stage,epoch,loss,snr_train_db,lr\n";
  for (const auto& r : rows) {
    os << r.stage << ',' << r.epoch << ',' << r.loss << ',' << r.snr_train_db << ',' << r.lr << '\n';
  }
  return os.str();
}

double sample_train_snr(const SnrTrain& snr, Rng& rng) {
  return snr.range ? rng.uniform(snr.lo_db, snr.hi_db) : snr.fixed_db;
}

double stage_lr(Stage stage, const std::string& name, std::size_t epoch, const TrainConfig& cfg) {
  const bool jscc = model::is_jscc_param(name);
  switch (stage) {
    case Stage::T1: return jscc ? 0.0 : cfg.t1_lr.at(epoch);
    case Stage::T2: return jscc ? cfg.t2_lr.at(epoch) : 0.0;
    case Stage::T3: return jscc ? cfg.t3_jscc_lr.at(epoch) : cfg.t3_front_lr.at(epoch);
    case Stage::Digital: return jscc ? 0.0 : cfg.digital_lr.at(epoch);
    case Stage::None: break;
  }
  return 0.0;
}

std::vector<std::vector<std::size_t>> make_batches(const data::PairSet& set, std::size_t batch,
                                                   Rng& rng) {
  std::vector<int> ids;
  std::vector<std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < set.n; ++i) {
    const int id = set.label(i);
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) {
      ids.push_back(id);
      by_id.emplace_back();
      it = ids.end() - 1;
    }
    by_id[static_cast<std::size_t>(it - ids.begin())].push_back(i);
  }
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };
  std::vector<std::size_t> order(by_id.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order);
  for (auto& rows : by_id) shuffle(rows);
  std::vector<std::size_t> flat;
  for (std::size_t k = 0;; ++k) {
    bool any = false;
    for (std::size_t g : order) {
      if (k < by_id[g].size()) {
        flat.push_back(by_id[g][k]);
        any = true;
      }
    }
    if (!any) break;
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < flat.size(); b += batch) {
    const std::size_t e = std::min(flat.size(), b + batch);
    if (e - b >= 2) out.emplace_back(flat.begin() + b, flat.begin() + e);
  }
  return out;
}

Checkpoint initial_checkpoint(const SystemSpec& spec, std::uint64_t seed) {
  Checkpoint c;
  c.spec = spec;
  c.seed = seed;
  c.stage = Stage::None;
  model::init_front(c.store, spec, seed);
  return c;
}

Checkpoint adopt_front(const Checkpoint& t1, const SystemSpec& target) {
  if (t1.stage != Stage::T1) throw StageOrderError("adopt_front needs a stage-1 checkpoint");
  target.validate();
  const auto& a = t1.spec.dims;
  const auto& b = target.dims;
  if (t1.spec.devices() != target.devices() || a.p != b.p || a.r != b.r || a.classes != b.classes ||
      a.feature_hidden != b.feature_hidden || a.slope != b.slope) {
    throw ValidationError("stage-1 checkpoint front end does not match the target scheme");
  }
  Checkpoint c = t1;
  c.spec = target;
  return c;
}

namespace {

std::size_t stage_index(Stage s) { return static_cast<std::size_t>(s); }

struct Streams {
  Rng shuffle;
  Rng channel;
  Rng snr;
  Rng quant;
  Streams(std::uint64_t seed, Stage s)
      : shuffle(seed, Stream::Shuffle, stage_index(s)), channel(seed, Stream::Channel, stage_index(s)),
        snr(seed, Stream::TrainSnr, stage_index(s)), quant(seed, Stream::Quantizer, stage_index(s)) {}
};

void check_loss(double loss, const TrainConfig& cfg, Stage stage, std::size_t epoch) {
  if (!std::isfinite(loss) || loss > cfg.divergence_limit) {
    throw DivergenceError("training diverged in stage " + to_string(stage) + " epoch " +
                          std::to_string(epoch + 1) + " (loss " + std::to_string(loss) + ")");
  }
}

void require_stage(const Checkpoint& c, std::initializer_list<Stage> allowed, const char* what) {
  for (Stage s : allowed) {
    if (c.stage == s) return;
  }
  throw StageOrderError(std::string(what) + " cannot run on a checkpoint at stage '" + to_string(c.stage) + "'");
}

// Channel-side inputs for one batch: gains, noise, CSI rows.
void add_channel_inputs(ad::TensorMap& in, const SystemSpec& spec, const TrainConfig& cfg,
                        std::size_t rows, double snr_db, Rng& rng) {
  const double sigma2 = channel::snr_to_sigma2(snr_db, 1.0);
  std::vector<channel::Complex> g1(rows, {1, 0}), g2(rows, {1, 0});
  if (cfg.channel == channel::Kind::Rayleigh) {
    for (std::size_t i = 0; i < rows; ++i) {
      g1[i] = channel::sample_fading(rng, cfg.sigma_h2);
      g2[i] = channel::sample_fading(rng, cfg.sigma_h2);
    }
  }
  in["h1"] = channel::gain_rows(g1);
  if (spec.devices() == 2) in["h2"] = channel::gain_rows(g2);
  in["noise"] = channel::noise_rows(rows, spec.q_total, sigma2, rng);
  if (spec.variant == nets::Variant::SnrAware) {
    const Tensor c({rows, 1}, nets::snr_feature(snr_db));
    in["csi_enc"] = c;
    in["csi_dec1"] = c;
    if (spec.devices() == 2) in["csi_dec2"] = c;
  } else if (spec.variant == nets::Variant::FadingAware) {
    const std::size_t k = spec.decoder_csi_width();
    Tensor c1({rows, k}), c2({rows, k});
    for (std::size_t i = 0; i < rows; ++i) {
      const double all[4] = {g1[i].real(), g1[i].imag(), g2[i].real(), g2[i].imag()};
      for (std::size_t j = 0; j < k; ++j) {
        c1.at(i, j) = all[j];
        c2.at(i, j) = k == 2 ? all[2 + j] : all[j];
      }
    }
    in["csi_dec1"] = c1;
    if (spec.devices() == 2) in["csi_dec2"] = c2;
  }
}

void add_views(ad::TensorMap& in, const SystemSpec& spec, const data::PairSet& set,
               const std::vector<std::size_t>& rows) {
  in["s1"] = set.view_rows(1, rows);
  if (spec.devices() == 2) in["s2"] = set.view_rows(2, rows);
  in["labels"] = set.label_rows(rows);
}

template <typename StepFn>
void run_epochs(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, Stage stage,
                std::size_t epochs, const std::string& snr_label, MetricLog& log,
                const std::function<double(std::size_t)>& logged_lr, StepFn step) {
  Streams st(ckpt.seed, stage);
  for (auto& [name, e] : ckpt.store) e.momentum = Tensor(e.value.shape, 0.0);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto batches = make_batches(data.train, cfg.batch, st.shuffle);
    double total = 0;
    std::size_t seen = 0;
    for (const auto& rows : batches) {
      double loss = 0;
      try {
        loss = step(epoch, rows, st);
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged in stage " + to_string(stage) + " epoch " +
                              std::to_string(epoch + 1) + ": " + e.what());
      }
      check_loss(loss, cfg, stage, epoch);
      total += loss * static_cast<double>(rows.size());
      seen += rows.size();
    }
    const double mean = total / static_cast<double>(seen);
    log.rows.push_back({to_string(stage), epoch + 1, mean, snr_label, logged_lr(epoch)});
    spdlog::debug("{} seed {} {} epoch {}/{} loss {:.6f}", model::to_string(ckpt.spec.scheme), ckpt.seed,
                  to_string(stage), epoch + 1, epochs, mean);
  }
}

}  // namespace

void run_stage1(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log) {
  cfg.validate();
  require_stage(ckpt, {Stage::None}, "stage 1");
  const SystemSpec& spec = ckpt.spec;
  const auto g = model::build_stage1(spec);
  const auto loss_id = g.require_output("loss");
  run_epochs(ckpt, cfg, data, Stage::T1, cfg.t1_epochs, "na", log,
             [&](std::size_t e) { return cfg.t1_lr.at(e); },
             [&](std::size_t epoch, const std::vector<std::size_t>& rows, Streams&) {
               ad::TensorMap in;
               add_views(in, spec, data.train, rows);
               const auto ev = ad::eval_graph(g, ckpt.store, in, ad::Mode::Train);
               ad::backward(g, ev, loss_id, ckpt.store);
               ad::sgd_step(ckpt.store, [&](const std::string& n) { return stage_lr(Stage::T1, n, epoch, cfg); },
                            cfg.momentum, cfg.weight_decay);
               return ev.value(loss_id)[0];
             });
  ckpt.stage = Stage::T1;
}

void run_stage2(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log) {
  cfg.validate();
  require_stage(ckpt, {Stage::T1}, "stage 2");
  const SystemSpec& spec = ckpt.spec;
  if (!spec.jscc()) throw ValidationError("stage 2 applies to JSCC schemes only");
  model::init_jscc(ckpt.store, spec, ckpt.seed);
  const auto fg = model::build_features(spec);
  const auto g = model::build_jscc(spec, {true, 0.0});
  const auto loss_id = g.require_output("loss_jscc");
  ad::BackwardOptions opts;
  opts.param_filter = model::is_jscc_param;
  run_epochs(ckpt, cfg, data, Stage::T2, cfg.t2_epochs, cfg.snr.label(), log,
             [&](std::size_t e) { return cfg.t2_lr.at(e); },
             [&](std::size_t epoch, const std::vector<std::size_t>& rows, Streams& st) {
               ad::TensorMap fin;
               add_views(fin, spec, data.train, rows);
               const auto fev = ad::eval_graph(fg, ckpt.store, fin, ad::Mode::Infer);
               ad::TensorMap in;
               in["labels"] = fin["labels"];
               in["v1"] = fev.value(fg.require_output("v1"));
               if (spec.devices() == 2) in["v2"] = fev.value(fg.require_output("v2"));
               add_channel_inputs(in, spec, cfg, rows.size(), sample_train_snr(cfg.snr, st.snr), st.channel);
               const auto ev = ad::eval_graph(g, ckpt.store, in, ad::Mode::Train);
               ad::backward(g, ev, loss_id, ckpt.store, opts);
               ad::sgd_step(ckpt.store, [&](const std::string& n) { return stage_lr(Stage::T2, n, epoch, cfg); },
                            cfg.momentum, cfg.weight_decay);
               return ev.value(loss_id)[0];
             });
  ckpt.stage = Stage::T2;
}

void run_stage3(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log) {
  cfg.validate();
  require_stage(ckpt, {Stage::T2}, "stage 3");
  const SystemSpec& spec = ckpt.spec;
  const double lambda = spec.devices() == 2 ? cfg.lambda_cos : 0.0;
  const auto g = model::build_jscc(spec, {false, lambda});
  const auto loss_id = g.require_output("loss");
  run_epochs(ckpt, cfg, data, Stage::T3, cfg.t3_epochs, cfg.snr.label(), log,
             [&](std::size_t e) { return cfg.t3_front_lr.at(e); },
             [&](std::size_t epoch, const std::vector<std::size_t>& rows, Streams& st) {
               ad::TensorMap in;
               add_views(in, spec, data.train, rows);
               add_channel_inputs(in, spec, cfg, rows.size(), sample_train_snr(cfg.snr, st.snr), st.channel);
               const auto ev = ad::eval_graph(g, ckpt.store, in, ad::Mode::Train);
               ad::backward(g, ev, loss_id, ckpt.store);
               ad::sgd_step(ckpt.store, [&](const std::string& n) { return stage_lr(Stage::T3, n, epoch, cfg); },
                            cfg.momentum, cfg.weight_decay);
               return ev.value(loss_id)[0];
             });
  ckpt.stage = Stage::T3;
}

void run_digital(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log) {
  cfg.validate();
  require_stage(ckpt, {Stage::T1}, "digital training");
  const SystemSpec& spec = ckpt.spec;
  if (spec.scheme != Scheme::Digital) throw ValidationError("digital training needs the digital scheme");
  model::init_entropy(ckpt.store, spec);
  const auto g = model::build_digital(spec, cfg.lambda_rate);
  const auto loss_id = g.require_output("loss");
  const std::size_t r = spec.dims.r;
  run_epochs(ckpt, cfg, data, Stage::Digital, cfg.digital_epochs, "na", log,
             [&](std::size_t e) { return cfg.digital_lr.at(e); },
             [&](std::size_t epoch, const std::vector<std::size_t>& rows, Streams& st) {
               ad::TensorMap in;
               add_views(in, spec, data.train, rows);
               for (const char* u : {"u1", "u2"}) {
                 Tensor t({rows.size(), r});
                 for (double& v : t.values) v = st.quant.uniform(-0.5, 0.5);
                 in[u] = std::move(t);
               }
               const auto ev = ad::eval_graph(g, ckpt.store, in, ad::Mode::Train);
               ad::backward(g, ev, loss_id, ckpt.store);
               ad::sgd_step(ckpt.store, [&](const std::string& n) { return stage_lr(Stage::Digital, n, epoch, cfg); },
                            cfg.momentum, cfg.weight_decay);
               return ev.value(loss_id)[0];
             });
  ckpt.stage = Stage::Digital;
}

double loss_cls(const std::vector<std::vector<double>>& probs, int label) {
  if (probs.empty()) throw ValidationError("loss_cls needs at least one prediction");
  double acc = 0;
  for (const auto& p : probs) {
    if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
      throw ValidationError("label outside the class range");
    }
    acc -= std::log(p[static_cast<std::size_t>(label)]);
  }
  return acc / static_cast<double>(probs.size());
}

namespace {

double mean_sq(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("mse operands differ in length");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

}  // namespace

double loss_jscc(std::span<const double> v1, std::span<const double> vhat1,
                 std::span<const double> v2, std::span<const double> vhat2) {
  return 0.5 * (mean_sq(v1, vhat1) + mean_sq(v2, vhat2));
}

double cosine_squared(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("codewords differ in length");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return (na > 0 && nb > 0) ? std::min(1.0, dot * dot / (na * nb)) : 0.0;
}

double loss_cos_reg(double base, std::span<const double> x1, std::span<const double> x2,
                    double lambda) {
  if (lambda < 0) throw ValidationError("lambda must be non-negative");
  return base + lambda * cosine_squared(x1, x2);
}

double loss_digital(double cls, double bits1, double bits2, double lambda_rate) {
  return cls + lambda_rate * (bits1 + bits2);
}

}  // namespace semcom::training
