#include "semcom/evaluate.hpp"

#include "semcom/digital.hpp"
#include "semcom/error.hpp"
#include "semcom/model.hpp"
#include "semcom/training.hpp"

namespace semcom::eval {

using model::Scheme;

std::vector<int> labels_of(const data::PairSet& set) {
  std::vector<int> out(set.n);
  for (std::size_t i = 0; i < set.n; ++i) out[i] = set.label(i);
  return out;
}

namespace {

ad::TensorMap views(const model::SystemSpec& spec, const data::PairSet& set) {
  ad::TensorMap in{{"s1", set.view(1)}};
  if (spec.devices() == 2) in["s2"] = set.view(2);
  return in;
}

Tensor pool(const Tensor& a, const Tensor* b) {
  if (!b) return a;
  Tensor out({a.rows(), a.cols() + b->cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row_span(r);
    std::copy(a.row_span(r).begin(), a.row_span(r).end(), dst.begin());
    std::copy(b->row_span(r).begin(), b->row_span(r).end(), dst.begin() + a.cols());
  }
  return out;
}

}  // namespace

Tensor pooled_features(Checkpoint& ckpt, const data::PairSet& set) {
  const auto g = model::build_features(ckpt.spec);
  const auto ev = ad::eval_graph(g, ckpt.store, views(ckpt.spec, set), ad::Mode::Infer);
  const Tensor& v1 = ev.value(g.require_output("v1"));
  if (ckpt.spec.devices() == 1) return v1;
  return pool(v1, &ev.value(g.require_output("v2")));
}

retrieval::GalleryIndex build_gallery(Checkpoint& ckpt, const data::PairSet& gallery) {
  if (gallery.n == 0) throw ValidationError("empty gallery");
  return retrieval::GalleryIndex(pooled_features(ckpt, gallery), labels_of(gallery));
}

namespace {

channel::FadingState draw(const EvalChannel& ch, Rng& rng) {
  channel::ChannelConfig cfg;
  cfg.kind = ch.identity_gains ? channel::Kind::Awgn : ch.kind;
  cfg.snr_db = ch.noiseless ? 0.0 : ch.snr_db;
  cfg.sigma_h2 = ch.sigma_h2;
  auto st = channel::draw_state(cfg, rng);
  if (ch.noiseless) st.sigma2 = 0.0;
  return st;
}

void check_stage(const Checkpoint& ckpt) {
  const bool digital = ckpt.spec.scheme == Scheme::Digital;
  if (digital && ckpt.stage != Stage::Digital) {
    throw ValidationError("digital evaluation needs a digital-stage checkpoint");
  }
  if (!digital && ckpt.stage != Stage::T2 && ckpt.stage != Stage::T3) {
    throw ValidationError("JSCC evaluation needs a stage-2 or stage-3 checkpoint, got '" +
                          to_string(ckpt.stage) + "'");
  }
}

Metrics evaluate_digital(Checkpoint& ckpt, const EvalChannel& ch, const data::Dataset& data,
                         const retrieval::GalleryIndex& gallery, Rng& rng) {
  const auto& spec = ckpt.spec;
  if (ch.kind == channel::Kind::Rayleigh && ch.csi_mode == channel::CsiMode::None && !ch.identity_gains) {
    throw ValidationError("the digital scheme needs receiver CSI on a fading channel");
  }
  const auto g = model::build_features(spec);
  const auto ev = ad::eval_graph(g, ckpt.store, views(spec, data.query), ad::Mode::Infer);
  const Tensor& v1 = ev.value(g.require_output("v1"));
  const Tensor& v2 = ev.value(g.require_output("v2"));
  const auto model = digital::EntropyModel::from_store(ckpt.store);
  const auto labels = labels_of(data.query);
  std::size_t hits = 0, outages = 0, total = 0;
  for (std::size_t rep = 0; rep < ch.repeats; ++rep) {
    for (std::size_t i = 0; i < data.query.n; ++i) {
      const auto q1 = digital::quantize_infer(v1.row_span(i));
      const auto q2 = digital::quantize_infer(v2.row_span(i));
      const auto st = draw(ch, rng);
      const auto cap = digital::mac_equal_rate_capacity(spec.q_total, ch.digital_power, st.sigma2, st.h1, st.h2);
      const auto d = digital::digital_transmit(q1, q2, cap, model);
      ++total;
      if (d.outage) {
        ++outages;
        continue;
      }
      auto pooled = d.v1.as_real();
      const auto b = d.v2.as_real();
      pooled.insert(pooled.end(), b.begin(), b.end());
      hits += retrieval::top1_hit(pooled, labels[i], gallery);
    }
  }
  Metrics m;
  m.top1 = static_cast<double>(hits) / static_cast<double>(total);
  m.outage_rate = static_cast<double>(outages) / static_cast<double>(total);
  return m;
}

}  // namespace

Metrics evaluate_scheme(Checkpoint& ckpt, const EvalChannel& ch, const data::Dataset& data,
                        std::uint64_t seed) {
  check_stage(ckpt);
  if (ch.repeats < 1) throw ValidationError("eval.repeats must be >= 1");
  const auto& spec = ckpt.spec;
  const auto gallery = build_gallery(ckpt, data.gallery);
  Rng rng(seed, Stream::Eval);
  if (spec.scheme == Scheme::Digital) return evaluate_digital(ckpt, ch, data, gallery, rng);
  if (spec.variant == nets::Variant::FadingAware && ch.csi_mode != channel::CsiMode::Receiver &&
      ch.kind == channel::Kind::Rayleigh) {
    throw ValidationError("fading-aware decoders need receiver CSI");
  }

  const auto tx = model::build_transmitter(spec);
  ad::TensorMap tin = views(spec, data.query);
  const std::size_t n = data.query.n;
  if (spec.variant == nets::Variant::SnrAware) tin["csi_enc"] = Tensor({n, 1}, nets::snr_feature(ch.snr_db));
  const auto tev = ad::eval_graph(tx, ckpt.store, tin, ad::Mode::Infer);
  const Tensor& x1 = tev.value(tx.require_output("x1"));
  const Tensor& v1 = tev.value(tx.require_output("v1"));
  const bool two = spec.devices() == 2;
  const Tensor* x2 = two ? &tev.value(tx.require_output("x2")) : nullptr;
  const Tensor* v2 = two ? &tev.value(tx.require_output("v2")) : nullptr;

  Metrics m;
  if (two) {
    for (std::size_t i = 0; i < n; ++i) {
      m.cos_sq += training::cosine_squared(x1.row_span(i), x2->row_span(i));
    }
    m.cos_sq /= static_cast<double>(n);
  }

  const auto rx = model::build_receiver(spec);
  const std::size_t k = spec.decoder_csi_width();
  const auto labels = labels_of(data.query);
  std::size_t hits = 0;
  double mse = 0;
  for (std::size_t rep = 0; rep < ch.repeats; ++rep) {
    Tensor y({n, 2 * spec.q_total});
    Tensor c1({n, std::max<std::size_t>(k, 1)}), c2({n, std::max<std::size_t>(k, 1)});
    for (std::size_t i = 0; i < n; ++i) {
      const auto st = draw(ch, rng);
      channel::ChannelSymbols s1;
      s1.reals.assign(x1.row_span(i).begin(), x1.row_span(i).end());
      s1.power = spec.power;
      std::vector<double> yi;
      if (!two) {
        yi = channel::transmit_p2p(s1, st.h1, st.sigma2, rng);
      } else {
        channel::ChannelSymbols s2;
        s2.reals.assign(x2->row_span(i).begin(), x2->row_span(i).end());
        s2.power = spec.power;
        yi = spec.scheme == Scheme::Oma ? channel::transmit_oma(s1, s2, st, rng)
                                        : channel::transmit_noma(s1, s2, st, rng);
      }
      std::copy(yi.begin(), yi.end(), y.row_span(i).begin());
      if (spec.variant == nets::Variant::SnrAware) {
        c1.at(i, 0) = c2.at(i, 0) = nets::snr_feature(ch.snr_db);
      } else if (spec.variant == nets::Variant::FadingAware) {
        const double all[4] = {st.h1.real(), st.h1.imag(), st.h2.real(), st.h2.imag()};
        for (std::size_t j = 0; j < k; ++j) {
          c1.at(i, j) = all[j];
          c2.at(i, j) = k == 2 ? all[2 + j] : all[j];
        }
      }
    }
    ad::TensorMap rin{{"y", y}};
    if (k > 0) {
      rin["csi_dec1"] = c1;
      if (two) rin["csi_dec2"] = c2;
    }
    const auto rev = ad::eval_graph(rx, ckpt.store, rin, ad::Mode::Infer);
    const Tensor& pooled = rev.value(rx.require_output("pooled"));
    for (std::size_t i = 0; i < n; ++i) hits += retrieval::top1_hit(pooled.row_span(i), labels[i], gallery);
    const Tensor& h1 = rev.value(rx.require_output("vhat1"));
    double e = 0;
    for (std::size_t i = 0; i < h1.size(); ++i) e += (h1[i] - v1[i]) * (h1[i] - v1[i]);
    if (two) {
      const Tensor& h2 = rev.value(rx.require_output("vhat2"));
      for (std::size_t i = 0; i < h2.size(); ++i) e += (h2[i] - (*v2)[i]) * (h2[i] - (*v2)[i]);
    }
    mse += e / static_cast<double>(h1.size() * spec.devices());
  }
  m.top1 = static_cast<double>(hits) / static_cast<double>(n * ch.repeats);
  m.mse = mse / static_cast<double>(ch.repeats);
  return m;
}

}  // namespace semcom::eval
