// semcom: dataset generation, staged training, evaluation, sweeps and self-checks.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "semcom/config.hpp"
#include "semcom/error.hpp"
#include "semcom/evaluate.hpp"
#include "semcom/experiment.hpp"
#include "semcom/io.hpp"
#include "semcom/log.hpp"
#include "semcom/selfcheck.hpp"
#include "semcom/training.hpp"

namespace fs = std::filesystem;
using namespace semcom;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;
constexpr int kSelfcheck = 3;

config::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) {
    config::ExperimentConfig c;
    c.validate();
    return c;
  }
  return config::load(path);
}

// "1,2,5" or "1-5".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  const auto number = [&](const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ValidationError("bad seed '" + s + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    if (const auto dash = item.find('-'); dash != std::string::npos && dash > 0) {
      const auto lo = number(item.substr(0, dash)), hi = number(item.substr(dash + 1));
      if (hi < lo) throw ValidationError("bad seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(number(item));
    }
  }
  if (out.empty()) throw ValidationError("no seeds given");
  return out;
}

std::vector<model::Scheme> parse_schemes(const std::string& text) {
  std::vector<model::Scheme> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(model::parse_scheme(item));
  if (out.empty()) throw ValidationError("no schemes given");
  return out;
}

void write_config_copy(const config::ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_text_atomic(dir / "config.json", config::to_json(cfg).dump(2) + "\n");
}

data::Dataset dataset_for(const config::ExperimentConfig& cfg, const std::string& data_dir) {
  if (data_dir.empty()) return data::generate(cfg.dataset);
  auto ds = data::load(data_dir);
  if (!(ds.config == cfg.dataset)) throw ValidationError("dataset at " + data_dir + " does not match the config");
  return ds;
}

int cmd_gen_data(const std::string& config_path, const std::string& out) {
  const auto cfg = load_config(config_path);
  const auto ds = data::generate(cfg.dataset);
  data::save(ds, out);
  const auto manifest = nlohmann::json::parse(io::read_text(fs::path(out) / "manifest.json"));
  std::cout << "dataset " << out << ": train " << ds.train.n << ", query " << ds.query.n << ", gallery "
            << ds.gallery.n << " pairs (p=" << cfg.dataset.p << ", d=" << cfg.dataset.d << ", seed "
            << cfg.dataset.seed << ")\n";
  for (const auto& [name, e] : manifest["arrays"].items()) {
    std::cout << "  " << name << "  " << e["bytes"].get<std::size_t>() << " bytes  crc32 "
              << e["crc32"].get<std::string>() << "\n";
  }
  return kOk;
}

// Runs or resumes one stage; an existing checkpoint directory is loaded instead of retrained.
template <class Run>
Checkpoint stage(const fs::path& dir, Stage expected, Checkpoint from, Run run) {
  if (fs::exists(dir / "manifest.json")) {
    auto c = load_checkpoint(dir);
    if (c.stage != expected) throw StageOrderError("checkpoint at " + dir.string() + " is not stage " + to_string(expected));
    spdlog::info("resuming from {}", dir.string());
    return c;
  }
  run(from);
  save_checkpoint(from, dir);
  return from;
}

int cmd_train(const std::string& config_path, const std::string& scheme_name, std::uint64_t seed,
              const std::string& data_dir, const std::string& out) {
  const auto cfg = load_config(config_path);
  const auto scheme = scheme_name.empty() ? model::Scheme::Noma : model::parse_scheme(scheme_name);
  const auto ds = dataset_for(cfg, data_dir);
  const auto spec = cfg.system_spec(scheme);
  spec.validate();
  const fs::path dir(out);
  write_config_copy(cfg, dir);
  auto tcfg = cfg.train_config(cfg.channel.snr_train_db);
  tcfg.snr.range = spec.variant == nets::Variant::SnrAware;
  training::MetricLog log;

  auto t1 = stage(dir / "t1", Stage::T1, training::initial_checkpoint(spec, seed),
                  [&](Checkpoint& c) { training::run_stage1(c, tcfg, ds, log); });
  auto next = training::adopt_front(t1, spec);
  if (scheme == model::Scheme::Digital) {
    stage(dir / "digital", Stage::Digital, next, [&](Checkpoint& c) { training::run_digital(c, tcfg, ds, log); });
  } else {
    auto t2 = stage(dir / "t2", Stage::T2, next, [&](Checkpoint& c) { training::run_stage2(c, tcfg, ds, log); });
    stage(dir / "t3", Stage::T3, t2, [&](Checkpoint& c) { training::run_stage3(c, tcfg, ds, log); });
  }
  io::write_text_atomic(dir / "metrics.csv", log.csv());
  std::cout << "trained " << model::to_string(scheme) << " (seed " << seed << ") -> " << dir.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_dir, const std::vector<std::uint64_t>& seeds,
             const std::string& data_dir, const std::string& out) {
  const auto cfg = load_config(config_path);
  auto ckpt = load_checkpoint(ckpt_dir);
  const auto ds = dataset_for(cfg, data_dir);
  experiment::Workspace ws(cfg, ds);
  std::vector<experiment::ResultRow> rows;
  const std::string train_label = ckpt.spec.scheme == model::Scheme::Digital ? "na"
                                  : ckpt.spec.variant == nets::Variant::SnrAware
                                      ? "aware"
                                      : experiment::JsccKey{.snr_train_db = cfg.channel.snr_train_db}.snr_label();
  for (std::uint64_t seed : seeds) {
    for (double snr : cfg.eval.snr_test_db) {
      const auto m = eval::evaluate_scheme(ckpt, ws.eval_channel(snr), ds, seed);
      experiment::ResultRow r;
      r.scheme = ckpt.spec.scheme;
      r.channel = channel::to_string(cfg.channel.kind);
      r.csi_mode = channel::to_string(cfg.channel.csi_mode);
      r.snr_train_db = train_label;
      r.snr_test_db = snr;
      r.q_total = ckpt.spec.q_total;
      r.lambda_cos = cfg.training.lambda_cos;
      r.seed = seed;
      r.top1 = m.top1;
      r.cos_sq = m.cos_sq;
      r.outage_rate = m.outage_rate;
      rows.push_back(r);
    }
  }
  experiment::sort_rows(rows);
  const auto csv = experiment::to_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    io::write_text_atomic(out, csv);
  }
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& axis, const std::string& schemes,
              const std::string& seeds, std::size_t jobs, bool no_train, const std::string& data_dir,
              const std::string& out) {
  const auto cfg = load_config(config_path);
  experiment::SweepOptions opts;
  opts.axis = experiment::parse_axis(axis);
  opts.schemes = schemes.empty() ? cfg.eval.schemes : parse_schemes(schemes);
  opts.seeds = seeds.empty() ? cfg.eval.seeds : parse_seeds(seeds);
  opts.jobs = jobs;
  const fs::path dir = out.empty() ? fs::path(cfg.eval.out) : fs::path(out);
  write_config_copy(cfg, dir);
  experiment::Workspace ws(cfg, dataset_for(cfg, data_dir), dir / "checkpoints", !no_train);
  const auto rows = experiment::run_sweep(ws, opts);
  const fs::path csv = dir / (experiment::to_string(opts.axis) + ".csv");
  io::write_text_atomic(csv, experiment::to_csv(rows));
  fs::create_directories(dir / "logs");
  for (const auto& [name, text] : ws.logs()) io::write_text_atomic(dir / "logs" / (name + ".csv"), text);
  std::cout << rows.size() << " rows -> " << csv.string() << "\n";
  return kOk;
}

int cmd_selfcheck(bool inject_fault) {
  selfcheck::Options o;
  o.inject_fault = inject_fault;
  const auto results = selfcheck::run(o);
  std::cout << selfcheck::report(results);
  const bool ok = selfcheck::all_passed(results);
  std::cout << (ok ? "selfcheck passed\n" : "selfcheck FAILED\n");
  return ok ? kOk : kSelfcheck;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Collaborative semantic communication over a two-user multiple access channel"};
  app.require_subcommand(1);

  std::string config_path, out, scheme, sweep_schemes, axis, seeds, sweep_seeds, data_dir, ckpt_dir;
  std::size_t jobs = 1;
  bool no_train = false, inject_fault = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic two-view dataset");
  gen->add_option("--config", config_path, "Experiment config (JSON)");
  gen->add_option("--out", out, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Run the staged training pipeline for one scheme");
  train->add_option("--config", config_path, "Experiment config (JSON)");
  train->add_option("--scheme", scheme, "single, oma, noma or digital")->default_val("noma");
  train->add_option("--seeds", seeds, "Training seed")->default_val("1");
  train->add_option("--data", data_dir, "Dataset directory (generated from the config when omitted)");
  train->add_option("--out", out, "Output directory for checkpoints and metric log")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint over the config's test SNR grid");
  eval->add_option("--config", config_path, "Experiment config (JSON)");
  eval->add_option("--checkpoint", ckpt_dir, "Checkpoint directory")->required();
  eval->add_option("--seeds", seeds, "Evaluation seeds")->default_val("1");
  eval->add_option("--data", data_dir, "Dataset directory");
  eval->add_option("--out", out, "Output CSV (stdout when omitted)");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate along one experiment axis");
  sweep->add_option("--config", config_path, "Experiment config (JSON)");
  sweep->add_option("--axis", axis, "snr, bandwidth, lambda_cos or snr_mismatch")->required();
  sweep->add_option("--scheme", sweep_schemes, "Comma-separated schemes (config eval.schemes when omitted)");
  sweep->add_option("--seeds", sweep_seeds, "Seeds, e.g. 1,2,3 or 1-5 (config eval.seeds when omitted)");
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--no-train", no_train, "Fail on missing checkpoints instead of training");
  sweep->add_option("--data", data_dir, "Dataset directory");
  sweep->add_option("--out", out, "Output directory (config eval.out when omitted)");

  auto* check = app.add_subcommand("selfcheck", "Gradient, channel, closed-form and retrieval checks");
  check->add_flag("--inject-fault", inject_fault, "Corrupt one adjoint to demonstrate detection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return cmd_gen_data(config_path, out);
    if (*train) {
      const auto s = parse_seeds(seeds);
      if (s.size() != 1) throw ValidationError("train takes exactly one seed");
      return cmd_train(config_path, scheme, s.front(), data_dir, out);
    }
    if (*eval) return cmd_eval(config_path, ckpt_dir, parse_seeds(seeds), data_dir, out);
    if (*sweep) return cmd_sweep(config_path, axis, sweep_schemes, sweep_seeds, jobs, no_train, data_dir, out);
    if (*check) return cmd_selfcheck(inject_fault);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const StageOrderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
