// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "sbdbp/experiment.hpp"

namespace fs = std::filesystem;
using namespace sbdbp;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::string scale = "desk";
  std::uint64_t seed = 0;
  bool has_seed = false;
  bool force = false;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts* o) {
  cmd->add_option("--config", o->config_path, "configuration file (key = value sections)");
  cmd->add_option("--out", o->out_dir, "output directory");
  cmd->add_option("--scale", o->scale, "built-in scenario preset when no --config is given")
      ->check(CLI::IsMember({"desk", "paper"}));
  auto* s = cmd->add_option("--seed", o->seed, "override [signal] seed");
  cmd->add_option("--threads", o->threads, "worker threads for batch gradients");
  cmd->add_flag("--force", o->force, "overwrite outputs / skip digest checks");
  cmd->parse_complete_callback([o, s]() { o->has_seed = s->count() > 0; });
}

ExperimentConfig resolve_config(const CommonOpts& o) {
  ExperimentConfig cfg = o.config_path.empty()
                             ? (o.scale == "paper" ? paper_scale_config() : desk_scale_config())
                             : load_config_file(o.config_path);
  if (o.has_seed) cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

std::string out_file(const CommonOpts& o, const std::string& name, bool force) {
  fs::create_directories(o.out_dir);
  const std::string path = (fs::path(o.out_dir) / name).string();
  if (!force && fs::exists(path))
    throw IoError("output exists (use --force to overwrite): " + path);
  return path;
}

int cmd_gen_data(const CommonOpts& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const std::string path = out_file(o, "dataset.sbdc", o.force);
  const Dataset data = generate_dataset(cfg);
  save_dataset(data, cfg, path);
  std::printf("wrote %s (%d records x %lld symbols, digest %s)\n", path.c_str(), cfg.n_records,
              static_cast<long long>(cfg.n_symbols), compat_digest(cfg).c_str());
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& data_path) {
  const ExperimentConfig cfg = resolve_config(o);
  const std::string dpath =
      data_path.empty() ? (fs::path(o.out_dir) / "dataset.sbdc").string() : data_path;
  const std::string ckpt = out_file(o, "checkpoint.sbdc", o.force);
  const std::string curves = out_file(o, "curves.csv", o.force);

  Dataset data = load_dataset(dpath);
  TrainResult result = run_training(cfg, data, o.force);
  const StepPlan plan = plan_from_config(cfg);
  save_checkpoint(result.params, plan, cfg, ckpt);
  write_curves_csv(result.curves, curves);
  std::printf("trained %d iterations, validation SNR %.2f dB\n", cfg.iterations,
              result.final_val_snr_db);
  std::printf("wrote %s and %s\n", ckpt.c_str(), curves.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& ckpt_path, bool svg) {
  const ExperimentConfig cfg = resolve_config(o);
  const std::string cpath =
      ckpt_path.empty() ? (fs::path(o.out_dir) / "checkpoint.sbdc").string() : ckpt_path;
  const std::string csv = out_file(o, "eval.csv", o.force);

  DbpParams params;
  StepPlan plan;
  std::string ckpt_digest;
  load_checkpoint(cpath, &params, &plan, &ckpt_digest);
  if (!o.force && ckpt_digest != compat_digest(cfg))
    throw DigestError("checkpoint/config digest mismatch (" + ckpt_digest + " vs " +
                      compat_digest(cfg) + ")");

  const auto rows = run_eval(cfg, params, plan);
  write_eval_csv(rows, csv);
  std::printf("wrote %s\n", csv.c_str());
  if (svg) {
    const std::string spath = out_file(o, "eval.svg", o.force);
    write_eval_svg(rows, spath);
    std::printf("wrote %s\n", spath.c_str());
  }
  for (const auto& r : rows)
    std::printf("  %+5.1f dBm  %-14s %6.2f dB\n", r.power_dbm, r.method.c_str(), r.snr_db);
  return 0;
}

int cmd_complexity(const CommonOpts& o, const std::string& ckpt_path, std::size_t nonzeros) {
  const ExperimentConfig cfg = resolve_config(o);
  if (!ckpt_path.empty()) {
    DbpParams params;
    StepPlan plan;
    load_checkpoint(ckpt_path, &params, &plan, nullptr);
    std::fputs(complexity_table(cfg, &params, plan, nonzeros).c_str(), stdout);
  } else {
    const StepPlan plan = plan_from_config(cfg);
    std::fputs(complexity_table(cfg, nullptr, plan, nonzeros).c_str(), stdout);
  }
  return 0;
}

int cmd_selftest(const CommonOpts& o);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "subband time-domain digital backpropagation toolkit\n"
      "exit codes: 0 ok, 2 bad configuration or arguments, 3 digest mismatch, 4 I/O error"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, eval_o, cx_o, self_o;
  std::string train_data, eval_ckpt, cx_ckpt;
  std::size_t cx_nonzeros = 0;
  bool eval_svg = false;

  auto* gen = app.add_subcommand("gen-data", "forward-simulate a dataset");
  add_common(gen, &gen_o);
  auto* tr = app.add_subcommand("train", "joint filter optimization on a dataset");
  add_common(tr, &train_o);
  tr->add_option("--data", train_data, "dataset path (default <out>/dataset.sbdc)");
  auto* ev = app.add_subcommand("eval", "launch-power sweep of all methods");
  add_common(ev, &eval_o);
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint path (default <out>/checkpoint.sbdc)");
  ev->add_flag("--svg", eval_svg, "also render a static SVG plot");
  auto* cx = app.add_subcommand("complexity", "real-multiplication accounting");
  add_common(cx, &cx_o);
  cx->add_option("--checkpoint", cx_ckpt, "count nonzeros from a trained checkpoint");
  cx->add_option("--nonzeros", cx_nonzeros, "override the nonzero coefficient count");
  auto* self = app.add_subcommand("selftest", "run the built-in oracle checks");
  add_common(self, &self_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_o);
    if (tr->parsed()) return cmd_train(train_o, train_data);
    if (ev->parsed()) return cmd_eval(eval_o, eval_ckpt, eval_svg);
    if (cx->parsed()) return cmd_complexity(cx_o, cx_ckpt, cx_nonzeros);
    if (self->parsed()) return cmd_selftest(self_o);
  } catch (const DigestError& e) {
    std::fprintf(stderr, "digest mismatch: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

namespace {

int cmd_selftest(const CommonOpts& o) {
  (void)o;
  int failures = 0;
  auto report = [&](const char* name, bool ok, double value, const char* unit) {
    std::printf("%-34s %s (%.3g %s)\n", name, ok ? "PASS" : "FAIL", value, unit);
    if (!ok) ++failures;
  };

  {  // Filter bank round trip on an in-band random signal.
    FilterBankSpec bank = make_filter_bank(12, 8, 3, 64e9, 0.45, 129);
    Rng rng(11);
    SignalSpec spec;
    spec.baud_hz = 32e9;
    spec.oversampling = 2;
    spec.n_symbols = 4096;
    spec.seed = 11;
    const SymbolSequence syms = generate_symbols(spec);
    const auto taps = rrc_taps(0.1, 32, 2);
    const ComplexSignal u = pulse_shape(syms, taps, 2, 0.0);
    SubbandSet sub = analyze(u, bank, 0);
    const ComplexSignal v = synthesize(sub, bank);
    double num = 0, den = 0;
    for (std::size_t k = 512; k + 512 < u.samples.size(); ++k) {
      den += std::norm(u.samples[k]);
      num += std::norm(u.samples[k] - v.samples[k]);
    }
    const double snr = 10 * std::log10(den / num);
    report("filter-bank reconstruction", snr >= 40.0, snr, "dB");
  }

  {  // Gradient of a micro graph against central finite differences.
    FilterBankSpec bank = make_filter_bank(4, 2, 1, 8e9, 0.45, 17);
    const DeltaResult d = compute_delta(4, 2, 1.0 / 8e9, -21.7);
    StepPlan plan = plan_steps(2.3 * d.delta_km, d.delta_km, 1);
    DbpInitOptions opt;
    opt.cd_half_len = 2;
    opt.mimo_factors = 2;
    opt.seed = 3;
    DbpParams params = init_dbp_params(bank, plan, -21.7, opt);

    SignalSpec spec;
    spec.baud_hz = 4e9;
    spec.oversampling = 2;
    spec.n_symbols = 64;
    spec.seed = 5;
    const SymbolSequence syms = generate_symbols(spec);
    const auto taps = rrc_taps(0.1, 8, 2);
    GraphWindow w;
    w.rx = pulse_shape(syms, taps, 2, 0.0).samples;
    w.tx_symbols = syms.symbols;
    GraphConfig gcfg;
    gcfg.plan = &plan;
    gcfg.beta2_ps2_per_km = -21.7;
    gcfg.matched_taps = &taps;
    gcfg.oversampling = 2;
    gcfg.guard_symbols = 12;
    gcfg.l1_lambda = 1e-4;

    LossGraph g = build_loss_graph(params, w, gcfg);
    g.tape.backward(g.loss);
    ParamVector grad = flatten_params(params);
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
    accumulate_leaf_gradients(g, params, &grad);

    ParamVector flat = flatten_params(params);
    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < flat.size(); k += 7) {
      DbpParams pp = params;
      ParamVector f2 = flat;
      f2.data[k] += eps;
      unflatten_params(f2, &pp);
      LossGraph gp = build_loss_graph(pp, w, gcfg);
      const double lp = gp.tape.scalar(gp.loss);
      f2.data[k] -= 2 * eps;
      unflatten_params(f2, &pp);
      LossGraph gm = build_loss_graph(pp, w, gcfg);
      const double lm = gm.tape.scalar(gm.loss);
      const double fd = (lp - lm) / (2 * eps);
      const double scale = std::max({std::abs(fd), std::abs(grad.data[k]), 1e-6});
      worst = std::max(worst, std::abs(fd - grad.data[k]) / scale);
    }
    report("reverse-mode gradients", worst < 1e-4, worst, "rel err");
  }

  {  // δ-locked plan: integer walk-off for all uniform steps.
    const ExperimentConfig cfg = desk_scale_config();
    const DeltaResult d = compute_delta(cfg.n_subbands, cfg.downsample, cfg.base_period_s(),
                                        cfg.fiber.beta2_ps2_per_km);
    const StepPlan plan = plan_steps(cfg.fiber.total_km(), d.delta_km, cfg.step_multiple);
    double worst = 0.0;
    for (const auto& st : plan.steps) {
      for (int i = -cfg.half_width; i <= cfg.half_width; ++i) {
        const WalkOff wo = walk_off_delay(i, st.xi_km, cfg.fiber.beta2_ps2_per_km,
                                          cfg.n_subbands, cfg.base_period_s(), cfg.downsample);
        worst = std::max(worst, wo.frac);
      }
    }
    report("delta-locked walk-off", worst == 0.0, worst, "frac");
  }

  {  // Folded CD filtering against direct convolution.
    const CdFilter f = ls_cd_filter(38.2, -21.7, 24e9, 3);
    Rng rng(9);
    std::vector<cplx> x(512);
    for (auto& v : x) v = rng.cnormal();
    const auto y = apply_cd(x, f);
    const int L = f.half_len();
    double err = 0;
    for (std::int64_t k = 0; k < 512; ++k) {
      cplx acc(0, 0);
      for (int t = -L; t <= L; ++t) {
        const std::int64_t j = k - t;
        if (j >= 0 && j < 512)
          acc += f.taps[static_cast<std::size_t>(L + t)] * x[static_cast<std::size_t>(j)];
      }
      err += std::norm(acc - y[static_cast<std::size_t>(k)]);
    }
    err = std::sqrt(err / 512);
    report("folded CD == direct conv", err < 1e-12, err, "rms");
  }

  {  // Linear-limit SSFM against the closed-form CD operator.
    FiberParams fiber;
    fiber.n_spans = 2;
    fiber.gamma_per_w_km = 0.0;
    SignalSpec spec;
    spec.baud_hz = 32e9;
    spec.oversampling = 4;
    spec.n_symbols = 1024;
    spec.seed = 2;
    const SymbolSequence syms = generate_symbols(spec);
    const auto taps = rrc_taps(0.1, 16, 4);
    const ComplexSignal u = pulse_shape(syms, taps, 4, 0.0);
    const StepGrid grid = log_step_grid(fiber.span_km, 50, fiber.alpha_db_per_km);
    SsfmOptions opt;
    opt.samples_per_symbol = 4;
    opt.ase_noise = false;
    const ComplexSignal out = ssfm_propagate(u, fiber, grid, opt);
    const ComplexSignal ref = cd_exact(u, fiber.total_km(), fiber.beta2_ps2_per_km, -1);
    double err = 0, den = 0;
    for (std::size_t k = 0; k < u.samples.size(); ++k) {
      err += std::norm(out.samples[k] - ref.samples[k]);
      den += std::norm(ref.samples[k]);
    }
    err = std::sqrt(err / den);
    report("SSFM linear limit", err < 1e-8, err, "rel rms");
  }

  std::printf("%s\n", failures == 0 ? "selftest: all checks passed" : "selftest: FAILURES");
  return failures == 0 ? 0 : 1;
}

}  // namespace
