// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails. Criteria 6 and 7 run the
// full desk-scale experiment (dataset generation, training, evaluation) and
// dominate the runtime.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "sbdbp/experiment.hpp"
#include "sbdbp/fft.hpp"
#include "sbdbp/rng.hpp"

using namespace sbdbp;

namespace {

int g_failures = 0;

void report(int criterion, const char* what, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", criterion, what,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

double rel_rms(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += std::norm(a[k] - b[k]);
    den += std::norm(b[k]);
  }
  return std::sqrt(num / den);
}

// ---- criterion 1: formula regressions ------------------------------------

void criterion1() {
  const DeltaResult d = compute_delta(12, 8, 1.0 / 192e9, -21.7);
  bool ok = std::abs(d.delta_km - 19.1) <= 0.05;
  std::string detail = fmt("delta = %.4f km", d.delta_km);

  const StepPlan plan = plan_steps(2500.0, d.delta_km, 2);
  const bool plan_ok = plan.steps.size() == 65 &&
                       std::abs(plan.steps.front().xi_km - 38.2) < 0.05 &&
                       std::abs(plan.residual_km - 17.0) < 0.2 && plan.total_steps() == 66;
  ok = ok && plan_ok;
  detail += fmt("; plan %zux%.2f km + %.2f km (M=%d)", plan.steps.size(),
                plan.steps.front().xi_km, plan.residual_km, plan.total_steps());

  const std::size_t cap = mimo_capacity(7, 12, 3, 66);
  ok = ok && cap == 48510u;
  detail += fmt("; capacity %zu", cap);

  const double mimo_rms = 3812.0 / (7 * 66);
  const bool rm_ok = cd_rm_per_output(3) == 16 && std::lround(mimo_rms) == 8 &&
                     std::lround(16 + mimo_rms) == 24;
  ok = ok && rm_ok;
  detail += fmt("; RMs 16 + %.2f", mimo_rms);

  const double fd = fd_baseline_rms(128, 13);
  const bool fd_ok = std::abs(fd - 98.0) <= 1.0 && fd_baseline_best_n(13) == 128;
  ok = ok && fd_ok;
  detail += fmt("; FD reference %.2f at n=%d", fd, fd_baseline_best_n(13));

  report(1, "formula regressions", ok, detail);
}

// ---- criterion 2: channel physics ----------------------------------------

void criterion2() {
  bool ok = true;
  std::string detail;

  {  // delay spread via band-edge probes
    const double fs = 192e9, baud = 96e9;
    const std::size_t n = 1 << 15;
    auto probe = [&](double f_off) {
      ComplexSignal sig;
      sig.sample_rate_hz = fs;
      sig.samples.assign(n, cplx(0, 0));
      const double t0 = static_cast<double>(n) / 2.0, width = 300.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) - t0;
        sig.samples[k] = std::exp(-t * t / (2 * width * width)) *
                         std::polar(1.0, kTwoPi * f_off * t / fs);
      }
      return sig;
    };
    auto centroid = [](const ComplexSignal& s) {
      double num = 0, den = 0;
      for (std::size_t k = 0; k < s.samples.size(); ++k) {
        num += std::norm(s.samples[k]) * static_cast<double>(k);
        den += std::norm(s.samples[k]);
      }
      return num / den;
    };
    const auto hi = cd_exact(probe(+48e9), 100.0, -21.7, -1);
    const auto lo = cd_exact(probe(-48e9), 100.0, -21.7, -1);
    const double spread = std::abs(centroid(hi) - centroid(lo)) * baud / fs;
    ok = ok && std::abs(spread - 125.0) <= 2.0;
    detail += fmt("delay spread %.2f symbols", spread);
  }

  SignalSpec s;
  s.baud_hz = 32e9;
  s.oversampling = 6;
  s.rolloff = 0.1;
  s.n_symbols = 4096;
  s.seed = 11;
  const auto sym = generate_symbols(s);
  const auto h6 = rrc_taps(0.1, 32, 6);
  const auto u = pulse_shape(sym, h6, 6, 0.0);

  {  // linear limit
    FiberParams fiber;
    fiber.n_spans = 4;
    fiber.gamma_per_w_km = 0.0;
    const auto grid = log_step_grid(fiber.span_km, 100, fiber.alpha_db_per_km);
    SsfmOptions opt;
    opt.samples_per_symbol = 6;
    opt.ase_noise = false;
    const auto out = ssfm_propagate(u, fiber, grid, opt);
    const auto ref = cd_exact(u, fiber.total_km(), fiber.beta2_ps2_per_km, -1);
    const double err = rel_rms(out.samples, ref.samples);
    ok = ok && err < 1e-8;
    detail += fmt("; linear-limit rms %.2e", err);
  }

  {  // SPM limit
    FiberParams fiber;
    fiber.n_spans = 1;
    fiber.beta2_ps2_per_km = 0.0;
    const auto grid = log_step_grid(fiber.span_km, 64, fiber.alpha_db_per_km);
    SsfmOptions opt;
    opt.samples_per_symbol = 6;
    opt.ase_noise = false;
    const auto u6 = pulse_shape(sym, h6, 6, 6.0);
    const auto out = ssfm_propagate(u6, fiber, grid, opt);
    const double a = alpha_linear_per_km(fiber.alpha_db_per_km);
    const double leff = (1.0 - std::exp(-a * fiber.span_km)) / a;
    const double g = std::pow(10.0, fiber.span_gain_db() / 20.0) *
                     std::exp(-a * fiber.span_km / 2);
    std::vector<cplx> ref(u6.samples.size());
    for (std::size_t k = 0; k < ref.size(); ++k)
      ref[k] = g * u6.samples[k] *
               std::polar(1.0, fiber.gamma_per_w_km * leff * std::norm(u6.samples[k]));
    const double err = rel_rms(out.samples, ref);
    ok = ok && err < 1e-8;
    detail += fmt("; SPM-limit rms %.2e", err);
  }

  {  // all-pass energy conservation
    const auto moved = cd_exact(u, 100.0, -21.7, -1);
    const double drift = std::abs(energy(moved.samples) / energy(u.samples) - 1.0);
    ok = ok && drift < 1e-12;
    detail += fmt("; energy drift %.2e", drift);
  }

  report(2, "channel physics", ok, detail);
}

// ---- criterion 3: filter-bank properties ----------------------------------

void criterion3() {
  bool ok = true;
  std::string detail;

  {  // reconstruction on an in-band signal
    FilterBankSpec bank = make_filter_bank(12, 8, 3, 64e9, 0.45, 129);
    SignalSpec s;
    s.baud_hz = 32e9;
    s.oversampling = 2;
    s.rolloff = 0.1;
    s.n_symbols = 8192;
    s.seed = 23;
    const auto sym = generate_symbols(s);
    const auto h = rrc_taps(0.1, 32, 2);
    const auto u = pulse_shape(sym, h, 2, 0.0);
    const SubbandSet sub = analyze(u, bank, 0);
    const ComplexSignal v = synthesize(sub, bank);
    double num = 0, den = 0;
    for (std::size_t k = 512; k + 512 < u.samples.size(); ++k) {
      num += std::norm(v.samples[k] - u.samples[k]);
      den += std::norm(u.samples[k]);
    }
    const double snr = 10 * std::log10(den / num);
    ok = ok && snr >= 40.0;
    detail += fmt("reconstruction %.1f dB", snr);
  }

  {  // central-subband energy capture of the wideband signal
    FilterBankSpec bank = make_filter_bank(12, 8, 5, 192e9, 0.45, 129);
    SignalSpec s;
    s.baud_hz = 96e9;
    s.oversampling = 2;
    s.rolloff = 0.1;
    s.n_symbols = 32768;
    s.seed = 21;
    const auto sym = generate_symbols(s);
    const auto h = rrc_taps(0.1, 32, 2);
    const auto u = pulse_shape(sym, h, 2, 0.0);
    const SubbandSet sub = analyze(u, bank, 0);
    double central = 0;
    for (int i = -3; i <= 3; ++i) {
      double e = 0;
      for (const auto& v : sub.band(i)) e += std::norm(v);
      central += e * sub.downsample;
    }
    const double frac = central / energy(u.samples);
    ok = ok && frac >= 0.99;
    detail += fmt("; central-7 capture %.4f", frac);
  }

  report(3, "filter-bank properties", ok, detail);
}

// ---- criterion 4: differentiation correctness ------------------------------

void criterion4() {
  FilterBankSpec bank = make_filter_bank(4, 2, 1, 8e9, 0.45, 17);
  const DeltaResult d = compute_delta(4, 2, 1.0 / 8e9, -21.7);
  StepPlan plan = plan_steps(2.3 * d.delta_km, d.delta_km, 1);
  DbpInitOptions opt;
  opt.cd_half_len = 2;
  opt.mimo_factors = 2;
  opt.mimo_init_scale = 0.05;
  opt.seed = 3;
  DbpParams params = init_dbp_params(bank, plan, -21.7, opt);

  SignalSpec spec;
  spec.baud_hz = 4e9;
  spec.oversampling = 2;
  spec.rolloff = 0.1;
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
  gcfg.l1_lambda = 1e-3;

  LossGraph g = build_loss_graph(params, w, gcfg);
  g.tape.backward(g.loss);
  ParamVector grad = flatten_params(params);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  accumulate_leaf_gradients(g, params, &grad);

  ParamVector flat = flatten_params(params);
  const double eps = 1e-5;
  double worst = 0.0;
  std::string worst_seg = "-";
  for (const auto& seg : flat.segments) {
    for (std::size_t k = seg.offset; k < seg.offset + seg.size; ++k) {
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
      const double err = std::abs(fd - grad.data[k]) / scale;
      if (err > worst) {
        worst = err;
        worst_seg = seg.name;
      }
    }
  }
  report(4, "differentiation correctness", worst < 1e-4,
         fmt("max rel err %.2e over %zu parameters (worst in %s)", worst, flat.size(),
             worst_seg.c_str()));
}

// ---- criterion 5: oracle equivalences --------------------------------------

void criterion5() {
  bool ok = true;
  std::string detail;
  Rng rng(31);

  {  // folded vs direct convolution
    const CdFilter f = ls_cd_filter(38.2, -21.7, 24e9, 3);
    std::vector<cplx> x(4096);
    for (auto& v : x) v = rng.cnormal();
    const auto folded = apply_cd(x, f);
    std::vector<cplx> direct(x.size(), cplx(0, 0));
    const int L = f.half_len();
    for (std::int64_t k = 0; k < 4096; ++k) {
      cplx acc(0, 0);
      for (int t = -L; t <= L; ++t) {
        const std::int64_t j = k - t;
        if (j >= 0 && j < 4096)
          acc += f.taps[static_cast<std::size_t>(L + t)] * x[static_cast<std::size_t>(j)];
      }
      direct[static_cast<std::size_t>(k)] = acc;
    }
    const double err = rel_rms(folded, direct);
    ok = ok && err < 1e-12;
    detail += fmt("folded CD %.1e", err);
  }

  {  // factor cascade vs composed dense polynomial matrix
    const int s = 7, order = 12, F = 3;
    auto mf = MimoFilterFactors::random(s, order, F, 0.4, rng);
    const int tpf = mf.taps_per_factor();
    std::vector<std::vector<double>> dense(static_cast<std::size_t>(s) * s,
                                           std::vector<double>(1, 0.0));
    for (int i = 0; i < s; ++i) dense[static_cast<std::size_t>(i) * s + i][0] = 1.0;
    int dt = 1;
    for (int f = 0; f < F; ++f) {
      std::vector<std::vector<double>> next(static_cast<std::size_t>(s) * s,
                                            std::vector<double>(static_cast<std::size_t>(dt + tpf - 1), 0.0));
      for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
          for (int m = 0; m < s; ++m)
            for (int t1 = 0; t1 < tpf; ++t1)
              for (int t0 = 0; t0 < dt; ++t0)
                next[static_cast<std::size_t>(i) * s + j][static_cast<std::size_t>(t1 + t0)] +=
                    mf.g[static_cast<std::size_t>(f)]
                        [(static_cast<std::size_t>(i) * s + static_cast<std::size_t>(m)) * tpf +
                         static_cast<std::size_t>(t1)] *
                    dense[static_cast<std::size_t>(m) * s + j][static_cast<std::size_t>(t0)];
      dense = std::move(next);
      dt += tpf - 1;
    }
    std::vector<std::vector<double>> a(static_cast<std::size_t>(s), std::vector<double>(1024));
    for (auto& row : a)
      for (auto& v : row) v = rng.uniform(-1, 1);
    const auto b = mimo_intensity_filter(mf, a);
    const int center = F * ((tpf - 1) / 2);
    double worst = 0;
    for (int i = 0; i < s; ++i) {
      double num = 0, den = 0;
      for (std::int64_t k = 0; k < 1024; ++k) {
        double want = 0;
        for (int j = 0; j < s; ++j)
          for (int t = 0; t < dt; ++t) {
            const std::int64_t src = k - (t - center);
            if (src >= 0 && src < 1024)
              want += dense[static_cast<std::size_t>(i) * s + j][static_cast<std::size_t>(t)] *
                      a[static_cast<std::size_t>(j)][static_cast<std::size_t>(src)];
          }
        num += std::pow(b[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] - want, 2);
        den += want * want;
      }
      worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
    }
    ok = ok && worst < 1e-10;
    detail += fmt("; MIMO cascade %.1e", worst);
  }

  {  // single-band engine vs scalar reference
    FilterBankSpec bank;
    bank.n_subbands = 1;
    bank.downsample = 1;
    bank.half_width = 0;
    bank.base_rate_hz = 64e9;
    bank.analysis_taps = {1.0};
    bank.synthesis_taps = {1.0};
    StepPlan plan;
    plan.delta_km = 40.0;
    plan.steps = {{40.0, 1}, {40.0, 1}};
    DbpInitOptions opt;
    opt.cd_half_len = 3;
    opt.mimo_factors = 1;
    opt.seed = 2;
    DbpParams params = init_dbp_params(bank, plan, -21.7, opt);
    for (auto& mf : params.mimo) mf.g[0][0] = -0.8;

    SubbandSet sub;
    sub.half_width = 0;
    sub.n_subbands = 1;
    sub.downsample = 1;
    sub.base_rate_hz = 64e9;
    sub.bands.assign(1, {});
    sub.bands[0].resize(2048);
    for (auto& v : sub.bands[0]) v = 0.02 * rng.cnormal();
    const SubbandSet out = dbp_process(sub, params, plan, -21.7);

    std::vector<cplx> ref = sub.bands[0];
    for (int l = 0; l < 2; ++l) {
      const auto& taps = params.cd[static_cast<std::size_t>(l)].taps;
      std::vector<cplx> filt(ref.size(), cplx(0, 0));
      for (std::int64_t k = 0; k < 2048; ++k) {
        cplx acc(0, 0);
        for (int t = -3; t <= 3; ++t) {
          const std::int64_t j = k - t;
          if (j >= 0 && j < 2048)
            acc += taps[static_cast<std::size_t>(3 + t)] * ref[static_cast<std::size_t>(j)];
        }
        filt[static_cast<std::size_t>(k)] = acc;
      }
      for (auto& v : filt) v *= std::polar(1.0, -0.8 * std::norm(v));
      ref = std::move(filt);
    }
    const double err = rel_rms(out.bands[0], ref);
    ok = ok && err < 1e-8;
    detail += fmt("; scalar engine %.1e", err);
  }

  {  // undecimated single-band reference vs full DBP
    FiberParams fiber;
    fiber.n_spans = 2;
    SignalSpec s;
    s.baud_hz = 32e9;
    s.oversampling = 2;
    s.rolloff = 0.1;
    s.n_symbols = 4096;
    s.seed = 6;
    const auto sym = generate_symbols(s);
    const auto taps = rrc_taps(0.1, 32, 2);
    const auto u = pulse_shape(sym, taps, 2, 3.0);
    const auto grid = log_step_grid(fiber.span_km, 40, fiber.alpha_db_per_km);
    SsfmOptions opt;
    opt.samples_per_symbol = 2;
    opt.ase_noise = false;
    opt.quiet = true;
    const auto rx = ssfm_propagate(u, fiber, grid, opt);
    SubbandSet sub;
    sub.half_width = 0;
    sub.n_subbands = 1;
    sub.downsample = 1;
    sub.base_rate_hz = rx.sample_rate_hz;
    sub.bands = {rx.samples};
    const SubbandSet rec = fd_subband_dbp_baseline(sub, fiber, 40);
    const ComplexSignal full = full_dbp_baseline(rx, fiber, 40);
    const double err = rel_rms(rec.bands[0], full.samples);
    ok = ok && err < 1e-6;
    detail += fmt("; FD single-band vs full DBP %.1e", err);
  }

  report(5, "oracle equivalences", ok, detail);
}

// ---- criteria 6 and 7: desk-scale end-to-end -------------------------------

void criteria6and7() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = desk_scale_config();

  // >= 2e5 training symbols: (n_records - n_val) * n_symbols.
  const std::int64_t train_symbols =
      static_cast<std::int64_t>(cfg.n_records - cfg.n_val_records) * cfg.n_symbols;
  std::printf("  desk scale: %d spans x %.0f km, %d StPS forward, M=%d, %lld training symbols\n",
              cfg.fiber.n_spans, cfg.fiber.span_km, cfg.forward_stps,
              plan_from_config(cfg).total_steps(), static_cast<long long>(train_symbols));
  std::fflush(stdout);

  const Dataset data = generate_dataset(cfg);
  std::printf("  dataset generated (%.1f s)\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::fflush(stdout);

  TrainResult result = run_training(cfg, data, false);
  const StepPlan plan = plan_from_config(cfg);
  std::printf("  training done (%.1f s), validation SNR %.2f dB\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
              result.final_val_snr_db);
  std::fflush(stdout);

  const auto rows = run_eval(cfg, result.params, plan);
  auto peak = [&](const char* method) {
    double best = -1e300;
    for (const auto& r : rows)
      if (r.method == method) best = std::max(best, r.snr_db);
    return best;
  };
  const double lin = peak("linear");
  const double sub = peak("subband-tddbp");
  const double fd = peak("fd-subband");
  const double full = peak("full-dbp");
  for (const auto& r : rows)
    std::printf("    %+5.1f dBm  %-14s %6.2f dB\n", r.power_dbm, r.method.c_str(), r.snr_db);

  const bool gain_ok = sub >= lin + 1.0;
  const bool order_ok = (sub >= lin - 0.2) && (fd >= sub - 0.2) && (full >= fd - 0.2);
  report(6, "desk-scale end-to-end gain", gain_ok && order_ok,
         fmt("peak SNR: linear %.2f, subband %.2f, fd-subband %.2f, full %.2f dB "
             "(gain %.2f dB; runtime %.0f s)",
             lin, sub, fd, full, sub - lin,
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()));

  // Criterion 7: threshold at the default tau, compare SNR and sparsity.
  DbpParams sparse = result.params;
  const SparsityReport rep = threshold_sparsify(&sparse, cfg.threshold_tau);
  const double removed =
      1.0 - static_cast<double>(rep.total_nonzeros) / static_cast<double>(rep.total_capacity);

  // Validation SNR with and without thresholding on the held-out records.
  const std::vector<double> mf_taps = rrc_taps(cfg.rolloff, cfg.rrc_span_symbols,
                                               cfg.proc_oversampling);
  auto val_snr = [&](const DbpParams& p) {
    double acc = 0;
    int count = 0;
    for (int r = cfg.n_records - cfg.n_val_records; r < cfg.n_records; ++r) {
      const DataRecord& rec = data.records[static_cast<std::size_t>(r)];
      ComplexSignal rx;
      rx.samples = rec.rx_wave;
      rx.sample_rate_hz = cfg.proc_rate_hz();
      const SymbolSequence soft = run_receiver(rx, p, plan, cfg.fiber.beta2_ps2_per_km,
                                               mf_taps, cfg.proc_oversampling);
      SymbolSequence ref;
      ref.baud_hz = cfg.baud_hz;
      ref.symbols.assign(rec.tx_symbols.begin(),
                         rec.tx_symbols.begin() + static_cast<std::int64_t>(soft.symbols.size()));
      acc += align_and_snr(ref, soft, cfg.guard_symbols);
      ++count;
    }
    return acc / count;
  };
  const double snr_full = val_snr(result.params);
  const double snr_sparse = val_snr(sparse);
  const bool ok7 = removed >= 0.80 && (snr_full - snr_sparse) <= 0.1;
  report(7, "sparsity behavior", ok7,
         fmt("removed %.1f%% (%zu of %zu kept), SNR %.2f -> %.2f dB (drop %.3f)",
             100 * removed, rep.total_nonzeros, rep.total_capacity, snr_full, snr_sparse,
             snr_full - snr_sparse));
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criteria6and7();
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
