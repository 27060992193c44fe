// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "sbdbp/linalg.hpp"
#include "sbdbp/signal.hpp"

namespace sbdbp {
namespace {

std::int64_t lcm64(std::int64_t a, std::int64_t b) { return a / std::gcd(a, b) * b; }

struct WindowRef {
  int record = 0;
  std::int64_t start_sample = 0;  // in processing-rate samples
};

}  // namespace

SymbolSequence run_receiver(const ComplexSignal& rx, const DbpParams& params,
                            const StepPlan& plan, double beta2_ps2_per_km,
                            const std::vector<double>& matched_taps, int oversampling) {
  SubbandSet sub = analyze(rx, params.bank, 0);
  sub = dbp_process(sub, params, plan, beta2_ps2_per_km);
  ComplexSignal rebuilt = synthesize(sub, params.bank);
  return matched_filter_downsample(rebuilt, matched_taps, oversampling, rebuilt.t0_offset);
}

LossGraph forward_loss(const DbpParams& params, const std::vector<GraphWindow>& batch,
                       const GraphConfig& cfg) {
  return build_batch_loss_graph(params, batch, cfg);
}

ParamVector backward(LossGraph* graph, const DbpParams& params) {
  graph->tape.backward(graph->loss);
  ParamVector grad = flatten_params(params);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  accumulate_leaf_gradients(*graph, params, &grad);
  return grad;
}

std::vector<CdFilter> pretrain_cd(const StepPlan& plan, double beta2_ps2_per_km,
                                  double subband_rate_hz, int half_len, int refine_passes,
                                  double band_edge_frac, int n_grid) {
  const auto xis = plan.xi_all();
  std::vector<CdFilter> filters;
  filters.reserve(xis.size());
  for (double xi : xis)
    filters.push_back(ls_cd_filter(xi, beta2_ps2_per_km, subband_rate_hz, half_len,
                                   band_edge_frac, n_grid));
  if (filters.size() < 2 || refine_passes < 1) return filters;

  // Cyclic exact coordinate descent: re-solve one step's taps against the
  // total response divided by the others, weighted by their magnitude.
  const int L = half_len;
  const int n_free = L + 1;
  const double t_sub = 1.0 / subband_rate_hz;
  const double kappa_tot =
      0.5 * beta2_ps2_per_km * 1e-24 * plan.total_km() / (t_sub * t_sub);  // rad per Ω²
  const int M = static_cast<int>(filters.size());

  std::vector<double> om(static_cast<std::size_t>(n_grid));
  std::vector<cplx> target(static_cast<std::size_t>(n_grid));
  for (int g = 0; g < n_grid; ++g) {
    om[static_cast<std::size_t>(g)] = band_edge_frac * kPi * g / (n_grid - 1);
    const double o = om[static_cast<std::size_t>(g)];
    target[static_cast<std::size_t>(g)] = std::polar(1.0, kappa_tot * o * o);
  }
  auto response = [&](const CdFilter& f, double o) {
    cplx h = f.taps[static_cast<std::size_t>(L)];
    for (int k = 1; k <= L; ++k)
      h += f.taps[static_cast<std::size_t>(L + k)] * 2.0 * std::cos(k * o);
    return h;
  };

  for (int pass = 0; pass < refine_passes; ++pass) {
    for (int l = 0; l < M; ++l) {
      // P(Ω) = Π_{k≠l} H_k(Ω)
      std::vector<cplx> others(static_cast<std::size_t>(n_grid), cplx(1.0, 0.0));
      for (int k = 0; k < M; ++k) {
        if (k == l) continue;
        for (int g = 0; g < n_grid; ++g)
          others[static_cast<std::size_t>(g)] *=
              response(filters[static_cast<std::size_t>(k)], om[static_cast<std::size_t>(g)]);
      }
      std::vector<double> gram(static_cast<std::size_t>(n_free) * n_free, 0.0);
      std::vector<double> rhs_re(static_cast<std::size_t>(n_free), 0.0);
      std::vector<double> rhs_im(static_cast<std::size_t>(n_free), 0.0);
      std::vector<double> basis(static_cast<std::size_t>(n_free), 0.0);
      for (int g = 0; g < n_grid; ++g) {
        const double o = om[static_cast<std::size_t>(g)];
        const cplx p = others[static_cast<std::size_t>(g)];
        const double w = std::norm(p);
        const cplx q = target[static_cast<std::size_t>(g)] * std::conj(p);  // w * (T/P)
        basis[0] = 1.0;
        for (int k = 1; k < n_free; ++k) basis[static_cast<std::size_t>(k)] = 2.0 * std::cos(k * o);
        for (int r = 0; r < n_free; ++r) {
          rhs_re[static_cast<std::size_t>(r)] += basis[static_cast<std::size_t>(r)] * q.real();
          rhs_im[static_cast<std::size_t>(r)] += basis[static_cast<std::size_t>(r)] * q.imag();
          for (int c = r; c < n_free; ++c)
            gram[static_cast<std::size_t>(r) * n_free + c] +=
                w * basis[static_cast<std::size_t>(r)] * basis[static_cast<std::size_t>(c)];
        }
      }
      for (int r = 0; r < n_free; ++r)
        for (int c = 0; c < r; ++c)
          gram[static_cast<std::size_t>(r) * n_free + c] =
              gram[static_cast<std::size_t>(c) * n_free + r];
      const auto cre = solve_dense(gram, rhs_re, n_free);
      const auto cim = solve_dense(std::move(gram), rhs_im, n_free);
      CdFilter& f = filters[static_cast<std::size_t>(l)];
      f.taps[static_cast<std::size_t>(L)] = cplx(cre[0], cim[0]);
      for (int k = 1; k <= L; ++k) {
        const cplx v(cre[static_cast<std::size_t>(k)], cim[static_cast<std::size_t>(k)]);
        f.taps[static_cast<std::size_t>(L + k)] = v;
        f.taps[static_cast<std::size_t>(L - k)] = v;
      }
    }
  }
  return filters;
}

double cd_cascade_error(const std::vector<CdFilter>& filters, double total_km,
                        double beta2_ps2_per_km, double subband_rate_hz,
                        double band_edge_frac, int n_grid) {
  const double t_sub = 1.0 / subband_rate_hz;
  const double kappa_tot = 0.5 * beta2_ps2_per_km * 1e-24 * total_km / (t_sub * t_sub);
  double acc = 0.0;
  for (int g = 0; g < n_grid; ++g) {
    const double o = band_edge_frac * kPi * g / (n_grid - 1);
    cplx h(1.0, 0.0);
    for (const CdFilter& f : filters) {
      const int L = f.half_len();
      cplx r = f.taps[static_cast<std::size_t>(L)];
      for (int k = 1; k <= L; ++k)
        r += f.taps[static_cast<std::size_t>(L + k)] * 2.0 * std::cos(k * o);
      h *= r;
    }
    acc += std::norm(h - std::polar(1.0, kappa_tot * o * o));
  }
  return std::sqrt(acc / n_grid);
}

SparsityReport threshold_sparsify(DbpParams* params, double tau) {
  if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
  SparsityReport rep;
  double gmax = 0.0;
  for (const auto& mf : params->mimo)
    for (const auto& fac : mf.g)
      for (double v : fac) gmax = std::max(gmax, std::abs(v));
  rep.threshold_abs = tau * gmax;

  int s_count = 0;
  for (auto& mf : params->mimo) {
    s_count = mf.s_count;
    for (std::size_t f = 0; f < mf.g.size(); ++f) {
      for (std::size_t e = 0; e < mf.g[f].size(); ++e) {
        if (std::abs(mf.g[f][e]) <= rep.threshold_abs) {
          mf.g[f][e] = 0.0;
          mf.mask[f][e] = 0;
        }
      }
    }
    rep.nonzeros_per_step.push_back(mf.nonzeros());
    rep.total_nonzeros += mf.nonzeros();
    rep.total_capacity += mf.capacity();
  }
  const std::size_t m = params->mimo.size();
  if (m > 0 && s_count > 0)
    rep.mimo_rms_per_subband_step =
        static_cast<double>(rep.total_nonzeros) / (static_cast<double>(s_count) * m);
  return rep;
}

double l1_value(const DbpParams& params, double lambda) {
  double acc = 0.0;
  for (const auto& mf : params.mimo)
    for (std::size_t f = 0; f < mf.g.size(); ++f)
      for (std::size_t e = 0; e < mf.g[f].size(); ++e)
        if (mf.mask[f][e]) acc += std::abs(mf.g[f][e]);
  return lambda * acc;
}

void add_l1_subgradient(const DbpParams& params, double lambda, ParamVector* grad) {
  for (std::size_t l = 0; l < params.mimo.size(); ++l) {
    const auto& mf = params.mimo[l];
    for (int f = 0; f < mf.n_factors; ++f) {
      char name[48];
      std::snprintf(name, sizeof(name), "mimo/%03zu/f%d", l, f);
      const SegmentInfo& s = grad->find(name);
      const auto& g = mf.g[static_cast<std::size_t>(f)];
      const auto& mask = mf.mask[static_cast<std::size_t>(f)];
      for (std::size_t e = 0; e < g.size(); ++e) {
        if (!mask[e] || g[e] == 0.0) continue;
        grad->data[s.offset + e] += (g[e] > 0.0) ? lambda : -lambda;
      }
    }
  }
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const DbpParams& init,
                  const StepPlan& plan, double beta2_ps2_per_km) {
  if (data.records.empty()) throw std::invalid_argument("empty dataset");
  const int n_train = static_cast<int>(data.records.size()) - cfg.n_val_records;
  if (n_train < 1) throw std::invalid_argument("no training records left after validation split");

  DbpParams params = init;
  const FilterBankSpec& bank = params.bank;
  const int os = data.proc_oversampling;
  const std::vector<double> mf_taps = rrc_taps(data.rolloff, data.rrc_span_symbols, os);

  // Window starts must respect the modulation (N), decimation (K) and symbol
  // (os) grids simultaneously.
  const std::int64_t align = lcm64(lcm64(bank.n_subbands, bank.downsample), os);
  const std::int64_t w_samples = cfg.window_symbols * os;
  if (w_samples % align != 0)
    throw std::invalid_argument("window_symbols*os must be a multiple of lcm(N,K,os)");

  std::vector<WindowRef> windows;
  for (int r = 0; r < n_train; ++r) {
    const std::int64_t len = static_cast<std::int64_t>(data.records[static_cast<std::size_t>(r)].rx_wave.size());
    for (std::int64_t s = 0; s + w_samples <= len; s += w_samples)
      windows.push_back({r, s});
  }
  if (windows.empty()) throw std::invalid_argument("records shorter than one window");

  GraphConfig gcfg;
  gcfg.plan = &plan;
  gcfg.beta2_ps2_per_km = beta2_ps2_per_km;
  gcfg.matched_taps = &mf_taps;
  gcfg.oversampling = os;
  gcfg.guard_symbols = cfg.guard_symbols;
  gcfg.l1_lambda = 0.0;  // L1 handled analytically below

  auto make_window = [&](const WindowRef& ref) {
    const DataRecord& rec = data.records[static_cast<std::size_t>(ref.record)];
    GraphWindow w;
    w.k0 = ref.start_sample;
    w.rx.assign(rec.rx_wave.begin() + ref.start_sample,
                rec.rx_wave.begin() + ref.start_sample + w_samples);
    const std::int64_t sym0 = ref.start_sample / os;
    w.tx_symbols.assign(rec.tx_symbols.begin() + sym0,
                        rec.tx_symbols.begin() + sym0 + cfg.window_symbols);
    return w;
  };

  auto validate = [&](const DbpParams& p) {
    double snr_acc = 0.0;
    int count = 0;
    for (int r = n_train; r < static_cast<int>(data.records.size()); ++r) {
      const DataRecord& rec = data.records[static_cast<std::size_t>(r)];
      ComplexSignal rx;
      rx.samples = rec.rx_wave;
      rx.sample_rate_hz = data.proc_rate_hz();
      SymbolSequence soft = run_receiver(rx, p, plan, beta2_ps2_per_km, mf_taps, os);
      SymbolSequence tx;
      tx.baud_hz = data.baud_hz;
      tx.symbols.assign(rec.tx_symbols.begin(),
                        rec.tx_symbols.begin() + static_cast<std::int64_t>(soft.symbols.size()));
      snr_acc += align_and_snr(tx, soft, cfg.guard_symbols);
      ++count;
    }
    return count > 0 ? snr_acc / count : 0.0;
  };

  ParamVector flat = flatten_params(params);
  AdamState adam = make_adam_state(flat.size(), cfg.lr);
  Rng batch_rng(cfg.seed);

  TrainResult result;
  double best_smoothed = 1e300;
  double smoothed = 0.0;
  int since_best = 0;
  double last_val = (cfg.n_val_records > 0) ? validate(params) : 0.0;

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<WindowRef> batch(static_cast<std::size_t>(cfg.batch_size));
    for (auto& b : batch)
      b = windows[static_cast<std::size_t>(batch_rng.uniform() * windows.size()) % windows.size()];

    const int n_items = static_cast<int>(batch.size());
    std::vector<ParamVector> item_grads(static_cast<std::size_t>(n_items));
    std::vector<double> item_mse(static_cast<std::size_t>(n_items), 0.0);

    auto run_item = [&](int b) {
      LossGraph g = build_loss_graph(params, make_window(batch[static_cast<std::size_t>(b)]), gcfg);
      g.tape.backward(g.loss);
      ParamVector grad = flatten_params(params);
      std::fill(grad.data.begin(), grad.data.end(), 0.0);
      accumulate_leaf_gradients(g, params, &grad);
      item_grads[static_cast<std::size_t>(b)] = std::move(grad);
      item_mse[static_cast<std::size_t>(b)] = g.tape.scalar(g.mse);
    };

    const int n_threads = std::max(1, std::min(cfg.threads, n_items));
    if (n_threads <= 1) {
      for (int b = 0; b < n_items; ++b) run_item(b);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t]() {
          for (int b = t; b < n_items; b += n_threads) run_item(b);
        });
      }
      for (auto& th : pool) th.join();
    }

    // Deterministic fixed-order reduction.
    ParamVector grad = flatten_params(params);
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
    const double inv_b = 1.0 / n_items;
    double mse = 0.0;
    for (int b = 0; b < n_items; ++b) {
      mse += item_mse[static_cast<std::size_t>(b)] * inv_b;
      const auto& gd = item_grads[static_cast<std::size_t>(b)].data;
      for (std::size_t k = 0; k < gd.size(); ++k) grad.data[k] += gd[k] * inv_b;
    }
    const double l1 = l1_value(params, cfg.l1_lambda);
    if (cfg.l1_lambda > 0.0) add_l1_subgradient(params, cfg.l1_lambda, &grad);

    adam_step(adam, flat.data, grad.data);
    unflatten_params(flat, &params);

    const double loss = mse + l1;
    smoothed = (it == 0) ? loss : 0.95 * smoothed + 0.05 * loss;
    if (smoothed < best_smoothed - 1e-12) {
      best_smoothed = smoothed;
      since_best = 0;
    } else if (++since_best >= cfg.plateau_iters) {
      adam.lr = std::max(adam.lr * cfg.lr_decay, cfg.lr_min);
      since_best = 0;
      best_smoothed = smoothed;
    }

    if (cfg.n_val_records > 0 && cfg.val_every > 0 && (it + 1) % cfg.val_every == 0)
      last_val = validate(params);
    result.curves.push_back({it, loss, mse, l1, last_val, adam.lr});
  }

  if (cfg.n_val_records > 0) last_val = validate(params);
  result.params = std::move(params);
  result.final_val_snr_db = last_val;
  return result;
}

}  // namespace sbdbp
