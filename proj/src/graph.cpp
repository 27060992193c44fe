// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/graph.hpp"

#include <cmath>
#include <cstdio>

namespace sbdbp {
namespace {

std::vector<cplx> phasor_table(int n_subbands, int i, int sign) {
  std::vector<cplx> t(static_cast<std::size_t>(n_subbands));
  for (int r = 0; r < n_subbands; ++r)
    t[static_cast<std::size_t>(r)] =
        std::polar(1.0, sign * kTwoPi * i * r / static_cast<double>(n_subbands));
  return t;
}

std::vector<cplx> free_half(const CdFilter& f) {
  const int L = f.half_len();
  std::vector<cplx> h(static_cast<std::size_t>(L) + 1);
  for (int k = 0; k <= L; ++k) h[static_cast<std::size_t>(k)] = f.taps[static_cast<std::size_t>(L + k)];
  return h;
}

GraphLeaves make_leaves(ad::Tape& T, const DbpParams& params) {
  GraphLeaves leaves;
  leaves.analysis = T.leaf_r(params.bank.analysis_taps);
  leaves.synthesis = T.leaf_r(params.bank.synthesis_taps);
  for (std::size_t l = 0; l < params.cd.size(); ++l) {
    leaves.cd_free.push_back(T.leaf_c(free_half(params.cd[l])));
    std::vector<int> fac_ids;
    for (int f = 0; f < params.mimo[l].n_factors; ++f)
      fac_ids.push_back(T.leaf_r(params.mimo[l].g[static_cast<std::size_t>(f)]));
    leaves.mimo.push_back(std::move(fac_ids));
  }
  for (const auto& taps : params.fd_taps) leaves.fd.push_back(T.leaf_r(taps));
  leaves.phi = T.leaf_r(params.phi);
  return leaves;
}

struct PipelineOut {
  int mse = -1;
  int symbols = -1;
};

// Records analysis → engine steps → synthesis → matched filter → aligned MSE
// for one window, reusing the shared parameter leaves.
PipelineOut append_window(ad::Tape& T, const GraphLeaves& leaves, const DbpParams& params,
                          const EngineLayout& lay, const GraphWindow& window,
                          const GraphConfig& cfg) {
  const FilterBankSpec& bank = params.bank;
  const int S = bank.half_width;
  const int n_active = bank.active_count();
  const int K = bank.downsample;
  const int N = bank.n_subbands;
  const int os = cfg.oversampling;
  const int M = cfg.plan->total_steps();

  const std::int64_t w_len = static_cast<std::int64_t>(window.rx.size());
  const std::int64_t n_sub = (w_len + K - 1) / K;
  const std::int64_t n_sym = static_cast<std::int64_t>(window.tx_symbols.size());
  if (n_sym * os != w_len)
    throw std::invalid_argument("window waveform/symbol lengths inconsistent");
  const std::int64_t guard = cfg.guard_symbols;
  if (n_sym - 2 * guard < 2) throw std::invalid_argument("window too short for guard");

  const int rx_node = T.const_c(window.rx);

  // Analysis: downconvert, prototype filter, decimate.
  const int ca = static_cast<int>(bank.analysis_taps.size() - 1) / 2;
  std::vector<int> bands(static_cast<std::size_t>(n_active));
  for (int i = -S; i <= S; ++i) {
    const int mod = T.modulate(rx_node, phasor_table(N, i, -1), window.k0);
    bands[static_cast<std::size_t>(i + S)] = T.rtap_fir(mod, leaves.analysis, K, 0, ca, n_sub);
  }

  for (int l = 0; l < M; ++l) {
    const int cd_full = T.mirror_taps(leaves.cd_free[static_cast<std::size_t>(l)]);
    const int L = params.cd[static_cast<std::size_t>(l)].half_len();
    std::vector<int> intens(static_cast<std::size_t>(n_active));
    for (int idx = 0; idx < n_active; ++idx) {
      int v = T.cfir(bands[static_cast<std::size_t>(idx)], cd_full, L);
      const std::int64_t d = lay.delays[static_cast<std::size_t>(l)][static_cast<std::size_t>(idx)];
      if (d > 0) v = T.delay(v, d);
      bands[static_cast<std::size_t>(idx)] = v;
      intens[static_cast<std::size_t>(idx)] = T.abs2(v);
    }
    const MimoFilterFactors& mf = params.mimo[static_cast<std::size_t>(l)];
    const int taps = mf.taps_per_factor();
    const int cf = (taps - 1) / 2;
    std::vector<int> cur = intens;
    for (int f = 0; f < mf.n_factors; ++f) {
      std::vector<int> next(static_cast<std::size_t>(n_active));
      for (int row = 0; row < n_active; ++row) {
        next[static_cast<std::size_t>(row)] =
            T.mimo_row(cur, leaves.mimo[static_cast<std::size_t>(l)][static_cast<std::size_t>(f)],
                       row, taps, cf, mf.mask[static_cast<std::size_t>(f)]);
      }
      cur = std::move(next);
    }
    for (int idx = 0; idx < n_active; ++idx)
      bands[static_cast<std::size_t>(idx)] =
          T.rotate(bands[static_cast<std::size_t>(idx)], cur[static_cast<std::size_t>(idx)]);
  }

  // Fractional-delay cleanup, accumulated phases, synthesis.
  const int cs = static_cast<int>(bank.synthesis_taps.size() - 1) / 2;
  std::vector<int> contrib(static_cast<std::size_t>(n_active));
  for (int idx = 0; idx < n_active; ++idx) {
    const int n_fd = static_cast<int>(params.fd_taps[static_cast<std::size_t>(idx)].size());
    int v = T.rtap_fir(bands[static_cast<std::size_t>(idx)], leaves.fd[static_cast<std::size_t>(idx)],
                       1, 0, n_fd / 2 - 1, n_sub);
    v = T.rotate_idx(v, leaves.phi, idx, lay.synth_phase_corr[static_cast<std::size_t>(idx)]);
    v = T.rtap_fir_interp(v, leaves.synthesis, K, cs);
    contrib[static_cast<std::size_t>(idx)] = T.modulate(v, phasor_table(N, idx - S, +1), window.k0);
  }
  const int recombined = T.sum_c(contrib);

  const int cm = static_cast<int>(cfg.matched_taps->size() - 1) / 2;
  const std::int64_t base_delay = lay.t0_added * K;
  if (guard * os <= base_delay + cm)
    throw std::invalid_argument("guard too small for the engine delay and filter tails");
  const int mf_const = T.const_r(*cfg.matched_taps);

  PipelineOut out;
  out.symbols = T.rtap_fir(recombined, mf_const, os, base_delay, cm, n_sym - guard);
  std::vector<cplx> ref(window.tx_symbols.begin() + guard, window.tx_symbols.end() - guard);
  out.mse = T.aligned_mse(out.symbols, std::move(ref), guard);
  return out;
}

int append_l1(ad::Tape& T, const GraphLeaves& leaves, const DbpParams& params, double lambda) {
  std::vector<int> terms;
  for (std::size_t l = 0; l < params.mimo.size(); ++l) {
    const MimoFilterFactors& mf = params.mimo[l];
    for (int f = 0; f < mf.n_factors; ++f)
      terms.push_back(T.l1_masked(leaves.mimo[l][static_cast<std::size_t>(f)],
                                  mf.mask[static_cast<std::size_t>(f)], lambda));
  }
  return T.add_scalars(terms, std::vector<double>(terms.size(), 1.0));
}

}  // namespace

LossGraph build_loss_graph(const DbpParams& params, const GraphWindow& window,
                           const GraphConfig& cfg) {
  return build_batch_loss_graph(params, {window}, cfg);
}

LossGraph build_batch_loss_graph(const DbpParams& params, const std::vector<GraphWindow>& batch,
                                 const GraphConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  params.validate(*cfg.plan);
  const EngineLayout lay = make_engine_layout(*cfg.plan, params.bank, cfg.beta2_ps2_per_km);

  LossGraph g;
  g.leaves = make_leaves(g.tape, params);
  std::vector<int> mse_nodes;
  for (const GraphWindow& w : batch) {
    const PipelineOut out = append_window(g.tape, g.leaves, params, lay, w, cfg);
    mse_nodes.push_back(out.mse);
    g.symbols = out.symbols;
  }
  g.mse = (mse_nodes.size() == 1)
              ? mse_nodes[0]
              : g.tape.add_scalars(mse_nodes,
                                   std::vector<double>(mse_nodes.size(), 1.0 / mse_nodes.size()));
  if (cfg.l1_lambda > 0.0) {
    g.l1 = append_l1(g.tape, g.leaves, params, cfg.l1_lambda);
    g.loss = g.tape.add_scalars({g.mse, g.l1}, {1.0, 1.0});
  } else {
    g.l1 = -1;
    g.loss = g.mse;
  }
  return g;
}

void accumulate_leaf_gradients(const LossGraph& g, const DbpParams& params, ParamVector* grad) {
  const ad::Tape& T = g.tape;
  auto write_r = [&](const std::string& name, const std::vector<double>& adj) {
    const SegmentInfo& s = grad->find(name);
    if (s.size != adj.size()) throw std::invalid_argument("gradient segment mismatch: " + name);
    for (std::size_t k = 0; k < adj.size(); ++k) grad->data[s.offset + k] += adj[k];
  };

  write_r("proto/analysis", T.radj(g.leaves.analysis));
  write_r("proto/synthesis", T.radj(g.leaves.synthesis));
  for (std::size_t l = 0; l < g.leaves.cd_free.size(); ++l) {
    char name[32];
    std::snprintf(name, sizeof(name), "cd/%03d", static_cast<int>(l));
    const SegmentInfo& s = grad->find(name);
    const auto& adj = T.cadj(g.leaves.cd_free[l]);
    if (s.size != 2 * adj.size()) throw std::invalid_argument("cd gradient mismatch");
    for (std::size_t k = 0; k < adj.size(); ++k) {
      grad->data[s.offset + 2 * k] += adj[k].real();
      grad->data[s.offset + 2 * k + 1] += adj[k].imag();
    }
  }
  for (std::size_t l = 0; l < g.leaves.mimo.size(); ++l) {
    for (std::size_t f = 0; f < g.leaves.mimo[l].size(); ++f) {
      char name[48];
      std::snprintf(name, sizeof(name), "mimo/%03d/f%d", static_cast<int>(l), static_cast<int>(f));
      write_r(name, T.radj(g.leaves.mimo[l][f]));
    }
  }
  for (std::size_t i = 0; i < g.leaves.fd.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "fd/%03d", static_cast<int>(i));
    write_r(name, T.radj(g.leaves.fd[i]));
  }
  write_r("phi", T.radj(g.leaves.phi));
  (void)params;
}

void load_leaves(LossGraph* g, const DbpParams& params) {
  ad::Tape& T = g->tape;
  T.set_leaf_r(g->leaves.analysis, params.bank.analysis_taps);
  T.set_leaf_r(g->leaves.synthesis, params.bank.synthesis_taps);
  for (std::size_t l = 0; l < g->leaves.cd_free.size(); ++l)
    T.set_leaf_c(g->leaves.cd_free[l], free_half(params.cd[l]));
  for (std::size_t l = 0; l < g->leaves.mimo.size(); ++l)
    for (std::size_t f = 0; f < g->leaves.mimo[l].size(); ++f)
      T.set_leaf_r(g->leaves.mimo[l][f], params.mimo[l].g[f]);
  for (std::size_t i = 0; i < g->leaves.fd.size(); ++i)
    T.set_leaf_r(g->leaves.fd[i], params.fd_taps[i]);
  T.set_leaf_r(g->leaves.phi, params.phi);
}

}  // namespace sbdbp
