// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <vector>

#include "sbdbp/channel.hpp"
#include "sbdbp/filterbank.hpp"
#include "sbdbp/rng.hpp"

namespace sbdbp {

struct DeltaResult {
  double delta_km = 0.0;  // distance over which neighboring subbands walk off
                          // by exactly one subband sample
  double t_sub_s = 0.0;   // subband sampling interval K·T
};

// δ = N·K·T² / (2π|β₂|).
DeltaResult compute_delta(int n_subbands, int downsample, double base_period_s,
                          double beta2_ps2_per_km);

struct PlannedStep {
  double xi_km = 0.0;
  int multiple = 1;  // ξ/δ
};

// δ-locked step plan: uniform steps of m·δ plus one final residual step whose
// integer walk-off uses delay elements and whose fractional part is deferred
// to the per-subband fractional-delay filters.
struct StepPlan {
  std::vector<PlannedStep> steps;
  double residual_km = 0.0;
  double delta_km = 0.0;

  int total_steps() const { return static_cast<int>(steps.size()) + (residual_km > 0.0 ? 1 : 0); }
  double total_km() const;
  std::vector<double> xi_all() const;  // per-step distances, residual last
};

StepPlan plan_steps(double total_km, double delta_km, int multiple);

struct WalkOff {
  std::int64_t integer = 0;  // floor(t_i / T_sub)
  double frac = 0.0;         // in [0, 1)
};

// Walk-off of subband i relative to the central subband over ξ, split into
// integer and fractional subband samples. Near-integer values snap exactly.
WalkOff walk_off_delay(int i, double xi_km, double beta2_ps2_per_km, int n_subbands,
                       double base_period_s, int downsample);

// Complex-symmetric CD compensation FIR (taps[c+k] == taps[c-k]).
struct CdFilter {
  std::vector<cplx> taps;  // odd length 2L+1
  double xi_km = 0.0;

  int half_len() const { return (static_cast<int>(taps.size()) - 1) / 2; }
  void validate() const;
};

// Least-squares fit of e^{jκω²} (κ = β₂ξ/2) over a dense in-band grid at the
// subband rate, symmetry imposed structurally (L+1 free taps).
// band_edge_frac is the covered fraction of the subband Nyquist band.
CdFilter ls_cd_filter(double xi_km, double beta2_ps2_per_km, double subband_rate_hz, int L,
                      double band_edge_frac = 0.95, int n_grid = 1024);

// Folded symmetric convolution, same-length output, zero-padded edges.
// Numerically identical to direct convolution; costs 4(L+1) real
// multiplications per output sample.
std::vector<cplx> apply_cd(const std::vector<cplx>& x, const CdFilter& f);

inline int cd_rm_per_output(int L) { return 4 * (L + 1); }

// Cascade of F sparse real |S|×|S| polynomial matrices of order O/F whose
// composition has order O. Coefficients are stored flat as [row][col][tap];
// masks freeze pruned entries at zero.
struct MimoFilterFactors {
  int s_count = 0;
  int order = 0;
  int n_factors = 1;
  std::vector<std::vector<double>> g;           // per factor
  std::vector<std::vector<std::uint8_t>> mask;  // per factor, 1 = active

  int taps_per_factor() const { return order / n_factors + 1; }
  std::size_t capacity() const {
    return static_cast<std::size_t>(n_factors) * s_count * s_count * taps_per_factor();
  }
  std::size_t nonzeros() const;
  void validate() const;

  static MimoFilterFactors identity(int s_count, int order, int n_factors);
  static MimoFilterFactors random(int s_count, int order, int n_factors, double scale, Rng& rng);
};

// Applies the factor cascade to the |S| intensity sequences. Masked-zero
// coefficients are skipped; if rm_count is given it accumulates the number of
// real multiplications actually performed.
std::vector<std::vector<double>> mimo_intensity_filter(const MimoFilterFactors& mf,
                                                       const std::vector<std::vector<double>>& a,
                                                       std::uint64_t* rm_count = nullptr);

// u[k] · e^{j b[k]}; magnitudes preserved.
std::vector<cplx> nonlinear_phase_rotate(const std::vector<cplx>& u, const std::vector<double>& b);

// Centered Lagrange interpolation taps realizing a fractional delay of
// mu ∈ [0,1) subband samples (n_taps even; nominal center n_taps/2 - 1).
std::vector<double> fractional_delay_taps(double mu, int n_taps = 8);

// All trainable state of the engine.
struct DbpParams {
  FilterBankSpec bank;
  std::vector<CdFilter> cd;                   // one per step
  std::vector<MimoFilterFactors> mimo;        // one per step
  std::vector<std::vector<double>> fd_taps;   // per subband, even length
  std::vector<double> phi;                    // per subband accumulated phase

  void validate(const StepPlan& plan) const;
};

// Static per-step integer delay tables and end-of-chain bookkeeping derived
// from the plan. Delays are normalized to be nonnegative; the common offsets
// accumulate into t0.
struct EngineLayout {
  std::vector<std::vector<std::int64_t>> delays;  // [step][band index]
  std::vector<std::int64_t> step_offset;          // common offset per step
  std::vector<double> residual_mu;                // [band index], 0 when no residual
  std::int64_t t0_added = 0;                      // subband samples
  std::vector<double> phi_init;                   // physical Σ β₂ξω_i²/2
  std::vector<double> synth_phase_corr;           // fixed upconversion correction
};

EngineLayout make_engine_layout(const StepPlan& plan, const FilterBankSpec& bank,
                                double beta2_ps2_per_km);

struct DbpInitOptions {
  int cd_half_len = 3;        // L
  int mimo_factors = 3;       // F
  double mimo_init_scale = 1e-2;
  bool physics_mimo_init = false;   // analytic diagonal instead of random
  double gamma_per_w_km = 0.0;      // used by the physics init
  double leff_total_km = 0.0;       // used by the physics init
  double cd_band_edge_frac = 0.95;
  std::uint64_t seed = 1;
};

// Residual-step MIMO order: ceil(residual/δ)·(|S|-1)·... rounded up to a
// multiple of F; uniform steps use m·(|S|-1) rounded likewise.
int mimo_order_for_step(const StepPlan& plan, int step_index, int half_width, int n_factors);

DbpParams init_dbp_params(const FilterBankSpec& bank, const StepPlan& plan,
                          double beta2_ps2_per_km, const DbpInitOptions& opt);

// Runs the per-step datapath: shared CD filter per subband, integer walk-off
// delays, joint MIMO intensity filtering, nonlinear phase rotation; after the
// last step the per-subband fractional delays and accumulated phases.
SubbandSet dbp_process(const SubbandSet& in, const DbpParams& params, const StepPlan& plan,
                       double beta2_ps2_per_km, std::uint64_t* mimo_rm_count = nullptr);

// Reference subband DBP with exact per-step frequency-domain CD (walk-off and
// constant phases included in the shifted response) and analytically set XPM
// intensity coupling. Intended for undecimated banks (K = 1).
SubbandSet fd_subband_dbp_baseline(const SubbandSet& in, const FiberParams& fiber, int stps);

}  // namespace sbdbp
