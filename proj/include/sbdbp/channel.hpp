// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <vector>

#include "sbdbp/signal.hpp"

namespace sbdbp {

struct FiberParams {
  double alpha_db_per_km = 0.2;
  double beta2_ps2_per_km = -21.7;
  double gamma_per_w_km = 1.3;
  double span_km = 100.0;
  int n_spans = 25;
  double nf_db = 4.5;
  double carrier_hz = 193.41e12;

  double total_km() const { return span_km * n_spans; }
  double span_gain_db() const { return alpha_db_per_km * span_km; }
  void validate() const;
};

enum class StepScheme { kUniform, kLogarithmic };

// Step boundaries within one span, first 0, last span_km, strictly increasing.
struct StepGrid {
  std::vector<double> boundaries_km;
  StepScheme scheme = StepScheme::kLogarithmic;

  int n_steps() const { return static_cast<int>(boundaries_km.size()) - 1; }
  void validate(double span_km) const;
};

// Boundaries chosen so each step dissipates an equal share of the signal
// power: x_k = -(1/a) ln(1 - (k/n)(1 - e^{-a L})). Degenerates to uniform
// spacing as alpha -> 0.
StepGrid log_step_grid(double span_km, int n_steps, double alpha_db_per_km);

// Multiplies the discrete spectrum by e^{j sign κ ω²}, κ = (β₂/2)ξ.
// sign=+1 is the compensation direction, sign=-1 the forward channel.
// Circular convolution semantics (periodic boundary).
ComplexSignal cd_exact(const ComplexSignal& in, double xi_km, double beta2_ps2_per_km, int sign);

// As cd_exact but with the response evaluated at ω + ω_center (for signals
// downconverted by ω_center): e^{j sign κ (ω+ω_c)²}. Includes the group-delay
// and constant-phase terms of the shifted response exactly.
std::vector<cplx> cd_exact_shifted(const std::vector<cplx>& band, double sample_rate_hz,
                                   double xi_km, double beta2_ps2_per_km, int sign,
                                   double omega_center_rad_s);

// u <- u * exp(j γ l_eff |u|²). Magnitudes preserved exactly.
ComplexSignal kerr_rotate(const ComplexSignal& in, double gamma_per_w_km, double l_eff_km);

// Field gain 10^{gain_db/20} plus circularly symmetric ASE with per-sample
// variance n_sp (G-1) h ν f_s, n_sp = 10^{NF/10}/2. Deterministic per seed.
ComplexSignal edfa(const ComplexSignal& in, double gain_db, double nf_db, double carrier_hz,
                   std::uint64_t seed);

struct SsfmOptions {
  int samples_per_symbol = 6;  // declared oversampling, used for the warning only
  bool ase_noise = true;
  std::uint64_t noise_seed = 0;
  bool quiet = false;
};

// Forward propagation over n_spans spans with the given per-span grid.
// Per step: half-step CD, nonlinear rotation with the step's effective length
// and entry power, loss over the step, half-step CD. EDFA after each span.
ComplexSignal ssfm_propagate(const ComplexSignal& in, const FiberParams& fiber,
                             const StepGrid& grid, const SsfmOptions& opt);

// Receiver-side inversion: spans in reverse order, β₂, γ negated, loss and
// gain inverted. Operates on the received waveform.
ComplexSignal full_dbp_baseline(const ComplexSignal& rx, const FiberParams& fiber, int stps);

// cd_exact compensation over the total distance; no nonlinear processing.
ComplexSignal linear_equalize(const ComplexSignal& rx, const FiberParams& fiber);

// Spectral resampling to a new rate (band truncation or zero-extension).
// new_len = len * new_rate / old_rate must be integral.
ComplexSignal resample(const ComplexSignal& in, double new_rate_hz);

}  // namespace sbdbp
