// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <vector>

#include "sbdbp/signal.hpp"

namespace sbdbp {

// Uniformly modulated analysis/synthesis bank: N subbands spaced 1/(NT),
// downsampling by K < N, active indices i in {-S..S}. Prototype taps are
// trainable state, hence stored by value here.
struct FilterBankSpec {
  int n_subbands = 12;   // N
  int downsample = 8;    // K
  int half_width = 3;    // S
  std::vector<double> analysis_taps;
  std::vector<double> synthesis_taps;
  double base_rate_hz = 0.0;  // 1/T

  int active_count() const { return 2 * half_width + 1; }
  double subband_rate_hz() const { return base_rate_hz / downsample; }
  double subband_spacing_hz() const { return base_rate_hz / n_subbands; }
  // ω_i = 2π i /(N T)
  double omega_i(int i) const { return kTwoPi * subband_spacing_hz() * i; }
  void validate() const;
};

// The |S| downconverted, K-fold downsampled subband signals. bands[idx]
// holds subband index i = idx - half_width. k0 is the absolute base-rate
// index of local sample 0 (downconversion phase reference); t0_offset counts
// accumulated common delay in subband-rate samples.
struct SubbandSet {
  std::vector<std::vector<cplx>> bands;
  int half_width = 0;
  int n_subbands = 0;
  int downsample = 1;
  double base_rate_hz = 0.0;
  std::int64_t k0 = 0;
  std::int64_t t0_offset = 0;

  int active_count() const { return 2 * half_width + 1; }
  double subband_rate_hz() const { return base_rate_hz / downsample; }
  const std::vector<cplx>& band(int i) const { return bands[static_cast<std::size_t>(i + half_width)]; }
  std::vector<cplx>& band(int i) { return bands[static_cast<std::size_t>(i + half_width)]; }
  void validate() const;
};

// Lowpass prototype with cutoff 1/(2NT). The analysis and synthesis
// prototypes are designed pair-complementary: the response is the square
// root of a raised cosine with the given rolloff, so the analysis-synthesis
// cascade is a raised cosine and the branch responses of adjacent subbands
// sum to one. Rejects rolloff violating the alias condition
// (1+rolloff)/(2NT) <= 1/(2KT). Unit DC gain (taps sum to 1).
std::vector<double> design_prototype(int n_subbands, int downsample, double rolloff, int length);

// Raised-cosine magnitude response at normalized frequency f·T, cutoff 1/(2N).
double raised_cosine_response(double f_norm, int n_subbands, double rolloff);

// Per subband i: multiply by e^{-jω_i k T} (k absolute, = k0 + local index),
// convolve with the analysis prototype (center-aligned), keep every K-th
// sample. Matches this definition sample-exactly.
SubbandSet analyze(const ComplexSignal& u, const FilterBankSpec& spec, std::int64_t k0 = 0);

// Insert K-1 zeros between samples, convolve with the synthesis prototype
// (center-aligned), multiply by e^{+jω_i k T}, sum over i. Group delay is
// zero by construction; t0_offset is converted to base-rate samples.
ComplexSignal synthesize(const SubbandSet& subbands, const FilterBankSpec& spec);

// Builds a spec with freshly designed prototypes (synthesis = K * analysis).
FilterBankSpec make_filter_bank(int n_subbands, int downsample, int half_width,
                                double base_rate_hz, double proto_rolloff, int proto_length);

}  // namespace sbdbp
