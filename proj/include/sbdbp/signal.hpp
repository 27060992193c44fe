// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <vector>

#include "sbdbp/common.hpp"

namespace sbdbp {

// Uniformly sampled complex baseband waveform. Sample amplitudes are in
// sqrt(W), so |sample|^2 is instantaneous power in W. t0_offset tracks the
// accumulated integer pipeline delay in samples relative to the transmit grid.
struct ComplexSignal {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;
  std::int64_t t0_offset = 0;

  void validate() const;
};

struct SymbolSequence {
  std::vector<cplx> symbols;
  double baud_hz = 0.0;
  std::uint64_t seed = 0;
};

struct SignalSpec {
  double baud_hz = 32e9;
  int oversampling = 6;     // samples per symbol
  double rolloff = 0.1;
  double power_dbm = 0.0;   // launch power
  std::int64_t n_symbols = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Circularly symmetric complex Gaussian symbols, unit average energy.
SymbolSequence generate_symbols(const SignalSpec& spec);

// Square QAM grid (order 4, 16, 64, ...), unit average energy, for readouts.
SymbolSequence generate_qam_symbols(const SignalSpec& spec, int order);

// Root-raised-cosine taps, odd length span_symbols*oversampling + 1,
// symmetric, unit energy. Singular points use their analytic limits.
std::vector<double> rrc_taps(double rolloff, int span_symbols, int oversampling);

// Upsample by `oversampling`, filter with `taps` (center-aligned, zero-padded
// edges), scale so the average output power is power_dbm.
ComplexSignal pulse_shape(const SymbolSequence& symbols, const std::vector<double>& taps,
                          int oversampling, double power_dbm);

// Matched filter then symbol-rate decimation. delay_samples must equal the
// accumulated pipeline delay of `signal` relative to the transmit grid.
SymbolSequence matched_filter_downsample(const ComplexSignal& signal,
                                         const std::vector<double>& taps, int oversampling,
                                         std::int64_t delay_samples);

// Least-squares complex scalar that aligns rx to tx (one common phase and
// scale): argmin_a sum |a*rx - tx|^2.
cplx ls_align_scalar(const std::vector<cplx>& tx, const std::vector<cplx>& rx);

// SNR in dB after scalar alignment, discarding `guard` symbols at each end.
// Capped at 150 dB for numerically exact matches.
double align_and_snr(const SymbolSequence& tx, const SymbolSequence& rx, std::int64_t guard);

}  // namespace sbdbp
