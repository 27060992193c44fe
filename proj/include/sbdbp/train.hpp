// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbdbp/graph.hpp"

namespace sbdbp {

struct DataRecord {
  std::vector<cplx> tx_symbols;
  std::vector<cplx> rx_wave;  // at the processing rate
  double power_dbm = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<DataRecord> records;
  double baud_hz = 0.0;
  int proc_oversampling = 2;
  double rolloff = 0.1;
  int rrc_span_symbols = 32;
  std::string channel_digest;

  double proc_rate_hz() const { return baud_hz * proc_oversampling; }
};

struct TrainConfig {
  double lr = 2e-3;
  double lr_decay = 0.5;          // applied at loss plateaus
  double lr_min = 1e-5;
  int plateau_iters = 150;        // iterations without improvement before decay
  int batch_size = 8;
  std::int64_t window_symbols = 4096;
  std::int64_t guard_symbols = 512;
  double l1_lambda = 0.0;
  int iterations = 1000;
  double threshold_tau = 1e-3;    // relative magnitude threshold
  std::uint64_t seed = 1;
  int val_every = 100;
  int n_val_records = 1;          // taken from the end of the dataset
  int threads = 1;
};

struct CurvePoint {
  int iteration = 0;
  double loss = 0.0;
  double mse = 0.0;
  double l1 = 0.0;
  double val_snr_db = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  DbpParams params;
  std::vector<CurvePoint> curves;
  double final_val_snr_db = 0.0;
};

struct SparsityReport {
  std::vector<std::size_t> nonzeros_per_step;
  std::size_t total_nonzeros = 0;
  std::size_t total_capacity = 0;
  double threshold_abs = 0.0;
  double mimo_rms_per_subband_step = 0.0;  // nonzeros / (|S| M)
};

// Inference pass: analyze → engine → synthesize → matched filter. Returns the
// recovered symbol sequence aligned to the transmit grid.
SymbolSequence run_receiver(const ComplexSignal& rx, const DbpParams& params,
                            const StepPlan& plan, double beta2_ps2_per_km,
                            const std::vector<double>& matched_taps, int oversampling);

// Spec-level forward pass over a small batch on a single tape: mean aligned
// MSE plus the L1 term. Exposed for gradient checks and tests.
LossGraph forward_loss(const DbpParams& params, const std::vector<GraphWindow>& batch,
                       const GraphConfig& cfg);

// Reverse sweep wrapper; returns the gradient in flatten_params layout.
ParamVector backward(LossGraph* graph, const DbpParams& params);

// Per-step least-squares CD designs followed by cyclic exact coordinate
// refinement of the cascade against the total response.
std::vector<CdFilter> pretrain_cd(const StepPlan& plan, double beta2_ps2_per_km,
                                  double subband_rate_hz, int half_len, int refine_passes = 2,
                                  double band_edge_frac = 0.95, int n_grid = 1024);

// Frequency-grid RMS error of the filter cascade against the exact total CD
// response (diagnostic for pretraining).
double cd_cascade_error(const std::vector<CdFilter>& filters, double total_km,
                        double beta2_ps2_per_km, double subband_rate_hz,
                        double band_edge_frac = 0.95, int n_grid = 1024);

// Zeroes every MIMO coefficient with |g| <= tau * max|g| and updates masks.
SparsityReport threshold_sparsify(DbpParams* params, double tau);

// L1 value and subgradient over active MIMO entries (matches the tape's
// kL1Masked node; sign(0) = 0).
double l1_value(const DbpParams& params, double lambda);
void add_l1_subgradient(const DbpParams& params, double lambda, ParamVector* grad);

// Mini-batch Adam over the unrolled graph. Deterministic for a fixed
// (seed, config, dataset) and any thread count.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const DbpParams& init,
                  const StepPlan& plan, double beta2_ps2_per_km);

}  // namespace sbdbp
