// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <vector>

#include "sbdbp/autodiff.hpp"
#include "sbdbp/dbp.hpp"
#include "sbdbp/params.hpp"

namespace sbdbp {

// One training window: received waveform at the processing rate and the
// matching transmitted symbols. k0 is the absolute base-rate index of
// rx[0] within its record (downconversion/decimation phase reference);
// windows must start on a multiple of lcm(N, K, oversampling).
struct GraphWindow {
  std::vector<cplx> rx;
  std::vector<cplx> tx_symbols;
  std::int64_t k0 = 0;
};

struct GraphConfig {
  const StepPlan* plan = nullptr;
  double beta2_ps2_per_km = 0.0;
  const std::vector<double>* matched_taps = nullptr;
  int oversampling = 2;           // processing-rate samples per symbol
  std::int64_t guard_symbols = 512;
  double l1_lambda = 0.0;
};

// Leaf ids of every trainable segment on the tape, in ParamVector order.
struct GraphLeaves {
  int analysis = -1;
  int synthesis = -1;
  std::vector<int> cd_free;                // per step, complex half taps
  std::vector<std::vector<int>> mimo;      // per step, per factor
  std::vector<int> fd;                     // per subband
  int phi = -1;
};

// Unrolled analysis → M-step engine → synthesis → matched filter →
// aligned-MSE graph, recorded on a fresh tape (plus the L1 term when
// l1_lambda > 0).
struct LossGraph {
  ad::Tape tape;
  GraphLeaves leaves;
  int loss = -1;
  int mse = -1;
  int l1 = -1;
  int symbols = -1;  // soft symbols node, for diagnostics
};

LossGraph build_loss_graph(const DbpParams& params, const GraphWindow& window,
                           const GraphConfig& cfg);

// As build_loss_graph but averaging the aligned MSE of several windows on one
// tape with shared parameter leaves.
LossGraph build_batch_loss_graph(const DbpParams& params, const std::vector<GraphWindow>& batch,
                                 const GraphConfig& cfg);

// Accumulates the tape's leaf adjoints into the flat layout of
// flatten_params(params). The ParamVector must already carry the segments.
void accumulate_leaf_gradients(const LossGraph& g, const DbpParams& params, ParamVector* grad);

// Loads fresh parameter values into an existing graph's leaves (for replay).
void load_leaves(LossGraph* g, const DbpParams& params);

}  // namespace sbdbp
