// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <string>
#include <vector>

#include "sbdbp/dbp.hpp"

namespace sbdbp {

struct SegmentInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;  // in reals
};

// Flat real view over all trainable arrays with named segments. Complex CD
// taps are stored as their free half (center..outer) with interleaved
// real/imaginary parts.
struct ParamVector {
  std::vector<double> data;
  std::vector<SegmentInfo> segments;

  std::size_t size() const { return data.size(); }
  const SegmentInfo& find(const std::string& name) const;
};

ParamVector flatten_params(const DbpParams& p);

// Writes the flat values back into an identically shaped DbpParams.
void unflatten_params(const ParamVector& v, DbpParams* p);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(std::size_t n_params, double lr);

// Standard bias-corrected update; params -= lr * m̂ / (sqrt(v̂) + eps).
void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grads);

}  // namespace sbdbp
