// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <vector>

#include "sbdbp/common.hpp"

namespace sbdbp::ad {

// Reverse-mode differentiation over a define-by-run tape of signal-processing
// primitives. Values are complex or real vectors; parameters enter as leaves.
//
// Adjoint convention for a real-valued loss L and complex value z = x + jy:
// adj(z) = ∂L/∂x + j ∂L/∂y. For a real parameter t, dL/dt = Re(conj(adj) dz/dt).
// Non-holomorphic steps (|·|², alignment) are handled in this paired-real
// sense, so gradients are exact for every real parameter.

enum class Op : std::uint8_t {
  kLeafC,
  kLeafR,
  kConstC,
  kConstR,
  kMirrorTaps,     // complex half taps -> full symmetric taps
  kCFir,           // complex-tap centered FIR
  kRTapFir,        // real-tap FIR with decimation and phase offset
  kRTapFirInterp,  // zero-stuff by K then real-tap FIR
  kModulate,       // pointwise multiply by periodic phasor table
  kDelay,          // integer shift (zero head)
  kAbs2,           // complex -> real magnitude square
  kRotate,         // x · e^{j b}, b a real node
  kRotateIdx,      // x · e^{j (phi[idx] + corr)}, phi a real node
  kSumC,           // elementwise sum of complex nodes
  kMimoRow,        // one output row of a masked real MIMO polynomial matrix
  kAlignedMse,     // scalar-aligned MSE against stored reference symbols
  kSumSqErrC,      // Σ |x - ref|², complex input
  kSumSqErrR,      // Σ (x - ref)², real input
  kL1Masked,       // λ Σ |g| over unmasked entries
  kAddScalars,     // weighted sum of real scalars
};

struct Node {
  Op op = Op::kConstC;
  bool real = false;
  int a = -1;
  int b = -1;
  std::vector<int> ins;   // extra inputs (kSumC, kMimoRow columns, kAddScalars)
  std::int64_t i0 = 0, i1 = 0, i2 = 0, i3 = 0;
  double x0 = 0.0;
  std::vector<cplx> cdata;          // phasor tables, saved rotations, reference symbols
  std::vector<std::uint8_t> msk;    // kMimoRow / kL1Masked active-entry mask
  std::vector<double> wts;          // kAddScalars weights

  std::vector<cplx> cv, ca;
  std::vector<double> rv, ra;
};

class Tape {
 public:
  int leaf_c(std::vector<cplx> v);
  int leaf_r(std::vector<double> v);
  int const_c(std::vector<cplx> v);
  int const_r(std::vector<double> v);

  // out[c+k] = out[c-k] = in[k], in length L+1, out length 2L+1.
  int mirror_taps(int half);
  // out[n] = Σ_t taps[t] · x[n - t + center], same length as x.
  int cfir(int x, int taps, int center);
  // out[m] = Σ_t taps[t] · x[m·decim + phase - t + center], m in [0, n_out).
  int rtap_fir(int x, int taps, int decim, std::int64_t phase, int center, std::int64_t n_out);
  // Zero-stuff x by K then filter: out[k] = Σ_{t ≡ (k+c) mod K} taps[t]·x[(k+c-t)/K].
  int rtap_fir_interp(int x, int taps, int upsample, int center);
  // out[k] = x[k] · table[(k0 + k) mod table.size()].
  int modulate(int x, std::vector<cplx> table, std::int64_t k0);
  int delay(int x, std::int64_t d);
  int abs2(int x);
  int rotate(int x, int b);
  int rotate_idx(int x, int phi, int idx, double corr);
  int sum_c(std::vector<int> xs);
  // out[n] = Σ_col Σ_t mask·g[(row·s+col)·taps + t] · a_col[n - t + center].
  int mimo_row(const std::vector<int>& cols, int g, int row, int taps, int center,
               std::vector<std::uint8_t> mask);
  // Scalar-aligned MSE over rx[start .. start+count) against ref (same count):
  // a = <rx,ref>/<rx,rx>, mse = (1/count) Σ |a·rx - ref|².
  int aligned_mse(int rx, std::vector<cplx> ref, std::int64_t start);
  int sum_sq_err_c(int x, std::vector<cplx> ref);
  int sum_sq_err_r(int x, std::vector<double> ref);
  int l1_masked(int g, std::vector<std::uint8_t> mask, double lambda);
  int add_scalars(std::vector<int> xs, std::vector<double> weights);

  double scalar(int id) const { return nodes_[static_cast<std::size_t>(id)].rv.at(0); }
  const std::vector<cplx>& cval(int id) const { return nodes_[static_cast<std::size_t>(id)].cv; }
  const std::vector<double>& rval(int id) const { return nodes_[static_cast<std::size_t>(id)].rv; }
  const std::vector<cplx>& cadj(int id) const { return nodes_[static_cast<std::size_t>(id)].ca; }
  const std::vector<double>& radj(int id) const { return nodes_[static_cast<std::size_t>(id)].ra; }

  // Overwrites a leaf value (same shape) for replay-based evaluations.
  void set_leaf_c(int id, const std::vector<cplx>& v);
  void set_leaf_r(int id, const std::vector<double>& v);

  // Re-executes every node in recording order; reproduces the recorded
  // forward values bit-for-bit when leaves are unchanged.
  void replay();

  // Reverse sweep seeding d(loss)/d(loss) = 1. Clears previous adjoints.
  void backward(int loss_id);

  std::size_t size() const { return nodes_.size(); }

 private:
  int push(Node n);
  void exec(Node& n);
  std::vector<Node> nodes_;
};

}  // namespace sbdbp::ad
