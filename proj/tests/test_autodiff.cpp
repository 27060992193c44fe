// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include <doctest.h>

#include <cmath>
#include <functional>

#include "sbdbp/graph.hpp"
#include "sbdbp/rng.hpp"
#include "sbdbp/signal.hpp"
#include "sbdbp/train.hpp"

using namespace sbdbp;
using sbdbp::ad::Tape;

namespace {

std::vector<cplx> rand_c(Rng& rng, std::size_t n) {
  std::vector<cplx> v(n);
  for (auto& x : v) x = rng.cnormal();
  return v;
}

std::vector<double> rand_r(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

// Central finite differences over every real coordinate of every leaf.
// build(tape) must create leaves first, then the graph, returning the loss id.
struct LeafSet {
  std::vector<int> cleaves;
  std::vector<int> rleaves;
};

double max_rel_grad_err(Tape& tape, int loss, const LeafSet& leaves) {
  tape.backward(loss);
  const double eps = 1e-5;
  double worst = 0.0;
  auto update = [&](double ad, double fd) {
    worst = std::max(worst, std::abs(ad - fd) / (1.0 + std::abs(ad) + std::abs(fd)));
  };
  for (int id : leaves.cleaves) {
    const std::vector<cplx> base = tape.cval(id);
    const std::vector<cplx> adj = tape.cadj(id);
    for (std::size_t k = 0; k < base.size(); ++k) {
      for (int part = 0; part < 2; ++part) {
        std::vector<cplx> v = base;
        const cplx delta = part == 0 ? cplx(eps, 0) : cplx(0, eps);
        v[k] = base[k] + delta;
        tape.set_leaf_c(id, v);
        tape.replay();
        const double lp = tape.scalar(loss);
        v[k] = base[k] - delta;
        tape.set_leaf_c(id, v);
        tape.replay();
        const double lm = tape.scalar(loss);
        tape.set_leaf_c(id, base);
        const double fd = (lp - lm) / (2 * eps);
        update(part == 0 ? adj[k].real() : adj[k].imag(), fd);
      }
    }
  }
  for (int id : leaves.rleaves) {
    const std::vector<double> base = tape.rval(id);
    const std::vector<double> adj = tape.radj(id);
    for (std::size_t k = 0; k < base.size(); ++k) {
      std::vector<double> v = base;
      v[k] = base[k] + eps;
      tape.set_leaf_r(id, v);
      tape.replay();
      const double lp = tape.scalar(loss);
      v[k] = base[k] - eps;
      tape.set_leaf_r(id, v);
      tape.replay();
      const double lm = tape.scalar(loss);
      tape.set_leaf_r(id, base);
      const double fd = (lp - lm) / (2 * eps);
      update(adj[k], fd);
    }
  }
  tape.replay();
  return worst;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("adjoints of every primitive match finite differences") {
  Rng rng(42);

  SUBCASE("complex FIR with trainable taps") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 24));
    const int h = t.leaf_c(rand_c(rng, 5));
    ls.cleaves = {x, h};
    const int y = t.cfir(x, h, 2);
    const int loss = t.sum_sq_err_c(y, rand_c(rng, 24));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("mirrored symmetric taps") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 20));
    const int half = t.leaf_c(rand_c(rng, 3));
    ls.cleaves = {x, half};
    const int full = t.mirror_taps(half);
    const int y = t.cfir(x, full, 2);
    const int loss = t.sum_sq_err_c(y, rand_c(rng, 20));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("real-tap FIR with decimation and phase") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 37));
    const int h = t.leaf_r(rand_r(rng, 9));
    ls.cleaves = {x};
    ls.rleaves = {h};
    const int y = t.rtap_fir(x, h, 3, 2, 4, 11);
    const int loss = t.sum_sq_err_c(y, rand_c(rng, 11));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("zero-stuffing interpolation FIR") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 13));
    const int h = t.leaf_r(rand_r(rng, 9));
    ls.cleaves = {x};
    ls.rleaves = {h};
    const int y = t.rtap_fir_interp(x, h, 3, 4);
    const int loss = t.sum_sq_err_c(y, rand_c(rng, 39));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("modulation and delay") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 18));
    ls.cleaves = {x};
    std::vector<cplx> table(6);
    for (int r = 0; r < 6; ++r) table[static_cast<std::size_t>(r)] = std::polar(1.0, kTwoPi * r / 6.0);
    const int y = t.modulate(x, table, 4);
    const int z = t.delay(y, 3);
    const int loss = t.sum_sq_err_c(z, rand_c(rng, 18));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("magnitude square and rotation") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 15));
    const int b = t.leaf_r(rand_r(rng, 15));
    ls.cleaves = {x};
    ls.rleaves = {b};
    const int a = t.abs2(x);
    const int y = t.rotate(x, b);
    const int l1 = t.sum_sq_err_r(a, rand_r(rng, 15));
    const int l2 = t.sum_sq_err_c(y, rand_c(rng, 15));
    const int loss = t.add_scalars({l1, l2}, {1.0, 0.7});
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("indexed phase rotation") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 10));
    const int phi = t.leaf_r(rand_r(rng, 3));
    ls.cleaves = {x};
    ls.rleaves = {phi};
    const int y = t.rotate_idx(x, phi, 1, 0.3);
    const int loss = t.sum_sq_err_c(y, rand_c(rng, 10));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("masked MIMO row") {
    Tape t;
    LeafSet ls;
    const int s = 3, taps = 3;
    std::vector<int> cols;
    for (int j = 0; j < s; ++j) cols.push_back(t.leaf_r(rand_r(rng, 21)));
    const int g = t.leaf_r(rand_r(rng, static_cast<std::size_t>(s * s * taps)));
    ls.rleaves = cols;
    ls.rleaves.push_back(g);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(s * s * taps), 1);
    mask[4] = 0;
    mask[11] = 0;
    std::vector<int> rows;
    std::vector<int> losses;
    std::vector<double> wts;
    for (int row = 0; row < s; ++row) {
      const int y = t.mimo_row(cols, g, row, taps, 1, mask);
      losses.push_back(t.sum_sq_err_r(y, rand_r(rng, 21)));
      wts.push_back(1.0 + 0.1 * row);
    }
    const int loss = t.add_scalars(losses, wts);
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
    // Masked entries receive exactly zero gradient.
    t.backward(loss);
    CHECK(t.radj(g)[4] == 0.0);
    CHECK(t.radj(g)[11] == 0.0);
  }

  SUBCASE("aligned mse, gradient exact through the alignment optimum") {
    Tape t;
    LeafSet ls;
    const int x = t.leaf_c(rand_c(rng, 32));
    ls.cleaves = {x};
    const int loss = t.aligned_mse(x, rand_c(rng, 24), 4);
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("sum of branches") {
    Tape t;
    LeafSet ls;
    const int a = t.leaf_c(rand_c(rng, 12));
    const int b = t.leaf_c(rand_c(rng, 12));
    const int c = t.leaf_c(rand_c(rng, 12));
    ls.cleaves = {a, b, c};
    const int y = t.sum_c({a, b, c});
    const int loss = t.sum_sq_err_c(y, rand_c(rng, 12));
    CHECK(max_rel_grad_err(t, loss, ls) < 1e-6);
  }

  SUBCASE("masked L1 with sign subgradient") {
    Tape t;
    LeafSet ls;
    std::vector<double> g = rand_r(rng, 16);
    g[3] = 0.0;  // subgradient at zero must be zero
    const int gid = t.leaf_r(g);
    ls.rleaves = {gid};
    std::vector<std::uint8_t> mask(16, 1);
    mask[7] = 0;
    const int loss = t.l1_masked(gid, mask, 0.37);
    t.backward(loss);
    for (std::size_t k = 0; k < 16; ++k) {
      double want = 0.0;
      if (mask[k] && g[k] != 0.0) want = g[k] > 0 ? 0.37 : -0.37;
      CHECK(t.radj(gid)[k] == doctest::Approx(want));
    }
  }
}

TEST_CASE("tape replay reproduces the recorded loss bit for bit") {
  Rng rng(5);
  Tape t;
  const int x = t.leaf_c(rand_c(rng, 64));
  const int h = t.leaf_r(rand_r(rng, 7));
  const int y = t.rtap_fir(x, h, 2, 1, 3, 30);
  const int a = t.abs2(y);
  const int b = t.mimo_row({a}, t.leaf_r(rand_r(rng, 3)), 0, 3, 1, {1, 1, 1});
  const int z = t.rotate(y, b);
  const int loss = t.aligned_mse(z, rand_c(rng, 22), 4);
  const double l0 = t.scalar(loss);
  t.replay();
  CHECK(t.scalar(loss) == l0);
  t.backward(loss);
  t.replay();
  CHECK(t.scalar(loss) == l0);
}

TEST_CASE("full micro-graph gradient matches finite differences everywhere") {
  // Small but complete configuration: every parameter segment participates.
  FilterBankSpec bank = make_filter_bank(4, 2, 1, 8e9, 0.45, 17);
  const DeltaResult d = compute_delta(4, 2, 1.0 / 8e9, -21.7);
  StepPlan plan = plan_steps(2.3 * d.delta_km, d.delta_km, 1);
  REQUIRE(plan.total_steps() == 3);  // two locked steps plus a residual
  DbpInitOptions opt;
  opt.cd_half_len = 2;
  opt.mimo_factors = 2;
  opt.mimo_init_scale = 0.05;
  opt.seed = 3;
  DbpParams params = init_dbp_params(bank, plan, -21.7, opt);

  SignalSpec spec;
  spec.baud_hz = 4e9;
  spec.oversampling = 2;
  spec.rolloff = 0.1;
  spec.n_symbols = 64;
  spec.seed = 5;
  const SymbolSequence syms = generate_symbols(spec);
  const auto taps = rrc_taps(0.1, 8, 2);
  GraphWindow w;
  w.rx = pulse_shape(syms, taps, 2, 0.0).samples;
  w.tx_symbols = syms.symbols;
  GraphConfig gcfg;
  gcfg.plan = &plan;
  gcfg.beta2_ps2_per_km = -21.7;
  gcfg.matched_taps = &taps;
  gcfg.oversampling = 2;
  gcfg.guard_symbols = 12;
  gcfg.l1_lambda = 1e-3;

  // The L1 node lives on the tape, so its subgradient arrives with the
  // leaf adjoints.
  LossGraph g = build_loss_graph(params, w, gcfg);
  g.tape.backward(g.loss);
  ParamVector grad = flatten_params(params);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  accumulate_leaf_gradients(g, params, &grad);

  ParamVector flat = flatten_params(params);
  const double eps = 1e-5;
  double worst = 0.0;
  std::string worst_seg;
  for (const auto& seg : flat.segments) {
    for (std::size_t k = seg.offset; k < seg.offset + seg.size; ++k) {
      DbpParams pp = params;
      ParamVector f2 = flat;
      f2.data[k] += eps;
      unflatten_params(f2, &pp);
      LossGraph gp = build_loss_graph(pp, w, gcfg);
      const double lp = gp.tape.scalar(gp.loss);
      f2.data[k] -= 2 * eps;
      unflatten_params(f2, &pp);
      LossGraph gm = build_loss_graph(pp, w, gcfg);
      const double lm = gm.tape.scalar(gm.loss);
      const double fd = (lp - lm) / (2 * eps);
      const double scale = std::max({std::abs(fd), std::abs(grad.data[k]), 1e-6});
      const double err = std::abs(fd - grad.data[k]) / scale;
      if (err > worst) {
        worst = err;
        worst_seg = seg.name;
      }
    }
  }
  INFO("worst segment: ", worst_seg);
  CHECK(worst < 1e-4);
}

TEST_CASE("ideal loopback with an identity engine has near-zero loss") {
  FilterBankSpec bank;
  bank.n_subbands = 1;
  bank.downsample = 1;
  bank.half_width = 0;
  bank.base_rate_hz = 64e9;
  bank.analysis_taps = {1.0};
  bank.synthesis_taps = {1.0};
  StepPlan plan;
  plan.delta_km = 50.0;
  DbpParams params = init_dbp_params(bank, plan, -21.7, DbpInitOptions{});

  // Exact loopback: zero-stuffed symbols through an identity pipeline with a
  // one-tap "matched filter" reproduce the symbol stream bit for bit.
  SignalSpec spec;
  spec.baud_hz = 32e9;
  spec.oversampling = 2;
  spec.rolloff = 0.1;
  spec.n_symbols = 1024;
  spec.seed = 9;
  const SymbolSequence syms = generate_symbols(spec);
  GraphWindow w;
  w.rx.assign(2048, cplx(0, 0));
  for (std::size_t m = 0; m < 1024; ++m) w.rx[2 * m] = syms.symbols[m];
  w.tx_symbols = syms.symbols;
  const std::vector<double> taps = {1.0};
  GraphConfig gcfg;
  gcfg.plan = &plan;
  gcfg.beta2_ps2_per_km = -21.7;
  gcfg.matched_taps = &taps;
  gcfg.oversampling = 2;
  gcfg.guard_symbols = 64;
  gcfg.l1_lambda = 0.0;

  LossGraph g = build_loss_graph(params, w, gcfg);
  CHECK(g.tape.scalar(g.loss) < 1e-6);

  // Zero-loss configurations are stationary points of the MSE.
  g.tape.backward(g.loss);
  ParamVector grad = flatten_params(params);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  accumulate_leaf_gradients(g, params, &grad);
  double norm = 0;
  for (double v : grad.data) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("regularizer isolates on a zero-signal batch") {
  FilterBankSpec bank = make_filter_bank(4, 2, 1, 8e9, 0.45, 17);
  const DeltaResult d = compute_delta(4, 2, 1.0 / 8e9, -21.7);
  StepPlan plan = plan_steps(2 * d.delta_km, d.delta_km, 1);
  DbpInitOptions opt;
  opt.cd_half_len = 2;
  opt.mimo_factors = 2;
  opt.seed = 4;
  DbpParams params = init_dbp_params(bank, plan, -21.7, opt);

  GraphWindow w;
  w.rx.assign(256, cplx(0, 0));
  const SignalSpec spec{4e9, 2, 0.1, 0.0, 128, 1};
  w.tx_symbols.assign(128, cplx(0, 0));
  w.tx_symbols[40] = cplx(1, 0);  // keep the reference nonzero
  const auto taps = rrc_taps(0.1, 8, 2);
  GraphConfig gcfg;
  gcfg.plan = &plan;
  gcfg.beta2_ps2_per_km = -21.7;
  gcfg.matched_taps = &taps;
  gcfg.oversampling = 2;
  gcfg.guard_symbols = 12;
  gcfg.l1_lambda = 0.01;
  (void)spec;

  LossGraph g = build_loss_graph(params, w, gcfg);
  double sum_abs = 0;
  for (const auto& mf : params.mimo)
    for (const auto& fac : mf.g)
      for (double v : fac) sum_abs += std::abs(v);
  // Zero rx drives the MSE part to the reference energy; the L1 node must
  // equal λ·Σ|g| exactly.
  CHECK(g.tape.scalar(g.l1) == doctest::Approx(0.01 * sum_abs).epsilon(1e-12));
  CHECK(l1_value(params, 0.01) == doctest::Approx(0.01 * sum_abs).epsilon(1e-12));
}

TEST_CASE("adam update properties") {
  std::vector<double> p = {1.0, -2.0, 0.5};
  AdamState st = make_adam_state(3, 1e-2);

  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> p2 = p;
    adam_step(st, p2, {0.0, 0.0, 0.0});
    for (std::size_t k = 0; k < 3; ++k) CHECK(p2[k] == p[k]);
  }

  SUBCASE("first step moves by about -lr*sign(g)") {
    std::vector<double> p2 = p;
    adam_step(st, p2, {3.0, -0.7, 1e-3});
    CHECK(p2[0] == doctest::Approx(p[0] - 1e-2).epsilon(1e-4));
    CHECK(p2[1] == doctest::Approx(p[1] + 1e-2).epsilon(1e-4));
    CHECK(p2[2] < p[2]);
  }

  SUBCASE("identical state and gradients give identical results") {
    std::vector<double> pa = p, pb = p;
    AdamState sa = make_adam_state(3, 1e-3), sb = make_adam_state(3, 1e-3);
    for (int it = 0; it < 10; ++it) {
      const std::vector<double> g = {0.1 * it, -0.2, 0.05};
      adam_step(sa, pa, g);
      adam_step(sb, pb, g);
    }
    for (std::size_t k = 0; k < 3; ++k) CHECK(pa[k] == pb[k]);
  }
}

TEST_CASE("flatten and unflatten round trip the parameters") {
  FilterBankSpec bank = make_filter_bank(8, 4, 2, 32e9, 0.45, 33);
  const DeltaResult d = compute_delta(8, 4, 1.0 / 32e9, -21.7);
  StepPlan plan = plan_steps(3.7 * d.delta_km, d.delta_km, 1);
  DbpInitOptions opt;
  opt.cd_half_len = 3;
  opt.mimo_factors = 2;
  opt.seed = 11;
  DbpParams params = init_dbp_params(bank, plan, -21.7, opt);

  const ParamVector v = flatten_params(params);
  DbpParams copy = params;
  for (auto& t : copy.bank.analysis_taps) t = 0;
  for (auto& f : copy.cd)
    for (auto& t : f.taps) t = 0;
  unflatten_params(v, &copy);
  const ParamVector v2 = flatten_params(copy);
  REQUIRE(v.data.size() == v2.data.size());
  for (std::size_t k = 0; k < v.data.size(); ++k) CHECK(v.data[k] == v2.data[k]);
  // Segment names unique
  for (std::size_t i = 0; i < v.segments.size(); ++i)
    for (std::size_t j = i + 1; j < v.segments.size(); ++j)
      CHECK(v.segments[i].name != v.segments[j].name);
}

TEST_SUITE_END();
