// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/params.hpp"

#include <cmath>
#include <cstdio>

namespace sbdbp {
namespace {

std::string step_name(const char* prefix, int idx) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, idx);
  return buf;
}

}  // namespace

const SegmentInfo& ParamVector::find(const std::string& name) const {
  for (const auto& s : segments) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown parameter segment: " + name);
}

ParamVector flatten_params(const DbpParams& p) {
  ParamVector v;
  auto add = [&v](const std::string& name, std::size_t n) {
    v.segments.push_back({name, v.data.size(), n});
    v.data.resize(v.data.size() + n, 0.0);
    return v.data.size() - n;
  };

  {
    std::size_t off = add("proto/analysis", p.bank.analysis_taps.size());
    std::copy(p.bank.analysis_taps.begin(), p.bank.analysis_taps.end(), v.data.begin() + off);
  }
  {
    std::size_t off = add("proto/synthesis", p.bank.synthesis_taps.size());
    std::copy(p.bank.synthesis_taps.begin(), p.bank.synthesis_taps.end(), v.data.begin() + off);
  }
  for (std::size_t l = 0; l < p.cd.size(); ++l) {
    const int L = p.cd[l].half_len();
    std::size_t off = add(step_name("cd/", static_cast<int>(l)), 2 * (L + 1));
    for (int k = 0; k <= L; ++k) {
      const cplx t = p.cd[l].taps[static_cast<std::size_t>(L + k)];
      v.data[off + 2 * static_cast<std::size_t>(k)] = t.real();
      v.data[off + 2 * static_cast<std::size_t>(k) + 1] = t.imag();
    }
  }
  for (std::size_t l = 0; l < p.mimo.size(); ++l) {
    for (int f = 0; f < p.mimo[l].n_factors; ++f) {
      const auto& g = p.mimo[l].g[static_cast<std::size_t>(f)];
      std::size_t off = add(step_name("mimo/", static_cast<int>(l)) + "/f" + std::to_string(f), g.size());
      std::copy(g.begin(), g.end(), v.data.begin() + off);
    }
  }
  for (std::size_t i = 0; i < p.fd_taps.size(); ++i) {
    std::size_t off = add(step_name("fd/", static_cast<int>(i)), p.fd_taps[i].size());
    std::copy(p.fd_taps[i].begin(), p.fd_taps[i].end(), v.data.begin() + off);
  }
  {
    std::size_t off = add("phi", p.phi.size());
    std::copy(p.phi.begin(), p.phi.end(), v.data.begin() + off);
  }
  return v;
}

void unflatten_params(const ParamVector& v, DbpParams* p) {
  auto read = [&v](const std::string& name, std::size_t n) {
    const SegmentInfo& s = v.find(name);
    if (s.size != n) throw std::invalid_argument("segment size mismatch: " + name);
    return v.data.begin() + static_cast<std::ptrdiff_t>(s.offset);
  };

  std::copy_n(read("proto/analysis", p->bank.analysis_taps.size()),
              p->bank.analysis_taps.size(), p->bank.analysis_taps.begin());
  std::copy_n(read("proto/synthesis", p->bank.synthesis_taps.size()),
              p->bank.synthesis_taps.size(), p->bank.synthesis_taps.begin());
  for (std::size_t l = 0; l < p->cd.size(); ++l) {
    const int L = p->cd[l].half_len();
    auto it = read(step_name("cd/", static_cast<int>(l)), 2 * static_cast<std::size_t>(L + 1));
    for (int k = 0; k <= L; ++k) {
      const cplx t(*(it + 2 * k), *(it + 2 * k + 1));
      p->cd[l].taps[static_cast<std::size_t>(L + k)] = t;
      p->cd[l].taps[static_cast<std::size_t>(L - k)] = t;
    }
  }
  for (std::size_t l = 0; l < p->mimo.size(); ++l) {
    for (int f = 0; f < p->mimo[l].n_factors; ++f) {
      auto& g = p->mimo[l].g[static_cast<std::size_t>(f)];
      auto it = read(step_name("mimo/", static_cast<int>(l)) + "/f" + std::to_string(f), g.size());
      std::copy_n(it, g.size(), g.begin());
    }
  }
  for (std::size_t i = 0; i < p->fd_taps.size(); ++i) {
    auto it = read(step_name("fd/", static_cast<int>(i)), p->fd_taps[i].size());
    std::copy_n(it, p->fd_taps[i].size(), p->fd_taps[i].begin());
  }
  {
    auto it = read("phi", p->phi.size());
    std::copy_n(it, p->phi.size(), p->phi.begin());
  }
}

AdamState make_adam_state(std::size_t n_params, double lr) {
  AdamState s;
  s.m.assign(n_params, 0.0);
  s.v.assign(n_params, 0.0);
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
    const double mh = state.m[k] / bc1;
    const double vh = state.v[k] / bc2;
    params[k] -= state.lr * mh / (std::sqrt(vh) + state.eps);
  }
}

}  // namespace sbdbp
