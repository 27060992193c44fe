// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace sbdbp::fft {
namespace {

struct PlanCache {
  std::mutex mu;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans;

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    // Plan in-place on a scratch buffer; FFTW_UNALIGNED lets the plan be
    // executed later on arbitrary user buffers via the new-array interface.
    fftw_complex* buf = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (!p) throw std::runtime_error("fftw planning failed");
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void execute(std::vector<cplx>& x, int sign) {
  if (x.empty()) return;
  fftw_plan p = cache().get(x.size(), sign);
  auto* d = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(p, d, d);
}

}  // namespace

void forward(std::vector<cplx>& x) { execute(x, FFTW_FORWARD); }

void inverse(std::vector<cplx>& x) {
  execute(x, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(x.size());
  for (cplx& v : x) v *= s;
}

std::vector<double> omega_grid(std::size_t n, double sample_rate_hz) {
  std::vector<double> w(n);
  const double dw = kTwoPi * sample_rate_hz / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    double idx = (k < (n + 1) / 2) ? static_cast<double>(k)
                                   : static_cast<double>(k) - static_cast<double>(n);
    w[k] = dw * idx;
  }
  return w;
}

}  // namespace sbdbp::fft
