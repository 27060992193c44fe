// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/filterbank.hpp"

#include <cmath>

#include "sbdbp/linalg.hpp"

namespace sbdbp {

void FilterBankSpec::validate() const {
  if (n_subbands < 1) throw std::invalid_argument("n_subbands must be >= 1");
  if (downsample < 1 || downsample > n_subbands ||
      (downsample == n_subbands && n_subbands > 1))
    throw std::invalid_argument("bank must be oversampled (K < N)");
  if (active_count() > n_subbands) throw std::invalid_argument("2S+1 must be <= N");
  if (base_rate_hz <= 0.0) throw std::invalid_argument("base_rate must be > 0");
  if (analysis_taps.empty() || analysis_taps.size() % 2 == 0 ||
      synthesis_taps.empty() || synthesis_taps.size() % 2 == 0)
    throw std::invalid_argument("prototype taps must be odd-length");
}

void SubbandSet::validate() const {
  if (static_cast<int>(bands.size()) != active_count())
    throw std::invalid_argument("subband count mismatch");
  for (const auto& b : bands) {
    if (b.size() != bands.front().size())
      throw std::invalid_argument("subband lengths differ");
  }
}

double raised_cosine_response(double f_norm, int n_subbands, double rolloff) {
  const double fc = 0.5 / n_subbands;
  const double f = std::abs(f_norm);
  const double f1 = (1.0 - rolloff) * fc;
  const double f2 = (1.0 + rolloff) * fc;
  if (f <= f1) return 1.0;
  if (f >= f2) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (f - f1) / (f2 - f1)));
}

std::vector<double> design_prototype(int n_subbands, int downsample, double rolloff, int length) {
  if (length < 3 || length % 2 == 0)
    throw std::invalid_argument("prototype length must be odd and >= 3");
  if (rolloff < 0.0) throw std::invalid_argument("rolloff must be >= 0");
  const double edge = (1.0 + rolloff) * 0.5 / n_subbands;      // one-sided band edge · T
  const double nyq_sub = 0.5 / downsample;                     // 1/(2KT) · T
  if (edge > nyq_sub + 1e-12) {
    throw std::invalid_argument(
        "prototype rolloff violates the alias condition: (1+rolloff)/(2N) = " +
        std::to_string(edge) + " exceeds 1/(2K) = " + std::to_string(nyq_sub) +
        "; maximum admissible rolloff is N/K - 1");
  }

  // Weighted least squares against the square-root raised-cosine target on a
  // dense grid, symmetric taps (cosine basis). Stopband errors are weighted
  // up so truncation leakage lands below -40 dB.
  const int half = (length - 1) / 2;
  const int n_free = half + 1;
  const int n_grid = 16 * length;
  const double stop_from = edge + 2.0 / length;  // short don't-care gap past the edge
  std::vector<double> gram(static_cast<std::size_t>(n_free) * n_free, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(n_free), 0.0);
  std::vector<double> basis(static_cast<std::size_t>(n_free), 0.0);
  for (int g = 0; g < n_grid; ++g) {
    const double f = 0.5 * g / (n_grid - 1);  // symmetric response: cover [0, 1/2]
    const double target = std::sqrt(raised_cosine_response(f, n_subbands, rolloff));
    double w = 1.0;
    if (f > stop_from) w = 50.0;
    basis[0] = 1.0;
    for (int k = 1; k < n_free; ++k) basis[static_cast<std::size_t>(k)] = 2.0 * std::cos(kTwoPi * f * k);
    for (int r = 0; r < n_free; ++r) {
      rhs[static_cast<std::size_t>(r)] += w * basis[static_cast<std::size_t>(r)] * target;
      for (int cidx = r; cidx < n_free; ++cidx)
        gram[static_cast<std::size_t>(r) * n_free + cidx] += w * basis[static_cast<std::size_t>(r)] * basis[static_cast<std::size_t>(cidx)];
    }
  }
  for (int r = 0; r < n_free; ++r)
    for (int cidx = 0; cidx < r; ++cidx)
      gram[static_cast<std::size_t>(r) * n_free + cidx] = gram[static_cast<std::size_t>(cidx) * n_free + r];

  const std::vector<double> coef = solve_dense(gram, rhs, n_free);
  std::vector<double> taps(static_cast<std::size_t>(length), 0.0);
  taps[static_cast<std::size_t>(half)] = coef[0];
  for (int k = 1; k <= half; ++k) {
    taps[static_cast<std::size_t>(half + k)] = coef[static_cast<std::size_t>(k)];
    taps[static_cast<std::size_t>(half - k)] = coef[static_cast<std::size_t>(k)];
  }
  double dc = 0.0;
  for (double t : taps) dc += t;
  for (double& t : taps) t /= dc;
  return taps;
}

FilterBankSpec make_filter_bank(int n_subbands, int downsample, int half_width,
                                double base_rate_hz, double proto_rolloff, int proto_length) {
  FilterBankSpec spec;
  spec.n_subbands = n_subbands;
  spec.downsample = downsample;
  spec.half_width = half_width;
  spec.base_rate_hz = base_rate_hz;
  spec.analysis_taps = design_prototype(n_subbands, downsample, proto_rolloff, proto_length);
  spec.synthesis_taps = spec.analysis_taps;
  for (double& t : spec.synthesis_taps) t *= downsample;
  spec.validate();
  return spec;
}

SubbandSet analyze(const ComplexSignal& u, const FilterBankSpec& spec, std::int64_t k0) {
  spec.validate();
  const int N = spec.n_subbands;
  const int K = spec.downsample;
  const int S = spec.half_width;
  const auto& h = spec.analysis_taps;
  const int c = static_cast<int>(h.size() - 1) / 2;
  const std::int64_t len = static_cast<std::int64_t>(u.samples.size());
  const std::int64_t n_out = (len + K - 1) / K;

  SubbandSet out;
  out.half_width = S;
  out.n_subbands = N;
  out.downsample = K;
  out.base_rate_hz = u.sample_rate_hz;
  out.k0 = k0;
  out.t0_offset = u.t0_offset / K;
  out.bands.assign(static_cast<std::size_t>(2 * S + 1), {});

  // Downconversion phasors have period N in the absolute sample index.
  for (int i = -S; i <= S; ++i) {
    std::vector<cplx> ph(static_cast<std::size_t>(N));
    for (int r = 0; r < N; ++r)
      ph[static_cast<std::size_t>(r)] = std::polar(1.0, -kTwoPi * i * r / static_cast<double>(N));

    std::vector<cplx>& d = out.band(i);
    d.assign(static_cast<std::size_t>(n_out), cplx(0.0, 0.0));
    for (std::int64_t n = 0; n < n_out; ++n) {
      cplx acc(0.0, 0.0);
      const std::int64_t center = n * K;
      const std::int64_t k_lo = std::max<std::int64_t>(0, center - c);
      const std::int64_t k_hi = std::min<std::int64_t>(len - 1, center + c);
      for (std::int64_t k = k_lo; k <= k_hi; ++k) {
        const std::int64_t m = center - k + c;  // tap index
        const std::int64_t abs_k = ((k0 + k) % N + N) % N;
        acc += h[static_cast<std::size_t>(m)] * u.samples[static_cast<std::size_t>(k)] *
               ph[static_cast<std::size_t>(abs_k)];
      }
      d[static_cast<std::size_t>(n)] = acc;
    }
  }
  return out;
}

ComplexSignal synthesize(const SubbandSet& subbands, const FilterBankSpec& spec) {
  spec.validate();
  subbands.validate();
  const int N = spec.n_subbands;
  const int K = spec.downsample;
  const int S = subbands.half_width;
  const auto& g = spec.synthesis_taps;
  const int c = static_cast<int>(g.size() - 1) / 2;
  const std::int64_t n_sub = static_cast<std::int64_t>(subbands.bands.front().size());
  const std::int64_t len = n_sub * K;

  ComplexSignal out;
  out.sample_rate_hz = subbands.base_rate_hz;
  out.t0_offset = subbands.t0_offset * K;
  out.samples.assign(static_cast<std::size_t>(len), cplx(0.0, 0.0));

  for (int i = -S; i <= S; ++i) {
    std::vector<cplx> ph(static_cast<std::size_t>(N));
    for (int r = 0; r < N; ++r)
      ph[static_cast<std::size_t>(r)] = std::polar(1.0, kTwoPi * i * r / static_cast<double>(N));

    const std::vector<cplx>& d = subbands.band(i);
    for (std::int64_t k = 0; k < len; ++k) {
      // Taps m with (k + c - m) divisible by K hit nonzero upsampled samples.
      cplx acc(0.0, 0.0);
      const std::int64_t kc = k + c;
      std::int64_t m0 = kc % K;
      for (std::int64_t m = m0; m < static_cast<std::int64_t>(g.size()); m += K) {
        const std::int64_t n = (kc - m) / K;
        if (n >= 0 && n < n_sub)
          acc += g[static_cast<std::size_t>(m)] * d[static_cast<std::size_t>(n)];
      }
      const std::int64_t abs_k = ((subbands.k0 + k) % N + N) % N;
      out.samples[static_cast<std::size_t>(k)] += acc * ph[static_cast<std::size_t>(abs_k)];
    }
  }
  return out;
}

}  // namespace sbdbp
