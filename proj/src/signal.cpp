// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/signal.hpp"

#include <algorithm>
#include <cmath>

#include "sbdbp/rng.hpp"

namespace sbdbp {

void ComplexSignal::validate() const {
  if (sample_rate_hz <= 0.0) throw std::invalid_argument("sample_rate must be > 0");
  if (t0_offset < 0) throw std::invalid_argument("t0_offset must be >= 0");
  for (const cplx& v : samples) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument("signal contains non-finite samples");
  }
}

void SignalSpec::validate() const {
  if (baud_hz <= 0.0) throw std::invalid_argument("baud must be > 0");
  if (oversampling < 2) throw std::invalid_argument("oversampling must be >= 2");
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("rolloff must be in [0,1]");
  if (n_symbols <= 0) throw std::invalid_argument("n_symbols must be > 0");
}

SymbolSequence generate_symbols(const SignalSpec& spec) {
  spec.validate();
  SymbolSequence out;
  out.baud_hz = spec.baud_hz;
  out.seed = spec.seed;
  out.symbols.resize(static_cast<std::size_t>(spec.n_symbols));
  Rng rng(spec.seed);
  for (cplx& s : out.symbols) s = rng.cnormal();
  return out;
}

SymbolSequence generate_qam_symbols(const SignalSpec& spec, int order) {
  spec.validate();
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
  if (side * side != order || side < 2)
    throw std::invalid_argument("QAM order must be a square >= 4");
  // Unit average energy: levels +-1, +-3, ... scaled by sqrt(3/(2(order-1))).
  const double scale = std::sqrt(1.5 / static_cast<double>(order - 1));
  SymbolSequence out;
  out.baud_hz = spec.baud_hz;
  out.seed = spec.seed;
  out.symbols.resize(static_cast<std::size_t>(spec.n_symbols));
  Rng rng(spec.seed);
  for (cplx& s : out.symbols) {
    int i = static_cast<int>(rng.uniform() * side);
    int q = static_cast<int>(rng.uniform() * side);
    i = std::min(i, side - 1);
    q = std::min(q, side - 1);
    s = cplx(scale * (2 * i - side + 1), scale * (2 * q - side + 1));
  }
  return out;
}

std::vector<double> rrc_taps(double rolloff, int span_symbols, int oversampling) {
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("rolloff must be in [0,1]");
  if (span_symbols < 2) throw std::invalid_argument("span_symbols must be >= 2");
  if (oversampling < 1) throw std::invalid_argument("oversampling must be >= 1");

  const int n = span_symbols * oversampling + 1;
  const int c = (n - 1) / 2;
  std::vector<double> h(static_cast<std::size_t>(n));
  const double b = rolloff;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k - c) / oversampling;  // in symbol periods
    double v;
    if (std::abs(t) < 1e-12) {
      v = 1.0 + b * (4.0 / kPi - 1.0);
    } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
      v = (b / std::sqrt(2.0)) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) +
           (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
      const double den = kPi * t * (1.0 - std::pow(4.0 * b * t, 2));
      v = num / den;
    }
    h[static_cast<std::size_t>(k)] = v;
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  const double s = 1.0 / std::sqrt(e);
  for (double& v : h) v *= s;
  return h;
}

ComplexSignal pulse_shape(const SymbolSequence& symbols, const std::vector<double>& taps,
                          int oversampling, double power_dbm) {
  if (taps.empty() || taps.size() % 2 == 0)
    throw std::invalid_argument("taps must be odd-length");
  const std::int64_t n_sym = static_cast<std::int64_t>(symbols.symbols.size());
  const std::int64_t len = n_sym * oversampling;
  const int c = static_cast<int>(taps.size() - 1) / 2;

  // Unit-energy taps on unit-energy symbols give mean power 1/oversampling;
  // scale to the requested launch power.
  const double gain = std::sqrt(dbm_to_watt(power_dbm) * oversampling);

  ComplexSignal out;
  out.sample_rate_hz = symbols.baud_hz * oversampling;
  out.samples.assign(static_cast<std::size_t>(len), cplx(0.0, 0.0));
  // out[k] = sum_m taps[m] * up[k - (m - c)], up[j] = symbols[j/os] when os | j.
  for (std::int64_t s = 0; s < n_sym; ++s) {
    const cplx v = symbols.symbols[static_cast<std::size_t>(s)] * gain;
    const std::int64_t base = s * oversampling + c;
    const std::int64_t m_lo = std::max<std::int64_t>(0, base - len + 1);
    const std::int64_t m_hi = std::min<std::int64_t>(static_cast<std::int64_t>(taps.size()) - 1, base);
    for (std::int64_t m = m_lo; m <= m_hi; ++m) {
      out.samples[static_cast<std::size_t>(base - m)] += taps[static_cast<std::size_t>(m)] * v;
    }
  }
  return out;
}

SymbolSequence matched_filter_downsample(const ComplexSignal& signal,
                                         const std::vector<double>& taps, int oversampling,
                                         std::int64_t delay_samples) {
  if (taps.empty() || taps.size() % 2 == 0)
    throw std::invalid_argument("taps must be odd-length");
  const std::int64_t len = static_cast<std::int64_t>(signal.samples.size());
  if (delay_samples < 0 || delay_samples >= len)
    throw std::invalid_argument("delay_samples out of range");
  const int c = static_cast<int>(taps.size() - 1) / 2;
  const std::int64_t n_out = (len - delay_samples) / oversampling;

  SymbolSequence out;
  out.baud_hz = signal.sample_rate_hz / oversampling;
  out.symbols.assign(static_cast<std::size_t>(n_out), cplx(0.0, 0.0));
  for (std::int64_t m = 0; m < n_out; ++m) {
    const std::int64_t center = m * oversampling + delay_samples;
    cplx acc(0.0, 0.0);
    for (int k = 0; k < static_cast<int>(taps.size()); ++k) {
      const std::int64_t idx = center - (k - c);
      if (idx >= 0 && idx < len)
        acc += taps[static_cast<std::size_t>(k)] * signal.samples[static_cast<std::size_t>(idx)];
    }
    out.symbols[static_cast<std::size_t>(m)] = acc;
  }
  return out;
}

cplx ls_align_scalar(const std::vector<cplx>& tx, const std::vector<cplx>& rx) {
  cplx num(0.0, 0.0);
  double den = 0.0;
  for (std::size_t k = 0; k < tx.size(); ++k) {
    num += std::conj(rx[k]) * tx[k];
    den += std::norm(rx[k]);
  }
  if (den == 0.0) throw std::invalid_argument("all-zero rx");
  return num / den;
}

double align_and_snr(const SymbolSequence& tx, const SymbolSequence& rx, std::int64_t guard) {
  if (tx.symbols.size() != rx.symbols.size())
    throw std::invalid_argument("length mismatch");
  const std::int64_t n = static_cast<std::int64_t>(tx.symbols.size());
  if (n - 2 * guard < 2) throw std::invalid_argument("guard too large");

  std::vector<cplx> t(tx.symbols.begin() + guard, tx.symbols.end() - guard);
  std::vector<cplx> r(rx.symbols.begin() + guard, rx.symbols.end() - guard);
  const cplx a = ls_align_scalar(t, r);

  double e_sig = 0.0, e_err = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    e_sig += std::norm(t[k]);
    e_err += std::norm(a * r[k] - t[k]);
  }
  if (e_sig <= 0.0) throw std::invalid_argument("all-zero tx");
  if (e_err <= e_sig * 1e-15) return 150.0;
  return 10.0 * std::log10(e_sig / e_err);
}

}  // namespace sbdbp
