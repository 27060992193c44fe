// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/channel.hpp"

#include <cmath>
#include <cstdio>

#include "sbdbp/fft.hpp"
#include "sbdbp/rng.hpp"

namespace sbdbp {
namespace {

constexpr double kPs2PerKmToS2PerKm = 1e-24;  // ps² -> s²

// Spectral phase coefficient in s²: κ = (β₂/2)ξ.
double kappa_s2(double xi_km, double beta2_ps2_per_km) {
  return 0.5 * beta2_ps2_per_km * kPs2PerKmToS2PerKm * xi_km;
}

void apply_quadratic_phase(std::vector<cplx>& spec, const std::vector<double>& omega,
                           double kappa, double omega_center) {
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double w = omega[k] + omega_center;
    spec[k] *= std::polar(1.0, kappa * w * w);
  }
}

}  // namespace

void FiberParams::validate() const {
  if (alpha_db_per_km < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (span_km <= 0.0) throw std::invalid_argument("span_km must be > 0");
  if (n_spans < 1) throw std::invalid_argument("n_spans must be >= 1");
}

void StepGrid::validate(double span_km) const {
  if (boundaries_km.size() < 2) throw std::invalid_argument("step grid needs >= 2 boundaries");
  if (boundaries_km.front() != 0.0) throw std::invalid_argument("grid must start at 0");
  if (std::abs(boundaries_km.back() - span_km) > 1e-9 * std::max(1.0, span_km))
    throw std::invalid_argument("grid must end at span_km");
  for (std::size_t k = 1; k < boundaries_km.size(); ++k) {
    if (boundaries_km[k] <= boundaries_km[k - 1])
      throw std::invalid_argument("grid boundaries must be strictly increasing");
  }
}

StepGrid log_step_grid(double span_km, int n_steps, double alpha_db_per_km) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  StepGrid g;
  const double a = alpha_linear_per_km(alpha_db_per_km);
  g.scheme = (a < 1e-12) ? StepScheme::kUniform : StepScheme::kLogarithmic;
  g.boundaries_km.resize(static_cast<std::size_t>(n_steps) + 1);
  if (g.scheme == StepScheme::kUniform) {
    for (int k = 0; k <= n_steps; ++k)
      g.boundaries_km[static_cast<std::size_t>(k)] = span_km * k / n_steps;
  } else {
    const double drop = 1.0 - std::exp(-a * span_km);
    for (int k = 0; k <= n_steps; ++k) {
      const double frac = static_cast<double>(k) / n_steps;
      g.boundaries_km[static_cast<std::size_t>(k)] = -std::log(1.0 - frac * drop) / a;
    }
    g.boundaries_km.front() = 0.0;
    g.boundaries_km.back() = span_km;
  }
  return g;
}

ComplexSignal cd_exact(const ComplexSignal& in, double xi_km, double beta2_ps2_per_km, int sign) {
  if (in.samples.size() < 2) throw std::invalid_argument("signal too short");
  ComplexSignal out = in;
  fft::forward(out.samples);
  const auto omega = fft::omega_grid(out.samples.size(), out.sample_rate_hz);
  apply_quadratic_phase(out.samples, omega, sign * kappa_s2(xi_km, beta2_ps2_per_km), 0.0);
  fft::inverse(out.samples);
  return out;
}

std::vector<cplx> cd_exact_shifted(const std::vector<cplx>& band, double sample_rate_hz,
                                   double xi_km, double beta2_ps2_per_km, int sign,
                                   double omega_center_rad_s) {
  std::vector<cplx> out = band;
  fft::forward(out);
  const auto omega = fft::omega_grid(out.size(), sample_rate_hz);
  apply_quadratic_phase(out, omega, sign * kappa_s2(xi_km, beta2_ps2_per_km), omega_center_rad_s);
  fft::inverse(out);
  return out;
}

ComplexSignal kerr_rotate(const ComplexSignal& in, double gamma_per_w_km, double l_eff_km) {
  ComplexSignal out = in;
  const double c = gamma_per_w_km * l_eff_km;
  for (cplx& v : out.samples) v *= std::polar(1.0, c * std::norm(v));
  return out;
}

namespace {

void edfa_inplace(ComplexSignal& sig, double gain_db, double nf_db, double carrier_hz,
                  std::uint64_t seed) {
  if (gain_db < 0.0) throw std::invalid_argument("gain_db must be >= 0");
  const double g_field = std::pow(10.0, gain_db / 20.0);
  const double g_power = g_field * g_field;
  const double n_sp = 0.5 * db_to_linear(nf_db);
  const double sigma2 = n_sp * (g_power - 1.0) * kPlanckJs * carrier_hz * sig.sample_rate_hz;
  const double sigma = std::sqrt(sigma2);
  Rng rng(seed);
  for (cplx& v : sig.samples) v = v * g_field + sigma * rng.cnormal();
}

}  // namespace

ComplexSignal edfa(const ComplexSignal& in, double gain_db, double nf_db, double carrier_hz,
                   std::uint64_t seed) {
  ComplexSignal out = in;
  edfa_inplace(out, gain_db, nf_db, carrier_hz, seed);
  return out;
}

ComplexSignal ssfm_propagate(const ComplexSignal& in, const FiberParams& fiber,
                             const StepGrid& grid, const SsfmOptions& opt) {
  fiber.validate();
  grid.validate(fiber.span_km);
  if (opt.samples_per_symbol < 4 && !opt.quiet) {
    std::fprintf(stderr,
                 "ssfm_propagate: %d samples/symbol may be too few for nonlinear "
                 "spectral broadening (>= 4 recommended)\n",
                 opt.samples_per_symbol);
  }

  const std::size_t n = in.samples.size();
  const auto omega = fft::omega_grid(n, in.sample_rate_hz);
  const double a = alpha_linear_per_km(fiber.alpha_db_per_km);
  const int n_steps = grid.n_steps();

  ComplexSignal out = in;
  std::vector<cplx>& u = out.samples;
  for (int span = 0; span < fiber.n_spans; ++span) {
    for (int s = 0; s < n_steps; ++s) {
      const double dz = grid.boundaries_km[static_cast<std::size_t>(s) + 1] -
                        grid.boundaries_km[static_cast<std::size_t>(s)];
      const double half_kappa = kappa_s2(0.5 * dz, fiber.beta2_ps2_per_km);
      const double l_eff = (a < 1e-12) ? dz : (1.0 - std::exp(-a * dz)) / a;
      const double loss_field = std::exp(-0.5 * a * dz);

      fft::forward(u);
      apply_quadratic_phase(u, omega, -half_kappa, 0.0);
      fft::inverse(u);
      const double c = fiber.gamma_per_w_km * l_eff;
      for (cplx& v : u) v *= loss_field * std::polar(1.0, c * std::norm(v));
      fft::forward(u);
      apply_quadratic_phase(u, omega, -half_kappa, 0.0);
      fft::inverse(u);
    }
    if (opt.ase_noise) {
      edfa_inplace(out, fiber.span_gain_db(), fiber.nf_db, fiber.carrier_hz,
                   mix_seed(opt.noise_seed, static_cast<std::uint64_t>(span)));
    } else {
      const double g_field = std::pow(10.0, fiber.span_gain_db() / 20.0);
      for (cplx& v : u) v *= g_field;
    }
  }
  return out;
}

ComplexSignal full_dbp_baseline(const ComplexSignal& rx, const FiberParams& fiber, int stps) {
  fiber.validate();
  const StepGrid grid = log_step_grid(fiber.span_km, stps, fiber.alpha_db_per_km);
  const std::size_t n = rx.samples.size();
  const auto omega = fft::omega_grid(n, rx.sample_rate_hz);
  const double a = alpha_linear_per_km(fiber.alpha_db_per_km);
  const double g_field_inv = std::pow(10.0, -fiber.span_gain_db() / 20.0);
  const int n_steps = grid.n_steps();

  ComplexSignal out = rx;
  std::vector<cplx>& u = out.samples;
  for (int span = 0; span < fiber.n_spans; ++span) {
    for (cplx& v : u) v *= g_field_inv;
    // Traverse the span grid in reverse with negated β₂, γ and inverted loss.
    for (int s = n_steps - 1; s >= 0; --s) {
      const double dz = grid.boundaries_km[static_cast<std::size_t>(s) + 1] -
                        grid.boundaries_km[static_cast<std::size_t>(s)];
      const double half_kappa = kappa_s2(0.5 * dz, -fiber.beta2_ps2_per_km);
      const double l_eff = (a < 1e-12) ? dz : (std::exp(a * dz) - 1.0) / a;
      const double gain_field = std::exp(0.5 * a * dz);

      fft::forward(u);
      apply_quadratic_phase(u, omega, -half_kappa, 0.0);
      fft::inverse(u);
      const double c = -fiber.gamma_per_w_km * l_eff;
      for (cplx& v : u) v *= gain_field * std::polar(1.0, c * std::norm(v));
      fft::forward(u);
      apply_quadratic_phase(u, omega, -half_kappa, 0.0);
      fft::inverse(u);
    }
  }
  return out;
}

ComplexSignal linear_equalize(const ComplexSignal& rx, const FiberParams& fiber) {
  return cd_exact(rx, fiber.total_km(), fiber.beta2_ps2_per_km, +1);
}

ComplexSignal resample(const ComplexSignal& in, double new_rate_hz) {
  const std::size_t n = in.samples.size();
  const double ratio = new_rate_hz / in.sample_rate_hz;
  const double m_real = static_cast<double>(n) * ratio;
  const std::size_t m = static_cast<std::size_t>(std::llround(m_real));
  if (std::abs(m_real - static_cast<double>(m)) > 1e-6)
    throw std::invalid_argument("resample: non-integral output length");
  if (m == n) return in;

  std::vector<cplx> spec = in.samples;
  fft::forward(spec);
  std::vector<cplx> out_spec(m, cplx(0.0, 0.0));
  const std::size_t keep = std::min(n, m);
  const std::size_t pos = (keep + 1) / 2;        // positive bins incl. DC
  const std::size_t neg = keep - pos;            // negative bins
  for (std::size_t k = 0; k < pos; ++k) out_spec[k] = spec[k];
  for (std::size_t k = 0; k < neg; ++k) out_spec[m - 1 - k] = spec[n - 1 - k];
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  for (cplx& v : out_spec) v *= scale;
  fft::inverse(out_spec);

  ComplexSignal out;
  out.samples = std::move(out_spec);
  out.sample_rate_hz = new_rate_hz;
  out.t0_offset = static_cast<std::int64_t>(std::llround(static_cast<double>(in.t0_offset) * ratio));
  return out;
}

}  // namespace sbdbp
