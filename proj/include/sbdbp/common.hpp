// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbdbp {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kPlanckJs = 6.62607015e-34;

inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Field attenuation: power decays as exp(-alpha_lin * z), alpha_lin in 1/km.
inline double alpha_linear_per_km(double alpha_db_per_km) {
  return alpha_db_per_km * std::log(10.0) / 10.0;
}

inline double energy(const std::vector<cplx>& x) {
  double e = 0.0;
  for (const cplx& v : x) e += std::norm(v);
  return e;
}

inline double mean_power(const std::vector<cplx>& x) {
  return x.empty() ? 0.0 : energy(x) / static_cast<double>(x.size());
}

}  // namespace sbdbp
