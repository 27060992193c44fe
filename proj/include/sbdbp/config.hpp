// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbdbp/channel.hpp"

namespace sbdbp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DigestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full experiment description: one structured text file (sections of
// key = value pairs) drives dataset generation, training and evaluation.
struct ExperimentConfig {
  // [signal]
  double baud_hz = 32e9;
  int sim_oversampling = 6;
  int proc_oversampling = 2;
  double rolloff = 0.1;
  int rrc_span_symbols = 32;
  double power_dbm = 4.0;       // training launch power
  std::int64_t n_symbols = 16384;  // per record
  int n_records = 18;
  std::uint64_t seed = 42;

  // [fiber]
  FiberParams fiber;

  // [forward]
  int forward_stps = 200;
  bool forward_noise = true;

  // [bank]
  int n_subbands = 12;
  int downsample = 8;
  int half_width = 3;
  int proto_length = 129;
  double proto_rolloff = 0.45;

  // [dbp]
  int step_multiple = 1;
  int cd_half_len = 3;       // L
  int mimo_factors = 3;      // F
  double mimo_init_scale = 1e-2;
  double cd_band_edge = 0.95;
  int cd_refine_passes = 2;

  // [train]
  double lr = 2e-3;
  double lr_decay = 0.5;
  double lr_min = 1e-5;
  int plateau_iters = 150;
  int batch_size = 8;
  std::int64_t window_symbols = 4096;
  std::int64_t guard_symbols = 512;
  double l1_lambda = 0.0;
  int iterations = 1000;
  double threshold_tau = 1e-3;
  std::uint64_t train_seed = 7;
  int val_every = 100;
  int n_val_records = 2;

  // [eval]
  std::vector<double> eval_powers_dbm = {-1.0, 1.0, 3.0, 5.0, 7.0};
  std::int64_t eval_symbols = 16384;
  int eval_seeds = 1;
  int full_dbp_stps = 200;
  int fd_sub_stps = 100;
  int fd_sub_half_width = 3;

  double proc_rate_hz() const { return baud_hz * proc_oversampling; }
  double sim_rate_hz() const { return baud_hz * sim_oversampling; }
  double base_period_s() const { return 1.0 / proc_rate_hz(); }
  void validate() const;
};

// Parse/serialize the canonical section-based text form. Unknown sections or
// keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a-64 content digests (hex). The full digest covers every field; the
// compatibility digest covers the fields a dataset/checkpoint pair must agree
// on (signal geometry, fiber, forward simulation, bank and engine layout).
std::string config_digest(const ExperimentConfig& cfg);
std::string compat_digest(const ExperimentConfig& cfg);

// Built-in scenario presets.
ExperimentConfig desk_scale_config();
ExperimentConfig paper_scale_config();

}  // namespace sbdbp
