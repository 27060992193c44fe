// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <string>
#include <vector>

#include "sbdbp/config.hpp"
#include "sbdbp/container.hpp"
#include "sbdbp/train.hpp"

namespace sbdbp {

struct RmReport {
  struct StepRow {
    int step = 0;
    double xi_km = 0.0;
    int cd_rms = 0;               // per subband per output sample
    std::size_t mimo_nonzeros = 0;
    double mimo_rms = 0.0;        // nonzeros / |S|
  };
  std::vector<StepRow> steps;
  int cd_rms_per_subband_step = 0;
  double mimo_rms_per_subband_step = 0.0;  // total nonzeros / (|S| M)
  double total_rms_per_subband_step = 0.0;
  std::size_t total_nonzeros = 0;
  std::size_t total_capacity = 0;
};

// Real-multiplication accounting for the engine: CD cost 4(L+1) per subband
// per step, MIMO cost = nonzero coefficients / (|S|·M) on average.
RmReport rm_report(const DbpParams& params, const StepPlan& plan);

// Frequency-domain overlap-and-add reference cost: 4(2n log2 n + 8n)/(n - d)
// real multiplications per subband and step for FFT size n and memory d.
double fd_baseline_rms(int n_fft, int memory_d = 13);

// Scans power-of-two FFT sizes in [2^4, 2^12] and returns the minimizer.
int fd_baseline_best_n(int memory_d = 13);

// MIMO coefficient capacity F |S|² (O/F + 1) M.
std::size_t mimo_capacity(int s_count, int order, int n_factors, int n_steps);

// ---- experiment drivers -------------------------------------------------

struct EvalRow {
  double power_dbm = 0.0;
  std::string method;
  double snr_db = 0.0;
  int seed_count = 0;
};

StepPlan plan_from_config(const ExperimentConfig& cfg);
FilterBankSpec bank_from_config(const ExperimentConfig& cfg);

// Forward-simulates one record at the given power/seed and returns the
// processing-rate receive waveform plus the transmitted symbols.
DataRecord simulate_record(const ExperimentConfig& cfg, double power_dbm, std::uint64_t seed);

Dataset generate_dataset(const ExperimentConfig& cfg);
void save_dataset(const Dataset& data, const ExperimentConfig& cfg, const std::string& path);
Dataset load_dataset(const std::string& path);

void save_checkpoint(const DbpParams& params, const StepPlan& plan, const ExperimentConfig& cfg,
                     const std::string& path);
void load_checkpoint(const std::string& path, DbpParams* params, StepPlan* plan,
                     std::string* compat = nullptr);

// Trains from a dataset (digest-checked unless force) and returns the result.
TrainResult run_training(const ExperimentConfig& cfg, const Dataset& data, bool force);

// Launch-power sweep of {linear, subband-tddbp, full-dbp, fd-subband}.
std::vector<EvalRow> run_eval(const ExperimentConfig& cfg, const DbpParams& params,
                              const StepPlan& plan);

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);
void write_curves_csv(const std::vector<CurvePoint>& curves, const std::string& path);
// Minimal static line chart of the eval sweep.
void write_eval_svg(const std::vector<EvalRow>& rows, const std::string& path);

std::string complexity_table(const ExperimentConfig& cfg, const DbpParams* params,
                             const StepPlan& plan, std::size_t nonzeros_override = 0);

}  // namespace sbdbp
