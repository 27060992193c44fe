// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace sbdbp {
namespace {

std::string rec_name(int r, const char* leaf) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "rec%03d/%s", r, leaf);
  return buf;
}

std::string step_name(const char* prefix, int idx) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, idx);
  return buf;
}

}  // namespace

RmReport rm_report(const DbpParams& params, const StepPlan& plan) {
  params.validate(plan);
  RmReport rep;
  const int s = params.bank.active_count();
  const int m = plan.total_steps();
  const auto xis = plan.xi_all();
  rep.cd_rms_per_subband_step = cd_rm_per_output(params.cd.front().half_len());
  for (int l = 0; l < m; ++l) {
    RmReport::StepRow row;
    row.step = l;
    row.xi_km = xis[static_cast<std::size_t>(l)];
    row.cd_rms = cd_rm_per_output(params.cd[static_cast<std::size_t>(l)].half_len());
    row.mimo_nonzeros = params.mimo[static_cast<std::size_t>(l)].nonzeros();
    row.mimo_rms = static_cast<double>(row.mimo_nonzeros) / s;
    rep.steps.push_back(row);
    rep.total_nonzeros += row.mimo_nonzeros;
    rep.total_capacity += params.mimo[static_cast<std::size_t>(l)].capacity();
  }
  rep.mimo_rms_per_subband_step = static_cast<double>(rep.total_nonzeros) / (static_cast<double>(s) * m);
  rep.total_rms_per_subband_step = rep.cd_rms_per_subband_step + rep.mimo_rms_per_subband_step;
  return rep;
}

double fd_baseline_rms(int n_fft, int memory_d) {
  if (n_fft <= memory_d) throw std::invalid_argument("FFT size must exceed the filter memory");
  if ((n_fft & (n_fft - 1)) != 0) throw std::invalid_argument("FFT size must be a power of two");
  const double n = n_fft;
  return 4.0 * (2.0 * n * std::log2(n) + 8.0 * n) / (n - memory_d);
}

int fd_baseline_best_n(int memory_d) {
  int best_n = 0;
  double best = 1e300;
  for (int p = 4; p <= 12; ++p) {
    const int n = 1 << p;
    if (n <= memory_d) continue;
    const double v = fd_baseline_rms(n, memory_d);
    if (v < best) {
      best = v;
      best_n = n;
    }
  }
  return best_n;
}

std::size_t mimo_capacity(int s_count, int order, int n_factors, int n_steps) {
  return static_cast<std::size_t>(n_factors) * s_count * s_count *
         (static_cast<std::size_t>(order) / n_factors + 1) * n_steps;
}

StepPlan plan_from_config(const ExperimentConfig& cfg) {
  const DeltaResult d = compute_delta(cfg.n_subbands, cfg.downsample, cfg.base_period_s(),
                                      cfg.fiber.beta2_ps2_per_km);
  return plan_steps(cfg.fiber.total_km(), d.delta_km, cfg.step_multiple);
}

FilterBankSpec bank_from_config(const ExperimentConfig& cfg) {
  return make_filter_bank(cfg.n_subbands, cfg.downsample, cfg.half_width, cfg.proc_rate_hz(),
                          cfg.proto_rolloff, cfg.proto_length);
}

DataRecord simulate_record(const ExperimentConfig& cfg, double power_dbm, std::uint64_t seed) {
  SignalSpec spec;
  spec.baud_hz = cfg.baud_hz;
  spec.oversampling = cfg.sim_oversampling;
  spec.rolloff = cfg.rolloff;
  spec.power_dbm = power_dbm;
  spec.n_symbols = cfg.n_symbols;
  spec.seed = seed;

  const SymbolSequence tx = generate_symbols(spec);
  const std::vector<double> shape = rrc_taps(cfg.rolloff, cfg.rrc_span_symbols, cfg.sim_oversampling);
  ComplexSignal wave = pulse_shape(tx, shape, cfg.sim_oversampling, power_dbm);

  const StepGrid grid = log_step_grid(cfg.fiber.span_km, cfg.forward_stps,
                                      cfg.fiber.alpha_db_per_km);
  SsfmOptions opt;
  opt.samples_per_symbol = cfg.sim_oversampling;
  opt.ase_noise = cfg.forward_noise;
  opt.noise_seed = mix_seed(seed, 0xA5Eull);
  ComplexSignal rx = ssfm_propagate(wave, cfg.fiber, grid, opt);
  rx = resample(rx, cfg.proc_rate_hz());

  DataRecord rec;
  rec.tx_symbols = tx.symbols;
  rec.rx_wave = std::move(rx.samples);
  rec.power_dbm = power_dbm;
  rec.seed = seed;
  return rec;
}

Dataset generate_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset data;
  data.baud_hz = cfg.baud_hz;
  data.proc_oversampling = cfg.proc_oversampling;
  data.rolloff = cfg.rolloff;
  data.rrc_span_symbols = cfg.rrc_span_symbols;
  data.channel_digest = compat_digest(cfg);
  for (int r = 0; r < cfg.n_records; ++r)
    data.records.push_back(simulate_record(cfg, cfg.power_dbm, mix_seed(cfg.seed, static_cast<std::uint64_t>(r))));
  return data;
}

void save_dataset(const Dataset& data, const ExperimentConfig& cfg, const std::string& path) {
  Container c;
  c.set_kind("dataset");
  c.set_meta("channel_digest", data.channel_digest);
  c.set_meta("config_digest", config_digest(cfg));
  c.set_meta("config_text", serialize_config(cfg));
  c.set_meta("baud_hz", std::to_string(data.baud_hz));
  c.set_meta("proc_oversampling", std::to_string(data.proc_oversampling));
  c.set_meta("rolloff", std::to_string(data.rolloff));
  c.set_meta("rrc_span_symbols", std::to_string(data.rrc_span_symbols));
  c.set_meta("n_records", std::to_string(data.records.size()));
  std::vector<double> powers;
  std::vector<std::int64_t> seeds;
  for (std::size_t r = 0; r < data.records.size(); ++r) {
    c.add_c128(rec_name(static_cast<int>(r), "tx"), data.records[r].tx_symbols);
    c.add_c128(rec_name(static_cast<int>(r), "rx"), data.records[r].rx_wave);
    powers.push_back(data.records[r].power_dbm);
    seeds.push_back(static_cast<std::int64_t>(data.records[r].seed));
  }
  c.add_f64("power_dbm", powers);
  c.add_i64("seed", seeds);
  c.save(path);
}

Dataset load_dataset(const std::string& path) {
  const Container c = Container::load(path);
  if (c.kind() != "dataset") throw IoError("not a dataset file: " + path);
  Dataset data;
  data.channel_digest = c.meta("channel_digest");
  data.baud_hz = std::stod(c.meta("baud_hz"));
  data.proc_oversampling = std::stoi(c.meta("proc_oversampling"));
  data.rolloff = std::stod(c.meta("rolloff"));
  data.rrc_span_symbols = std::stoi(c.meta("rrc_span_symbols"));
  const int n_records = std::stoi(c.meta("n_records"));
  const auto powers = c.get_f64("power_dbm");
  const auto seeds = c.get_i64("seed");
  for (int r = 0; r < n_records; ++r) {
    DataRecord rec;
    rec.tx_symbols = c.get_c128(rec_name(r, "tx"));
    rec.rx_wave = c.get_c128(rec_name(r, "rx"));
    rec.power_dbm = powers.at(static_cast<std::size_t>(r));
    rec.seed = static_cast<std::uint64_t>(seeds.at(static_cast<std::size_t>(r)));
    data.records.push_back(std::move(rec));
  }
  return data;
}

void save_checkpoint(const DbpParams& params, const StepPlan& plan, const ExperimentConfig& cfg,
                     const std::string& path) {
  Container c;
  c.set_kind("checkpoint");
  c.set_meta("channel_digest", compat_digest(cfg));
  c.set_meta("config_digest", config_digest(cfg));
  c.set_meta("config_text", serialize_config(cfg));
  c.set_meta("n_subbands", std::to_string(params.bank.n_subbands));
  c.set_meta("downsample", std::to_string(params.bank.downsample));
  c.set_meta("half_width", std::to_string(params.bank.half_width));
  c.set_meta("base_rate_hz", std::to_string(params.bank.base_rate_hz));

  c.add_f64("proto/analysis", params.bank.analysis_taps);
  c.add_f64("proto/synthesis", params.bank.synthesis_taps);
  std::vector<double> xi;
  std::vector<std::int64_t> mult;
  for (const auto& s : plan.steps) {
    xi.push_back(s.xi_km);
    mult.push_back(s.multiple);
  }
  c.add_f64("plan/xi_km", xi);
  c.add_i64("plan/multiple", mult);
  c.add_f64("plan/residual_km", {plan.residual_km});
  c.add_f64("plan/delta_km", {plan.delta_km});

  for (std::size_t l = 0; l < params.cd.size(); ++l) {
    c.add_c128(step_name("cd/", static_cast<int>(l)), params.cd[l].taps);
    c.add_f64(step_name("cd_xi/", static_cast<int>(l)), {params.cd[l].xi_km});
    const auto& mf = params.mimo[l];
    c.add_i64(step_name("mimo_shape/", static_cast<int>(l)),
              {mf.s_count, mf.order, mf.n_factors});
    for (int f = 0; f < mf.n_factors; ++f) {
      c.add_f64(step_name("mimo/", static_cast<int>(l)) + "/f" + std::to_string(f),
                mf.g[static_cast<std::size_t>(f)]);
      c.add_u8(step_name("mimo_mask/", static_cast<int>(l)) + "/f" + std::to_string(f),
               mf.mask[static_cast<std::size_t>(f)]);
    }
  }
  for (std::size_t i = 0; i < params.fd_taps.size(); ++i)
    c.add_f64(step_name("fd/", static_cast<int>(i)), params.fd_taps[i]);
  c.add_f64("phi", params.phi);
  c.save(path);
}

void load_checkpoint(const std::string& path, DbpParams* params, StepPlan* plan,
                     std::string* compat) {
  const Container c = Container::load(path);
  if (c.kind() != "checkpoint") throw IoError("not a checkpoint file: " + path);
  if (compat) *compat = c.meta("channel_digest");

  params->bank.n_subbands = std::stoi(c.meta("n_subbands"));
  params->bank.downsample = std::stoi(c.meta("downsample"));
  params->bank.half_width = std::stoi(c.meta("half_width"));
  params->bank.base_rate_hz = std::stod(c.meta("base_rate_hz"));
  params->bank.analysis_taps = c.get_f64("proto/analysis");
  params->bank.synthesis_taps = c.get_f64("proto/synthesis");

  plan->steps.clear();
  const auto xi = c.get_f64("plan/xi_km");
  const auto mult = c.get_i64("plan/multiple");
  for (std::size_t k = 0; k < xi.size(); ++k)
    plan->steps.push_back({xi[k], static_cast<int>(mult[k])});
  plan->residual_km = c.get_f64("plan/residual_km").at(0);
  plan->delta_km = c.get_f64("plan/delta_km").at(0);

  params->cd.clear();
  params->mimo.clear();
  params->fd_taps.clear();
  const int m = plan->total_steps();
  for (int l = 0; l < m; ++l) {
    CdFilter f;
    f.taps = c.get_c128(step_name("cd/", l));
    f.xi_km = c.get_f64(step_name("cd_xi/", l)).at(0);
    params->cd.push_back(std::move(f));
    const auto shape = c.get_i64(step_name("mimo_shape/", l));
    MimoFilterFactors mf;
    mf.s_count = static_cast<int>(shape.at(0));
    mf.order = static_cast<int>(shape.at(1));
    mf.n_factors = static_cast<int>(shape.at(2));
    for (int fidx = 0; fidx < mf.n_factors; ++fidx) {
      mf.g.push_back(c.get_f64(step_name("mimo/", l) + "/f" + std::to_string(fidx)));
      mf.mask.push_back(c.get_u8(step_name("mimo_mask/", l) + "/f" + std::to_string(fidx)));
    }
    mf.validate();
    params->mimo.push_back(std::move(mf));
  }
  const int s = params->bank.active_count();
  for (int i = 0; i < s; ++i) params->fd_taps.push_back(c.get_f64(step_name("fd/", i)));
  params->phi = c.get_f64("phi");
  params->validate(*plan);
}

TrainResult run_training(const ExperimentConfig& cfg, const Dataset& data, bool force) {
  if (!force && data.channel_digest != compat_digest(cfg))
    throw DigestError("dataset was generated with an incompatible configuration (" +
                      data.channel_digest + " vs " + compat_digest(cfg) + ")");

  const StepPlan plan = plan_from_config(cfg);
  FilterBankSpec bank = bank_from_config(cfg);

  DbpInitOptions init_opt;
  init_opt.cd_half_len = cfg.cd_half_len;
  init_opt.mimo_factors = cfg.mimo_factors;
  init_opt.mimo_init_scale = cfg.mimo_init_scale;
  init_opt.cd_band_edge_frac = cfg.cd_band_edge;
  init_opt.seed = cfg.train_seed;
  DbpParams params = init_dbp_params(bank, plan, cfg.fiber.beta2_ps2_per_km, init_opt);
  params.cd = pretrain_cd(plan, cfg.fiber.beta2_ps2_per_km, bank.subband_rate_hz(),
                          cfg.cd_half_len, cfg.cd_refine_passes, cfg.cd_band_edge);

  TrainConfig tc;
  tc.lr = cfg.lr;
  tc.lr_decay = cfg.lr_decay;
  tc.lr_min = cfg.lr_min;
  tc.plateau_iters = cfg.plateau_iters;
  tc.batch_size = cfg.batch_size;
  tc.window_symbols = cfg.window_symbols;
  tc.guard_symbols = cfg.guard_symbols;
  tc.l1_lambda = cfg.l1_lambda;
  tc.iterations = cfg.iterations;
  tc.threshold_tau = cfg.threshold_tau;
  tc.seed = cfg.train_seed;
  tc.val_every = cfg.val_every;
  tc.n_val_records = cfg.n_val_records;
  return train(tc, data, params, plan, cfg.fiber.beta2_ps2_per_km);
}

std::vector<EvalRow> run_eval(const ExperimentConfig& cfg, const DbpParams& params,
                              const StepPlan& plan) {
  const std::vector<double> mf_taps = rrc_taps(cfg.rolloff, cfg.rrc_span_symbols,
                                               cfg.proc_oversampling);
  const int os = cfg.proc_oversampling;
  const std::int64_t guard = cfg.guard_symbols;

  // Undecimated bank for the frequency-domain subband reference.
  FilterBankSpec fd_bank = make_filter_bank(cfg.n_subbands, 1, cfg.fd_sub_half_width,
                                            cfg.proc_rate_hz(), cfg.proto_rolloff,
                                            cfg.proto_length);

  ExperimentConfig sim_cfg = cfg;
  sim_cfg.n_symbols = cfg.eval_symbols;

  std::vector<EvalRow> rows;
  const char* methods[] = {"linear", "subband-tddbp", "fd-subband", "full-dbp"};
  for (double p : cfg.eval_powers_dbm) {
    std::map<std::string, double> acc;
    for (int s = 0; s < cfg.eval_seeds; ++s) {
      const std::uint64_t seed = mix_seed(cfg.seed, 0xEAA1ull + static_cast<std::uint64_t>(s));
      const DataRecord rec = simulate_record(sim_cfg, p, seed);
      ComplexSignal rx;
      rx.samples = rec.rx_wave;
      rx.sample_rate_hz = cfg.proc_rate_hz();
      SymbolSequence tx;
      tx.baud_hz = cfg.baud_hz;
      tx.symbols = rec.tx_symbols;

      auto snr_of = [&](const SymbolSequence& soft) {
        SymbolSequence ref = tx;
        ref.symbols.resize(soft.symbols.size());
        return align_and_snr(ref, soft, guard);
      };

      {
        const ComplexSignal eq = linear_equalize(rx, cfg.fiber);
        acc["linear"] += snr_of(matched_filter_downsample(eq, mf_taps, os, eq.t0_offset));
      }
      {
        acc["subband-tddbp"] += snr_of(run_receiver(rx, params, plan,
                                                    cfg.fiber.beta2_ps2_per_km, mf_taps, os));
      }
      {
        SubbandSet sub = analyze(rx, fd_bank, 0);
        sub = fd_subband_dbp_baseline(sub, cfg.fiber, cfg.fd_sub_stps);
        const ComplexSignal rec2 = synthesize(sub, fd_bank);
        acc["fd-subband"] += snr_of(matched_filter_downsample(rec2, mf_taps, os, rec2.t0_offset));
      }
      {
        const ComplexSignal dbp = full_dbp_baseline(rx, cfg.fiber, cfg.full_dbp_stps);
        acc["full-dbp"] += snr_of(matched_filter_downsample(dbp, mf_taps, os, dbp.t0_offset));
      }
    }
    for (const char* m : methods)
      rows.push_back({p, m, acc[m] / cfg.eval_seeds, cfg.eval_seeds});
  }
  return rows;
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "power_dbm,method,snr_db,seed_count\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6g,%s,%.6f,%d\n", r.power_dbm, r.method.c_str(), r.snr_db,
                  r.seed_count);
    out << buf;
  }
  const std::string tmp = path + ".tmp";
  std::ofstream f(tmp, std::ios::trunc);
  if (!f) throw IoError("cannot write: " + path);
  f << out.str();
  f.close();
  std::filesystem::rename(tmp, path);
}

void write_curves_csv(const std::vector<CurvePoint>& curves, const std::string& path) {
  std::ostringstream out;
  out << "iteration,loss,mse,l1,val_snr_db,lr\n";
  char buf[192];
  for (const auto& c : curves) {
    std::snprintf(buf, sizeof(buf), "%d,%.9e,%.9e,%.9e,%.4f,%.3e\n", c.iteration, c.loss, c.mse,
                  c.l1, c.val_snr_db, c.lr);
    out << buf;
  }
  const std::string tmp = path + ".tmp";
  std::ofstream f(tmp, std::ios::trunc);
  if (!f) throw IoError("cannot write: " + path);
  f << out.str();
  f.close();
  std::filesystem::rename(tmp, path);
}

void write_eval_svg(const std::vector<EvalRow>& rows, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("no rows to plot");
  double pmin = 1e300, pmax = -1e300, smin = 1e300, smax = -1e300;
  std::map<std::string, std::map<double, double>> series;
  for (const auto& r : rows) {
    series[r.method][r.power_dbm] = r.snr_db;
    pmin = std::min(pmin, r.power_dbm);
    pmax = std::max(pmax, r.power_dbm);
    smin = std::min(smin, r.snr_db);
    smax = std::max(smax, r.snr_db);
  }
  if (pmax <= pmin) pmax = pmin + 1;
  if (smax <= smin) smax = smin + 1;
  const double w = 640, h = 420, ml = 60, mr = 20, mt = 20, mb = 50;
  auto X = [&](double p) { return ml + (p - pmin) / (pmax - pmin) * (w - ml - mr); };
  auto Y = [&](double s) { return h - mb - (s - smin) / (smax - smin) * (h - mt - mb); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  svg << "<text x='" << (w / 2) << "' y='" << h - 12
      << "' text-anchor='middle' font-size='13'>launch power [dBm]</text>\n";
  svg << "<text x='16' y='" << (h / 2)
      << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 " << (h / 2)
      << ")'>SNR [dB]</text>\n";
  int ci = 0, li = 0;
  for (const auto& [name, pts] : series) {
    std::ostringstream poly;
    for (const auto& [p, s] : pts) poly << X(p) << "," << Y(s) << " ";
    svg << "<polyline fill='none' stroke='" << colors[ci % 5] << "' stroke-width='1.8' points='"
        << poly.str() << "'/>\n";
    for (const auto& [p, s] : pts)
      svg << "<circle cx='" << X(p) << "' cy='" << Y(s) << "' r='2.6' fill='" << colors[ci % 5]
          << "'/>\n";
    svg << "<text x='" << w - mr - 150 << "' y='" << mt + 16 + 16 * li << "' font-size='12' fill='"
        << colors[ci % 5] << "'>" << name << "</text>\n";
    ++ci;
    ++li;
  }
  svg << "</svg>\n";
  const std::string tmp = path + ".tmp";
  std::ofstream f(tmp, std::ios::trunc);
  if (!f) throw IoError("cannot write: " + path);
  f << svg.str();
  f.close();
  std::filesystem::rename(tmp, path);
}

std::string complexity_table(const ExperimentConfig& cfg, const DbpParams* params,
                             const StepPlan& plan, std::size_t nonzeros_override) {
  std::ostringstream out;
  const int s = 2 * cfg.half_width + 1;
  const int m = plan.total_steps();
  char buf[256];

  double mimo_rms;
  std::size_t nonzeros, capacity;
  if (params) {
    const RmReport rep = rm_report(*params, plan);
    nonzeros = nonzeros_override ? nonzeros_override : rep.total_nonzeros;
    capacity = rep.total_capacity;
  } else {
    const int order = cfg.step_multiple * (s - 1);
    capacity = mimo_capacity(s, order, cfg.mimo_factors, m);
    nonzeros = nonzeros_override ? nonzeros_override : capacity;
  }
  mimo_rms = static_cast<double>(nonzeros) / (static_cast<double>(s) * m);
  const int cd_rms = cd_rm_per_output(cfg.cd_half_len);
  const double total = cd_rms + mimo_rms;

  out << "engine complexity (real multiplications per subband and step)\n";
  std::snprintf(buf, sizeof(buf), "  steps M                 : %d\n", m);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  active subbands |S|     : %d\n", s);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  CD filters, 4(L+1)      : %d\n", cd_rms);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  MIMO nonzeros / capacity: %zu / %zu\n", nonzeros, capacity);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  MIMO avg                : %.2f\n", mimo_rms);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  total                   : %.2f\n", total);
  out << buf;

  const int best_n = fd_baseline_best_n();
  std::snprintf(buf, sizeof(buf),
                "frequency-domain overlap-add reference: %.1f at FFT size %d (scan 2^4..2^12)\n",
                fd_baseline_rms(best_n), best_n);
  out << buf;
  return out.str();
}

}  // namespace sbdbp
