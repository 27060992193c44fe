// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/config.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sbdbp {
namespace {

enum class FieldType { kDouble, kInt, kInt64, kUint64, kBool, kDoubleList };

struct FieldDesc {
  const char* section;
  const char* key;
  FieldType type;
  void* ptr;
  bool compat;  // part of the dataset/checkpoint compatibility digest
};

std::vector<FieldDesc> field_table(ExperimentConfig& c) {
  return {
      {"signal", "baud_hz", FieldType::kDouble, &c.baud_hz, true},
      {"signal", "sim_oversampling", FieldType::kInt, &c.sim_oversampling, true},
      {"signal", "proc_oversampling", FieldType::kInt, &c.proc_oversampling, true},
      {"signal", "rolloff", FieldType::kDouble, &c.rolloff, true},
      {"signal", "rrc_span_symbols", FieldType::kInt, &c.rrc_span_symbols, true},
      {"signal", "power_dbm", FieldType::kDouble, &c.power_dbm, false},
      {"signal", "n_symbols", FieldType::kInt64, &c.n_symbols, false},
      {"signal", "n_records", FieldType::kInt, &c.n_records, false},
      {"signal", "seed", FieldType::kUint64, &c.seed, false},

      {"fiber", "alpha_db_per_km", FieldType::kDouble, &c.fiber.alpha_db_per_km, true},
      {"fiber", "beta2_ps2_per_km", FieldType::kDouble, &c.fiber.beta2_ps2_per_km, true},
      {"fiber", "gamma_per_w_km", FieldType::kDouble, &c.fiber.gamma_per_w_km, true},
      {"fiber", "span_km", FieldType::kDouble, &c.fiber.span_km, true},
      {"fiber", "n_spans", FieldType::kInt, &c.fiber.n_spans, true},
      {"fiber", "nf_db", FieldType::kDouble, &c.fiber.nf_db, true},
      {"fiber", "carrier_hz", FieldType::kDouble, &c.fiber.carrier_hz, true},

      {"forward", "stps", FieldType::kInt, &c.forward_stps, true},
      {"forward", "noise", FieldType::kBool, &c.forward_noise, true},

      {"bank", "n_subbands", FieldType::kInt, &c.n_subbands, true},
      {"bank", "downsample", FieldType::kInt, &c.downsample, true},
      {"bank", "half_width", FieldType::kInt, &c.half_width, true},
      {"bank", "proto_length", FieldType::kInt, &c.proto_length, true},
      {"bank", "proto_rolloff", FieldType::kDouble, &c.proto_rolloff, true},

      {"dbp", "step_multiple", FieldType::kInt, &c.step_multiple, true},
      {"dbp", "cd_half_len", FieldType::kInt, &c.cd_half_len, true},
      {"dbp", "mimo_factors", FieldType::kInt, &c.mimo_factors, true},
      {"dbp", "mimo_init_scale", FieldType::kDouble, &c.mimo_init_scale, false},
      {"dbp", "cd_band_edge", FieldType::kDouble, &c.cd_band_edge, false},
      {"dbp", "cd_refine_passes", FieldType::kInt, &c.cd_refine_passes, false},

      {"train", "lr", FieldType::kDouble, &c.lr, false},
      {"train", "lr_decay", FieldType::kDouble, &c.lr_decay, false},
      {"train", "lr_min", FieldType::kDouble, &c.lr_min, false},
      {"train", "plateau_iters", FieldType::kInt, &c.plateau_iters, false},
      {"train", "batch_size", FieldType::kInt, &c.batch_size, false},
      {"train", "window_symbols", FieldType::kInt64, &c.window_symbols, false},
      {"train", "guard_symbols", FieldType::kInt64, &c.guard_symbols, false},
      {"train", "l1_lambda", FieldType::kDouble, &c.l1_lambda, false},
      {"train", "iterations", FieldType::kInt, &c.iterations, false},
      {"train", "threshold_tau", FieldType::kDouble, &c.threshold_tau, false},
      {"train", "seed", FieldType::kUint64, &c.train_seed, false},
      {"train", "val_every", FieldType::kInt, &c.val_every, false},
      {"train", "n_val_records", FieldType::kInt, &c.n_val_records, false},

      {"eval", "powers_dbm", FieldType::kDoubleList, &c.eval_powers_dbm, false},
      {"eval", "n_symbols", FieldType::kInt64, &c.eval_symbols, false},
      {"eval", "seeds", FieldType::kInt, &c.eval_seeds, false},
      {"eval", "full_dbp_stps", FieldType::kInt, &c.full_dbp_stps, false},
      {"eval", "fd_sub_stps", FieldType::kInt, &c.fd_sub_stps, false},
      {"eval", "fd_sub_half_width", FieldType::kInt, &c.fd_sub_half_width, false},
  };
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_value(const FieldDesc& f) {
  switch (f.type) {
    case FieldType::kDouble:
      return format_double(*static_cast<double*>(f.ptr));
    case FieldType::kInt:
      return std::to_string(*static_cast<int*>(f.ptr));
    case FieldType::kInt64:
      return std::to_string(*static_cast<std::int64_t*>(f.ptr));
    case FieldType::kUint64:
      return std::to_string(*static_cast<std::uint64_t*>(f.ptr));
    case FieldType::kBool:
      return *static_cast<bool*>(f.ptr) ? "true" : "false";
    case FieldType::kDoubleList: {
      const auto& v = *static_cast<std::vector<double>*>(f.ptr);
      std::string out;
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ", ";
        out += format_double(v[k]);
      }
      return out;
    }
  }
  return {};
}

void parse_value(const FieldDesc& f, const std::string& raw) {
  const std::string v = trim(raw);
  try {
    switch (f.type) {
      case FieldType::kDouble:
        *static_cast<double*>(f.ptr) = std::stod(v);
        break;
      case FieldType::kInt:
        *static_cast<int*>(f.ptr) = std::stoi(v);
        break;
      case FieldType::kInt64:
        *static_cast<std::int64_t*>(f.ptr) = std::stoll(v);
        break;
      case FieldType::kUint64:
        *static_cast<std::uint64_t*>(f.ptr) = std::stoull(v);
        break;
      case FieldType::kBool:
        if (v == "true" || v == "1")
          *static_cast<bool*>(f.ptr) = true;
        else if (v == "false" || v == "0")
          *static_cast<bool*>(f.ptr) = false;
        else
          throw ConfigError("bad boolean: " + v);
        break;
      case FieldType::kDoubleList: {
        auto& out = *static_cast<std::vector<double>*>(f.ptr);
        out.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const std::string t = trim(item);
          if (!t.empty()) out.push_back(std::stod(t));
        }
        break;
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(std::string("cannot parse value for ") + f.section + "." + f.key + ": " + v);
  }
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

std::string serialize_fields(const ExperimentConfig& cfg, bool compat_only) {
  auto fields = field_table(const_cast<ExperimentConfig&>(cfg));
  std::string out;
  const char* section = "";
  for (const auto& f : fields) {
    if (compat_only && !f.compat) continue;
    if (std::string(section) != f.section) {
      section = f.section;
      out += "[";
      out += f.section;
      out += "]\n";
    }
    out += f.key;
    out += " = ";
    out += format_value(f);
    out += "\n";
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (baud_hz <= 0) throw ConfigError("signal.baud_hz must be > 0");
  if (sim_oversampling < 2 || proc_oversampling < 1)
    throw ConfigError("oversampling out of range");
  if (rolloff < 0 || rolloff > 1) throw ConfigError("signal.rolloff must be in [0,1]");
  if (n_symbols <= 0 || n_records <= 0) throw ConfigError("record geometry must be positive");
  if (n_subbands < 1 || downsample < 1 || half_width < 0)
    throw ConfigError("bank geometry out of range");
  if (2 * half_width + 1 > n_subbands) throw ConfigError("bank.half_width too large for N");
  if (step_multiple < 1) throw ConfigError("dbp.step_multiple must be >= 1");
  if (cd_half_len < 1) throw ConfigError("dbp.cd_half_len must be >= 1");
  if (mimo_factors < 1) throw ConfigError("dbp.mimo_factors must be >= 1");
  if (l1_lambda < 0) throw ConfigError("train.l1_lambda must be >= 0");
  if (threshold_tau < 0) throw ConfigError("train.threshold_tau must be >= 0");
  if (batch_size < 1 || iterations < 0) throw ConfigError("train loop parameters out of range");
  if (guard_symbols < 0 || 2 * guard_symbols >= window_symbols)
    throw ConfigError("train.guard_symbols incompatible with window");
  if (n_val_records < 0 || n_val_records >= n_records)
    throw ConfigError("train.n_val_records out of range");
  if (eval_powers_dbm.empty()) throw ConfigError("eval.powers_dbm must be nonempty");
  fiber.validate();
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  auto fields = field_table(cfg);
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : fields)
        if (section == f.section) known = true;
      if (!known) throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = line.substr(eq + 1);
    bool found = false;
    for (const auto& f : fields) {
      if (section == f.section && key == f.key) {
        parse_value(f, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown key " + section + "." + key);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) { return serialize_fields(cfg, false); }

std::string config_digest(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(serialize_fields(cfg, false)));
}

std::string compat_digest(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(serialize_fields(cfg, true)));
}

ExperimentConfig desk_scale_config() {
  ExperimentConfig c;  // defaults are the desk-scale scenario
  c.fiber.n_spans = 4;
  return c;
}

ExperimentConfig paper_scale_config() {
  ExperimentConfig c;
  c.baud_hz = 96e9;
  c.sim_oversampling = 6;
  c.proc_oversampling = 2;
  c.rolloff = 0.1;
  c.power_dbm = 6.0;
  c.n_symbols = 65536;
  c.n_records = 34;
  c.fiber.n_spans = 25;
  c.forward_stps = 1000;
  c.step_multiple = 2;
  c.full_dbp_stps = 1000;
  c.fd_sub_stps = 1000;
  c.fd_sub_half_width = 5;
  c.iterations = 6000;
  c.batch_size = 16;
  c.eval_powers_dbm = {-3, -2, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8};
  c.n_val_records = 2;
  return c;
}

}  // namespace sbdbp
