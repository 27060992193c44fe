// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sbdbp/common.hpp"

namespace sbdbp {

// Versioned binary container: magic "SBDC", little-endian u32 version and
// JSON header length, a JSON header (kind, digests, metadata, array index),
// then raw little-endian array payloads. Used for datasets and checkpoints.
class Container {
 public:
  void set_kind(const std::string& kind) { kind_ = kind; }
  const std::string& kind() const { return kind_; }

  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
  std::string meta(const std::string& key) const;
  bool has_meta(const std::string& key) const { return meta_.count(key) != 0; }

  void add_c128(const std::string& name, const std::vector<cplx>& v);
  void add_f64(const std::string& name, const std::vector<double>& v);
  void add_i64(const std::string& name, const std::vector<std::int64_t>& v);
  void add_u8(const std::string& name, const std::vector<std::uint8_t>& v);

  bool has(const std::string& name) const;
  std::vector<cplx> get_c128(const std::string& name) const;
  std::vector<double> get_f64(const std::string& name) const;
  std::vector<std::int64_t> get_i64(const std::string& name) const;
  std::vector<std::uint8_t> get_u8(const std::string& name) const;
  std::vector<std::string> names() const;

  // Atomic write (temp file + rename).
  void save(const std::string& path) const;
  static Container load(const std::string& path);

 private:
  struct Array {
    std::string dtype;
    std::vector<std::uint8_t> bytes;
  };
  std::string kind_;
  std::map<std::string, std::string> meta_;
  std::map<std::string, Array> arrays_;

  const Array& find(const std::string& name, const std::string& dtype) const;
};

}  // namespace sbdbp
