// SPDX-License-Identifier: Apache-2.0
//
// Part of subband-dbp, a subband time-domain digital backpropagation toolkit.
// Licensed under the Apache License, Version 2.0; see LICENSE for details.

#include "sbdbp/container.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

namespace sbdbp {
namespace {

constexpr char kMagic[4] = {'S', 'B', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
std::vector<std::uint8_t> to_bytes(const T* data, std::size_t count) {
  std::vector<std::uint8_t> bytes(count * sizeof(T));
  std::memcpy(bytes.data(), data, bytes.size());
  return bytes;
}

template <typename T>
std::vector<T> from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % sizeof(T) != 0) throw std::runtime_error("container: payload size mismatch");
  std::vector<T> v(bytes.size() / sizeof(T));
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

}  // namespace

std::string Container::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw std::runtime_error("container: missing metadata key " + key);
  return it->second;
}

void Container::add_c128(const std::string& name, const std::vector<cplx>& v) {
  arrays_[name] = {"c128", to_bytes(reinterpret_cast<const double*>(v.data()), 2 * v.size())};
}

void Container::add_f64(const std::string& name, const std::vector<double>& v) {
  arrays_[name] = {"f64", to_bytes(v.data(), v.size())};
}

void Container::add_i64(const std::string& name, const std::vector<std::int64_t>& v) {
  arrays_[name] = {"i64", to_bytes(v.data(), v.size())};
}

void Container::add_u8(const std::string& name, const std::vector<std::uint8_t>& v) {
  arrays_[name] = {"u8", v};
}

bool Container::has(const std::string& name) const { return arrays_.count(name) != 0; }

const Container::Array& Container::find(const std::string& name, const std::string& dtype) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::runtime_error("container: missing array " + name);
  if (it->second.dtype != dtype)
    throw std::runtime_error("container: dtype mismatch for " + name + " (have " +
                             it->second.dtype + ", want " + dtype + ")");
  return it->second;
}

std::vector<cplx> Container::get_c128(const std::string& name) const {
  const auto reals = from_bytes<double>(find(name, "c128").bytes);
  std::vector<cplx> v(reals.size() / 2);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = cplx(reals[2 * k], reals[2 * k + 1]);
  return v;
}

std::vector<double> Container::get_f64(const std::string& name) const {
  return from_bytes<double>(find(name, "f64").bytes);
}

std::vector<std::int64_t> Container::get_i64(const std::string& name) const {
  return from_bytes<std::int64_t>(find(name, "i64").bytes);
}

std::vector<std::uint8_t> Container::get_u8(const std::string& name) const {
  return find(name, "u8").bytes;
}

std::vector<std::string> Container::names() const {
  std::vector<std::string> out;
  out.reserve(arrays_.size());
  for (const auto& [name, arr] : arrays_) out.push_back(name);
  return out;
}

void Container::save(const std::string& path) const {
  nlohmann::json header;
  header["kind"] = kind_;
  header["meta"] = meta_;
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, arr] : arrays_) {
    index.push_back({{"name", name},
                     {"dtype", arr.dtype},
                     {"offset", offset},
                     {"nbytes", arr.bytes.size()}});
    offset += arr.bytes.size();
  }
  header["arrays"] = index;
  const std::string hdr = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
    f.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    const std::uint32_t hdr_len = static_cast<std::uint32_t>(hdr.size());
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&hdr_len), 4);
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const auto& [name, arr] : arrays_)
      f.write(reinterpret_cast<const char*>(arr.bytes.data()),
              static_cast<std::streamsize>(arr.bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Container Container::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  std::uint32_t version = 0, hdr_len = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&hdr_len), 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a container file: " + path);
  if (version != kVersion) throw std::runtime_error("unsupported container version");
  std::string hdr(hdr_len, '\0');
  f.read(hdr.data(), hdr_len);
  if (!f) throw std::runtime_error("truncated header: " + path);
  const nlohmann::json header = nlohmann::json::parse(hdr);

  Container c;
  c.kind_ = header.at("kind").get<std::string>();
  c.meta_ = header.at("meta").get<std::map<std::string, std::string>>();
  for (const auto& e : header.at("arrays")) {
    Array arr;
    arr.dtype = e.at("dtype").get<std::string>();
    arr.bytes.resize(e.at("nbytes").get<std::size_t>());
    c.arrays_[e.at("name").get<std::string>()] = std::move(arr);
  }
  // Arrays were written in map (name) order with recorded offsets.
  for (const auto& e : header.at("arrays")) {
    auto& arr = c.arrays_[e.at("name").get<std::string>()];
    f.read(reinterpret_cast<char*>(arr.bytes.data()),
           static_cast<std::streamsize>(arr.bytes.size()));
  }
  if (!f) throw std::runtime_error("truncated payload: " + path);
  return c;
}

}  // namespace sbdbp
