#pragma once

// Checkpoint container: a flat, sorted set of named arrays.
//
//   magic      8 bytes  "SLACKSAC"
//   version    u32      kCheckpointVersion
//   count      u32      number of entries
//   entry*     count times, sorted by name:
//     name_len u32, name (UTF-8, no terminator)
//     kind     u8       0 = f64, 1 = u64, 2 = UTF-8 text
//     rank     u32
//     dims     u64[rank]
//     payload  f64/u64: product(dims) elements of 8 bytes; text: dims[0] bytes
//
// All integers and floats are little-endian. Network entries carry a
// "<name>.layer_sizes" u64 manifest next to their tensors.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slacksac/error.hpp"
#include "slacksac/nn/adam.hpp"
#include "slacksac/nn/mlp.hpp"

namespace slacksac::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'A', 'C', 'K', 'S', 'A', 'C'};

enum class EntryKind : std::uint8_t { f64 = 0, u64 = 1, text = 2 };

struct Entry {
  EntryKind kind = EntryKind::f64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;
  std::vector<std::uint64_t> u64;
  std::string text;
};

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IoError("checkpoint truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

class Checkpoint {
 public:
  void put(const std::string& name, std::span<const double> values,
           std::vector<std::uint64_t> dims = {}) {
    Entry e;
    e.kind = EntryKind::f64;
    e.dims = dims.empty() ? std::vector<std::uint64_t>{values.size()} : std::move(dims);
    check_dims(name, e.dims, values.size());
    e.f64.assign(values.begin(), values.end());
    entries_[name] = std::move(e);
  }

  void put_u64(const std::string& name, std::span<const std::uint64_t> values) {
    Entry e;
    e.kind = EntryKind::u64;
    e.dims = {values.size()};
    e.u64.assign(values.begin(), values.end());
    entries_[name] = std::move(e);
  }

  void put_scalar(const std::string& name, double v) { put(name, std::span<const double>(&v, 1)); }
  void put_count(const std::string& name, std::uint64_t v) {
    put_u64(name, std::span<const std::uint64_t>(&v, 1));
  }

  void put_text(const std::string& name, std::string text) {
    Entry e;
    e.kind = EntryKind::text;
    e.dims = {text.size()};
    e.text = std::move(text);
    entries_[name] = std::move(e);
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  const Entry& at(const std::string& name, EntryKind kind) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("checkpoint has no entry '" + name + "'");
    if (it->second.kind != kind) throw IoError("checkpoint entry '" + name + "' has the wrong kind");
    return it->second;
  }

  const std::vector<double>& f64(const std::string& name) const { return at(name, EntryKind::f64).f64; }
  const std::vector<std::uint64_t>& u64(const std::string& name) const {
    return at(name, EntryKind::u64).u64;
  }
  const std::string& text(const std::string& name) const { return at(name, EntryKind::text).text; }

  double scalar(const std::string& name) const {
    const auto& v = f64(name);
    if (v.size() != 1) throw IoError("checkpoint entry '" + name + "' is not a scalar");
    return v[0];
  }
  std::uint64_t count(const std::string& name) const {
    const auto& v = u64(name);
    if (v.size() != 1) throw IoError("checkpoint entry '" + name + "' is not a scalar");
    return v[0];
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, e] : entries_) {
      detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
      out.insert(out.end(), name.begin(), name.end());
      detail::put_u8(out, static_cast<std::uint8_t>(e.kind));
      detail::put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
      for (auto d : e.dims) detail::put_u64(out, d);
      switch (e.kind) {
        case EntryKind::f64:
          for (double v : e.f64) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
          break;
        case EntryKind::u64:
          for (auto v : e.u64) detail::put_u64(out, v);
          break;
        case EntryKind::text:
          out.insert(out.end(), e.text.begin(), e.text.end());
          break;
      }
    }
    return out;
  }

  static Checkpoint from_bytes(std::span<const std::uint8_t> bytes) {
    detail::Reader in(bytes);
    auto magic = in.take(sizeof(kCheckpointMagic));
    if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
      throw IoError("not a checkpoint file (bad magic)");
    const auto version = in.u32();
    if (version != kCheckpointVersion)
      throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto n = in.u32();
    Checkpoint ck;
    for (std::uint32_t k = 0; k < n; ++k) {
      const auto name_len = in.u32();
      auto name_bytes = in.take(name_len);
      std::string name(name_bytes.begin(), name_bytes.end());
      Entry e;
      const auto kind = in.u8();
      if (kind > 2) throw IoError("checkpoint entry '" + name + "' has unknown kind");
      e.kind = static_cast<EntryKind>(kind);
      const auto rank = in.u32();
      if (rank > 8) throw IoError("checkpoint entry '" + name + "' has implausible rank");
      std::uint64_t total = 1;
      for (std::uint32_t r = 0; r < rank; ++r) {
        e.dims.push_back(in.u64());
        total *= e.dims.back();
      }
      if (e.kind == EntryKind::text) {
        if (rank != 1) throw IoError("text entry '" + name + "' must have rank 1");
        auto b = in.take(e.dims[0]);
        e.text.assign(b.begin(), b.end());
      } else {
        if (total > bytes.size() / 8) throw IoError("checkpoint truncated");
        for (std::uint64_t i = 0; i < total; ++i) {
          const auto raw = in.u64();
          if (e.kind == EntryKind::f64)
            e.f64.push_back(std::bit_cast<double>(raw));
          else
            e.u64.push_back(raw);
        }
      }
      ck.entries_[std::move(name)] = std::move(e);
    }
    if (!in.done()) throw IoError("trailing bytes after checkpoint entries");
    return ck;
  }

  void save(const std::string& path) const {
    const auto bytes = to_bytes();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing '" + path + "'");
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
  }

 private:
  static void check_dims(const std::string& name, const std::vector<std::uint64_t>& dims,
                         std::size_t n) {
    const auto prod = std::accumulate(dims.begin(), dims.end(), std::uint64_t{1},
                                      std::multiplies<std::uint64_t>());
    if (prod != n) throw ConfigError("entry '" + name + "': dims do not match value count");
  }

  std::map<std::string, Entry> entries_;
};

// Network and optimizer helpers ---------------------------------------------

namespace detail {

inline void put_layers(Checkpoint& ck, const std::string& prefix, const std::vector<nn::Layer>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string p = prefix + ".layer" + std::to_string(l);
    ck.put(p + ".weight", std::span<const double>(L.weight.data(), L.weight.size()),
           {static_cast<std::uint64_t>(L.weight.rows()), static_cast<std::uint64_t>(L.weight.cols())});
    ck.put(p + ".bias", std::span<const double>(L.bias.data(), L.bias.size()));
    if (L.norm_gain.size() > 0)
      ck.put(p + ".norm_gain", std::span<const double>(L.norm_gain.data(), L.norm_gain.size()));
  }
}

inline void get_layers(const Checkpoint& ck, const std::string& prefix, std::vector<nn::Layer>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& L = layers[l];
    const std::string p = prefix + ".layer" + std::to_string(l);
    auto copy = [&](const std::string& name, double* dst, Eigen::Index n) {
      const auto& v = ck.f64(name);
      if (static_cast<Eigen::Index>(v.size()) != n) throw IoError("entry '" + name + "' has wrong size");
      std::copy(v.begin(), v.end(), dst);
    };
    copy(p + ".weight", L.weight.data(), L.weight.size());
    copy(p + ".bias", L.bias.data(), L.bias.size());
    if (L.norm_gain.size() > 0) copy(p + ".norm_gain", L.norm_gain.data(), L.norm_gain.size());
  }
}

}  // namespace detail

inline void put_network(Checkpoint& ck, const std::string& name, const nn::MlpParams& params) {
  std::vector<std::uint64_t> sizes(params.layer_sizes.begin(), params.layer_sizes.end());
  ck.put_u64(name + ".layer_sizes", sizes);
  ck.put_count(name + ".seed", params.seed);
  detail::put_layers(ck, name, params.layers);
}

inline nn::MlpParams get_network(const Checkpoint& ck, const std::string& name) {
  const auto& sizes = ck.u64(name + ".layer_sizes");
  auto params = nn::MlpParams::init(std::vector<std::size_t>(sizes.begin(), sizes.end()),
                                    ck.count(name + ".seed"));
  detail::get_layers(ck, name, params.layers);
  return params;
}

inline void put_optimizer(Checkpoint& ck, const std::string& name, const nn::OptimizerState& s) {
  const double cfg[] = {s.config.learning_rate, s.config.decay_1, s.config.decay_2, s.config.epsilon};
  ck.put(name + ".config", cfg);
  ck.put_count(name + ".step_count", s.step_count);
  ck.put_count(name + ".skipped_tensors", s.skipped_tensors);
  detail::put_layers(ck, name + ".m", s.first_moment.layers);
  detail::put_layers(ck, name + ".v", s.second_moment.layers);
}

inline nn::OptimizerState get_optimizer(const Checkpoint& ck, const std::string& name,
                                        const nn::MlpParams& params) {
  const auto& cfg = ck.f64(name + ".config");
  if (cfg.size() != 4) throw IoError("entry '" + name + ".config' has wrong size");
  auto s = nn::OptimizerState::for_params(params, {cfg[0], cfg[1], cfg[2], cfg[3]});
  s.step_count = ck.count(name + ".step_count");
  s.skipped_tensors = ck.count(name + ".skipped_tensors");
  detail::get_layers(ck, name + ".m", s.first_moment.layers);
  detail::get_layers(ck, name + ".v", s.second_moment.layers);
  return s;
}

}  // namespace slacksac::io
