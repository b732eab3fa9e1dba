#pragma once

// Checkpoint file layout:
//   "SWQK" | u32 version | u64 header length | JSON header | f32 data
// All integers and floats little-endian. The header holds the model config,
// epoch, rng seed, history, optimizer scalars and a tensor directory
// (name, shape, byte offset into the data section) in file order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinqa/json_io.hpp"
#include "swinqa/model_stats.hpp"
#include "swinqa/optim.hpp"
#include "swinqa/swin.hpp"

namespace swinqa {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_acc = 0;  // percent
  std::optional<double> val_auc;
  double lr = 0;  // learning rate of the epoch's last optimizer step

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  SwinConfig config;
  std::vector<NamedTensor> params;
  std::optional<AdamState> optim;  // moments ordered like params
  std::size_t epoch = 0;           // completed epochs
  std::uint64_t seed = 0;          // all training randomness derives from (seed, epoch, ...)
  std::vector<HistoryRow> history;
  Json extra = Json::object();     // free-form (train config, selection info)
};

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& rows) {
  out << "epoch,train_loss,val_acc,val_auc,lr\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.6f,", r.epoch, r.train_loss, r.val_acc);
    out << buf;
    if (r.val_auc) {
      std::snprintf(buf, sizeof buf, "%.9f", *r.val_auc);
      out << buf;
    } else {
      out << "NA";
    }
    std::snprintf(buf, sizeof buf, ",%.9g\n", r.lr);
    out << buf;
  }
}

template <class T>
std::vector<NamedTensor> export_params(const SwinParams<T>& p) {
  std::vector<NamedTensor> out;
  SwinParams<T> handles = p;  // shares storage; named() needs a mutable object
  for (auto& [name, t] : handles.named()) {
    NamedTensor e{name, t->shape(), {}};
    e.data.reserve(t->numel());
    for (T v : t->data()) e.data.push_back(static_cast<float>(v));
    out.push_back(std::move(e));
  }
  return out;
}

// Builds parameters for `cfg` and fills them from `tensors` by name.
template <class T>
SwinParams<T> import_params(const SwinConfig& cfg, const std::vector<NamedTensor>& tensors) {
  auto p = init_params<T>(cfg, nullptr);
  auto named = p.named();
  if (named.size() != tensors.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& src = tensors[i];
    auto& [name, dst] = named[i];
    if (src.name != name || src.shape != dst->shape()) {
      throw CheckpointError("checkpoint tensor '" + src.name + "' " + to_string(src.shape) + " does not match '" + name +
                            "' " + to_string(dst->shape()));
    }
    auto out = dst->mutable_data();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<T>(src.data[k]);
  }
  return p;
}

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(const std::string& s, std::size_t pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > s.size()) throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  return v;
}
inline void put_floats(std::string& s, const std::vector<float>& v) {
  for (float f : v) put_u32(s, std::bit_cast<std::uint32_t>(f));
}

inline Json history_json(const std::vector<HistoryRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"epoch", r.epoch},
                   {"train_loss", r.train_loss},
                   {"val_acc", r.val_acc},
                   {"val_auc", r.val_auc ? Json(*r.val_auc) : Json(nullptr)},
                   {"lr", r.lr}});
  }
  return out;
}

}  // namespace detail

inline std::string checkpoint_bytes(const Checkpoint& ck) {
  Json dir = Json::array();
  std::uint64_t offset = 0;
  auto add_dir = [&](const std::string& name, const Shape& shape, std::size_t n) {
    if (numel_of(shape) != n) throw CheckpointError("tensor '" + name + "' data does not match its shape");
    dir.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    offset += 4 * static_cast<std::uint64_t>(n);
  };
  for (const auto& t : ck.params) add_dir(t.name, t.shape, t.data.size());
  Json optim = nullptr;
  if (ck.optim) {
    const auto& o = *ck.optim;
    if (o.m.size() != ck.params.size() || o.v.size() != ck.params.size()) {
      throw CheckpointError("optimizer state does not match parameter list");
    }
    for (std::size_t i = 0; i < ck.params.size(); ++i) add_dir("adam.m." + ck.params[i].name, ck.params[i].shape, o.m[i].size());
    for (std::size_t i = 0; i < ck.params.size(); ++i) add_dir("adam.v." + ck.params[i].name, ck.params[i].shape, o.v[i].size());
    optim = {{"step", o.step}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}};
  }
  const Json header{{"format", "swinqa-checkpoint"},
                    {"config", to_json(ck.config)},
                    {"epoch", ck.epoch},
                    {"rng", {{"seed", ck.seed}, {"next_epoch", ck.epoch}}},
                    {"history", detail::history_json(ck.history)},
                    {"optimizer", optim},
                    {"param_count", count_params(ck.config)},
                    {"tensors", dir},
                    {"extra", ck.extra}};
  const std::string text = header.dump();
  std::string out = "SWQK";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, text.size());
  out += text;
  for (const auto& t : ck.params) detail::put_floats(out, t.data);
  if (ck.optim) {
    for (const auto& m : ck.optim->m) detail::put_floats(out, m);
    for (const auto& v : ck.optim->v) detail::put_floats(out, v);
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "SWQK") != 0) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = detail::get_le(bytes, 4, 4);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = detail::get_le(bytes, 8, 8);
  if (16 + header_len > bytes.size()) throw CheckpointError("checkpoint truncated (header)");
  Json h;
  try {
    h = Json::parse(bytes.substr(16, header_len));
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::size_t data_start = 16 + header_len;
  Checkpoint ck;
  try {
    ck.config = swin_config_from_json(h.at("config"), "checkpoint.config");
    ck.epoch = h.at("epoch").get<std::size_t>();
    ck.seed = h.at("rng").at("seed").get<std::uint64_t>();
    for (const auto& r : h.at("history")) {
      HistoryRow row;
      row.epoch = r.at("epoch").get<std::size_t>();
      row.train_loss = r.at("train_loss").get<double>();
      row.val_acc = r.at("val_acc").get<double>();
      if (!r.at("val_auc").is_null()) row.val_auc = r.at("val_auc").get<double>();
      row.lr = r.at("lr").get<double>();
      ck.history.push_back(row);
    }
    ck.extra = h.at("extra");
    std::vector<NamedTensor> all;
    for (const auto& d : h.at("tensors")) {
      NamedTensor t{d.at("name").get<std::string>(), d.at("shape").get<Shape>(), {}};
      const auto n = numel_of(t.shape);
      const auto off = data_start + d.at("offset").get<std::size_t>();
      if (off + 4 * n > bytes.size()) throw CheckpointError("checkpoint truncated (tensor '" + t.name + "')");
      t.data.resize(n);
      for (std::size_t k = 0; k < n; ++k) t.data[k] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(bytes, off + 4 * k, 4)));
      all.push_back(std::move(t));
    }
    const bool has_optim = !h.at("optimizer").is_null();
    const std::size_t np = has_optim ? all.size() / 3 : all.size();
    if (has_optim && np * 3 != all.size()) throw CheckpointError("optimizer tensor directory is inconsistent");
    ck.params.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + static_cast<long>(np)));
    if (has_optim) {
      AdamState o;
      const auto& oj = h.at("optimizer");
      o.step = oj.at("step").get<std::uint64_t>();
      o.beta1 = oj.at("beta1").get<double>();
      o.beta2 = oj.at("beta2").get<double>();
      o.eps = oj.at("eps").get<double>();
      for (std::size_t i = 0; i < np; ++i) {
        if (all[np + i].name != "adam.m." + ck.params[i].name || all[2 * np + i].name != "adam.v." + ck.params[i].name) {
          throw CheckpointError("optimizer tensor order does not match parameters");
        }
        o.m.push_back(std::move(all[np + i].data));
        o.v.push_back(std::move(all[2 * np + i].data));
      }
      ck.optim = std::move(o);
    }
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }
  std::uint64_t stored = 0;
  for (const auto& t : ck.params) stored += t.data.size();
  if (stored != count_params(ck.config)) {
    throw CheckpointError("checkpoint holds " + std::to_string(stored) + " parameters, config implies " +
                          std::to_string(count_params(ck.config)));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = checkpoint_bytes(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  return parse_checkpoint(bytes);
}

}  // namespace swinqa
