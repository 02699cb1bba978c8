// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Model checkpoints.
//
//   magic "RSPKCKPT", u32 version (1), u32-length JSON header, u32 tensor
//   count, then per tensor: u32-length name, u32 rank, rank x i32 dims,
//   float32 values. Little-endian throughout.
//
// The header holds the network descriptor (family, name, input_dim,
// init_seed) plus caller metadata; load_checkpoint() rebuilds the network
// from the descriptor and restores the weights. A readable manifest with the
// input kind and tap widths is written next to it by write_manifest().

#ifndef RESPKIT_CHECKPOINT_HPP_
#define RESPKIT_CHECKPOINT_HPP_

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "respkit/binio.hpp"
#include "respkit/errors.hpp"
#include "respkit/models.hpp"

namespace respkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json descriptor_to_json(const NetworkDescriptor& d) {
  return {{"family", d.family}, {"name", d.name}, {"input_dim", d.input_dim}, {"init_seed", d.init_seed}};
}

inline NetworkDescriptor descriptor_from_json(const nlohmann::json& j) {
  try {
    return {j.at("family").get<std::string>(), j.at("name").get<std::string>(), j.at("input_dim").get<int>(),
            j.at("init_seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad network descriptor: ") + e.what());
  }
}

/// Input kind, shape and tap widths of `net`.
inline nlohmann::json network_manifest(const Network& net) {
  nlohmann::json taps = nlohmann::json::object();
  for (const auto& t : net.taps()) taps[t.name] = t.width;
  const bool spectrogram = net.input_shape().size() == 3;
  return {{"network", descriptor_to_json(net.descriptor())},
          {"input_kind", spectrogram ? "wavelet" : "embedding"},
          {"input_shape", net.input_shape()},
          {"taps", taps},
          {"parameters", net.parameter_count()}};
}

struct LoadedCheckpoint {
  Network net;
  nlohmann::json metadata;
};

inline void save_checkpoint(const std::filesystem::path& path, const Network& net,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
  binio::Writer w;
  w.bytes("RSPKCKPT", 8);
  w.u32(kCheckpointVersion);
  w.str(nlohmann::json{{"network", descriptor_to_json(net.descriptor())}, {"metadata", metadata}}.dump());
  const auto state = net.state();
  w.u32(static_cast<std::uint32_t>(state.size()));
  for (const auto& t : state) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (int d : t.value.shape()) w.i32(d);
    w.floats(t.value.data(), t.value.size());
  }
  w.save(path);
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto r = binio::Reader::load(path);
  r.expect_magic("RSPKCKPT");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw FormatError(path.string() + ": unsupported checkpoint version");
  nlohmann::json header;
  NetworkDescriptor descriptor;
  try {
    header = nlohmann::json::parse(r.str());
    descriptor = descriptor_from_json(header.at("network"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  Network net = build_network(descriptor);
  const auto count = r.u32();
  std::vector<NamedTensor> state;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw FormatError(path.string() + ": implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.i32();
      if (d < 0) throw FormatError(path.string() + ": negative dimension");
    }
    if (shape_size(shape) > r.remaining() / sizeof(float)) throw FormatError(path.string() + ": truncated file");
    t.value = Tensor(shape);
    r.floats(t.value.data(), t.value.size());
    state.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes");
  net.load_state(state);
  return {std::move(net), header.value("metadata", nlohmann::json::object())};
}

inline void write_manifest(const std::filesystem::path& path, const Network& net, const nlohmann::json& extra = {}) {
  nlohmann::json m = network_manifest(net);
  if (extra.is_object()) m.update(extra);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << m.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace respkit

#endif  // RESPKIT_CHECKPOINT_HPP_
