// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "wmattr/error.hpp"

namespace wmattr::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO writes host-order doubles and assumes little-endian");

namespace {

constexpr char kMagic[8] = {'W', 'M', 'A', 'T', 'T', 'R', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("checkpoint: unexpected end of data");
  return value;
}

std::string get_string(std::istream& in, std::uint64_t length) {
  if (length > (1ULL << 32)) throw DataError("checkpoint: implausible string length");
  std::string s(length, '\0');
  in.read(s.data(), static_cast<std::streamsize>(length));
  if (!in) throw DataError("checkpoint: unexpected end of data");
  return s;
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  return {
      {"static_width", c.static_width},   {"temporal_width", c.temporal_width},
      {"static_hidden", c.static_hidden}, {"lstm_hidden", c.lstm_hidden},
      {"head_hidden", c.head_hidden},     {"dropout", c.dropout},
      {"batch_norm", c.batch_norm},       {"bn_momentum", c.bn_momentum},
      {"bn_epsilon", c.bn_epsilon},       {"seed", c.seed},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.static_width = j.at("static_width").get<std::size_t>();
    c.temporal_width = j.at("temporal_width").get<std::size_t>();
    c.static_hidden = j.at("static_hidden").get<std::vector<std::size_t>>();
    c.lstm_hidden = j.at("lstm_hidden").get<std::vector<std::size_t>>();
    c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
    c.dropout = j.at("dropout").get<double>();
    c.batch_norm = j.at("batch_norm").get<bool>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.bn_epsilon = j.at("bn_epsilon").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad model config: ") + e.what());
  }
  return c;
}

void write_checkpoint(std::ostream& out, const MultiTaskModel& model) {
  nlohmann::json header = config_to_json(model.config());
  nlohmann::json frozen = nlohmann::json::array();
  for (Component c : kAllComponents) {
    if (model.frozen(c)) frozen.push_back(std::string(component_name(c)));
  }
  header["frozen"] = frozen;
  const std::string header_text = header.dump();

  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  const auto state = model.state();
  put<std::uint64_t>(out, state.size());
  for (const auto& [name, tensor] : state) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor->rank()));
    for (auto d : tensor->shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(tensor->data()),
              static_cast<std::streamsize>(tensor->size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint: write failed");
}

MultiTaskModel read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError("checkpoint: bad magic, not a model checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(get_string(in, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }
  MultiTaskModel model = MultiTaskModel::build(config_from_json(header));

  std::map<std::string, Tensor*> slots;
  for (auto& [name, tensor] : model.state()) slots.emplace(name, tensor);

  const auto count = get<std::uint64_t>(in);
  if (count != slots.size()) {
    throw DataError("checkpoint: expected " + std::to_string(slots.size()) + " tensors, found " +
                    std::to_string(count));
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = get_string(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    ad::Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in);
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint: unknown tensor '" + name + "'");
    Tensor& target = *it->second;
    if (target.shape() != shape) {
      throw DataError("checkpoint: tensor '" + name + "' has shape " + ad::shape_to_string(shape) +
                      ", model expects " + ad::shape_to_string(target.shape()));
    }
    in.read(reinterpret_cast<char*>(target.data()),
            static_cast<std::streamsize>(target.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated tensor '" + name + "'");
    slots.erase(it);
  }
  for (const auto& name : header.value("frozen", nlohmann::json::array())) {
    const auto n = name.get<std::string>();
    for (Component c : kAllComponents) {
      if (component_name(c) == n) model.set_frozen(c, true);
    }
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const MultiTaskModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, model);
}

MultiTaskModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace wmattr::nn
