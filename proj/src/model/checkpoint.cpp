#include <bit>
#include <cstring>
#include <fstream>

#include "gpio/errors.hpp"
#include "gpio/model.hpp"

namespace gpio {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'G', 'P', 'I', 'O', 'C', 'K', 'P', 'T'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GraphPerceiver& model, const json& extra) {
  const auto& store = model.parameters();
  json tensors = json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& t = store.tensors()[i];
    tensors.push_back({{"name", store.names()[i]}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  json header = {{"model", model.config().to_json()}, {"extra", extra}, {"tensors", tensors}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write checkpoint " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : store.tensors()) {
    auto d = t.data();
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw DatasetError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DatasetError(path.string() + " is not a checkpoint file");
  }
  if (len > (std::uint64_t{1} << 30)) throw DatasetError("checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DatasetError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("checkpoint header: ") + e.what());
  }
  ModelConfig cfg = ModelConfig::from_json(header.at("model"));
  Checkpoint ck{GraphPerceiver(cfg, 0), header.value("extra", json::object())};
  auto& store = ck.model.parameters();
  const auto& entries = header.at("tensors");
  if (entries.size() != store.size()) throw DatasetError("checkpoint tensor count does not match its model config");
  std::vector<double> payload;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = entries[i];
    auto& t = store.tensors()[i];
    if (e.at("name").get<std::string>() != store.names()[i] || e.at("shape").get<Shape>() != t.shape()) {
      throw DatasetError("checkpoint tensor " + e.at("name").get<std::string>() + " does not match the model layout");
    }
    auto dst = t.mutable_data();
    in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(double)));
    if (!in) throw DatasetError("truncated checkpoint payload");
  }
  return ck;
}

}  // namespace gpio
