#include "amcr/checkpoint.hpp"

#include <cstring>

#include "byteio.hpp"

namespace amcr {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'C', 'P'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  auto build_header = [&](std::size_t base) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    std::size_t off = base;
    for (const auto& [name, tensor] : ckpt.tensors) {
      list.push_back({{"name", name}, {"shape", tensor.shape}, {"offset", off}});
      off += tensor.size() * 4;
    }
    nlohmann::ordered_json h{{"tensors", list}, {"meta", ckpt.meta}};
    return h.dump();
  };
  std::string header = build_header(0);
  for (;;) {
    std::string next = build_header(4 + 2 + 4 + header.size());
    const bool settled = next.size() == header.size();
    header = std::move(next);
    if (settled) break;
  }

  std::size_t payload = 0;
  for (const auto& [name, tensor] : ckpt.tensors) payload += tensor.size() * 4;
  std::string out;
  out.reserve(4 + 2 + 4 + header.size() + payload);
  out.append(kMagic, 4);
  byteio::put_u16(out, kVersion);
  byteio::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  for (const auto& [name, tensor] : ckpt.tensors)
    for (float v : tensor.data) byteio::put_f32(out, v);
  byteio::write_file(file, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  byteio::Reader r = byteio::read_file(file);
  if (r.raw(4, "magic") != std::string(kMagic, 4)) {
    r.pos = 0;
    r.fail("bad magic, not a checkpoint");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kVersion) {
    r.pos = 4;
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_len = r.u32("header length");
  const std::string header_text = r.raw(header_len, "header");

  Checkpoint ckpt;
  nlohmann::ordered_json h;
  try {
    h = nlohmann::ordered_json::parse(header_text);
    ckpt.meta = h.at("meta");
    for (const auto& entry : h.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      Tensor t(shape);
      r.pos = offset;
      const std::string raw = r.raw(t.size() * 4, name.c_str());
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(raw.data() + 4 * i);
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                   (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) |
                                   (static_cast<std::uint32_t>(p[3]) << 24);
        std::memcpy(&t.data[i], &bits, 4);
      }
      ckpt.tensors.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": malformed checkpoint header: " + e.what());
  }
  return ckpt;
}

Checkpoint checkpoint_from_network(const Network& net, nlohmann::ordered_json meta) {
  Checkpoint ckpt;
  meta["model"] = net.config.to_json();
  ckpt.meta = std::move(meta);
  for (const auto& p : net.params) ckpt.tensors.emplace_back(p.name, p.value);
  return ckpt;
}

Network network_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("model"))
    throw FormatError("checkpoint carries no model configuration");
  const ModelConfig config = ModelConfig::from_json(ckpt.meta.at("model"));
  RngStream dummy(0, rng_streams::kInit);
  Network net = build_model<float>(config, dummy);
  for (auto& p : net.params) {
    const Tensor* stored = ckpt.find(p.name);
    if (!stored)
      throw FormatError("checkpoint is missing parameter `" + p.name + "`");
    if (stored->shape != p.value.shape)
      throw FormatError("checkpoint parameter `" + p.name + "` has shape " +
                        stored->shape_string() + ", model expects " + p.value.shape_string());
    p.value = *stored;
  }
  return net;
}

}  // namespace amcr
