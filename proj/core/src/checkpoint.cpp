#include "blastmamba/checkpoint.hpp"

#include <map>

#include "blastmamba/binary_io.hpp"
#include "blastmamba/error.hpp"

namespace bm {

namespace {
constexpr char kMagic[8] = {'B', 'M', 'C', 'K', 'P', 'T', '\0', '\0'};
}

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& w) {
  io::ByteWriter out;
  out.put_bytes(kMagic, sizeof kMagic);
  out.put(kCheckpointVersion);
  out.put_string(w.config.serialize());
  const auto params = w.named_parameters();
  out.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    out.put_string(name);
    out.put(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) out.put(static_cast<std::uint64_t>(e));
    for (double v : t.data()) out.put(v);
  }
  return std::move(out.bytes());
}

ModelWeights decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader in(bytes);
  char magic[sizeof kMagic];
  in.get_bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + sizeof magic, kMagic)) throw DataError("not a checkpoint file (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const ModelConfig config = ModelConfig::parse(in.get_string());
  ModelWeights w = init_model(config, 0);

  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : w.named_parameters()) by_name.emplace(name, t);

  const auto count = in.get<std::uint32_t>();
  if (count != by_name.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                    std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = in.get_string();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint tensor '" + name + "' is not part of the model");
    const auto rank = in.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(in.get<std::uint64_t>());
    Tensor& t = it->second;
    if (shape != t.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                      shape_str(t.shape()));
    }
    for (double& v : t.mutable_data()) v = in.get<double>();
  }
  if (!in.at_end()) throw DataError("trailing bytes after checkpoint payload");
  return w;
}

void save_checkpoint(const std::filesystem::path& path, const ModelWeights& w) {
  io::write_file(path, encode_checkpoint(w));
}

ModelWeights load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace bm
