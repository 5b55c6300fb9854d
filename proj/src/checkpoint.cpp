#include "bml/nn/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bml::nn {
namespace {

constexpr char kMagic[8] = {'B', 'M', 'L', 'F', 'F', 'C', 'I', 'N'};

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t pos) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= T(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return value;
}

std::runtime_error bad(const fs::path& path, const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const InpainterModel<float>& model, const fs::path& path) {
  const ArchConfig& a = model.arch();
  const TrainRecord& t = model.record();
  nlohmann::ordered_json header;
  header["format"] = "bml-ffc-inpainter";
  header["arch"] = {{"encoder_channels", a.encoder_channels}, {"width", a.width},
                    {"decoder_channels", a.decoder_channels}, {"blocks", a.blocks},
                    {"alpha", a.alpha},                       {"kernel", a.kernel}};
  header["init_seed"] = model.init_seed();
  header["train"] = {{"learning_rate", t.learning_rate}, {"steps", t.steps},   {"batch_size", t.batch_size},
                     {"lambda_out", t.lambda_out},       {"seed", t.seed},     {"resolution", t.resolution}};
  auto& table = header["tensors"] = nlohmann::ordered_json::array();
  std::size_t total = 0;
  for (const auto* p : model.params()) {
    table.push_back({{"name", p->name}, {"shape", p->shape}, {"count", p->size()}});
    total += static_cast<std::size_t>(p->size());
  }
  const std::string text = header.dump();

  std::string blob(kMagic, kMagic + 8);
  put_le<std::uint32_t>(blob, kCheckpointVersion);
  put_le<std::uint32_t>(blob, 0);
  put_le<std::uint64_t>(blob, text.size());
  blob += text;
  blob.reserve(blob.size() + 4 * total);
  for (const auto* p : model.params())
    for (Index i = 0; i < p->size(); ++i) put_le<std::uint32_t>(blob, std::bit_cast<std::uint32_t>(p->value.data()[i]));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw bad(path, "cannot open for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw bad(path, "write failed");
}

InpainterModel<float> load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bad(path, "cannot open checkpoint");
  const std::string blob{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (blob.size() < 24 || std::memcmp(blob.data(), kMagic, 8) != 0) throw bad(path, "not an inpainter checkpoint");
  if (get_le<std::uint32_t>(blob, 8) != kCheckpointVersion) throw bad(path, "unsupported checkpoint version");
  const auto header_len = get_le<std::uint64_t>(blob, 16);
  if (24 + header_len > blob.size()) throw bad(path, "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.begin() + 24, blob.begin() + 24 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw bad(path, std::string("bad header: ") + e.what());
  }

  ArchConfig arch;
  const auto& a = header.at("arch");
  arch.encoder_channels = a.at("encoder_channels").get<Index>();
  arch.width = a.at("width").get<Index>();
  arch.decoder_channels = a.at("decoder_channels").get<Index>();
  arch.blocks = a.at("blocks").get<int>();
  arch.alpha = a.at("alpha").get<double>();
  arch.kernel = a.at("kernel").get<Index>();
  InpainterModel<float> model(arch, header.at("init_seed").get<std::uint64_t>());

  const auto& t = header.at("train");
  TrainRecord& rec = model.record();
  rec.learning_rate = t.at("learning_rate").get<double>();
  rec.steps = t.at("steps").get<int>();
  rec.batch_size = t.at("batch_size").get<int>();
  rec.lambda_out = t.at("lambda_out").get<double>();
  rec.seed = t.at("seed").get<std::uint64_t>();
  rec.resolution = t.at("resolution").get<Index>();

  const auto& table = header.at("tensors");
  const auto& params = model.params();
  if (table.size() != params.size()) throw bad(path, "tensor table does not match the architecture");
  std::size_t pos = 24 + header_len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    if (table[i].at("name").get<std::string>() != p->name || table[i].at("count").get<Index>() != p->size())
      throw bad(path, "tensor '" + p->name + "' does not match the architecture");
    if (pos + 4 * static_cast<std::size_t>(p->size()) > blob.size()) throw bad(path, "truncated payload");
    for (Index k = 0; k < p->size(); ++k, pos += 4) p->value.data()[k] = std::bit_cast<float>(get_le<std::uint32_t>(blob, pos));
  }
  if (pos != blob.size()) throw bad(path, "trailing bytes after payload");
  return model;
}

}  // namespace bml::nn
