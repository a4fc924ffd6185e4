#include "cir/checkpoint.hpp"

#include <fstream>

#include "cir/embedding_io.hpp"
#include "cir/error.hpp"
#include "json.hpp"

namespace cir {

namespace {

constexpr const char* kFormat = "cir-composer";
constexpr int kVersion = 1;

std::filesystem::path weights_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p += ".weights";
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ComposerParams& params, const CheckpointInfo& info) {
  const auto& d = params.dims;
  nlohmann::json manifest{
      {"format", kFormat},
      {"version", kVersion},
      {"dims",
       {{"image_dim", d.image_dim}, {"hidden_dim", d.hidden_dim}, {"vocab_buckets", d.vocab_buckets},
        {"output_dim", d.output_dim}}},
      {"tau", params.tau},
      {"seed", info.seed},
      {"step", info.step},
      {"weights", weights_path(path).filename().string()},
      {"loss_trace", info.losses},
  };

  std::size_t total = 0;
  const auto tensors = params.tensors();
  for (std::size_t t = 0; t + 1 < tensors.size(); ++t) total += tensors[t].size();
  EmbeddingMatrix blob(1, total);
  std::size_t off = 0;
  for (std::size_t t = 0; t + 1 < tensors.size(); ++t) {
    for (double x : tensors[t]) blob.data()[off++] = static_cast<float>(x);
  }
  write_embeddings(weights_path(path), blob);

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  os << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(is);
    if (manifest.at("format").get<std::string>() != kFormat || manifest.at("version").get<int>() != kVersion) {
      throw Error(ErrorKind::Format, path.string() + ": unsupported checkpoint format");
    }
    const auto& dj = manifest.at("dims");
    ComposerDims dims{dj.at("image_dim").get<std::size_t>(), dj.at("hidden_dim").get<std::size_t>(),
                      dj.at("vocab_buckets").get<std::size_t>(), dj.at("output_dim").get<std::size_t>()};
    LoadedCheckpoint out{ComposerParams::zeros(dims), {}};
    out.params.tau = manifest.at("tau").get<double>();
    out.info.seed = manifest.at("seed").get<std::uint64_t>();
    out.info.step = manifest.at("step").get<std::uint64_t>();
    out.info.losses = manifest.value("loss_trace", std::vector<double>{});

    const auto blob = read_embeddings(path.parent_path() / manifest.at("weights").get<std::string>());
    auto tensors = out.params.tensors();
    std::size_t expected = 0;
    for (std::size_t t = 0; t + 1 < tensors.size(); ++t) expected += tensors[t].size();
    if (blob.data().size() != expected) throw Error(ErrorKind::Format, "weight blob size does not match dims");
    std::size_t off = 0;
    for (std::size_t t = 0; t + 1 < tensors.size(); ++t) {
      for (double& x : tensors[t]) x = blob.data()[off++];
    }
    out.params.validate();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

}  // namespace cir
