#include "mbsr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mbsr/binio.hpp"

namespace mbsr {

namespace {
constexpr char kMagic[8] = {'M', 'B', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto& cfg = ckpt.model.config();
  out.write(kMagic, 8);
  binio::put<std::uint32_t>(out, kVersion);
  for (std::size_t v : {cfg.in_channels, cfg.features, cfg.blocks, cfg.reduction, cfg.scale})
    binio::put<std::uint64_t>(out, v);
  binio::put<std::uint8_t>(out, sizeof(T));
  const auto& slots = ckpt.model.layout().slots();
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(slots.size()));
  for (const auto& s : slots) {
    binio::put_string(out, s.name);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.shape.size()));
    for (auto d : s.shape) binio::put<std::uint64_t>(out, d);
    binio::put_array(out, ckpt.model.params().data() + s.offset, s.size);
  }
  const auto& opt = ckpt.optimizer;
  const std::size_t n = ckpt.model.params().size();
  binio::put<std::uint64_t>(out, opt.step);
  binio::put<double>(out, opt.beta1);
  binio::put<double>(out, opt.beta2);
  binio::put<double>(out, opt.eps);
  std::vector<T> zeros(n, T{});
  binio::put_array(out, opt.m.size() == n ? opt.m.data() : zeros.data(), n);
  binio::put_array(out, opt.v.size() == n ? opt.v.data() : zeros.data(), n);
  binio::put<std::uint64_t>(out, ckpt.iteration);
  if (!out) throw Error("write failed for " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error("not a checkpoint: " + path.string());
  if (binio::get<std::uint32_t>(in) != kVersion) throw Error("unsupported checkpoint version");
  SrModelConfig cfg;
  cfg.in_channels = binio::get<std::uint64_t>(in);
  cfg.features = binio::get<std::uint64_t>(in);
  cfg.blocks = binio::get<std::uint64_t>(in);
  cfg.reduction = binio::get<std::uint64_t>(in);
  cfg.scale = binio::get<std::uint64_t>(in);
  if (binio::get<std::uint8_t>(in) != sizeof(T)) throw Error("checkpoint scalar width differs from requested type");
  Checkpoint<T> ckpt{SrModel<T>(cfg), {}, 0};
  const auto count = binio::get<std::uint32_t>(in);
  const auto& slots = ckpt.model.layout().slots();
  if (count != slots.size()) throw Error("checkpoint tensor count does not match its config");
  for (const auto& s : slots) {
    if (binio::get_string(in) != s.name) throw Error("checkpoint tensor order mismatch at '" + s.name + "'");
    const auto rank = binio::get<std::uint32_t>(in);
    if (rank != s.shape.size()) throw Error("rank mismatch for '" + s.name + "'");
    for (auto d : s.shape)
      if (binio::get<std::uint64_t>(in) != d) throw Error("shape mismatch for '" + s.name + "'");
    binio::get_array(in, ckpt.model.params().data() + s.offset, s.size);
  }
  const std::size_t n = ckpt.model.params().size();
  auto& opt = ckpt.optimizer;
  opt.step = binio::get<std::uint64_t>(in);
  opt.beta1 = binio::get<double>(in);
  opt.beta2 = binio::get<double>(in);
  opt.eps = binio::get<double>(in);
  opt.m.resize(n);
  opt.v.resize(n);
  binio::get_array(in, opt.m.data(), n);
  binio::get_array(in, opt.v.data(), n);
  ckpt.iteration = binio::get<std::uint64_t>(in);
  return ckpt;
}

template void save_checkpoint<float>(const Checkpoint<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const Checkpoint<double>&, const std::filesystem::path&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace mbsr
