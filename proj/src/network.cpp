#include "metasr/network.hpp"

#include <cmath>
#include <stdexcept>

#include "metasr/rng.hpp"

namespace metasr {

void validate_arch(const ArchDescriptor& arch) {
  if (arch.depth < 2)
    throw std::invalid_argument("arch: depth must be >= 2, got " +
                                std::to_string(arch.depth));
  if (arch.features < 1) throw std::invalid_argument("arch: features must be >= 1");
  if (arch.kernel_size < 1 || arch.kernel_size % 2 == 0)
    throw std::invalid_argument("arch: kernel_size must be odd and >= 1, got " +
                                std::to_string(arch.kernel_size));
  if (arch.in_channels < 1 || arch.out_channels < 1)
    throw std::invalid_argument("arch: channel counts must be >= 1");
  if (arch.in_channels != arch.out_channels)
    throw std::invalid_argument("arch: residual skip needs in_channels == out_channels");
}

namespace {

// (out_channels, in_channels) per layer.
std::vector<std::pair<int, int>> layer_channels(const ArchDescriptor& a) {
  std::vector<std::pair<int, int>> io;
  io.reserve(static_cast<std::size_t>(a.depth));
  for (int l = 0; l < a.depth; ++l) {
    const int in = l == 0 ? a.in_channels : a.features;
    const int out = l == a.depth - 1 ? a.out_channels : a.features;
    io.emplace_back(out, in);
  }
  return io;
}

}  // namespace

HostParams build(const ArchDescriptor& arch, std::uint64_t seed) {
  validate_arch(arch);
  Rng rng = Rng::stream(seed, 0x1d17);
  HostParams params;
  params.arch = arch;
  const int k = arch.kernel_size;
  for (auto [out, in] : layer_channels(arch)) {
    const std::size_t fan_in = static_cast<std::size_t>(in) * k * k;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    HostTensor w{{out, in, k, k}, std::vector<double>(static_cast<std::size_t>(out) * fan_in)};
    for (double& v : w.data) v = stddev * rng.normal();
    params.tensors.push_back(std::move(w));
    params.tensors.push_back(HostTensor{{out}, std::vector<double>(static_cast<std::size_t>(out), 0.0)});
  }
  return params;
}

ModelParams mount(Graph& g, const HostParams& params, bool requires_grad) {
  ModelParams out;
  out.arch = params.arch;
  out.tensors.reserve(params.tensors.size());
  for (const auto& t : params.tensors)
    out.tensors.push_back(g.value(t.shape, t.data, requires_grad));
  return out;
}

HostParams snapshot(const ModelParams& params) {
  HostParams out;
  out.arch = params.arch;
  out.tensors.reserve(params.tensors.size());
  for (Tensor t : params.tensors) out.tensors.push_back(to_host(t));
  return out;
}

ModelParams with_tensors(const ModelParams& like, std::vector<Tensor> tensors) {
  if (tensors.size() != like.tensors.size())
    throw std::invalid_argument("with_tensors: tensor count mismatch");
  return ModelParams{like.arch, std::move(tensors)};
}

Tensor forward(const ModelParams& params, Tensor x) {
  const ArchDescriptor& a = params.arch;
  if (x.shape().size() != 4 || x.shape()[1] != a.in_channels)
    throw std::invalid_argument("forward: input " + shape_str(x.shape()) + " needs " +
                                std::to_string(a.in_channels) + " channels");
  if (params.tensors.size() != static_cast<std::size_t>(2 * a.depth))
    throw std::invalid_argument("forward: wrong parameter count for arch");
  const int pad = (a.kernel_size - 1) / 2;
  Tensor h = x;
  for (int l = 0; l < a.depth; ++l) {
    h = conv2d(h, params.tensors[static_cast<std::size_t>(2 * l)],
               params.tensors[static_cast<std::size_t>(2 * l + 1)], pad);
    if (l + 1 < a.depth) h = relu(h);
  }
  return add(x, h);
}

std::size_t param_count(const ArchDescriptor& arch) {
  validate_arch(arch);
  const int k = arch.kernel_size;
  std::size_t count = 0;
  for (auto [out, in] : layer_channels(arch))
    count += static_cast<std::size_t>(out) * in * k * k + static_cast<std::size_t>(out);
  return count;
}

std::size_t param_count(const HostParams& params) {
  std::size_t count = 0;
  for (const auto& t : params.tensors) count += t.data.size();
  return count;
}

}  // namespace metasr
