#include "metasr/zssr.hpp"

#include <stdexcept>

#include "metasr/metrics.hpp"

namespace metasr {

namespace {

enum class Optimizer { kGradientDescent, kAdam };

AdaptResult self_supervised_adapt(const Image& lr, const Kernel& kernel,
                                  SubsampleMode mode, int scale,
                                  const HostParams& init, int steps, double rate,
                                  Optimizer optimizer) {
  if (steps < 0) throw std::invalid_argument("adapt: step count must be >= 0");
  if (lr.height % scale != 0 || lr.width % scale != 0)
    throw std::invalid_argument("adapt: LR extents must be divisible by the scale");

  AdaptResult result;
  HostParams params = init;

  // Single son/father pair from the test image itself.
  const Image son = make_lr_son(lr, kernel, scale, mode);
  const Image son_up = bicubic_resize(son, lr.height, lr.width);

  AdamState opt = AdamState::for_params(params.tensors);
  for (int k = 0; k < steps; ++k) {
    Graph g;
    ModelParams mounted = mount(g, params, /*requires_grad=*/true);
    Tensor loss = l1_loss(forward(mounted, image_to_tensor(g, son_up)),
                          image_to_tensor(g, lr));
    result.losses.push_back(loss.scalar());
    std::vector<Tensor> grads = backward(loss, mounted.tensors, false);
    if (optimizer == Optimizer::kGradientDescent) {
      for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        auto gd = grads[i].data();
        auto& p = params.tensors[i].data;
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= rate * gd[j];
      }
    } else {
      std::vector<HostTensor> host_grads;
      host_grads.reserve(grads.size());
      for (Tensor t : grads) host_grads.push_back(to_host(t));
      adam_step(opt, params.tensors, host_grads, rate);
    }
  }

  Graph g;
  const Image lr_up = bicubic_resize(lr, lr.height * scale, lr.width * scale);
  Tensor sr = forward(mount(g, params, false), image_to_tensor(g, lr_up));
  result.sr = tensor_to_image(sr);
  result.params = std::move(params);
  return result;
}

}  // namespace

AdaptResult meta_test(const Image& lr, const Kernel& kernel, SubsampleMode mode,
                      int scale, const HostParams& theta_m, int steps, double alpha) {
  return self_supervised_adapt(lr, kernel, mode, scale, theta_m, steps, alpha,
                               Optimizer::kGradientDescent);
}

AdaptResult zssr_baseline(const Image& lr, const Kernel& kernel, SubsampleMode mode,
                          int scale, const ArchDescriptor& arch, int steps,
                          double adam_lr, std::uint64_t seed) {
  return self_supervised_adapt(lr, kernel, mode, scale, build(arch, seed), steps,
                               adam_lr, Optimizer::kAdam);
}

AdaptResult adam_adapt(const Image& lr, const Kernel& kernel, SubsampleMode mode,
                       int scale, const HostParams& theta, int steps, double adam_lr) {
  return self_supervised_adapt(lr, kernel, mode, scale, theta, steps, adam_lr,
                               Optimizer::kAdam);
}

std::vector<double> mismatch_probe(const Image& hr, const Kernel& true_kernel,
                                   std::span<const Kernel> probes, SubsampleMode mode,
                                   int scale, const HostParams& theta_m, int steps,
                                   double alpha) {
  const Image lr = degrade(hr, DegradeSpec{true_kernel, scale, mode, 0.0});
  std::vector<double> psnrs;
  psnrs.reserve(probes.size());
  for (const Kernel& probe : probes) {
    AdaptResult run = meta_test(lr, probe, mode, scale, theta_m, steps, alpha);
    psnrs.push_back(psnr_y(run.sr, hr, scale));
  }
  return psnrs;
}

}  // namespace metasr
