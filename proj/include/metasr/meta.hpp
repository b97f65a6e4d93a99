#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "metasr/degrade.hpp"
#include "metasr/image.hpp"
#include "metasr/kernels.hpp"
#include "metasr/network.hpp"

namespace metasr {

using Corpus = std::vector<Image>;

// One LR/HR supervision pair; the LR side is already bicubic-upscaled to
// the HR patch size.
struct PatchPair {
  Image lr_up;
  Image hr;
};

// One meta-learning task: super-resolution under a single blur kernel.
struct Task {
  KernelSpec spec;
  Kernel kernel;
  SubsampleMode mode = SubsampleMode::kDirect;
  int scale = 2;
  std::vector<PatchPair> train_pairs;  // drive the inner updates
  std::vector<PatchPair> test_pairs;   // scored by the meta-objective
};

// Every hyperparameter of the three training stages.
struct RunConfig {
  ArchDescriptor arch;
  double alpha = 0.01;        // task-level learning rate
  double beta = 1e-4;         // meta learning rate
  int unroll_steps = 5;       // inner gradient updates per task
  int patch = 64;
  int scale = 2;
  int task_batch = 4;
  int task_pairs = 4;         // |D_tr| = |D_te| per task
  long pretrain_iters = 2000;
  double pretrain_lr = 1e-4;
  long meta_iters = 2000;
  std::uint64_t seed = 0;
  long loss_decay_horizon = -1;  // iters; -1 selects meta_iters/2
  bool first_order = false;      // truncate gradients through the inner update
  SubsampleMode mode = SubsampleMode::kDirect;
  int scale_min = 0;  // multi-scale task sampling when scale_min>0
  int scale_max = 0;
  int threads = 1;    // parallel per-task adaptation; reduction order is fixed

  long horizon() const {
    if (loss_decay_horizon >= 0) return loss_decay_horizon;
    return meta_iters / 2;
  }
};

void validate_config(const RunConfig& cfg);

// Progress/checkpoint sinks; either may be empty.
struct TrainHooks {
  std::function<void(long iter, double loss)> on_iter;
  std::function<void(long iter, const HostParams&)> on_checkpoint;
};

// ---- Generic unrolled adaptation over an arbitrary differentiable loss.
// The network-level operations below are thin wrappers over these; the
// toy fixtures in the tests drive them directly.

using LossFn = std::function<Tensor(Graph&, std::span<const Tensor>)>;

struct UnrollResult {
  std::vector<std::vector<Tensor>> steps;  // adapted parameters, one entry per step
  std::vector<Tensor> train_losses;        // loss driving each step
};

// K chained functional gradient-descent steps on train_loss. The chain
// stays differentiable w.r.t. the initial parameters unless first_order,
// which detaches each step's gradients.
UnrollResult unroll_adapt(Graph& g, std::span<const Tensor> params,
                          const LossFn& train_loss, double alpha, int steps,
                          bool first_order = false);

// Weighted sum over steps and tasks of test_loss evaluated at the adapted
// parameters; tasks are reduced in index order.
Tensor unrolled_objective(Graph& g, std::span<const Tensor> params,
                          std::span<const std::pair<LossFn, LossFn>> tasks,
                          double alpha, int steps, std::span<const double> weights,
                          bool first_order = false);

// ---- Network-level operations.

// Stage-1 pretraining on the bicubic degradation model: minimizes the L1
// loss between HR patches and the network output for bicubic
// down-then-up-scaled inputs. Starts from build(cfg.arch, cfg.seed).
HostParams pretrain(const Corpus& corpus, const RunConfig& cfg,
                    const TrainHooks& hooks = {});

// Draws a kernel from the sampling distribution, crops 2*task_pairs
// distinct HR patches, degrades them and pre-upscales the LR side.
Task sample_task(const Corpus& corpus, const RunConfig& cfg, Rng& rng);

struct AdaptedParams {
  std::vector<ModelParams> steps;
  std::vector<double> train_losses;
};

// Inner loop (task-level adaptation) of the meta-training stage.
AdaptedParams inner_adapt(Graph& g, const ModelParams& params, const Task& task,
                          double alpha, int steps, bool first_order = false);

// Per-step loss weights: uniform at iter 0, non-final weights decaying
// linearly to zero over the horizon with their mass moved to the final
// step. Always sums to 1.
std::vector<double> step_loss_weights(long meta_iter, int steps, long horizon);
std::vector<double> step_loss_weights(long meta_iter, const RunConfig& cfg);

// Weighted task-test loss at every adapted parameter set, summed across
// tasks in index order; differentiable w.r.t. params including the
// second-order terms (unless first_order).
Tensor meta_objective(Graph& g, const ModelParams& params,
                      std::span<const Task> tasks, double alpha, int steps,
                      std::span<const double> weights, bool first_order = false);

// Stage-2 meta-transfer training: cfg.meta_iters outer Adam updates of the
// summed task-test losses, starting from the pretrained parameters.
HostParams meta_train(const HostParams& theta_t, const Corpus& corpus,
                      const RunConfig& cfg, const TrainHooks& hooks = {});

}  // namespace metasr
