#include "metasr/meta.hpp"

#include <algorithm>
#include <future>
#include <stdexcept>

namespace metasr {

void validate_config(const RunConfig& cfg) {
  validate_arch(cfg.arch);
  if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0))
    throw std::invalid_argument("config: alpha and beta must be positive");
  if (cfg.unroll_steps < 1)
    throw std::invalid_argument("config: unroll_steps must be >= 1");
  if (cfg.scale < 1) throw std::invalid_argument("config: scale must be >= 1");
  if (cfg.patch < 4) throw std::invalid_argument("config: patch too small");
  if (cfg.patch % cfg.scale != 0)
    throw std::invalid_argument("config: patch must be divisible by scale");
  if (cfg.task_batch < 1 || cfg.task_pairs < 1)
    throw std::invalid_argument("config: task_batch and task_pairs must be >= 1");
  if (cfg.pretrain_iters < 0 || cfg.meta_iters < 0)
    throw std::invalid_argument("config: iteration counts must be >= 0");
  if (!(cfg.pretrain_lr > 0.0))
    throw std::invalid_argument("config: pretrain_lr must be positive");
  if (cfg.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (cfg.scale_min > 0) {
    if (cfg.scale_max < cfg.scale_min)
      throw std::invalid_argument("config: scale_max must be >= scale_min");
    for (int s = cfg.scale_min; s <= cfg.scale_max; ++s)
      if (cfg.patch % s != 0)
        throw std::invalid_argument("config: patch must be divisible by every "
                                    "scale in [scale_min, scale_max]");
  }
}

UnrollResult unroll_adapt(Graph& g, std::span<const Tensor> params,
                          const LossFn& train_loss, double alpha, int steps,
                          bool first_order) {
  if (steps < 1) throw std::invalid_argument("unroll_adapt: steps must be >= 1");
  UnrollResult result;
  std::vector<Tensor> current(params.begin(), params.end());
  for (int k = 0; k < steps; ++k) {
    Tensor loss = train_loss(g, current);
    result.train_losses.push_back(loss);
    std::vector<Tensor> grads = backward(loss, current, /*create_graph=*/!first_order);
    current = sgd_update(current, grads, alpha);
    result.steps.push_back(current);
  }
  return result;
}

Tensor unrolled_objective(Graph& g, std::span<const Tensor> params,
                          std::span<const std::pair<LossFn, LossFn>> tasks,
                          double alpha, int steps, std::span<const double> weights,
                          bool first_order) {
  if (tasks.empty()) throw std::invalid_argument("unrolled_objective: empty task batch");
  if (weights.size() != static_cast<std::size_t>(steps))
    throw std::invalid_argument("unrolled_objective: need one weight per step");
  Tensor total;
  for (const auto& [train_loss, test_loss] : tasks) {
    UnrollResult unrolled = unroll_adapt(g, params, train_loss, alpha, steps, first_order);
    Tensor task_term;
    for (int k = 0; k < steps; ++k) {
      if (weights[static_cast<std::size_t>(k)] == 0.0) continue;
      Tensor term = mul_scalar(test_loss(g, unrolled.steps[static_cast<std::size_t>(k)]),
                               weights[static_cast<std::size_t>(k)]);
      task_term = task_term.valid() ? add(task_term, term) : term;
    }
    if (!task_term.valid()) task_term = g.scalar_value(0.0);
    total = total.valid() ? add(total, task_term) : task_term;
  }
  return total;
}

namespace {

// L1 between the network output on the stacked LR-up inputs and the
// stacked HR targets.
LossFn pair_loss(const std::vector<PatchPair>& pairs, const ArchDescriptor& arch) {
  return [&pairs, arch](Graph& g, std::span<const Tensor> tensors) {
    std::vector<Image> lr, hr;
    lr.reserve(pairs.size());
    hr.reserve(pairs.size());
    for (const auto& p : pairs) {
      lr.push_back(p.lr_up);
      hr.push_back(p.hr);
    }
    ModelParams params{arch, std::vector<Tensor>(tensors.begin(), tensors.end())};
    Tensor pred = forward(params, stack_images(g, lr));
    return l1_loss(pred, stack_images(g, hr));
  };
}

Image crop(const Image& img, int y0, int x0, int size) {
  Image out(img.channels, size, size);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

// Bicubic down-then-up degradation pair used by pretraining.
PatchPair bicubic_pair(const Image& hr, int scale) {
  PatchPair pair;
  pair.hr = hr;
  const Image lr = bicubic_resize(hr, hr.height / scale, hr.width / scale);
  pair.lr_up = bicubic_resize(lr, hr.height, hr.width);
  return pair;
}

}  // namespace

HostParams pretrain(const Corpus& corpus, const RunConfig& cfg,
                    const TrainHooks& hooks) {
  validate_config(cfg);
  if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
  for (const Image& im : corpus)
    if (im.height < cfg.patch || im.width < cfg.patch)
      throw std::invalid_argument("pretrain: corpus image smaller than patch size");

  HostParams params = build(cfg.arch, cfg.seed);
  AdamState opt = AdamState::for_params(params.tensors);
  Rng rng = Rng::stream(cfg.seed, 0x9a7e);

  const long cadence = std::max<long>(1, cfg.pretrain_iters / 10);
  for (long iter = 0; iter < cfg.pretrain_iters; ++iter) {
    std::vector<Image> lr, hr;
    for (int b = 0; b < cfg.task_batch; ++b) {
      const Image& src = corpus[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(corpus.size()) - 1))];
      const int y0 = rng.uniform_int(0, src.height - cfg.patch);
      const int x0 = rng.uniform_int(0, src.width - cfg.patch);
      PatchPair pair = bicubic_pair(crop(src, y0, x0, cfg.patch), cfg.scale);
      lr.push_back(std::move(pair.lr_up));
      hr.push_back(std::move(pair.hr));
    }
    Graph g;
    ModelParams mounted = mount(g, params, /*requires_grad=*/true);
    Tensor loss = l1_loss(forward(mounted, stack_images(g, lr)), stack_images(g, hr));
    std::vector<Tensor> grads = backward(loss, mounted.tensors, false);
    std::vector<HostTensor> host_grads;
    host_grads.reserve(grads.size());
    for (Tensor t : grads) host_grads.push_back(to_host(t));
    adam_step(opt, params.tensors, host_grads, cfg.pretrain_lr);
    if (hooks.on_iter) hooks.on_iter(iter, loss.scalar());
    if (hooks.on_checkpoint && ((iter + 1) % cadence == 0 || iter + 1 == cfg.pretrain_iters))
      hooks.on_checkpoint(iter, params);
  }
  return params;
}

Task sample_task(const Corpus& corpus, const RunConfig& cfg, Rng& rng) {
  validate_config(cfg);
  if (corpus.empty()) throw std::invalid_argument("sample_task: empty corpus");

  Task task;
  task.scale = cfg.scale;
  if (cfg.scale_min > 0) task.scale = rng.uniform_int(cfg.scale_min, cfg.scale_max);
  task.spec = sample_kernel_params(task.scale, rng);
  task.kernel = rasterize(task.spec);
  task.mode = cfg.mode;

  const Image& src = corpus[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int>(corpus.size()) - 1))];
  if (src.height < cfg.patch || src.width < cfg.patch)
    throw std::invalid_argument("sample_task: corpus image smaller than patch size");

  // 2*task_pairs distinct crop origins: train and test stay disjoint.
  const int want = 2 * cfg.task_pairs;
  std::vector<std::pair<int, int>> origins;
  int guard = 0;
  while (static_cast<int>(origins.size()) < want) {
    if (++guard > 10000)
      throw std::invalid_argument("sample_task: image too small for distinct crops");
    std::pair<int, int> o{rng.uniform_int(0, src.height - cfg.patch),
                          rng.uniform_int(0, src.width - cfg.patch)};
    if (std::find(origins.begin(), origins.end(), o) == origins.end())
      origins.push_back(o);
  }

  DegradeSpec dspec{task.kernel, task.scale, task.mode, 0.0};
  for (int i = 0; i < want; ++i) {
    PatchPair pair;
    pair.hr = crop(src, origins[static_cast<std::size_t>(i)].first,
                   origins[static_cast<std::size_t>(i)].second, cfg.patch);
    const Image lr = degrade(pair.hr, dspec);
    pair.lr_up = bicubic_resize(lr, cfg.patch, cfg.patch);
    (i < cfg.task_pairs ? task.train_pairs : task.test_pairs).push_back(std::move(pair));
  }
  return task;
}

AdaptedParams inner_adapt(Graph& g, const ModelParams& params, const Task& task,
                          double alpha, int steps, bool first_order) {
  LossFn loss = pair_loss(task.train_pairs, params.arch);
  UnrollResult unrolled = unroll_adapt(g, params.tensors, loss, alpha, steps, first_order);
  AdaptedParams out;
  for (auto& tensors : unrolled.steps)
    out.steps.push_back(ModelParams{params.arch, std::move(tensors)});
  for (Tensor t : unrolled.train_losses) out.train_losses.push_back(t.scalar());
  return out;
}

std::vector<double> step_loss_weights(long meta_iter, int steps, long horizon) {
  if (meta_iter < 0) throw std::invalid_argument("step_loss_weights: iter must be >= 0");
  if (steps < 1) throw std::invalid_argument("step_loss_weights: steps must be >= 1");
  std::vector<double> w(static_cast<std::size_t>(steps));
  double decayed;
  if (horizon <= 0 || meta_iter >= horizon) {
    decayed = 0.0;
  } else {
    decayed = (1.0 / steps) *
              (1.0 - static_cast<double>(meta_iter) / static_cast<double>(horizon));
  }
  double rest = 0.0;
  for (int k = 0; k + 1 < steps; ++k) {
    w[static_cast<std::size_t>(k)] = decayed;
    rest += decayed;
  }
  w[static_cast<std::size_t>(steps) - 1] = 1.0 - rest;
  return w;
}

std::vector<double> step_loss_weights(long meta_iter, const RunConfig& cfg) {
  return step_loss_weights(meta_iter, cfg.unroll_steps, cfg.horizon());
}

Tensor meta_objective(Graph& g, const ModelParams& params,
                      std::span<const Task> tasks, double alpha, int steps,
                      std::span<const double> weights, bool first_order) {
  if (tasks.empty()) throw std::invalid_argument("meta_objective: empty task batch");
  std::vector<std::pair<LossFn, LossFn>> fns;
  fns.reserve(tasks.size());
  for (const Task& t : tasks)
    fns.emplace_back(pair_loss(t.train_pairs, params.arch),
                     pair_loss(t.test_pairs, params.arch));
  return unrolled_objective(g, params.tensors, fns, alpha, steps, weights, first_order);
}

namespace {

struct TaskGrad {
  double loss = 0.0;
  std::vector<HostTensor> grads;
};

// Meta-gradient of one task's weighted test loss, in its own graph.
TaskGrad task_meta_grad(const HostParams& params, const Task& task, double alpha,
                        int steps, std::span<const double> weights, bool first_order) {
  Graph g;
  ModelParams mounted = mount(g, params, /*requires_grad=*/true);
  Tensor obj = meta_objective(g, mounted, {&task, 1}, alpha, steps, weights, first_order);
  std::vector<Tensor> grads = backward(obj, mounted.tensors, false);
  TaskGrad out;
  out.loss = obj.scalar();
  out.grads.reserve(grads.size());
  for (Tensor t : grads) out.grads.push_back(to_host(t));
  return out;
}

}  // namespace

HostParams meta_train(const HostParams& theta_t, const Corpus& corpus,
                      const RunConfig& cfg, const TrainHooks& hooks) {
  validate_config(cfg);
  if (corpus.empty()) throw std::invalid_argument("meta_train: empty corpus");

  HostParams params = theta_t;
  AdamState opt = AdamState::for_params(params.tensors);
  Rng rng = Rng::stream(cfg.seed, 0x3e7a);

  const long cadence = std::max<long>(1, cfg.meta_iters / 10);
  for (long iter = 0; iter < cfg.meta_iters; ++iter) {
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(cfg.task_batch));
    for (int t = 0; t < cfg.task_batch; ++t) tasks.push_back(sample_task(corpus, cfg, rng));
    const std::vector<double> weights = step_loss_weights(iter, cfg);

    // Per-task gradients in independent graphs; the totals below are
    // reduced in task-index order so the result is thread-count invariant.
    std::vector<TaskGrad> results(tasks.size());
    if (cfg.threads > 1) {
      std::vector<std::future<TaskGrad>> futures;
      futures.reserve(tasks.size());
      for (const Task& task : tasks)
        futures.push_back(std::async(std::launch::async, [&]() {
          return task_meta_grad(params, task, cfg.alpha, cfg.unroll_steps, weights,
                                cfg.first_order);
        }));
      for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < tasks.size(); ++i)
        results[i] = task_meta_grad(params, tasks[i], cfg.alpha, cfg.unroll_steps,
                                    weights, cfg.first_order);
    }

    double total_loss = 0.0;
    std::vector<HostTensor> total_grads;
    for (std::size_t i = 0; i < results.size(); ++i) {
      total_loss += results[i].loss;
      if (i == 0) {
        total_grads = std::move(results[i].grads);
      } else {
        for (std::size_t p = 0; p < total_grads.size(); ++p)
          for (std::size_t j = 0; j < total_grads[p].data.size(); ++j)
            total_grads[p].data[j] += results[i].grads[p].data[j];
      }
    }

    adam_step(opt, params.tensors, total_grads, cfg.beta);
    if (hooks.on_iter) hooks.on_iter(iter, total_loss);
    if (hooks.on_checkpoint && ((iter + 1) % cadence == 0 || iter + 1 == cfg.meta_iters))
      hooks.on_checkpoint(iter, params);
  }
  return params;
}

}  // namespace metasr
