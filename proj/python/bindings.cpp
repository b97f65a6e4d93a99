#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metasr/checkpoint.hpp"
#include "metasr/config.hpp"
#include "metasr/degrade.hpp"
#include "metasr/kernels.hpp"
#include "metasr/meta.hpp"
#include "metasr/metrics.hpp"
#include "metasr/network.hpp"
#include "metasr/png_io.hpp"
#include "metasr/zssr.hpp"

namespace py = pybind11;
using namespace metasr;

namespace {

// Images cross the boundary as float64 (H,W,C) or (H,W) arrays in [0,1].
Image to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  const auto ndim = arr.ndim();
  if (ndim != 2 && ndim != 3) throw std::invalid_argument("image must be (H,W) or (H,W,C)");
  const int h = static_cast<int>(arr.shape(0));
  const int w = static_cast<int>(arr.shape(1));
  const int c = ndim == 2 ? 1 : static_cast<int>(arr.shape(2));
  Image img(c, h, w);
  auto view = arr.unchecked();
  if (ndim == 2) {
    auto a = arr.unchecked<2>();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(0, y, x) = a(y, x);
  } else {
    auto a = arr.unchecked<3>();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) img.at(ch, y, x) = a(y, x, ch);
  }
  (void)view;
  return img;
}

py::array_t<double> from_image(const Image& img) {
  py::array_t<double> arr({img.height, img.width, img.channels});
  auto a = arr.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) a(y, x, c) = img.at(c, y, x);
  return arr;
}

Kernel to_kernel(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2 || arr.shape(0) != arr.shape(1))
    throw std::invalid_argument("kernel must be a square 2-d array");
  const int size = static_cast<int>(arr.shape(0));
  if (size % 2 == 0) throw std::invalid_argument("kernel side length must be odd");
  Kernel k;
  k.size = size;
  k.weights.resize(static_cast<std::size_t>(size) * size);
  auto a = arr.unchecked<2>();
  double total = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      k.weights[static_cast<std::size_t>(i) * size + j] = a(i, j);
      total += a(i, j);
    }
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("kernel weights must sum to 1");
  return k;
}

py::array_t<double> from_kernel(const Kernel& k) {
  py::array_t<double> arr({k.size, k.size});
  auto a = arr.mutable_unchecked<2>();
  for (int i = 0; i < k.size; ++i)
    for (int j = 0; j < k.size; ++j) a(i, j) = k.at(i, j);
  return arr;
}

SubsampleMode mode_arg(const std::string& s) { return subsample_mode_from_string(s); }

Corpus to_corpus(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& arrs) {
  Corpus corpus;
  corpus.reserve(arrs.size());
  for (const auto& a : arrs) corpus.push_back(to_image(a));
  return corpus;
}

TrainHooks hooks_from(const py::object& on_iter) {
  TrainHooks hooks;
  if (!on_iter.is_none()) {
    auto fn = on_iter.cast<py::function>();
    hooks.on_iter = [fn](long iter, double loss) { fn(iter, loss); };
  }
  return hooks;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "meta-transfer zero-shot super-resolution core";

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init([](double theta, double l1, double l2, int size, int scale) {
             return KernelSpec{theta, l1, l2, size, scale};
           }),
           py::arg("theta"), py::arg("lambda1"), py::arg("lambda2"),
           py::arg("size") = 15, py::arg("scale") = 2)
      .def_readwrite("theta", &KernelSpec::theta)
      .def_readwrite("lambda1", &KernelSpec::lambda1)
      .def_readwrite("lambda2", &KernelSpec::lambda2)
      .def_readwrite("size", &KernelSpec::size)
      .def_readwrite("scale", &KernelSpec::scale);

  py::class_<ArchDescriptor>(m, "ArchDescriptor")
      .def(py::init([](int depth, int features, int kernel_size) {
             return ArchDescriptor{depth, features, kernel_size, 3, 3};
           }),
           py::arg("depth") = 8, py::arg("features") = 64, py::arg("kernel_size") = 3)
      .def_readwrite("depth", &ArchDescriptor::depth)
      .def_readwrite("features", &ArchDescriptor::features)
      .def_readwrite("kernel_size", &ArchDescriptor::kernel_size);

  py::class_<HostParams>(m, "ModelParams")
      .def_property_readonly("arch", [](const HostParams& p) { return p.arch; })
      .def_property_readonly("count", [](const HostParams& p) { return param_count(p); });

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("arch", &RunConfig::arch)
      .def_readwrite("alpha", &RunConfig::alpha)
      .def_readwrite("beta", &RunConfig::beta)
      .def_readwrite("unroll_steps", &RunConfig::unroll_steps)
      .def_readwrite("patch", &RunConfig::patch)
      .def_readwrite("scale", &RunConfig::scale)
      .def_readwrite("task_batch", &RunConfig::task_batch)
      .def_readwrite("task_pairs", &RunConfig::task_pairs)
      .def_readwrite("pretrain_iters", &RunConfig::pretrain_iters)
      .def_readwrite("pretrain_lr", &RunConfig::pretrain_lr)
      .def_readwrite("meta_iters", &RunConfig::meta_iters)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("loss_decay_horizon", &RunConfig::loss_decay_horizon)
      .def_readwrite("first_order", &RunConfig::first_order)
      .def_property(
          "mode", [](const RunConfig& c) { return to_string(c.mode); },
          [](RunConfig& c, const std::string& s) { c.mode = mode_arg(s); })
      .def_readwrite("scale_min", &RunConfig::scale_min)
      .def_readwrite("scale_max", &RunConfig::scale_max)
      .def_readwrite("threads", &RunConfig::threads);

  // kernels
  m.def("covariance", [](double theta, double l1, double l2) {
    const Cov2 s = covariance(theta, l1, l2);
    py::array_t<double> arr({2, 2});
    auto a = arr.mutable_unchecked<2>();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) a(i, j) = s[i][j];
    return arr;
  });
  m.def("sample_kernel_params", [](int scale, std::uint64_t seed) {
    Rng rng(seed);
    return sample_kernel_params(scale, rng);
  });
  m.def("rasterize", [](const KernelSpec& spec) { return from_kernel(rasterize(spec)); });
  m.def("named_kernel", [](const std::string& name) {
    NamedKernel nk = named_kernel(name);
    return py::make_tuple(from_kernel(rasterize(nk.spec)), to_string(nk.mode), nk.spec);
  });
  m.def("delta_kernel", [](int size) { return from_kernel(delta_kernel(size)); },
        py::arg("size") = 1);

  // degradation
  m.def("blur_reflect", [](py::array_t<double, py::array::c_style | py::array::forcecast> img,
                           py::array_t<double, py::array::c_style | py::array::forcecast> k) {
    return from_image(blur_reflect(to_image(img), to_kernel(k)));
  });
  m.def("bicubic_resize",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> img, int h, int w) {
          return from_image(bicubic_resize(to_image(img), h, w));
        });
  m.def("degrade",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> img,
           py::array_t<double, py::array::c_style | py::array::forcecast> k, int scale,
           const std::string& mode, double noise_sigma, std::uint64_t seed) {
          DegradeSpec spec{to_kernel(k), scale, mode_arg(mode), noise_sigma};
          Rng rng(seed);
          return from_image(degrade(to_image(img), spec, &rng));
        },
        py::arg("image"), py::arg("kernel"), py::arg("scale") = 2,
        py::arg("mode") = "direct", py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);
  m.def("make_lr_son",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> img,
           py::array_t<double, py::array::c_style | py::array::forcecast> k, int scale,
           const std::string& mode) {
          return from_image(make_lr_son(to_image(img), to_kernel(k), scale, mode_arg(mode)));
        });

  // metrics
  m.def("rgb_to_y", [](py::array_t<double, py::array::c_style | py::array::forcecast> img) {
    return from_image(rgb_to_y(to_image(img)));
  });
  m.def("psnr_y",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
           py::array_t<double, py::array::c_style | py::array::forcecast> b, int border) {
          return psnr_y(to_image(a), to_image(b), border);
        },
        py::arg("a"), py::arg("b"), py::arg("border") = 0);
  m.def("ssim_y", [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
                     py::array_t<double, py::array::c_style | py::array::forcecast> b) {
    return ssim_y(to_image(a), to_image(b));
  });

  // network
  m.def("build",
        [](const ArchDescriptor& arch, std::uint64_t seed) { return build(arch, seed); },
        py::arg("arch"), py::arg("seed") = 0);
  m.def("param_count", [](const ArchDescriptor& arch) { return param_count(arch); });
  m.def("forward", [](const HostParams& params,
                      py::array_t<double, py::array::c_style | py::array::forcecast> img) {
    Graph g;
    Tensor out = forward(mount(g, params, false), image_to_tensor(g, to_image(img)));
    return from_image(tensor_to_image(out));
  });

  // training
  m.def("pretrain",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& corpus,
           const RunConfig& cfg, const py::object& on_iter) {
          return pretrain(to_corpus(corpus), cfg, hooks_from(on_iter));
        },
        py::arg("corpus"), py::arg("config"), py::arg("on_iter") = py::none());
  m.def("meta_train",
        [](const HostParams& theta_t,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& corpus,
           const RunConfig& cfg, const py::object& on_iter) {
          return meta_train(theta_t, to_corpus(corpus), cfg, hooks_from(on_iter));
        },
        py::arg("theta_t"), py::arg("corpus"), py::arg("config"),
        py::arg("on_iter") = py::none());
  m.def("step_loss_weights",
        [](long iter, int steps, long horizon) {
          return step_loss_weights(iter, steps, horizon);
        });

  // adaptation
  m.def("meta_test",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> lr,
           py::array_t<double, py::array::c_style | py::array::forcecast> k,
           const std::string& mode, int scale, const HostParams& theta_m, int steps,
           double alpha) {
          AdaptResult r =
              meta_test(to_image(lr), to_kernel(k), mode_arg(mode), scale, theta_m, steps, alpha);
          return py::make_tuple(from_image(r.sr), r.losses);
        },
        py::arg("lr"), py::arg("kernel"), py::arg("mode"), py::arg("scale"),
        py::arg("theta_m"), py::arg("steps") = 1, py::arg("alpha") = 0.01);
  m.def("zssr_baseline",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> lr,
           py::array_t<double, py::array::c_style | py::array::forcecast> k,
           const std::string& mode, int scale, const ArchDescriptor& arch, int steps,
           double adam_lr, std::uint64_t seed) {
          AdaptResult r = zssr_baseline(to_image(lr), to_kernel(k), mode_arg(mode), scale,
                                        arch, steps, adam_lr, seed);
          return py::make_tuple(from_image(r.sr), r.losses);
        },
        py::arg("lr"), py::arg("kernel"), py::arg("mode"), py::arg("scale"), py::arg("arch"),
        py::arg("steps"), py::arg("adam_lr") = 1e-3, py::arg("seed") = 0);
  m.def("mismatch_probe",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> hr,
           py::array_t<double, py::array::c_style | py::array::forcecast> true_kernel,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& probes,
           const std::string& mode, int scale, const HostParams& theta_m, int steps,
           double alpha) {
          std::vector<Kernel> ks;
          ks.reserve(probes.size());
          for (const auto& p : probes) ks.push_back(to_kernel(p));
          return mismatch_probe(to_image(hr), to_kernel(true_kernel), ks, mode_arg(mode),
                                scale, theta_m, steps, alpha);
        });

  // io
  m.def("save_checkpoint", [](const HostParams& p, const std::string& path) {
    save_checkpoint(p, path);
  });
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); });
  m.def("read_png", [](const std::string& path) { return from_image(read_png(path)); });
  m.def("write_png",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> img,
           const std::string& path) { write_png(to_image(img), path); });
}
