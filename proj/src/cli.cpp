#include "metasr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "metasr/checkpoint.hpp"
#include "metasr/config.hpp"
#include "metasr/degrade.hpp"
#include "metasr/kernels.hpp"
#include "metasr/meta.hpp"
#include "metasr/metrics.hpp"
#include "metasr/png_io.hpp"
#include "metasr/zssr.hpp"

namespace fs = std::filesystem;

namespace metasr {

namespace {

// ---- kernel file helpers

void write_kernel_text(const Kernel& k, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("kernel: cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  for (int i = 0; i < k.size; ++i) {
    for (int j = 0; j < k.size; ++j) {
      if (j) out << ' ';
      out << k.at(i, j);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("kernel: write failed for '" + path + "'");
}

Kernel read_kernel_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("kernel: cannot open '" + path + "'");
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  const auto n = values.size();
  const int size = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (n == 0 || static_cast<std::size_t>(size) * size != n || size % 2 == 0)
    throw std::runtime_error("kernel: '" + path + "' is not an odd square grid");
  double total = 0.0;
  for (double w : values) total += w;
  if (std::abs(total - 1.0) > 1e-3)
    throw std::runtime_error("kernel: '" + path + "' does not sum to 1");
  for (double& w : values) w /= total;
  Kernel k;
  k.size = size;
  k.weights = std::move(values);
  return k;
}

struct ResolvedKernel {
  Kernel kernel;
  SubsampleMode mode;
  bool mode_from_name = false;
  std::string label;
};

// A kernel argument is either one of the named evaluation kernels or a
// path to a text grid.
ResolvedKernel resolve_kernel(const std::string& arg, std::optional<SubsampleMode> mode) {
  ResolvedKernel out;
  out.label = arg;
  bool named = false;
  for (const std::string& n : named_kernel_names()) named |= (n == arg);
  if (named) {
    NamedKernel nk = named_kernel(arg);
    out.kernel = rasterize(nk.spec);
    out.mode = mode.value_or(nk.mode);
    out.mode_from_name = !mode.has_value();
  } else {
    out.kernel = read_kernel_text(arg);
    out.mode = mode.value_or(SubsampleMode::kDirect);
  }
  return out;
}

// ---- config handling shared by the training subcommands

struct ConfigCli {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    add_key(cmd, "--alpha", "task-level learning rate");
    add_key(cmd, "--beta", "meta learning rate");
    add_key(cmd, "--unroll-steps", "inner gradient updates per task");
    add_key(cmd, "--patch", "training patch size");
    add_key(cmd, "--scale", "scale factor");
    add_key(cmd, "--task-batch", "tasks per meta update");
    add_key(cmd, "--task-pairs", "patch pairs per task split");
    add_key(cmd, "--pretrain-iters", "pretraining iterations");
    add_key(cmd, "--pretrain-lr", "pretraining learning rate");
    add_key(cmd, "--meta-iters", "meta-training iterations");
    add_key(cmd, "--seed", "master seed");
    add_key(cmd, "--loss-decay-horizon", "iters over which non-final step weights decay");
    add_key(cmd, "--first-order", "drop second-order terms (0/1)");
    add_key(cmd, "--mode", "subsampling mode: direct|bicubic");
    add_key(cmd, "--scale-min", "multi-scale task sampling lower bound");
    add_key(cmd, "--scale-max", "multi-scale task sampling upper bound");
    add_key(cmd, "--threads", "parallel per-task workers");
    add_key(cmd, "--depth", "conv layers");
    add_key(cmd, "--features", "hidden channels");
    add_key(cmd, "--kernel-size", "conv kernel size");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) apply_config(cfg, parse_config_file(config_path));
    apply_config(cfg, overrides);  // flags win over the file
    return cfg;
  }

  bool has_override(const std::string& key) const { return overrides.count(key) > 0; }

 private:
  void add_key(CLI::App* cmd, const std::string& flag, const std::string& help) {
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { overrides[key] = v; }, help);
  }
};

// CSV sink for iter/loss rows; stdout unless a path is given.
class ProgressLog {
 public:
  explicit ProgressLog(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("log: cannot open '" + path + "'");
    }
    stream() << "iter,loss\n";
  }
  void row(long iter, double loss) {
    stream() << iter << ',' << std::setprecision(9) << loss << '\n';
  }
  ~ProgressLog() { stream().flush(); }

 private:
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  std::ofstream file_;
};

Corpus load_corpus(const std::string& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir))
    throw std::runtime_error("data: '" + dir + "' is not a directory");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("data: no .png files in '" + dir + "'");
  Corpus corpus;
  corpus.reserve(files.size());
  for (const auto& f : files) corpus.push_back(read_png(f.string()));
  return corpus;
}

void check_arch_consistency(const ConfigCli& cli, const RunConfig& cfg,
                            const ArchDescriptor& ckpt_arch) {
  auto mismatch = [&](const std::string& key, int cfg_v, int ckpt_v) {
    if (cli.has_override(key) && cfg_v != ckpt_v)
      throw std::runtime_error("--" + key + "=" + std::to_string(cfg_v) +
                               " disagrees with the checkpoint (" +
                               std::to_string(ckpt_v) + ")");
  };
  mismatch("depth", cfg.arch.depth, ckpt_arch.depth);
  mismatch("features", cfg.arch.features, ckpt_arch.features);
  mismatch("kernel_size", cfg.arch.kernel_size, ckpt_arch.kernel_size);
}

// ---- subcommand bodies

int cmd_pretrain(const ConfigCli& cli, const std::string& data_dir,
                 const std::string& out_path, const std::string& log_path) {
  RunConfig cfg = cli.resolve();
  print_config(cfg, std::cout);
  Corpus corpus = load_corpus(data_dir);
  ProgressLog log(log_path);
  TrainHooks hooks;
  hooks.on_iter = [&](long iter, double loss) { log.row(iter, loss); };
  hooks.on_checkpoint = [&](long, const HostParams& p) { save_checkpoint(p, out_path); };
  HostParams theta_t = pretrain(corpus, cfg, hooks);
  save_checkpoint(theta_t, out_path);
  std::cout << "# wrote " << out_path << "\n";
  return 0;
}

int cmd_meta_train(const ConfigCli& cli, const std::string& data_dir,
                   const std::string& init_path, const std::string& out_path,
                   const std::string& log_path) {
  RunConfig cfg = cli.resolve();
  HostParams theta_t = load_checkpoint(init_path);
  check_arch_consistency(cli, cfg, theta_t.arch);
  cfg.arch = theta_t.arch;
  print_config(cfg, std::cout);
  Corpus corpus = load_corpus(data_dir);
  ProgressLog log(log_path);
  TrainHooks hooks;
  hooks.on_iter = [&](long iter, double loss) { log.row(iter, loss); };
  hooks.on_checkpoint = [&](long, const HostParams& p) { save_checkpoint(p, out_path); };
  HostParams theta_m = meta_train(theta_t, corpus, cfg, hooks);
  save_checkpoint(theta_m, out_path);
  std::cout << "# wrote " << out_path << "\n";
  return 0;
}

int cmd_meta_test(const std::string& in_path, const std::string& kernel_arg,
                  const std::string& ckpt_path, int steps, const std::string& out_path,
                  double alpha, int scale, std::optional<SubsampleMode> mode,
                  const std::string& trace_path) {
  HostParams theta_m = load_checkpoint(ckpt_path);
  ResolvedKernel rk = resolve_kernel(kernel_arg, mode);
  Image lr = read_png(in_path);
  std::cout << "# in = " << in_path << "\n# kernel = " << rk.label
            << "\n# mode = " << to_string(rk.mode) << "\n# scale = " << scale
            << "\n# steps = " << steps << "\n# alpha = " << alpha << "\n";
  AdaptResult run = meta_test(lr, rk.kernel, rk.mode, scale, theta_m, steps, alpha);
  write_png(run.sr, out_path);
  if (!trace_path.empty()) {
    std::ofstream trace(trace_path);
    if (!trace) throw std::runtime_error("trace: cannot open '" + trace_path + "'");
    trace << "step,loss\n" << std::setprecision(9);
    for (std::size_t i = 0; i < run.losses.size(); ++i)
      trace << i << ',' << run.losses[i] << '\n';
  }
  std::cout << "# wrote " << out_path << "\n";
  return 0;
}

int cmd_degrade(const std::string& in_path, const std::string& kernel_arg,
                int scale, std::optional<SubsampleMode> mode, double noise_sigma,
                std::uint64_t seed, const std::string& out_path) {
  ResolvedKernel rk = resolve_kernel(kernel_arg, mode);
  std::cout << "# in = " << in_path << "\n# kernel = " << rk.label
            << "\n# mode = " << to_string(rk.mode) << "\n# scale = " << scale
            << "\n# noise_sigma = " << noise_sigma << "\n# seed = " << seed << "\n";
  Image hr = read_png(in_path);
  DegradeSpec spec{rk.kernel, scale, rk.mode, noise_sigma};
  Rng rng = Rng::stream(seed, 0xde64);
  write_png(degrade(hr, spec, &rng), out_path);
  std::cout << "# wrote " << out_path << "\n";
  return 0;
}

int cmd_kernel(const std::string& name, std::optional<double> theta,
               std::optional<double> l1, std::optional<double> l2, int size,
               const std::string& out_path, const std::string& png_path) {
  KernelSpec spec;
  std::string label;
  if (!name.empty()) {
    if (theta || l1 || l2)
      throw std::runtime_error("kernel: use either --name or --theta/--l1/--l2");
    NamedKernel nk = named_kernel(name);
    spec = nk.spec;
    label = nk.name;
  } else {
    if (!theta || !l1 || !l2)
      throw std::runtime_error("kernel: need --name or all of --theta/--l1/--l2");
    spec = KernelSpec{*theta, *l1, *l2, 15, 2};
    label = "custom";
  }
  spec.size = size;
  std::cout << "# kernel = " << label << "\n# theta = " << spec.theta
            << "\n# lambda1 = " << spec.lambda1 << "\n# lambda2 = " << spec.lambda2
            << "\n# size = " << spec.size << "\n";
  Kernel k = rasterize(spec);
  write_kernel_text(k, out_path);
  if (!png_path.empty()) {
    // normalized to peak 1 so the grid is visible
    Image vis(1, k.size, k.size);
    const double peak = *std::max_element(k.weights.begin(), k.weights.end());
    for (std::size_t i = 0; i < k.weights.size(); ++i) vis.data[i] = k.weights[i] / peak;
    write_png(vis, png_path);
  }
  std::cout << "# wrote " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ref_path, const std::string& test_path, int border,
             int scale, bool border_given, const std::string& out_path) {
  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> pairs;
  if (fs::is_directory(ref_path) != fs::is_directory(test_path))
    throw std::runtime_error("eval: --ref and --test must both be files or directories");
  if (fs::is_directory(ref_path)) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(ref_path))
      if (e.is_regular_file() && e.path().extension() == ".png")
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
      const fs::path t = fs::path(test_path) / n;
      if (!fs::exists(t))
        throw std::runtime_error("eval: missing counterpart for '" + n + "'");
      pairs.push_back({n, {(fs::path(ref_path) / n).string(), t.string()}});
    }
    if (pairs.empty()) throw std::runtime_error("eval: no .png files in '" + ref_path + "'");
  } else {
    pairs.push_back({fs::path(test_path).filename().string(), {ref_path, test_path}});
  }

  const int crop = border_given ? border : scale;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("eval: cannot open '" + out_path + "'");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  std::cout << "# border = " << crop << "\n";
  out << "name,psnr,ssim\n" << std::setprecision(9);
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const auto& [name, paths] : pairs) {
    const Image ref = read_png(paths.first);
    const Image test = read_png(paths.second);
    const double p = psnr_y(ref, test, crop);
    const double s = ssim_y(ref, test);
    psnr_sum += p;
    ssim_sum += s;
    out << name << ',' << p << ',' << s << '\n';
  }
  const double n = static_cast<double>(pairs.size());
  out << "mean," << psnr_sum / n << ',' << ssim_sum / n << '\n';
  return 0;
}

int cmd_probe(const std::string& hr_path, const std::string& true_kernel_arg,
              const std::vector<std::string>& probe_args, const std::string& ckpt_path,
              int steps, double alpha, int scale, std::optional<SubsampleMode> mode,
              const std::string& out_path) {
  HostParams theta_m = load_checkpoint(ckpt_path);
  ResolvedKernel truth = resolve_kernel(true_kernel_arg, mode);
  Image hr = read_png(hr_path);
  std::vector<Kernel> probes;
  for (const auto& arg : probe_args)
    probes.push_back(resolve_kernel(arg, truth.mode).kernel);
  std::cout << "# hr = " << hr_path << "\n# true_kernel = " << truth.label
            << "\n# mode = " << to_string(truth.mode) << "\n# scale = " << scale
            << "\n# steps = " << steps << "\n# alpha = " << alpha << "\n";
  std::vector<double> psnrs =
      mismatch_probe(hr, truth.kernel, probes, truth.mode, scale, theta_m, steps, alpha);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("probe: cannot open '" + out_path + "'");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "probe,psnr\n" << std::setprecision(9);
  for (std::size_t i = 0; i < probes.size(); ++i)
    out << probe_args[i] << ',' << psnrs[i] << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"meta-transfer zero-shot super-resolution"};
  app.require_subcommand(1);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "large-scale training on bicubic degradation");
  ConfigCli pre_cfg;
  std::string pre_data, pre_out, pre_log;
  pre->add_option("--data", pre_data, "directory of HR training PNGs")->required();
  pre->add_option("--out", pre_out, "output checkpoint path")->required();
  pre->add_option("--log", pre_log, "progress CSV path (default stdout)");
  pre_cfg.add_to(pre);

  // meta-train
  auto* mt = app.add_subcommand("meta-train", "meta-transfer learning across blur-kernel tasks");
  ConfigCli mt_cfg;
  std::string mt_data, mt_init, mt_out, mt_log;
  mt->add_option("--data", mt_data, "directory of HR training PNGs")->required();
  mt->add_option("--init", mt_init, "pretrained checkpoint")->required();
  mt->add_option("--out", mt_out, "output checkpoint path")->required();
  mt->add_option("--log", mt_log, "progress CSV path (default stdout)");
  mt_cfg.add_to(mt);

  // meta-test
  auto* mts = app.add_subcommand("meta-test", "zero-shot adaptation to one LR image");
  std::string mts_in, mts_kernel, mts_ckpt, mts_out, mts_trace, mts_mode;
  int mts_steps = 1, mts_scale = 2;
  double mts_alpha = 0.01;
  std::uint64_t mts_seed = 0;
  mts->add_option("--in", mts_in, "LR input PNG")->required();
  mts->add_option("--kernel", mts_kernel, "kernel name or text-grid path")->required();
  mts->add_option("--ckpt", mts_ckpt, "model checkpoint")->required();
  mts->add_option("--steps", mts_steps, "gradient updates (default 1)");
  mts->add_option("--out", mts_out, "SR output PNG")->required();
  mts->add_option("--alpha", mts_alpha, "learning rate (default 0.01)");
  mts->add_option("--scale", mts_scale, "scale factor (default 2)");
  mts->add_option("--mode", mts_mode, "direct|bicubic (default from kernel)");
  mts->add_option("--trace", mts_trace, "loss trace CSV path");
  mts->add_option("--seed", mts_seed, "unused; accepted for uniformity");

  // degrade
  auto* deg = app.add_subcommand("degrade", "apply the degradation model to a PNG");
  std::string deg_in, deg_kernel, deg_out, deg_mode;
  int deg_scale = 2;
  double deg_noise = 0.0;
  std::uint64_t deg_seed = 0;
  deg->add_option("--in", deg_in, "HR input PNG")->required();
  deg->add_option("--kernel", deg_kernel, "kernel name or text-grid path")->required();
  deg->add_option("--scale", deg_scale, "scale factor (default 2)");
  deg->add_option("--mode", deg_mode, "direct|bicubic (default from kernel)");
  deg->add_option("--noise", deg_noise, "white Gaussian noise std (default 0)");
  deg->add_option("--seed", deg_seed, "noise seed");
  deg->add_option("--out", deg_out, "LR output PNG")->required();

  // kernel
  auto* ker = app.add_subcommand("kernel", "write a blur kernel as text grid and PNG");
  std::string ker_name, ker_out, ker_png;
  std::optional<double> ker_theta, ker_l1, ker_l2;
  int ker_size = 15;
  ker->add_option("--name", ker_name, "named kernel (g_d_0.2, g_d_2.0, g_d_ani, g_b_1.3)");
  ker->add_option("--theta", ker_theta, "rotation angle in radians");
  ker->add_option("--l1", ker_l1, "first covariance eigenvalue");
  ker->add_option("--l2", ker_l2, "second covariance eigenvalue");
  ker->add_option("--size", ker_size, "grid side length (default 15)");
  ker->add_option("--out", ker_out, "output text path")->required();
  ker->add_option("--png", ker_png, "optional grayscale PNG path");

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of image pairs");
  std::string ev_ref, ev_test, ev_out;
  int ev_border = 0, ev_scale = 2;
  ev->add_option("--ref", ev_ref, "reference PNG or directory")->required();
  ev->add_option("--test", ev_test, "test PNG or directory")->required();
  auto* ev_border_opt = ev->add_option("--border", ev_border, "crop pixels (default: scale)");
  ev->add_option("--scale", ev_scale, "scale factor used for the default border");
  ev->add_option("--out", ev_out, "CSV output path (default stdout)");

  // probe
  auto* pr = app.add_subcommand("probe", "kernel-mismatch PSNR table");
  std::string pr_hr, pr_true, pr_ckpt, pr_out, pr_mode;
  std::vector<std::string> pr_probes;
  int pr_steps = 1, pr_scale = 2;
  double pr_alpha = 0.01;
  pr->add_option("--hr", pr_hr, "ground-truth HR PNG")->required();
  pr->add_option("--true-kernel", pr_true, "kernel that degrades the HR image")->required();
  pr->add_option("--probes", pr_probes, "kernels to adapt with")->required()->delimiter(',');
  pr->add_option("--ckpt", pr_ckpt, "model checkpoint")->required();
  pr->add_option("--steps", pr_steps, "gradient updates per probe (default 1)");
  pr->add_option("--alpha", pr_alpha, "learning rate (default 0.01)");
  pr->add_option("--scale", pr_scale, "scale factor (default 2)");
  pr->add_option("--mode", pr_mode, "direct|bicubic (default from true kernel)");
  pr->add_option("--out", pr_out, "CSV output path (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << std::flush;
    return 1;
  }

  auto parse_mode = [](const std::string& s) -> std::optional<SubsampleMode> {
    if (s.empty()) return std::nullopt;
    return subsample_mode_from_string(s);
  };

  try {
    if (pre->parsed()) return cmd_pretrain(pre_cfg, pre_data, pre_out, pre_log);
    if (mt->parsed()) return cmd_meta_train(mt_cfg, mt_data, mt_init, mt_out, mt_log);
    if (mts->parsed())
      return cmd_meta_test(mts_in, mts_kernel, mts_ckpt, mts_steps, mts_out, mts_alpha,
                           mts_scale, parse_mode(mts_mode), mts_trace);
    if (deg->parsed())
      return cmd_degrade(deg_in, deg_kernel, deg_scale, parse_mode(deg_mode), deg_noise,
                         deg_seed, deg_out);
    if (ker->parsed())
      return cmd_kernel(ker_name, ker_theta, ker_l1, ker_l2, ker_size, ker_out, ker_png);
    if (ev->parsed())
      return cmd_eval(ev_ref, ev_test, ev_border, ev_scale, ev_border_opt->count() > 0,
                      ev_out);
    if (pr->parsed())
      return cmd_probe(pr_hr, pr_true, pr_probes, pr_ckpt, pr_steps, pr_alpha, pr_scale,
                       parse_mode(pr_mode), pr_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace metasr
