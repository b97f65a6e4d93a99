#include "metasr/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace metasr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("config: key '" + key + "' needs a boolean, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "alpha") cfg.alpha = to_double(key, value);
    else if (key == "beta") cfg.beta = to_double(key, value);
    else if (key == "unroll_steps") cfg.unroll_steps = static_cast<int>(to_long(key, value));
    else if (key == "patch") cfg.patch = static_cast<int>(to_long(key, value));
    else if (key == "scale") cfg.scale = static_cast<int>(to_long(key, value));
    else if (key == "task_batch") cfg.task_batch = static_cast<int>(to_long(key, value));
    else if (key == "task_pairs") cfg.task_pairs = static_cast<int>(to_long(key, value));
    else if (key == "pretrain_iters") cfg.pretrain_iters = to_long(key, value);
    else if (key == "pretrain_lr") cfg.pretrain_lr = to_double(key, value);
    else if (key == "meta_iters") cfg.meta_iters = to_long(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "loss_decay_horizon") cfg.loss_decay_horizon = to_long(key, value);
    else if (key == "first_order") cfg.first_order = to_bool(key, value);
    else if (key == "mode") cfg.mode = subsample_mode_from_string(value);
    else if (key == "scale_min") cfg.scale_min = static_cast<int>(to_long(key, value));
    else if (key == "scale_max") cfg.scale_max = static_cast<int>(to_long(key, value));
    else if (key == "threads") cfg.threads = static_cast<int>(to_long(key, value));
    else if (key == "depth") cfg.arch.depth = static_cast<int>(to_long(key, value));
    else if (key == "features") cfg.arch.features = static_cast<int>(to_long(key, value));
    else if (key == "kernel_size") cfg.arch.kernel_size = static_cast<int>(to_long(key, value));
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void print_config(const RunConfig& cfg, std::ostream& out) {
  out << "# alpha = " << cfg.alpha << "\n"
      << "# beta = " << cfg.beta << "\n"
      << "# depth = " << cfg.arch.depth << "\n"
      << "# features = " << cfg.arch.features << "\n"
      << "# first_order = " << (cfg.first_order ? 1 : 0) << "\n"
      << "# kernel_size = " << cfg.arch.kernel_size << "\n"
      << "# loss_decay_horizon = " << cfg.horizon() << "\n"
      << "# meta_iters = " << cfg.meta_iters << "\n"
      << "# mode = " << to_string(cfg.mode) << "\n"
      << "# patch = " << cfg.patch << "\n"
      << "# pretrain_iters = " << cfg.pretrain_iters << "\n"
      << "# pretrain_lr = " << cfg.pretrain_lr << "\n"
      << "# scale = " << cfg.scale << "\n"
      << "# scale_max = " << cfg.scale_max << "\n"
      << "# scale_min = " << cfg.scale_min << "\n"
      << "# seed = " << cfg.seed << "\n"
      << "# task_batch = " << cfg.task_batch << "\n"
      << "# task_pairs = " << cfg.task_pairs << "\n"
      << "# threads = " << cfg.threads << "\n"
      << "# unroll_steps = " << cfg.unroll_steps << "\n";
}

}  // namespace metasr
