#include "jam/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace jam {

namespace pt = boost::property_tree;

namespace {

template <typename T>
std::vector<T> split_list(const std::string& text, T (*convert)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(convert(item.substr(b, e - b + 1)));
  }
  return out;
}

std::uint64_t to_u64(const std::string& s) { return std::stoull(s); }
double to_double(const std::string& s) { return std::stod(s); }
Variant to_variant(const std::string& s) { return parse_variant(s); }

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, Variant>) {
      out += to_string(values[i]);
    } else {
      out += fmt::format("{}", values[i]);
    }
  }
  return out;
}

template <std::size_t N>
std::array<double, N> fixed(const std::vector<double>& v, const char* key) {
  if (v.size() != N) throw std::invalid_argument(fmt::format("run config: {} needs {} values", key, N));
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

/// Present keys must convert; absent keys keep the fallback.
template <typename T>
T value(const pt::ptree& tree, const char* path, T fallback) {
  return tree.get_optional<std::string>(path) ? tree.get<T>(path) : fallback;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  thresholds.validate();
  if (seeds.empty()) throw std::invalid_argument("run config: no seeds");
  if (variants.empty()) throw std::invalid_argument("run config: no variants");
}

RunConfig parse_run_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  RunConfig cfg;
  auto& m = cfg.model;
  auto& d = m.dims;
  try {
    cfg.train_path = value(tree, "data.train", cfg.train_path);
    cfg.val_path = value(tree, "data.val", cfg.val_path);
    cfg.anchors_path = value(tree, "data.anchors", cfg.anchors_path);
    d.agents = value(tree, "data.N_a", d.agents);
    d.history = value(tree, "data.T_h", d.history);
    d.future = value(tree, "data.T", d.future);
    d.map_elements = value(tree, "data.N_m", d.map_elements);
    d.map_points = value(tree, "data.N_p", d.map_points);
    d.sample_rate_hz = value(tree, "data.rate_hz", d.sample_rate_hz);
    if (value(tree, "data.d_s", SceneDims::state_dim) != SceneDims::state_dim) {
      throw std::invalid_argument("run config: d_s must be 6");
    }
    if (value(tree, "data.d_p", SceneDims::point_dim) != SceneDims::point_dim) {
      throw std::invalid_argument("run config: d_p must be 5");
    }

    if (auto v = tree.get_optional<std::string>("model.variant")) m.variant = parse_variant(*v);
    if (auto s = tree.get_optional<std::string>("model.scheme")) m.scheme = parse_category_scheme(*s);
    m.y_m = value(tree, "model.Y_m", m.y_m);
    m.k_m = value(tree, "model.K_m", m.k_m);
    m.k_j = value(tree, "model.K_j", m.k_j);
    m.y_j = value(tree, "model.Y_j", m.y_j);
    if (value(tree, "model.K", m.k_j) != m.k_j) throw std::invalid_argument("run config: K must equal K_j");
    m.encoder_layers = value(tree, "model.E", m.encoder_layers);
    m.d_model = value(tree, "model.D_dim", m.d_model);
    m.heads = value(tree, "model.heads", m.heads);
    m.joint_proposals = value(tree, "model.joint_proposals", m.joint_proposals);
    m.position_scale = value(tree, "model.position_scale", m.position_scale);

    auto& t = cfg.train;
    t.batch_size = value(tree, "train.batch_size", t.batch_size);
    t.base_lr = value(tree, "train.lr", t.base_lr);
    t.decay_start = value(tree, "train.lr_decay_start", t.decay_start);
    t.decay_every = value(tree, "train.lr_decay_every", t.decay_every);
    t.epochs = value(tree, "train.epochs", t.epochs);
    t.seed = value(tree, "train.seed", t.seed);
    t.clip_norm = value(tree, "train.clip_norm", t.clip_norm);
    t.threads = value(tree, "train.threads", t.threads);
    cfg.out_dir = value(tree, "train.out_dir", cfg.out_dir);
    if (auto s = tree.get_optional<std::string>("train.seeds")) cfg.seeds = split_list<std::uint64_t>(*s, to_u64);

    if (auto s = tree.get_optional<std::string>("eval.horizons")) cfg.thresholds.seconds = fixed<3>(split_list<double>(*s, to_double), "horizons");
    if (auto s = tree.get_optional<std::string>("eval.thresholds")) cfg.thresholds.meters = fixed<3>(split_list<double>(*s, to_double), "thresholds");
    if (auto s = tree.get_optional<std::string>("compare.variants")) cfg.variants = split_list<Variant>(*s, to_variant);
  } catch (const pt::ptree_bad_data& e) {
    throw std::invalid_argument(std::string("run config: bad value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& cfg) {
  const auto& m = cfg.model;
  const auto& d = m.dims;
  const auto& t = cfg.train;
  std::string out;
  out += "[data]\n";
  out += fmt::format("train = {}\nval = {}\nanchors = {}\n", cfg.train_path, cfg.val_path, cfg.anchors_path);
  out += fmt::format("N_a = {}\nT_h = {}\nT = {}\nd_s = {}\nd_p = {}\nN_m = {}\nN_p = {}\nrate_hz = {}\n", d.agents,
                     d.history, d.future, SceneDims::state_dim, SceneDims::point_dim, d.map_elements, d.map_points,
                     d.sample_rate_hz);
  out += "\n[model]\n";
  out += fmt::format("variant = {}\nscheme = {}\nY_m = {}\nK_m = {}\nK_j = {}\nY_j = {}\nK = {}\nE = {}\nD_dim = {}\n",
                     to_string(m.variant), to_string(m.scheme), m.y_m, m.k_m, m.k_j, m.y_j, m.k_j, m.encoder_layers,
                     m.d_model);
  out += fmt::format("heads = {}\njoint_proposals = {}\nposition_scale = {}\n", m.heads, m.joint_proposals,
                     m.position_scale);
  out += "\n[train]\n";
  out += fmt::format("batch_size = {}\nlr = {}\nlr_decay_start = {}\nlr_decay_every = {}\nepochs = {}\nseed = {}\n",
                     t.batch_size, t.base_lr, t.decay_start, t.decay_every, t.epochs, t.seed);
  out += fmt::format("seeds = {}\nclip_norm = {}\nthreads = {}\nout_dir = {}\n", join(cfg.seeds), t.clip_norm,
                     t.threads, cfg.out_dir);
  out += "\n[eval]\n";
  out += fmt::format("horizons = {}\nthresholds = {}\n",
                     join(std::vector<double>(cfg.thresholds.seconds.begin(), cfg.thresholds.seconds.end())),
                     join(std::vector<double>(cfg.thresholds.meters.begin(), cfg.thresholds.meters.end())));
  out += "\n[compare]\n";
  out += fmt::format("variants = {}\n", join(cfg.variants));
  return out;
}

}  // namespace jam
