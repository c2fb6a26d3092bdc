#include "lpc/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lpc/errors.hpp"

namespace lpc {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_hidden(const std::vector<std::int64_t>& hidden) {
  if (hidden.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(hidden[i]);
  }
  return out;
}

std::vector<std::int64_t> parse_hidden(const std::string& s) {
  if (s == "none" || s.empty()) return {};
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stoll(item));
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean '" + v + "' for " + key);
}

template <typename T>
T parse_enum(const std::string& v, const std::string& key,
             const std::map<std::string, T>& names) {
  auto it = names.find(v);
  if (it == names.end()) {
    throw ConfigError("config: unknown value '" + v + "' for " + key);
  }
  return it->second;
}

const std::map<std::string, DatasetKind> kDatasetNames = {
    {"gaussian-mixture", DatasetKind::kGaussianMixture},
    {"pinwheel", DatasetKind::kPinwheel},
    {"two-moons", DatasetKind::kTwoMoons},
    {"linear-gaussian", DatasetKind::kLinearGaussian},
    {"idx-images", DatasetKind::kIdxImages},
};
const std::map<std::string, Normalization> kNormNames = {
    {"none", Normalization::kNone},
    {"standardize", Normalization::kStandardize},
    {"pixel-grid", Normalization::kPixelGrid},
};
const std::map<std::string, Likelihood> kLikelihoodNames = {
    {"diagonal-gaussian", Likelihood::kDiagonalGaussian},
    {"discretized-gaussian", Likelihood::kDiscretizedGaussian},
};
const std::map<std::string, DecoderScaleMode> kScaleNames = {
    {"learned-global", DecoderScaleMode::kLearnedGlobal},
    {"learned-per-dim", DecoderScaleMode::kLearnedPerDim},
    {"fixed", DecoderScaleMode::kFixed},
};
const std::map<std::string, Algo> kAlgoNames = {
    {"lpc", Algo::kLpc},
    {"vae", Algo::kVae},
};
const std::map<std::string, Objective> kObjectiveNames = {
    {"forward", Objective::kForward},
    {"reverse", Objective::kReverse},
    {"jeffreys", Objective::kJeffreys},
    {"none", Objective::kNone},
};
const std::map<std::string, NoiseCovariance> kNoiseCovNames = {
    {"inverse-mhat", NoiseCovariance::kInverseMhat},
    {"mhat", NoiseCovariance::kMhat},
};

template <typename T>
std::string enum_name(T value, const std::map<std::string, T>& names) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  throw ConfigError("config: unnamed enum value");
}

}  // namespace

std::string to_string(DatasetKind k) { return enum_name(k, kDatasetNames); }
std::string to_string(Normalization n) { return enum_name(n, kNormNames); }
std::string to_string(Likelihood l) { return enum_name(l, kLikelihoodNames); }
std::string to_string(DecoderScaleMode m) { return enum_name(m, kScaleNames); }
std::string to_string(Algo a) { return enum_name(a, kAlgoNames); }
std::string to_string(Objective o) { return enum_name(o, kObjectiveNames); }
std::string to_string(NoiseCovariance n) {
  return enum_name(n, kNoiseCovNames);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[experiment]\n";
  out << "name = " << c.name << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "seed = " << c.seed << "\n";
  out << "\n[dataset]\n";
  out << "kind = " << to_string(c.dataset.kind) << "\n";
  out << "size = " << c.dataset.size << "\n";
  out << "seed = " << c.dataset.seed << "\n";
  out << "normalize = " << to_string(c.dataset.normalize) << "\n";
  out << "components = " << c.dataset.components << "\n";
  out << "radius = " << fmt_double(c.dataset.radius) << "\n";
  out << "noise = " << fmt_double(c.dataset.noise) << "\n";
  out << "latent_dim = " << c.dataset.latent_dim << "\n";
  out << "obs_dim = " << c.dataset.obs_dim << "\n";
  out << "sigma = " << fmt_double(c.dataset.sigma) << "\n";
  out << "path = " << c.dataset.path << "\n";
  out << "\n[model]\n";
  out << "latent_dim = " << c.model.latent_dim << "\n";
  out << "hidden = " << fmt_hidden(c.model.hidden) << "\n";
  out << "likelihood = " << to_string(c.model.likelihood) << "\n";
  out << "prior_variance = " << fmt_double(c.model.prior_variance) << "\n";
  out << "decoder_scale = " << to_string(c.model.scale_mode) << "\n";
  out << "decoder_scale_fixed = " << fmt_double(c.model.fixed_scale) << "\n";
  out << "\n[train]\n";
  out << "algo = " << to_string(c.train.algo) << "\n";
  out << "objective = " << to_string(c.train.objective) << "\n";
  out << "epochs = " << c.train.epochs << "\n";
  out << "batch_size = " << c.train.batch_size << "\n";
  out << "learning_rate = " << fmt_double(c.train.learning_rate) << "\n";
  out << "adam_beta1 = " << fmt_double(c.train.adam_beta1) << "\n";
  out << "adam_beta2 = " << fmt_double(c.train.adam_beta2) << "\n";
  out << "adam_eps = " << fmt_double(c.train.adam_eps) << "\n";
  out << "step_size = " << fmt_double(c.train.sampler.step_size) << "\n";
  out << "steps = " << c.train.sampler.steps << "\n";
  out << "precond = " << (c.train.sampler.precond_enabled ? "true" : "false")
      << "\n";
  out << "precond_decay = " << fmt_double(c.train.sampler.precond_decay)
      << "\n";
  out << "noise_cov = " << to_string(c.train.sampler.noise_cov) << "\n";
  out << "noise_scale = " << fmt_double(c.train.sampler.noise_scale) << "\n";
  out << "prior_init_batches = " << c.train.prior_init_batches << "\n";
  out << "clip_norm = " << fmt_double(c.train.clip_norm) << "\n";
  out << "burn_in_fraction = " << fmt_double(c.train.burn_in_fraction) << "\n";
  out << "train_theta = " << (c.train.train_theta ? "true" : "false") << "\n";
  out << "train_phi = " << (c.train.train_phi ? "true" : "false") << "\n";
  out << "\n[eval]\n";
  out << "every = " << c.eval.every << "\n";
  out << "samples = " << c.eval.samples << "\n";
  out << "knn_k = " << c.eval.knn_k << "\n";
  out << "mmd_bandwidth = " << fmt_double(c.eval.mmd_bandwidth) << "\n";
  out << "holdout = " << fmt_double(c.eval.holdout) << "\n";
  return out.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value, got '" + t + "'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    std::string full = section + "." + key;

    try {
      if (full == "experiment.name") c.name = value;
      else if (full == "experiment.out_dir") c.out_dir = value;
      else if (full == "experiment.seed") c.seed = std::stoull(value);
      else if (full == "dataset.kind")
        c.dataset.kind = parse_enum(value, full, kDatasetNames);
      else if (full == "dataset.size") c.dataset.size = std::stoll(value);
      else if (full == "dataset.seed") c.dataset.seed = std::stoull(value);
      else if (full == "dataset.normalize")
        c.dataset.normalize = parse_enum(value, full, kNormNames);
      else if (full == "dataset.components")
        c.dataset.components = std::stoll(value);
      else if (full == "dataset.radius") c.dataset.radius = std::stod(value);
      else if (full == "dataset.noise") c.dataset.noise = std::stod(value);
      else if (full == "dataset.latent_dim")
        c.dataset.latent_dim = std::stoll(value);
      else if (full == "dataset.obs_dim") c.dataset.obs_dim = std::stoll(value);
      else if (full == "dataset.sigma") c.dataset.sigma = std::stod(value);
      else if (full == "dataset.path") c.dataset.path = value;
      else if (full == "model.latent_dim")
        c.model.latent_dim = std::stoll(value);
      else if (full == "model.hidden") c.model.hidden = parse_hidden(value);
      else if (full == "model.likelihood")
        c.model.likelihood = parse_enum(value, full, kLikelihoodNames);
      else if (full == "model.prior_variance")
        c.model.prior_variance = std::stod(value);
      else if (full == "model.decoder_scale")
        c.model.scale_mode = parse_enum(value, full, kScaleNames);
      else if (full == "model.decoder_scale_fixed")
        c.model.fixed_scale = std::stod(value);
      else if (full == "train.algo")
        c.train.algo = parse_enum(value, full, kAlgoNames);
      else if (full == "train.objective")
        c.train.objective = parse_enum(value, full, kObjectiveNames);
      else if (full == "train.epochs") c.train.epochs = std::stoll(value);
      else if (full == "train.batch_size")
        c.train.batch_size = std::stoll(value);
      else if (full == "train.learning_rate")
        c.train.learning_rate = std::stod(value);
      else if (full == "train.adam_beta1")
        c.train.adam_beta1 = std::stod(value);
      else if (full == "train.adam_beta2")
        c.train.adam_beta2 = std::stod(value);
      else if (full == "train.adam_eps") c.train.adam_eps = std::stod(value);
      else if (full == "train.step_size")
        c.train.sampler.step_size = std::stod(value);
      else if (full == "train.steps") c.train.sampler.steps = std::stoll(value);
      else if (full == "train.precond")
        c.train.sampler.precond_enabled = parse_bool(value, full);
      else if (full == "train.precond_decay")
        c.train.sampler.precond_decay = std::stod(value);
      else if (full == "train.noise_cov")
        c.train.sampler.noise_cov = parse_enum(value, full, kNoiseCovNames);
      else if (full == "train.noise_scale")
        c.train.sampler.noise_scale = std::stod(value);
      else if (full == "train.prior_init_batches")
        c.train.prior_init_batches = std::stoll(value);
      else if (full == "train.clip_norm") c.train.clip_norm = std::stod(value);
      else if (full == "train.burn_in_fraction")
        c.train.burn_in_fraction = std::stod(value);
      else if (full == "train.train_theta")
        c.train.train_theta = parse_bool(value, full);
      else if (full == "train.train_phi")
        c.train.train_phi = parse_bool(value, full);
      else if (full == "eval.every") c.eval.every = std::stoll(value);
      else if (full == "eval.samples") c.eval.samples = std::stoll(value);
      else if (full == "eval.knn_k") c.eval.knn_k = std::stoll(value);
      else if (full == "eval.mmd_bandwidth")
        c.eval.mmd_bandwidth = std::stod(value);
      else if (full == "eval.holdout") c.eval.holdout = std::stod(value);
      else
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown key '" + full + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": cannot parse value '" + value + "' for '" + full +
                        "' (" + e.what() + ")");
    }
  }
  c.train.seed = c.seed;
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot open '" + path + "' for write");
  out << serialize_config(cfg);
  if (!out) throw IoError("config: write failed for '" + path + "'");
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

GenerativeModel make_generative_model(const ModelConfig& mc,
                                      std::int64_t obs_dim,
                                      std::uint64_t seed) {
  // decoder mirrors the encoder stack
  std::vector<std::int64_t> hidden(mc.hidden.rbegin(), mc.hidden.rend());
  return GenerativeModel::make(obs_dim, mc.latent_dim, hidden, mc.likelihood,
                               RngStream(seed).derive(rng_tag::kModelInit)
                                   .derive(1),
                               mc.scale_mode, mc.fixed_scale,
                               mc.prior_variance);
}

WarmStartModel make_warm_start_model(const ModelConfig& mc,
                                     std::int64_t obs_dim,
                                     std::uint64_t seed) {
  return WarmStartModel::make(obs_dim, mc.latent_dim, mc.hidden,
                              RngStream(seed).derive(rng_tag::kModelInit)
                                  .derive(2));
}

}  // namespace lpc
