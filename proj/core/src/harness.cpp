#include "crl/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "crl/graph.hpp"
#include "crl/linalg.hpp"
#include "crl/lscalei.hpp"
#include "crl/mixing.hpp"
#include "json.hpp"

namespace crl::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Purpose tags for derive_seed(graph_seed, tag).
enum Stream : std::uint64_t {
  kStreamGraph = 1,
  kStreamScm = 2,
  kStreamMix = 3,
  kStreamEnvs = 4,
  kStreamObs = 5,
  kStreamNoise = 6,
  kStreamFit = 7,
  kStreamEnvSamples = 1000,
};

Rng stream(std::uint64_t seed, std::uint64_t tag) { return make_rng(derive_seed(seed, tag)); }

const char* family_name(ScmFamily f) { return f == ScmFamily::linear ? "linear" : "quadratic"; }
const char* kind_name(InterventionKind k) { return k == InterventionKind::hard ? "hard" : "soft"; }
const char* mode_name(ScoreMode m) {
  switch (m) {
    case ScoreMode::oracle: return "oracle";
    case ScoreMode::gaussian_estimate: return "gaussian";
    case ScoreMode::noisy_oracle: return "noisy";
  }
  return "oracle";
}
const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::lscalei: return "lscalei";
    case Algorithm::lscalei_fullrank: return "lscalei-fullrank";
    case Algorithm::gscalei: return "gscalei";
  }
  return "lscalei";
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

// ---- config parsing ----

struct Reader {
  const json& j;
  std::string prefix;
  std::vector<std::string>& problems;

  template <class T>
  void get(const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(prefix + key + ": wrong type");
    }
  }
  void choice(const char* key, std::string& out, std::initializer_list<const char*> allowed) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) {
      problems.push_back(prefix + key + ": expected a string");
      return;
    }
    std::string v = j.at(key).get<std::string>();
    for (const char* a : allowed)
      if (v == a) {
        out = v;
        return;
      }
    std::string msg = prefix + key + ": unknown value '" + v + "' (expected";
    for (const char* a : allowed) msg += std::string(" ") + a;
    problems.push_back(msg + ")");
  }
  void unknown_keys(std::initializer_list<const char*> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) problems.push_back(prefix + it.key() + ": unknown field");
    }
  }
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : "\n") + p;
  return s;
}

bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

ConfigError::ConfigError(const std::vector<std::string>& problems)
    : std::runtime_error("invalid config:\n" + join(problems)), problems_(problems) {}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("<document>: ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"<document>: expected a JSON object"});

  ExperimentConfig c;
  std::vector<std::string> problems;
  Reader r{j, "", problems};
  r.unknown_keys({"name", "n", "d", "n_s", "density", "scm", "intervention", "envs_per_node", "coupling",
                  "score_mode", "noise_var", "algorithm", "lambda_g", "lambda_eigv", "hard_var_multiplier",
                  "second_var_multiplier", "gscale", "n_graphs", "seed", "sweep", "dump_scores"});
  r.get("name", c.name);
  r.get("n", c.n);
  r.get("d", c.d);
  r.get("n_s", c.n_s);
  r.get("density", c.density);
  std::string s = family_name(c.scm);
  r.choice("scm", s, {"linear", "quadratic"});
  c.scm = s == "linear" ? ScmFamily::linear : ScmFamily::quadratic;
  s = kind_name(c.intervention);
  r.choice("intervention", s, {"hard", "soft"});
  c.intervention = s == "hard" ? InterventionKind::hard : InterventionKind::soft;
  r.get("envs_per_node", c.envs_per_node);
  s = c.coupled ? "coupled" : "uncoupled";
  r.choice("coupling", s, {"coupled", "uncoupled"});
  c.coupled = s == "coupled";
  s = mode_name(c.score_mode);
  r.choice("score_mode", s, {"oracle", "gaussian", "noisy"});
  c.score_mode = s == "oracle" ? ScoreMode::oracle : s == "gaussian" ? ScoreMode::gaussian_estimate : ScoreMode::noisy_oracle;
  r.get("noise_var", c.noise_var);
  s = algorithm_name(c.algorithm);
  r.choice("algorithm", s, {"lscalei", "lscalei-fullrank", "gscalei"});
  c.algorithm = s == "lscalei" ? Algorithm::lscalei : s == "gscalei" ? Algorithm::gscalei : Algorithm::lscalei_fullrank;
  if (j.contains("lambda_g") && !j.at("lambda_g").is_null()) {
    double v = 0.0;
    r.get("lambda_g", v);
    c.lambda_g = v;
  }
  r.get("lambda_eigv", c.lambda_eigv);
  r.get("hard_var_multiplier", c.hard_var_multiplier);
  r.get("second_var_multiplier", c.second_var_multiplier);
  r.get("n_graphs", c.n_graphs);
  r.get("seed", c.seed);
  r.get("dump_scores", c.dump_scores);

  if (j.contains("gscale")) {
    const json& g = j.at("gscale");
    if (!g.is_object()) {
      problems.push_back("gscale: expected an object");
    } else {
      Reader gr{g, "gscale.", problems};
      gr.unknown_keys({"lambda", "eps", "steps", "lr", "rms_decay", "rms_eps", "early_stop_window", "early_stop_tol",
                       "norm", "trace_every", "max_restarts", "restart_tol"});
      gr.get("lambda", c.gscale.lambda);
      gr.get("eps", c.gscale.eps);
      if (g.contains("steps")) {
        gr.get("steps", c.gscale.steps);
        c.gscale_steps_set = true;
      }
      gr.get("lr", c.gscale.lr);
      gr.get("rms_decay", c.gscale.rms_decay);
      gr.get("rms_eps", c.gscale.rms_eps);
      gr.get("early_stop_window", c.gscale.early_stop_window);
      gr.get("early_stop_tol", c.gscale.early_stop_tol);
      std::string norm = c.gscale.norm == gscalei::LossNorm::frobenius ? "frobenius" : "l11";
      gr.choice("norm", norm, {"frobenius", "l11"});
      c.gscale.norm = norm == "frobenius" ? gscalei::LossNorm::frobenius : gscalei::LossNorm::l11;
      gr.get("trace_every", c.gscale.trace_every);
      gr.get("max_restarts", c.gscale.max_restarts);
      gr.get("restart_tol", c.gscale.restart_tol);
    }
  }
  if (j.contains("sweep") && !j.at("sweep").is_null()) {
    const json& sw = j.at("sweep");
    if (!sw.is_object()) {
      problems.push_back("sweep: expected an object");
    } else {
      Reader sr{sw, "sweep.", problems};
      sr.unknown_keys({"axis", "values"});
      SweepSpec spec;
      if (!sw.contains("axis")) problems.push_back("sweep.axis: missing");
      sr.choice("axis", spec.axis, {"n_s", "noise_var", "d", "density"});
      if (!sw.contains("values")) problems.push_back("sweep.values: missing");
      sr.get("values", spec.values);
      c.sweep = spec;
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  if (!c.gscale_steps_set) c.gscale.steps = gscalei::default_steps(c.n);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"<file>: cannot open " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  std::vector<std::string> p;
  if (c.n < 1) p.push_back("n: must be >= 1");
  if (c.d < c.n) p.push_back("d: must be >= n");
  if (c.n_s < 1) p.push_back("n_s: must be >= 1");
  if (c.n_s < c.n) p.push_back("n_s: must be >= n");
  if (!(c.density >= 0.0 && c.density <= 1.0)) p.push_back("density: must lie in [0, 1]");
  if (c.envs_per_node != 1 && c.envs_per_node != 2) p.push_back("envs_per_node: must be 1 or 2");
  if (!(c.noise_var >= 0.0)) p.push_back("noise_var: must be >= 0");
  if (c.lambda_g && !(*c.lambda_g > 0.0)) p.push_back("lambda_g: must be > 0");
  if (!(c.lambda_eigv > 0.0 && c.lambda_eigv < 1.0)) p.push_back("lambda_eigv: must lie in (0, 1)");
  if (!(c.hard_var_multiplier >= 0.0)) p.push_back("hard_var_multiplier: must be >= 0 (0 selects the default)");
  if (!(c.second_var_multiplier > 0.0)) p.push_back("second_var_multiplier: must be > 0");
  if (c.n_graphs < 1) p.push_back("n_graphs: must be >= 1");

  if (c.score_mode == ScoreMode::gaussian_estimate) {
    if (c.scm != ScmFamily::linear) p.push_back("score_mode: gaussian requires scm = linear");
    if (c.algorithm == Algorithm::gscalei) p.push_back("score_mode: gaussian requires a linear mixing (lscalei)");
    if (c.n_s <= c.n) p.push_back("n_s: gaussian estimates need n_s > n");
  }
  if (c.algorithm == Algorithm::gscalei) {
    if (c.intervention != InterventionKind::hard) p.push_back("intervention: gscalei requires hard interventions");
    if (c.envs_per_node != 2) p.push_back("envs_per_node: gscalei requires 2");
    if (!c.coupled && c.n > 7) p.push_back("n: uncoupled search supports n <= 7");
  } else {
    if (c.envs_per_node != 1) p.push_back("envs_per_node: lscalei uses 1");
    if (!c.coupled) p.push_back("coupling: uncoupled is only defined for gscalei");
  }
  const gscalei::Config& g = c.gscale;
  if (!(g.lambda > 0.0)) p.push_back("gscale.lambda: must be > 0");
  if (!(g.eps > 0.0)) p.push_back("gscale.eps: must be > 0");
  if (g.steps < 1) p.push_back("gscale.steps: must be >= 1");
  if (!(g.lr > 0.0)) p.push_back("gscale.lr: must be > 0");
  if (!(g.rms_decay >= 0.0 && g.rms_decay < 1.0)) p.push_back("gscale.rms_decay: must lie in [0, 1)");
  if (!(g.rms_eps > 0.0)) p.push_back("gscale.rms_eps: must be > 0");
  if (g.early_stop_window < 0) p.push_back("gscale.early_stop_window: must be >= 0");
  if (g.max_restarts < 0) p.push_back("gscale.max_restarts: must be >= 0");
  if (!(g.restart_tol >= 0.0)) p.push_back("gscale.restart_tol: must be >= 0");
  if (!(g.early_stop_tol >= 0.0)) p.push_back("gscale.early_stop_tol: must be >= 0");
  if (g.trace_every < 0) p.push_back("gscale.trace_every: must be >= 0");

  if (c.sweep) {
    const SweepSpec& s = *c.sweep;
    if (s.values.empty()) p.push_back("sweep.values: must not be empty");
    for (double v : s.values) {
      if (s.axis == "n_s" && !(is_integer(v) && v >= std::max(1, c.n))) p.push_back("sweep.values: n_s values must be integers >= n");
      if (s.axis == "d" && !(is_integer(v) && v >= c.n)) p.push_back("sweep.values: d values must be integers >= n");
      if (s.axis == "density" && !(v >= 0.0 && v <= 1.0)) p.push_back("sweep.values: density values must lie in [0, 1]");
      if (s.axis == "noise_var" && !(v >= 0.0)) p.push_back("sweep.values: noise_var values must be >= 0");
    }
    if (s.axis == "noise_var" && c.score_mode != ScoreMode::noisy_oracle)
      p.push_back("sweep.axis: noise_var sweeps require score_mode = noisy");
  }
  if (!p.empty()) throw ConfigError(p);
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["n"] = c.n;
  j["d"] = c.d;
  j["n_s"] = c.n_s;
  j["density"] = c.density;
  j["scm"] = family_name(c.scm);
  j["intervention"] = kind_name(c.intervention);
  j["envs_per_node"] = c.envs_per_node;
  j["coupling"] = c.coupled ? "coupled" : "uncoupled";
  j["score_mode"] = mode_name(c.score_mode);
  j["noise_var"] = c.noise_var;
  j["algorithm"] = algorithm_name(c.algorithm);
  j["lambda_g"] = effective_lambda_g(c);
  j["lambda_eigv"] = c.lambda_eigv;
  j["hard_var_multiplier"] = c.hard_var_multiplier;
  j["second_var_multiplier"] = c.second_var_multiplier;
  j["gscale"] = {{"lambda", c.gscale.lambda},
                 {"eps", c.gscale.eps},
                 {"steps", c.gscale.steps},
                 {"lr", c.gscale.lr},
                 {"rms_decay", c.gscale.rms_decay},
                 {"rms_eps", c.gscale.rms_eps},
                 {"early_stop_window", c.gscale.early_stop_window},
                 {"early_stop_tol", c.gscale.early_stop_tol},
                 {"norm", c.gscale.norm == gscalei::LossNorm::frobenius ? "frobenius" : "l11"},
                 {"trace_every", c.gscale.trace_every},
                 {"max_restarts", c.gscale.max_restarts},
                 {"restart_tol", c.gscale.restart_tol}};
  j["n_graphs"] = c.n_graphs;
  j["seed"] = c.seed;
  if (c.sweep) j["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}};
  j["dump_scores"] = c.dump_scores;
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

double effective_lambda_g(const ExperimentConfig& c) {
  if (c.lambda_g) return *c.lambda_g;
  const bool perfect = c.score_mode == ScoreMode::oracle;
  if (c.algorithm == Algorithm::gscalei) return perfect ? gscalei::kLambdaGPerfect : gscalei::kLambdaGNoisy;
  if (c.scm == ScmFamily::quadratic) return perfect ? lscalei::kLambdaQuadraticPerfect : lscalei::kLambdaQuadraticNoisy;
  if (c.intervention == InterventionKind::soft)
    return perfect ? lscalei::kLambdaLinearSoftPerfect : lscalei::kLambdaLinearSoftNoisy;
  return perfect ? lscalei::kLambdaLinearHardPerfect : lscalei::kLambdaLinearHardNoisy;
}

std::uint64_t graph_seed(std::uint64_t master, int graph) {
  return derive_seed(master, static_cast<std::uint64_t>(graph));
}

namespace {

struct Problem {
  Dag dag;
  std::shared_ptr<const Scm> scm;
  EnvironmentSet envs;
  Mixing mix;
  Mat z0;  // observational latent samples (evaluation points)
  Mat x;   // observed samples
};

Problem make_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  Problem p;
  Rng rg = stream(seed, kStreamGraph);
  p.dag = sample_erdos_renyi(cfg.n, cfg.density, rg);
  Rng rs = stream(seed, kStreamScm);
  p.scm = std::make_shared<const Scm>(cfg.scm == ScmFamily::linear ? sample_linear_scm(p.dag, rs)
                                                                     : sample_quadratic_scm(p.dag, rs));
  EnvironmentSetOptions opts;
  opts.kind = cfg.intervention;
  opts.envs_per_node = cfg.envs_per_node;
  opts.coupled = cfg.coupled;
  opts.hard_var_multiplier = cfg.hard_var_multiplier;
  if (cfg.algorithm == Algorithm::gscalei && opts.hard_var_multiplier == 0.0)
    opts.hard_var_multiplier = kGscaleFirstVarMultiplier;
  opts.second_var_multiplier = cfg.second_var_multiplier;
  Rng re = stream(seed, kStreamEnvs);
  p.envs = build_environment_set(p.scm, opts, re);
  Rng rm = stream(seed, kStreamMix);
  const MixKind kind = cfg.algorithm == Algorithm::gscalei ? MixKind::tanh_glm : MixKind::linear;
  p.mix = sample_mixing(cfg.n, cfg.d, rm, kind);
  Rng ro = stream(seed, kStreamObs);
  p.z0 = p.envs.observational().sample(cfg.n_s, ro);
  if (kind == MixKind::tanh_glm) limit_saturation(p.mix, p.z0);
  p.x = forward_rows(p.mix, p.z0);
  return p;
}

// Observed-space scores of every environment at the observational samples,
// perturbed when the score mode is noisy. Accumulates the SNR terms.
struct ObservedScores {
  std::vector<Mat> s;
  double signal = 0.0;
  double noise = 0.0;
};

Mat observed_scores(const ExperimentConfig& cfg, const Problem& p, const EnvModel& env, Rng& noise_rng,
                    ObservedScores& acc) {
  Mat clean = oracle_observed_scores(env, p.mix, p.z0);
  if (cfg.score_mode != ScoreMode::noisy_oracle) return clean;
  Mat noisy = noisy_scores(clean, cfg.noise_var, noise_rng);
  acc.signal += clean.squaredNorm();
  acc.noise += (noisy - clean).squaredNorm();
  return noisy;
}

// Row m of the estimate belongs to environment m, so evaluation aligns it
// with that environment's target. Only the MCC value uses its own matching.
MetricReport evaluate(const Problem& p, const Mat& z_hat, const Mat& hg, const Dag& g_hat) {
  const Permutation& targets = p.envs.oracle_targets();
  Permutation perm(targets.size());
  for (std::size_t m = 0; m < targets.size(); ++m) perm[static_cast<std::size_t>(targets[m])] = static_cast<int>(m);
  MetricReport r;
  r.mcc = mcc(p.z0, z_hat).value;
  r.perm = perm;
  r.shd = shd(p.dag, g_hat, perm);
  r.shd_tc = shd(transitive_closure(p.dag), transitive_closure(g_hat), perm);
  TransformErrors te = effective_transform_errors(hg, p.dag, perm);
  r.l_scale = te.l_scale;
  r.l_pa = te.l_pa;
  r.l_sur = te.l_sur;
  r.l_norm = normalized_latent_error(p.z0, z_hat, perm);
  return r;
}

void run_lscalei(const ExperimentConfig& cfg, const Problem& p, std::uint64_t seed, RunRecord& rec,
                 const std::string& dump_dir) {
  const int n = cfg.n;
  const Mat u = reduction_basis(p.x, n);
  const Mat x_red = p.x * u;
  const Mat gu = u.transpose() * p.mix.G;  // reduced mixing
  const bool need_env_samples =
      cfg.score_mode == ScoreMode::gaussian_estimate ||
      (cfg.algorithm == Algorithm::lscalei && cfg.intervention == InterventionKind::hard);

  std::vector<Mat> env_red(n);
  if (need_env_samples) {
    for (int m = 0; m < n; ++m) {
      Rng r = stream(seed, kStreamEnvSamples + static_cast<std::uint64_t>(m));
      env_red[m] = p.envs.first(m).sample(cfg.n_s, r) * gu.transpose();
    }
  }

  std::vector<Mat> diffs(n);
  if (cfg.score_mode == ScoreMode::oracle) {
    const Mat s0 = p.envs.observational().scores(p.z0);
    const Mat to_red = p.mix.G_pinv * u;
    for (int m = 0; m < n; ++m) diffs[m] = (p.envs.first(m).scores(p.z0) - s0) * to_red;
  } else if (cfg.score_mode == ScoreMode::gaussian_estimate) {
    for (int m = 0; m < n; ++m) diffs[m] = gaussian_score_diff(env_red[m], x_red, x_red);
  } else {
    Rng nr = stream(seed, kStreamNoise);
    ObservedScores acc;
    const Mat s0 = observed_scores(cfg, p, p.envs.observational(), nr, acc);
    for (int m = 0; m < n; ++m) diffs[m] = (observed_scores(cfg, p, p.envs.first(m), nr, acc) - s0) * u;
    rec.snr_db = acc.noise > 0.0 ? 10.0 * std::log10(acc.signal / acc.noise) : std::numeric_limits<double>::infinity();
  }

  if (!dump_dir.empty()) {
    ScoreDiffDataset ds;
    ds.x = x_red;
    for (int m = 0; m < n; ++m) ds.pairs.push_back({1 + m, 0});
    ds.diffs = diffs;
    write_dataset(dump_dir, ds);
  }

  const double lambda_g = effective_lambda_g(cfg);
  Mat h;
  Dag g_hat;
  if (cfg.algorithm == Algorithm::lscalei) {
    std::vector<Mat> covs;
    if (cfg.intervention == InterventionKind::hard)
      for (int m = 0; m < n; ++m) covs.push_back(linalg::covariance(env_red[m]));
    lscalei::Options o;
    o.mode = cfg.intervention == InterventionKind::hard ? lscalei::Mode::hard : lscalei::Mode::soft;
    o.lambda_g = lambda_g;
    lscalei::CrlEstimate est = lscalei::run(x_red, diffs, covs, o);
    h = est.H;
    g_hat = est.g_hat;
  } else {
    lscalei::Options o;
    o.mode = lscalei::Mode::soft;
    o.lambda_g = lambda_g;
    lscalei::CrlEstimate first = lscalei::run(x_red, diffs, {}, o);
    lscalei::FullRankResult fr =
        lscalei::full_rank_recovery(lscalei::compute_correlations(diffs), first.g_hat.topological_order(), cfg.lambda_eigv);
    h = fr.H;
    g_hat = fr.g_hat;
  }
  rec.metrics = evaluate(p, x_red * h.transpose(), h * gu, g_hat);
}

void run_gscalei(const ExperimentConfig& cfg, const Problem& p, std::uint64_t seed, RunRecord& rec,
                 const std::string& dump_dir) {
  const int n = cfg.n;
  Rng nr = stream(seed, kStreamNoise);
  ObservedScores acc;
  const Mat s0 = observed_scores(cfg, p, p.envs.observational(), nr, acc);
  std::vector<Mat> s1(n), s2(n);
  for (int m = 0; m < n; ++m) s1[m] = observed_scores(cfg, p, p.envs.first(m), nr, acc);
  for (int m = 0; m < n; ++m) s2[m] = observed_scores(cfg, p, p.envs.second(m), nr, acc);
  if (cfg.score_mode == ScoreMode::noisy_oracle)
    rec.snr_db = acc.noise > 0.0 ? 10.0 * std::log10(acc.signal / acc.noise) : std::numeric_limits<double>::infinity();

  gscalei::Config gc = cfg.gscale;
  gc.lambda_g = effective_lambda_g(cfg);
  Rng fr = stream(seed, kStreamFit);

  std::vector<Mat> first_diffs(n), second_diffs(n), obs_int(n);
  for (int m = 0; m < n; ++m) {
    first_diffs[m] = s1[m] - s0;
    second_diffs[m] = s2[m] - s0;
    obs_int[m] = s0 - s1[m];
  }
  if (!dump_dir.empty()) {
    ScoreDiffDataset ds;
    ds.x = p.x;
    for (int m = 0; m < n; ++m) ds.pairs.push_back({1 + m, 0});
    for (int m = 0; m < n; ++m) ds.pairs.push_back({1 + n + m, 0});
    ds.diffs = first_diffs;
    ds.diffs.insert(ds.diffs.end(), second_diffs.begin(), second_diffs.end());
    write_dataset(dump_dir, ds);
  }

  gscalei::FitResult fit;
  if (cfg.coupled) {
    std::vector<Mat> coupled(n);
    for (int m = 0; m < n; ++m) coupled[m] = s1[m] - s2[m];
    fit = gscalei::fit_coupled(p.x, coupled, gc, fr);
  } else {
    const Permutation& t1 = p.envs.oracle_targets();
    const Permutation& t2 = p.envs.oracle_second_targets();
    auto correct = [&](const Permutation& pi) {
      for (int m = 0; m < n; ++m)
        if (t2[pi[m]] != t1[m]) return 0;
      return 1;
    };
    try {
      gscalei::UncoupledResult ur = gscalei::fit_uncoupled(p.x, first_diffs, second_diffs, gc, fr);
      fit = ur.fit;
      rec.coupling_correct = correct(ur.coupling);
    } catch (const gscalei::NoFeasibleCoupling& e) {
      fit = e.best().fit;
      rec.coupling_correct = 0;
      rec.status = "no feasible coupling";
    }
  }
  rec.fit_loss = fit.loss;
  Dag g_hat = gscalei::stage_g2_graph(fit.H, obs_int, p.x, gc.lambda_g);
  rec.metrics = evaluate(p, fit.z_hat, fit.H * p.mix.G, g_hat);
}

}  // namespace

RunRecord run_single(const ExperimentConfig& cfg, int graph, const std::string& dump_dir) {
  RunRecord rec;
  rec.graph = graph;
  rec.seed = graph_seed(cfg.seed, graph);
  rec.snr_db = std::numeric_limits<double>::quiet_NaN();
  rec.fit_loss = std::numeric_limits<double>::quiet_NaN();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Problem p = make_problem(cfg, rec.seed);
    if (cfg.algorithm == Algorithm::gscalei)
      run_gscalei(cfg, p, rec.seed, rec, dump_dir);
    else
      run_lscalei(cfg, p, rec.seed, rec, dump_dir);
  } catch (const std::exception& e) {
    rec.status = sanitize(e.what());
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::vector<Summary> aggregate(const std::vector<RunRecord>& runs, const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::function<double(const RunRecord&)>>> cols = {
      {"mcc", [](const RunRecord& r) { return r.metrics.mcc; }},
      {"shd", [](const RunRecord& r) { return double(r.metrics.shd); }},
      {"shd_tc", [](const RunRecord& r) { return double(r.metrics.shd_tc); }},
      {"l_scale", [](const RunRecord& r) { return r.metrics.l_scale; }},
      {"l_pa", [](const RunRecord& r) { return r.metrics.l_pa; }},
      {"l_sur", [](const RunRecord& r) { return r.metrics.l_sur; }},
      {"l_norm", [](const RunRecord& r) { return r.metrics.l_norm; }},
  };
  if (cfg.score_mode == ScoreMode::noisy_oracle) cols.push_back({"snr_db", [](const RunRecord& r) { return r.snr_db; }});
  if (cfg.algorithm == Algorithm::gscalei) cols.push_back({"fit_loss", [](const RunRecord& r) { return r.fit_loss; }});

  std::vector<Summary> out;
  int ok = 0;
  for (const auto& r : runs) ok += r.ok() ? 1 : 0;
  for (const auto& [name, get] : cols) {
    Summary s;
    s.metric = name;
    double sum = 0.0, sq = 0.0;
    for (const auto& r : runs)
      if (r.ok()) {
        sum += get(r);
        ++s.count;
      }
    if (s.count > 0) {
      s.mean = sum / s.count;
      for (const auto& r : runs)
        if (r.ok()) sq += (get(r) - s.mean) * (get(r) - s.mean);
      s.std_error = s.count > 1 ? std::sqrt(sq / (s.count - 1)) / std::sqrt(double(s.count)) : 0.0;
    } else {
      s.mean = s.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(s);
  }
  if (!cfg.coupled) {
    Summary s{"coupling_correct", 0.0, 0.0, static_cast<int>(runs.size())};
    double sq = 0.0;
    for (const auto& r : runs) s.mean += r.coupling_correct == 1 ? 1.0 : 0.0;
    s.mean /= runs.size();
    for (const auto& r : runs) sq += std::pow((r.coupling_correct == 1 ? 1.0 : 0.0) - s.mean, 2);
    s.std_error = runs.size() > 1 ? std::sqrt(sq / (runs.size() - 1)) / std::sqrt(double(runs.size())) : 0.0;
    out.push_back(s);
  }
  out.push_back({"n_ok", double(ok), 0.0, static_cast<int>(runs.size())});
  out.push_back({"n_failed", double(runs.size() - ok), 0.0, static_cast<int>(runs.size())});
  return out;
}

const Summary& find_summary(const std::vector<Summary>& s, const std::string& metric) {
  for (const auto& x : s)
    if (x.metric == metric) return x;
  throw std::out_of_range("find_summary: no metric " + metric);
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int workers, const std::string& dump_root) {
  validate(cfg);
  std::vector<RunRecord> out(cfg.n_graphs);
  parallel_for(cfg.n_graphs, workers, [&](int g) {
    std::string dir;
    if (!dump_root.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "graph_%04d", g);
      dir = (fs::path(dump_root) / name).string();
    }
    out[g] = run_single(cfg, g, dir);
  });
  return out;
}

std::string runs_csv(const std::vector<RunRecord>& runs, std::uint64_t hash) {
  std::ostringstream os;
  os << "config_hash,graph,seed,status,mcc,shd,shd_tc,l_scale,l_pa,l_sur,l_norm,snr_db,fit_loss,coupling_correct,perm\n";
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  for (const auto& r : runs) {
    const MetricReport& m = r.metrics;
    std::string perm;
    for (std::size_t i = 0; i < m.perm.size(); ++i) perm += (i ? " " : "") + std::to_string(m.perm[i]);
    os << hex << ',' << r.graph << ',' << r.seed << ',' << sanitize(r.status) << ',' << fmt(m.mcc) << ',' << m.shd << ','
       << m.shd_tc << ',' << fmt(m.l_scale) << ',' << fmt(m.l_pa) << ',' << fmt(m.l_sur) << ',' << fmt(m.l_norm) << ','
       << fmt(r.snr_db) << ',' << fmt(r.fit_loss) << ',' << r.coupling_correct << ',' << perm << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const std::vector<Summary>& s) {
  std::ostringstream os;
  os << "metric,mean,stderr,count\n";
  for (const auto& x : s) os << x.metric << ',' << fmt(x.mean) << ',' << fmt(x.std_error) << ',' << x.count << '\n';
  return os.str();
}

std::vector<RunRecord> cli_run(const ExperimentConfig& cfg, const std::string& out_dir, int workers) {
  validate(cfg);
  fs::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dump_root = cfg.dump_scores ? (fs::path(out_dir) / "scores").string() : "";
  std::vector<RunRecord> runs = run_experiment(cfg, workers, dump_root);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::uint64_t hash = config_hash(cfg);
  std::vector<Summary> agg = aggregate(runs, cfg);
  write_text(fs::path(out_dir) / "runs.csv", runs_csv(runs, hash));
  write_text(fs::path(out_dir) / "aggregate.csv", aggregate_csv(agg));

  json man;
  man["config"] = json::parse(to_json(cfg));
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  man["config_hash"] = hex;
  man["master_seed"] = cfg.seed;
  man["workers"] = workers;
  man["seed_scheme"] = "graph seed = derive_seed(master_seed, graph_index); splitmix64 mixing";
  json per = json::array();
  for (const auto& r : runs) per.push_back({{"graph", r.graph}, {"seed", r.seed}, {"wall_seconds", r.wall_seconds}});
  man["runs"] = per;
  man["total_wall_seconds"] = total;
  man["files"] = cfg.dump_scores ? json::array({"runs.csv", "aggregate.csv", "scores/"}) : json::array({"runs.csv", "aggregate.csv"});
  write_text(fs::path(out_dir) / "manifest.json", man.dump(2) + "\n");
  return runs;
}

ExperimentConfig with_axis_value(const ExperimentConfig& cfg, const std::string& axis, double value) {
  ExperimentConfig c = cfg;
  c.sweep.reset();
  if (axis == "n_s")
    c.n_s = static_cast<int>(value);
  else if (axis == "d")
    c.d = static_cast<int>(value);
  else if (axis == "density")
    c.density = value;
  else if (axis == "noise_var")
    c.noise_var = value;
  else
    throw ConfigError({"sweep.axis: unknown axis '" + axis + "'"});
  return c;
}

void cli_sweep(const ExperimentConfig& cfg, const std::string& out_dir, int workers) {
  validate(cfg);
  if (!cfg.sweep) throw ConfigError({"sweep: missing (required for the sweep subcommand)"});
  fs::create_directories(out_dir);
  std::ostringstream os;
  os << "axis,value,metric,mean,stderr,count\n";
  for (double v : cfg.sweep->values) {
    ExperimentConfig c = with_axis_value(cfg, cfg.sweep->axis, v);
    char name[96];
    std::snprintf(name, sizeof name, "%s_%g", cfg.sweep->axis.c_str(), v);
    std::vector<RunRecord> runs = cli_run(c, (fs::path(out_dir) / name).string(), workers);
    for (const auto& s : aggregate(runs, c))
      os << cfg.sweep->axis << ',' << fmt(v) << ',' << s.metric << ',' << fmt(s.mean) << ',' << fmt(s.std_error) << ','
         << s.count << '\n';
  }
  write_text(fs::path(out_dir) / "sweep.csv", os.str());
}

std::vector<ExtrapolationRow> extrapolation_residuals(const ExperimentConfig& cfg, int graph) {
  const std::uint64_t seed = graph_seed(cfg.seed, graph);
  Problem p = make_problem(cfg, seed);
  const EnvModel& obs = p.envs.observational();
  Rng nr = stream(seed, kStreamNoise);
  ObservedScores acc;
  std::vector<ExtrapolationRow> rows;
  for (int a = 0; a < cfg.n; ++a)
    for (int b = a + 1; b < cfg.n; ++b) {
      EnvModel ea = apply_intervention(obs, default_hard_intervention(p.envs.scm(), a));
      EnvModel eb = apply_intervention(obs, default_hard_intervention(p.envs.scm(), b));
      EnvModel eab = apply_intervention(ea, default_hard_intervention(p.envs.scm(), b));
      const Mat s0 = observed_scores(cfg, p, obs, nr, acc);
      const Mat d1 = observed_scores(cfg, p, ea, nr, acc) - s0;
      const Mat d2 = observed_scores(cfg, p, eb, nr, acc) - s0;
      const Mat direct = observed_scores(cfg, p, eab, nr, acc) - s0;
      const Vec res = (extrapolate_score_diff(d1, d2) - direct).rowwise().norm();
      rows.push_back({graph, a, b, res.maxCoeff(), res.mean()});
    }
  return rows;
}

void cli_extrapolate(const ExperimentConfig& cfg, const std::string& out_dir, int workers) {
  validate(cfg);
  fs::create_directories(out_dir);
  std::vector<std::vector<ExtrapolationRow>> per(cfg.n_graphs);
  parallel_for(cfg.n_graphs, workers, [&](int g) { per[g] = extrapolation_residuals(cfg, g); });
  std::ostringstream os;
  os << "graph,target_a,target_b,max_residual,mean_residual\n";
  for (const auto& rows : per)
    for (const auto& r : rows)
      os << r.graph << ',' << r.target_a << ',' << r.target_b << ',' << fmt(r.max_residual) << ','
         << fmt(r.mean_residual) << '\n';
  write_text(fs::path(out_dir) / "extrapolate.csv", os.str());
}

}  // namespace crl::harness
