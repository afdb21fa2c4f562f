#include "latinv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <sstream>
#include <thread>

#include "latinv/checkpoint.hpp"
#include "latinv/error.hpp"
#include "latinv/protocol.hpp"
#include "latinv/synthetic.hpp"

namespace latinv {

using nlohmann::json;

namespace {

constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();

// Stream tags for derive_seed; fixed forever so runs stay reproducible.
constexpr std::uint64_t kTagReplay = 0x5a;
constexpr std::uint64_t kTagWarmup = 0x3a;
constexpr std::uint64_t kTagDensity = 0xdc;
constexpr std::uint64_t kTagRandomSearch = 0xba5e;
constexpr std::uint64_t kTagPrivate = 0x5ec7;
constexpr std::uint64_t kTagSweep = 0x5eeb;

class SyntheticBackend final : public WorldBackend {
 public:
  explicit SyntheticBackend(const ExperimentConfig& c)
      : world_(std::make_shared<const SyntheticWorld>(make_world(c.world_params()))),
        private_count_(c.eval.private_samples),
        private_seed_(derive_seed(c.seeds.world, {kTagPrivate})) {}

  std::unique_ptr<Oracle> attack_oracle() override {
    return std::make_unique<SyntheticOracle>(world_, ClassifierView::target);
  }
  std::unique_ptr<Oracle> evaluation_oracle() override {
    return std::make_unique<SyntheticOracle>(world_, ClassifierView::evaluation);
  }
  Matrix features(const Matrix& latents) override {
    Matrix out(latents.rows, world_->feature_dim());
    for (std::size_t r = 0; r < latents.rows; ++r) {
      auto x = synth_generate(*world_, latents.row(r));
      std::copy(x.begin(), x.end(), out.row(r).begin());
    }
    return out;
  }
  const FeatureSet& private_features(std::size_t label) override {
    std::lock_guard lock(mu_);
    auto it = cache_.find(label);
    if (it == cache_.end()) {
      FeatureSet fs{label, synth_private_features(*world_, label, private_count_, private_seed_)};
      it = cache_.emplace(label, std::move(fs)).first;
    }
    return it->second;
  }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
  std::size_t private_count_;
  std::uint64_t private_seed_;
  std::mutex mu_;
  std::map<std::size_t, FeatureSet> cache_;
};

class ExternalBackend final : public WorldBackend {
 public:
  explicit ExternalBackend(const ExperimentConfig& c)
      : command_(c.oracle.command),
        eval_command_(c.oracle.eval_command.empty() ? c.oracle.command : c.oracle.eval_command),
        k_(c.env.latent_dim),
        K_(c.env.num_classes),
        private_path_(c.oracle.private_features) {}

  std::unique_ptr<Oracle> attack_oracle() override { return ExternalOracle::spawn(command_, k_, K_); }
  std::unique_ptr<Oracle> evaluation_oracle() override { return ExternalOracle::spawn(eval_command_, k_, K_); }

  Matrix features(const Matrix& latents) override {
    std::lock_guard lock(mu_);
    if (!feature_oracle_) feature_oracle_ = ExternalOracle::spawn(eval_command_, k_, K_);
    if (!feature_oracle_->trusted()) throw Unavailable("evaluation adapter does not expose trusted features");
    Matrix out;
    for (std::size_t r = 0; r < latents.rows; ++r) {
      auto resp = feature_oracle_->query(latents.row(r), QueryPurpose::evaluation);
      if (resp.feature.empty()) throw Unavailable("evaluation adapter returned no feature vector");
      if (r == 0) out = Matrix(latents.rows, resp.feature.size());
      std::copy(resp.feature.begin(), resp.feature.end(), out.row(r).begin());
    }
    return out;
  }

  const FeatureSet& private_features(std::size_t label) override {
    std::lock_guard lock(mu_);
    if (!loaded_) load_private();
    auto it = sets_.find(label);
    if (it == sets_.end()) throw Unavailable("no private features for class " + std::to_string(label));
    return it->second;
  }

 private:
  void load_private() {
    loaded_ = true;
    if (private_path_.empty()) return;
    std::ifstream in(private_path_);
    if (!in) throw IoError("cannot read private features: " + private_path_);
    std::map<std::size_t, std::vector<std::vector<Real>>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      std::size_t label = 0;
      try {
        label = std::stoul(cell);
      } catch (const std::logic_error&) {
        continue;  // header row
      }
      std::vector<Real> f;
      while (std::getline(ss, cell, ',')) f.push_back(static_cast<Real>(std::stod(cell)));
      rows[label].push_back(std::move(f));
    }
    for (auto& [label, feats] : rows) {
      Matrix m(feats.size(), feats.front().size());
      for (std::size_t r = 0; r < feats.size(); ++r) {
        if (feats[r].size() != m.cols) throw ConfigError("ragged private feature file " + private_path_);
        std::copy(feats[r].begin(), feats[r].end(), m.row(r).begin());
      }
      sets_.emplace(label, FeatureSet{label, std::move(m)});
    }
  }

  std::string command_;
  std::string eval_command_;
  std::size_t k_;
  std::size_t K_;
  std::string private_path_;
  std::mutex mu_;
  std::unique_ptr<ExternalOracle> feature_oracle_;
  bool loaded_ = false;
  std::map<std::size_t, FeatureSet> sets_;
};

json log_to_json(const EpisodeLog& l) {
  return json{{"episode", l.episode},         {"initial_seed", l.initial_seed},
              {"reward", l.reward},           {"r1", l.r1},
              {"r2", l.r2},                   {"r3", l.r3},
              {"episode_return", l.episode_return}, {"target_confidence", l.target_confidence},
              {"best_confidence", l.best_confidence}, {"cumulative_queries", l.cumulative_queries}};
}

EpisodeLog log_from_json(const json& j) {
  EpisodeLog l;
  l.episode = j.at("episode").get<std::size_t>();
  l.initial_seed = j.at("initial_seed").get<std::uint64_t>();
  l.reward = j.at("reward").get<Real>();
  l.r1 = j.at("r1").get<Real>();
  l.r2 = j.at("r2").get<Real>();
  l.r3 = j.at("r3").get<Real>();
  l.episode_return = j.at("episode_return").get<Real>();
  l.target_confidence = j.at("target_confidence").get<Real>();
  l.best_confidence = j.at("best_confidence").get<Real>();
  l.cumulative_queries = j.at("cumulative_queries").get<std::uint64_t>();
  return l;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// exception after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

Matrix single_row(std::span<const Real> v) { return Matrix::row_vector(v); }

// knn/feat for one reconstruction plus density/coverage for `fakes`. Missing
// features leave NaN.
void distance_metrics(WorldBackend& backend, std::size_t label, const LatentVector* best, const Matrix& fakes,
                      std::size_t neighbor_k, MetricsReport& m) {
  m.knn_dist = m.feat_dist = m.density = m.coverage = kNaN;
  try {
    const FeatureSet& real = backend.private_features(label);
    if (best) {
      const Matrix f = backend.features(single_row(*best));
      m.knn_dist = knn_dist(f, real);
      m.feat_dist = feat_dist(f, real);
    }
    if (fakes.rows > neighbor_k && real.features.rows > neighbor_k) {
      const auto dc = density_coverage(real.features, backend.features(fakes), neighbor_k);
      m.density = dc.density;
      m.coverage = dc.coverage;
    }
  } catch (const Unavailable&) {
    // feature channel or private set not configured
  }
}

Real nan_mean(const std::vector<Real>& v) {
  Real s = 0;
  std::size_t n = 0;
  for (Real x : v) {
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / static_cast<Real>(n) : kNaN;
}

void aggregate(RunSummary& s) {
  std::vector<Real> acc, knn, feat, dens, cov, conf;
  s.queries_total = 0;
  for (const auto& c : s.classes) {
    s.queries_total += c.ledger.total();
    if (!c.has_reconstruction) continue;
    acc.push_back(c.metrics.attack_accuracy);
    knn.push_back(c.metrics.knn_dist);
    feat.push_back(c.metrics.feat_dist);
    dens.push_back(c.metrics.density);
    cov.push_back(c.metrics.coverage);
    conf.push_back(c.best_confidence);
  }
  s.metrics.attack_accuracy = nan_mean(acc);
  s.metrics.knn_dist = nan_mean(knn);
  s.metrics.feat_dist = nan_mean(feat);
  s.metrics.density = nan_mean(dens);
  s.metrics.coverage = nan_mean(cov);
  s.metrics.queries_used = s.queries_total;
  s.mean_best_confidence = nan_mean(conf);
}

bool same_real(Real a, Real b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_metrics(const MetricsReport& a, const MetricsReport& b) {
  return same_real(a.attack_accuracy, b.attack_accuracy) && same_real(a.knn_dist, b.knn_dist) &&
         same_real(a.feat_dist, b.feat_dist) && same_real(a.density, b.density) &&
         same_real(a.coverage, b.coverage) && a.queries_used == b.queries_used;
}

// Evaluation of one class's reconstruction through a fresh evaluation oracle.
void evaluate_class(WorldBackend& backend, const ExperimentConfig& config, ClassResult& r, const Matrix& fakes) {
  r.metrics = MetricsReport{};
  r.metrics.queries_used = r.ledger.total();
  if (!r.has_reconstruction) {
    r.metrics.attack_accuracy = r.metrics.knn_dist = r.metrics.feat_dist = kNaN;
    r.metrics.density = r.metrics.coverage = kNaN;
    return;
  }
  auto eval = backend.evaluation_oracle();
  const std::vector<Reconstruction> recon{{r.best_latent, r.target_class}};
  r.metrics.attack_accuracy = attack_accuracy(recon, *eval);
  r.eval_hit = r.metrics.attack_accuracy == Real(1);
  r.eval_queries = eval->ledger().total();
  distance_metrics(backend, r.target_class, &r.best_latent, fakes, config.eval.neighbor_k, r.metrics);
}

struct SampleScore {
  Real accuracy = 0;
  Real density = kNaN;
  Real coverage = kNaN;
};

SampleScore score_samples(WorldBackend& backend, const ExperimentConfig& config, std::size_t label,
                          const Matrix& latents) {
  SampleScore s;
  if (latents.rows == 0) return s;
  auto eval = backend.evaluation_oracle();
  std::vector<Reconstruction> recon;
  recon.reserve(latents.rows);
  for (std::size_t r = 0; r < latents.rows; ++r) {
    recon.push_back({LatentVector(latents.row(r).begin(), latents.row(r).end()), label});
  }
  s.accuracy = attack_accuracy(recon, *eval);
  MetricsReport m;
  distance_metrics(backend, label, nullptr, latents, config.eval.neighbor_k, m);
  s.density = m.density;
  s.coverage = m.coverage;
  return s;
}

}  // namespace

const char* version_stamp() { return "latinv 0.1.0"; }

bool RunSummary::same_results(const RunSummary& o) const {
  if (method != o.method || queries_total != o.queries_total || config_echo != o.config_echo ||
      version != o.version || partial != o.partial || failure != o.failure || failure_kind != o.failure_kind ||
      !same_real(mean_best_confidence, o.mean_best_confidence) || !same_metrics(metrics, o.metrics) ||
      classes.size() != o.classes.size()) {
    return false;
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& a = classes[i];
    const auto& b = o.classes[i];
    if (a.target_class != b.target_class || a.has_reconstruction != b.has_reconstruction ||
        a.best_latent != b.best_latent || !same_real(a.best_confidence, b.best_confidence) ||
        a.best_episode != b.best_episode || a.eval_hit != b.eval_hit || !same_metrics(a.metrics, b.metrics) ||
        !(a.ledger == b.ledger) || a.eval_queries != b.eval_queries || a.episodes_run != b.episodes_run ||
        a.episodes != b.episodes) {
      return false;
    }
  }
  return true;
}

std::unique_ptr<WorldBackend> make_backend(const ExperimentConfig& config) {
  if (config.oracle.kind == OracleSpec::Kind::synthetic) return std::make_unique<SyntheticBackend>(config);
  return std::make_unique<ExternalBackend>(config);
}

ClassTrainer::ClassTrainer(const ExperimentConfig& config, std::size_t target_class, Oracle& oracle)
    : config_(config),
      env_(config.env),
      oracle_(oracle),
      buffer_(config.agent.replay_capacity, config.env.latent_dim),
      sample_rng_(derive_seed(config.seeds.agent, {target_class, kTagReplay})) {
  env_.target_class = target_class;
  env_.validate();
  AgentHyperparams hp = config.agent;
  hp.action_scale = env_.action_scale;
  hp.validate();
  const auto& d = oracle.descriptor();
  if (d.latent_dim != env_.latent_dim || d.num_classes != env_.num_classes) {
    throw ConfigError("oracle announces k=" + std::to_string(d.latent_dim) + ", K=" + std::to_string(d.num_classes) +
                      " but the config has k=" + std::to_string(env_.latent_dim) +
                      ", K=" + std::to_string(env_.num_classes));
  }
  agent_ = make_agent(env_.latent_dim, hp, derive_seed(config.seeds.agent, {target_class}));
}

void ClassTrainer::warmup() {
  if (warmed_up_) return;
  warmed_up_ = true;
  const std::size_t k = env_.latent_dim;
  std::size_t steps = 0;
  for (std::size_t ep = 0; steps < config_.warmup_steps; ++ep) {
    Rng rng(derive_seed(config_.seeds.episodes, {env_.target_class, kTagWarmup, ep}));
    std::uniform_real_distribution<Real> uni(-env_.action_scale, env_.action_scale);
    LatentVector s = init_state(k, rng);
    for (std::size_t step = 1; step <= env_.max_step && steps < config_.warmup_steps; ++step, ++steps) {
      LatentVector a(k);
      for (auto& x : a) x = uni(rng);
      auto out = env_step(s, a, oracle_, env_, step, QueryPurpose::warmup);
      buffer_.push({s, a, out.reward, out.next_state, out.done});
      s = std::move(out.next_state);
    }
  }
}

void ClassTrainer::train_until(std::size_t target) {
  while (episodes_done_ < target) {
    if (!warmed_up_) warmup();
    run_episode();
    if (on_episode) on_episode(*this);
  }
}

void ClassTrainer::run_episode() {
  const std::size_t episode = episodes_done_ + 1;
  const std::size_t y = env_.target_class;
  EpisodeLog log;
  log.episode = episode;
  log.initial_seed = derive_seed(config_.seeds.episodes, {y, episode});
  Rng rng(log.initial_seed);
  LatentVector s = init_state(env_.latent_dim, rng);
  for (std::size_t step = 1; step <= env_.max_step; ++step) {
    LatentVector a = select_action(agent_, s, ActionMode::explore);
    for (Real v : a) {
      if (!std::isfinite(v)) {
        throw NumericError("class " + std::to_string(y) + ", episode " + std::to_string(episode) +
                           ": policy produced a non-finite action");
      }
    }
    StepOutcome out = env_step(s, a, oracle_, env_, step, QueryPurpose::training);
    buffer_.push({s, a, out.reward, out.next_state, out.done});
    if (buffer_.size() >= agent_.hyper.batch_size) {
      try {
        agent_update(agent_, buffer_.sample(agent_.hyper.batch_size, sample_rng_));
      } catch (const NumericError& e) {
        throw NumericError("class " + std::to_string(y) + ", episode " + std::to_string(episode) + ": " + e.what());
      }
    }
    const Real conf = out.state_confidences[y];
    if (!has_best_ || conf > best_conf_) {
      has_best_ = true;
      best_conf_ = conf;
      best_latent_ = out.next_state;
      best_episode_ = episode;
    }
    log.reward = out.reward;
    log.r1 = out.terms.state_score;
    log.r2 = out.terms.action_score;
    log.r3 = out.terms.margin_score;
    log.episode_return += out.reward;
    log.target_confidence = conf;
    s = std::move(out.next_state);
  }
  log.best_confidence = best_conf_;
  log.cumulative_queries = oracle_.ledger().total();
  logs_.push_back(log);
  episodes_done_ = episode;
}

json ClassTrainer::checkpoint() const {
  json logs = json::array();
  for (const auto& l : logs_) logs.push_back(log_to_json(l));
  const auto ledger = oracle_.ledger().snapshot();
  return json{{"target_class", env_.target_class},
              {"agent", agent_to_json(agent_)},
              {"buffer", buffer_to_json(buffer_)},
              {"sample_rng", rng_state(sample_rng_)},
              {"episodes_done", episodes_done_},
              {"warmed_up", warmed_up_},
              {"logs", logs},
              {"has_best", has_best_},
              {"best_latent", best_latent_},
              {"best_confidence", best_conf_},
              {"best_episode", best_episode_},
              {"ledger", {{"counts", ledger.counts}, {"renormalizations", ledger.renormalizations}}}};
}

void ClassTrainer::restore(const json& doc) {
  if (doc.at("target_class").get<std::size_t>() != env_.target_class) {
    throw ConfigError("checkpoint belongs to class " + std::to_string(doc.at("target_class").get<std::size_t>()));
  }
  agent_ = agent_from_json(doc.at("agent"));
  buffer_ = buffer_from_json(doc.at("buffer"));
  restore_rng_state(sample_rng_, doc.at("sample_rng").get<std::string>());
  episodes_done_ = doc.at("episodes_done").get<std::size_t>();
  warmed_up_ = doc.at("warmed_up").get<bool>();
  logs_.clear();
  for (const auto& l : doc.at("logs")) logs_.push_back(log_from_json(l));
  has_best_ = doc.at("has_best").get<bool>();
  best_latent_ = doc.at("best_latent").get<LatentVector>();
  best_conf_ = doc.at("best_confidence").get<Real>();
  best_episode_ = doc.at("best_episode").get<std::size_t>();
  LedgerSnapshot snap;
  snap.counts = doc.at("ledger").at("counts").get<std::array<std::uint64_t, kNumPurposes>>();
  snap.renormalizations = doc.at("ledger").at("renormalizations").get<std::uint64_t>();
  oracle_.ledger().restore(snap);
}

Matrix exploit_reconstructions(const AgentBundle& agent, const EnvConfig& env, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  Matrix states = standard_normal_matrix(rng, count, env.latent_dim);
  if (count == 0) return states;
  for (std::size_t step = 0; step < env.max_step; ++step) {
    const Matrix actions = exploit_actions(agent, states);
    as_eigen(states) = env.alpha * as_eigen(states) + (Real(1) - env.alpha) * as_eigen(actions);
  }
  return states;
}

std::uint64_t attack_query_budget(const ExperimentConfig& config) {
  if (config.max_episodes == 0) return 0;
  return 2 * static_cast<std::uint64_t>(config.max_episodes) * config.env.max_step + 2 * config.warmup_steps;
}

RunSummary run_attack(const ExperimentConfig& config, WorldBackend& backend, const std::string& config_echo,
                      const RunOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.method = to_string(config.agent.algorithm);
  summary.config_echo = config_echo;
  summary.version = version_stamp();
  const auto classes = config.target_classes();
  summary.classes.resize(classes.size());
  std::mutex failure_mu;

  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  parallel_for(classes.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t y = classes[idx];
    ClassResult& r = summary.classes[idx];
    r.target_class = y;
    auto oracle = backend.attack_oracle();
    ClassTrainer trainer(config, y, *oracle);
    const auto ckpt = options.checkpoint_dir / ("class_" + std::to_string(y) + ".ckpt");
    if (options.resume && !options.checkpoint_dir.empty() && std::filesystem::exists(ckpt)) {
      trainer.restore(read_checkpoint_file(ckpt));
    }
    if (!options.checkpoint_dir.empty() && config.checkpoint_every > 0) {
      trainer.on_episode = [&](const ClassTrainer& t) {
        if (t.episodes_done() % config.checkpoint_every == 0) write_checkpoint_file(ckpt, t.checkpoint());
      };
    }
    auto fail = [&](const char* kind, const std::string& what) {
      std::lock_guard lock(failure_mu);
      summary.partial = true;
      if (summary.failure.empty()) {
        summary.failure = what;
        summary.failure_kind = kind;
      }
    };
    bool failed = false;
    try {
      trainer.train_until(config.max_episodes);
    } catch (const OracleFailure& e) {
      failed = true;
      if (!options.checkpoint_dir.empty()) write_checkpoint_file(ckpt, trainer.checkpoint());
      fail("oracle", "class " + std::to_string(y) + ": " + e.what());
    } catch (const NumericError& e) {
      failed = true;
      fail("numeric", e.what());
    }
    r.has_reconstruction = trainer.has_best();
    r.best_latent = trainer.best_latent();
    r.best_confidence = trainer.best_confidence();
    r.best_episode = trainer.best_episode();
    r.ledger = oracle->ledger().snapshot();
    r.episodes_run = trainer.episodes_done();
    r.episodes = trainer.logs();
    oracle.reset();
    const Matrix fakes = exploit_reconstructions(trainer.agent(), trainer.env(),
                                                 r.has_reconstruction ? config.eval.dc_samples : 0,
                                                 derive_seed(config.seeds.episodes, {y, kTagDensity}));
    try {
      evaluate_class(backend, config, r, fakes);
    } catch (const OracleFailure& e) {
      if (!failed) fail("oracle", "evaluation of class " + std::to_string(y) + ": " + e.what());
    }
  });

  aggregate(summary);
  summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

RunSummary random_search_baseline(const ExperimentConfig& config, WorldBackend& backend, std::uint64_t query_budget,
                                  const std::string& config_echo) {
  config.validate();
  if (query_budget < 1) throw ConfigError("random search needs a query budget of at least 1");
  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.method = "random_search";
  summary.config_echo = config_echo;
  summary.version = version_stamp();
  const auto classes = config.target_classes();
  summary.classes.resize(classes.size());
  const std::size_t keep = config.eval.dc_samples;

  parallel_for(classes.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t y = classes[idx];
    EnvConfig env = config.env;
    env.target_class = y;
    ClassResult& r = summary.classes[idx];
    r.target_class = y;
    auto oracle = backend.attack_oracle();
    Rng rng(derive_seed(config.seeds.episodes, {y, kTagRandomSearch}));
    // min-heap on confidence: top `keep` latents for density/coverage
    using Entry = std::pair<Real, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> top;
    std::vector<LatentVector> kept;
    try {
      for (std::uint64_t q = 1; q <= query_budget; ++q) {
        LatentVector z = init_state(env.latent_dim, rng);
        const auto conf = oracle->query(z, QueryPurpose::training).confidence;
        const auto terms = reward_terms(conf, conf, y, env.epsilon);
        const Real c = conf[y];
        if (!r.has_reconstruction || c > r.best_confidence) {
          r.has_reconstruction = true;
          r.best_confidence = c;
          r.best_latent = z;
          r.best_episode = q;
        }
        EpisodeLog log;
        log.episode = q;
        log.reward = log.episode_return = total_reward(terms, env.weights);
        log.r1 = terms.state_score;
        log.r2 = terms.action_score;
        log.r3 = terms.margin_score;
        log.target_confidence = c;
        log.best_confidence = r.best_confidence;
        log.cumulative_queries = oracle->ledger().total();
        r.episodes.push_back(log);
        if (keep > 0) {
          if (top.size() < keep) {
            top.push({c, kept.size()});
            kept.push_back(std::move(z));
          } else if (c > top.top().first) {
            const std::size_t slot = top.top().second;
            top.pop();
            kept[slot] = std::move(z);
            top.push({c, slot});
          }
        }
      }
    } catch (const OracleFailure& e) {
      summary.partial = true;
      summary.failure = "class " + std::to_string(y) + ": " + e.what();
      summary.failure_kind = "oracle";
    }
    r.episodes_run = r.episodes.size();
    r.ledger = oracle->ledger().snapshot();
    oracle.reset();
    Matrix fakes(kept.size(), env.latent_dim);
    for (std::size_t i = 0; i < kept.size(); ++i) std::copy(kept[i].begin(), kept[i].end(), fakes.row(i).begin());
    evaluate_class(backend, config, r, fakes);
  });

  aggregate(summary);
  summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

std::vector<AlphaRow> sweep_alpha(const ExperimentConfig& config, WorldBackend& backend,
                                  const std::vector<Real>& alphas, std::size_t samples_per_class) {
  std::vector<AlphaRow> rows;
  const auto classes = config.target_classes();
  for (Real alpha : alphas) {
    ExperimentConfig c = config;
    c.env.alpha = alpha;
    c.validate();
    std::vector<SampleScore> scores(classes.size());
    parallel_for(classes.size(), c.jobs, [&](std::size_t idx) {
      const std::size_t y = classes[idx];
      auto oracle = backend.attack_oracle();
      ClassTrainer trainer(c, y, *oracle);
      trainer.train_until(c.max_episodes);
      const Matrix samples = exploit_reconstructions(trainer.agent(), trainer.env(), samples_per_class,
                                                     derive_seed(c.seeds.episodes, {y, kTagSweep}));
      scores[idx] = score_samples(backend, c, y, samples);
    });
    AlphaRow row;
    row.alpha = alpha;
    std::vector<Real> acc, dens, cov;
    for (const auto& s : scores) {
      acc.push_back(s.accuracy);
      dens.push_back(s.density);
      cov.push_back(s.coverage);
    }
    row.attack_accuracy = nan_mean(acc);
    row.density = nan_mean(dens);
    row.coverage = nan_mean(cov);
    rows.push_back(row);
  }
  return rows;
}

std::vector<EpisodeRow> sweep_episodes(const ExperimentConfig& config, WorldBackend& backend,
                                       const std::vector<std::size_t>& checkpoints, std::size_t samples_per_class) {
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw ConfigError("episode checkpoints must be ascending");
  }
  config.validate();
  const auto classes = config.target_classes();
  std::vector<std::vector<Real>> acc(checkpoints.size(), std::vector<Real>(classes.size(), kNaN));
  parallel_for(classes.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t y = classes[idx];
    auto oracle = backend.attack_oracle();
    ClassTrainer trainer(config, y, *oracle);
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      trainer.train_until(checkpoints[i]);
      const Matrix samples = exploit_reconstructions(trainer.agent(), trainer.env(), samples_per_class,
                                                     derive_seed(config.seeds.episodes, {y, kTagSweep}));
      acc[i][idx] = score_samples(backend, config, y, samples).accuracy;
    }
  });
  std::vector<EpisodeRow> rows;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) rows.push_back({checkpoints[i], nan_mean(acc[i])});
  return rows;
}

}  // namespace latinv
