#include "latinv/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "latinv/error.hpp"

namespace latinv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json real_json(Real v) { return std::isnan(v) ? json(nullptr) : json(v); }

Real real_from(const json& j) {
  return j.is_null() ? std::numeric_limits<Real>::quiet_NaN() : j.get<Real>();
}

json metrics_json(const MetricsReport& m) {
  return json{{"attack_accuracy", real_json(m.attack_accuracy)}, {"knn_dist", real_json(m.knn_dist)},
              {"feat_dist", real_json(m.feat_dist)},             {"density", real_json(m.density)},
              {"coverage", real_json(m.coverage)},               {"queries_used", m.queries_used}};
}

MetricsReport metrics_from(const json& j) {
  MetricsReport m;
  m.attack_accuracy = real_from(j.at("attack_accuracy"));
  m.knn_dist = real_from(j.at("knn_dist"));
  m.feat_dist = real_from(j.at("feat_dist"));
  m.density = real_from(j.at("density"));
  m.coverage = real_from(j.at("coverage"));
  m.queries_used = j.at("queries_used").get<std::uint64_t>();
  return m;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  out.close();
  if (!out) throw IoError("write failed: " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

Real parse_real(const std::string& s, const fs::path& file) {
  if (s == "nan") return std::numeric_limits<Real>::quiet_NaN();
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IoError("bad number '" + s + "' in " + file.string());
  return static_cast<Real>(v);
}

std::uint64_t parse_uint(const std::string& s, const fs::path& file) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IoError("bad integer '" + s + "' in " + file.string());
  return v;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

void emit_reports(const RunSummary& summary, const fs::path& dir, const std::string& effective_config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_text(dir / kConfigEchoFile, summary.config_echo);
  if (!effective_config.empty()) write_text(dir / kEffectiveConfigFile, effective_config);

  std::string episodes = std::string(kEpisodesHeader) + "\n";
  std::string metrics = std::string(kMetricsHeader) + "\n";
  json classes = json::array();
  for (const auto& c : summary.classes) {
    for (const auto& e : c.episodes) {
      episodes += std::to_string(c.target_class) + ',' + std::to_string(e.episode) + ',' +
                  std::to_string(e.initial_seed) + ',' + format_real(e.reward) + ',' + format_real(e.r1) + ',' +
                  format_real(e.r2) + ',' + format_real(e.r3) + ',' + format_real(e.episode_return) + ',' +
                  format_real(e.target_confidence) + ',' + format_real(e.best_confidence) + ',' +
                  std::to_string(e.cumulative_queries) + '\n';
    }
    const auto& m = c.metrics;
    metrics += std::to_string(c.target_class) + ',' + format_real(m.attack_accuracy) + ',' +
               format_real(m.knn_dist) + ',' + format_real(m.feat_dist) + ',' + format_real(m.density) + ',' +
               format_real(m.coverage) + ',' + std::to_string(c.ledger.total()) + '\n';
    json latent = json::array();
    for (Real v : c.best_latent) latent.push_back(v);
    classes.push_back(json{{"class", c.target_class},
                           {"has_reconstruction", c.has_reconstruction},
                           {"best_latent", latent},
                           {"best_confidence", real_json(c.best_confidence)},
                           {"best_episode", c.best_episode},
                           {"eval_hit", c.eval_hit},
                           {"metrics", metrics_json(c.metrics)},
                           {"queries", {{"training", c.ledger.count(QueryPurpose::training)},
                                        {"warmup", c.ledger.count(QueryPurpose::warmup)},
                                        {"evaluation", c.ledger.count(QueryPurpose::evaluation)},
                                        {"renormalized", c.ledger.renormalizations}}},
                           {"eval_queries", c.eval_queries},
                           {"episodes_run", c.episodes_run}});
  }
  json doc{{"version", summary.version},
           {"method", summary.method},
           {"partial", summary.partial},
           {"failure", summary.failure},
           {"failure_kind", summary.failure_kind},
           {"wall_clock_seconds", summary.wall_clock_seconds},
           {"queries_total", summary.queries_total},
           {"mean_best_confidence", real_json(summary.mean_best_confidence)},
           {"metrics", metrics_json(summary.metrics)},
           {"reconstructions", "single best-confidence latent per class; density/coverage from exploit-mode samples"},
           {"classes", classes}};
  write_text(dir / kEpisodesFile, episodes);
  write_text(dir / kMetricsFile, metrics);
  write_text(dir / kSummaryFile, doc.dump(2) + "\n");
}

RunSummary load_reports(const fs::path& dir) {
  const fs::path summary_file = dir / kSummaryFile;
  json doc;
  try {
    doc = json::parse(read_text(summary_file));
  } catch (const json::exception& e) {
    throw IoError("malformed " + summary_file.string() + ": " + e.what());
  }
  RunSummary s;
  try {
    s.version = doc.at("version").get<std::string>();
    s.method = doc.at("method").get<std::string>();
    s.partial = doc.at("partial").get<bool>();
    s.failure = doc.at("failure").get<std::string>();
    s.failure_kind = doc.at("failure_kind").get<std::string>();
    s.wall_clock_seconds = doc.at("wall_clock_seconds").get<double>();
    s.queries_total = doc.at("queries_total").get<std::uint64_t>();
    s.mean_best_confidence = real_from(doc.at("mean_best_confidence"));
    s.metrics = metrics_from(doc.at("metrics"));
    for (const auto& c : doc.at("classes")) {
      ClassResult r;
      r.target_class = c.at("class").get<std::size_t>();
      r.has_reconstruction = c.at("has_reconstruction").get<bool>();
      r.best_latent = c.at("best_latent").get<LatentVector>();
      r.best_confidence = real_from(c.at("best_confidence"));
      r.best_episode = c.at("best_episode").get<std::size_t>();
      r.eval_hit = c.at("eval_hit").get<bool>();
      r.metrics = metrics_from(c.at("metrics"));
      const auto& q = c.at("queries");
      r.ledger.counts = {q.at("training").get<std::uint64_t>(), q.at("warmup").get<std::uint64_t>(),
                         q.at("evaluation").get<std::uint64_t>()};
      r.ledger.renormalizations = q.at("renormalized").get<std::uint64_t>();
      r.eval_queries = c.at("eval_queries").get<std::uint64_t>();
      r.episodes_run = c.at("episodes_run").get<std::size_t>();
      s.classes.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed " + summary_file.string() + ": " + e.what());
  }
  s.config_echo = read_text(dir / kConfigEchoFile);

  const fs::path episodes_file = dir / kEpisodesFile;
  std::istringstream lines(read_text(episodes_file));
  std::string line;
  std::getline(lines, line);
  if (line != kEpisodesHeader) throw IoError("unexpected header in " + episodes_file.string());
  std::map<std::size_t, std::size_t> index;
  for (std::size_t i = 0; i < s.classes.size(); ++i) index[s.classes[i].target_class] = i;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 11) throw IoError("expected 11 columns in " + episodes_file.string() + ": " + line);
    const auto it = index.find(parse_uint(cells[0], episodes_file));
    if (it == index.end()) throw IoError("episode row for unknown class in " + episodes_file.string());
    EpisodeLog e;
    e.episode = parse_uint(cells[1], episodes_file);
    e.initial_seed = parse_uint(cells[2], episodes_file);
    e.reward = parse_real(cells[3], episodes_file);
    e.r1 = parse_real(cells[4], episodes_file);
    e.r2 = parse_real(cells[5], episodes_file);
    e.r3 = parse_real(cells[6], episodes_file);
    e.episode_return = parse_real(cells[7], episodes_file);
    e.target_confidence = parse_real(cells[8], episodes_file);
    e.best_confidence = parse_real(cells[9], episodes_file);
    e.cumulative_queries = parse_uint(cells[10], episodes_file);
    s.classes[it->second].episodes.push_back(e);
  }
  return s;
}

void write_alpha_table(const std::vector<AlphaRow>& rows, const fs::path& file) {
  std::string text = "alpha,attack_acc,density,coverage\n";
  for (const auto& r : rows) {
    text += format_real(r.alpha) + ',' + format_real(r.attack_accuracy) + ',' + format_real(r.density) + ',' +
            format_real(r.coverage) + '\n';
  }
  write_text(file, text);
}

void write_episode_table(const std::vector<EpisodeRow>& rows, const fs::path& file) {
  std::string text = "episodes,attack_acc\n";
  for (const auto& r : rows) text += std::to_string(r.episodes) + ',' + format_real(r.attack_accuracy) + '\n';
  write_text(file, text);
}

void write_comparison(const RunSummary& a, const RunSummary& b, const fs::path& file) {
  std::string text = "method,queries,attack_acc,knn,feat,density,coverage,mean_best_confidence\n";
  for (const RunSummary* s : {&a, &b}) {
    const auto& m = s->metrics;
    text += s->method + ',' + std::to_string(s->queries_total) + ',' + format_real(m.attack_accuracy) + ',' +
            format_real(m.knn_dist) + ',' + format_real(m.feat_dist) + ',' + format_real(m.density) + ',' +
            format_real(m.coverage) + ',' + format_real(s->mean_best_confidence) + '\n';
  }
  write_text(file, text);
}

std::string render_summary(const RunSummary& s) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << s.version << "  method=" << s.method << "  classes=" << s.classes.size()
      << "  queries=" << s.queries_total << "  wall=" << s.wall_clock_seconds << "s\n";
  if (s.partial) out << "PARTIAL (" << s.failure_kind << "): " << s.failure << "\n";
  out << "class  best_conf  episode  hit  knn       feat      density   coverage  queries\n";
  for (const auto& c : s.classes) {
    out << c.target_class << "\t" << c.best_confidence << "\t" << c.best_episode << "\t" << (c.eval_hit ? 1 : 0)
        << "\t" << c.metrics.knn_dist << "\t" << c.metrics.feat_dist << "\t" << c.metrics.density << "\t"
        << c.metrics.coverage << "\t" << c.ledger.total() << "\n";
  }
  const auto& m = s.metrics;
  out << "attack_acc=" << m.attack_accuracy << "  knn=" << m.knn_dist << "  feat=" << m.feat_dist
      << "  density=" << m.density << "  coverage=" << m.coverage << "  mean_best_conf=" << s.mean_best_confidence
      << "\n";
  return out.str();
}

}  // namespace latinv
