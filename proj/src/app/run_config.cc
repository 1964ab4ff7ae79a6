#include <fstream>
#include <set>
#include <sstream>

#include "autotm/app.h"
#include "autotm/errors.h"
#include "autotm/metrics.h"
#include "autotm/protocol.h"
#include "common/binary_io.h"

namespace autotm {

using nlohmann::json;

namespace {

// Strict view of a JSON object: typed getters, and Finish() rejects keys that
// were never read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, Where() + "expected a JSON object");
  }

  bool Has(const char* key) const { return j_.contains(key); }

  void Int(const char* key, int& out) {
    if (const json* v = Take(key)) {
      if (!v->is_number_integer()) Fail(key, "expected an integer");
      out = v->get<int>();
    }
  }
  void Int64(const char* key, int64_t& out) {
    if (const json* v = Take(key)) {
      if (!v->is_number_integer()) Fail(key, "expected an integer");
      out = v->get<int64_t>();
    }
  }
  void U64(const char* key, uint64_t& out) {
    if (const json* v = Take(key)) {
      if (!v->is_number_unsigned()) Fail(key, "expected a non-negative integer");
      out = v->get<uint64_t>();
    }
  }
  void Double(const char* key, double& out) {
    if (const json* v = Take(key)) {
      if (!v->is_number()) Fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void Bool(const char* key, bool& out) {
    if (const json* v = Take(key)) {
      if (!v->is_boolean()) Fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void String(const char* key, std::string& out) {
    if (const json* v = Take(key)) {
      if (!v->is_string()) Fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void Strings(const char* key, std::vector<std::string>& out) {
    if (const json* v = Take(key)) {
      if (!v->is_array()) Fail(key, "expected an array of strings");
      out.clear();
      for (const auto& s : *v) {
        if (!s.is_string()) Fail(key, "expected an array of strings");
        out.push_back(s.get<std::string>());
      }
    }
  }
  const json* Take(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_[key];
  }
  std::string Child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(Child(key.c_str()), "unknown key '" + Child(key.c_str()) + "'");
      }
    }
  }

  [[noreturn]] void Fail(const char* key, const std::string& what) const {
    throw ConfigError(Child(key), Child(key) + ": " + what);
  }

 private:
  std::string Where() const { return path_.empty() ? "" : path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void ParseForest(const json& j, const std::string& path, ForestConfig& f) {
  ObjectReader r(j, path);
  r.Int("n_trees", f.n_trees);
  r.Int("max_depth", f.max_depth);
  r.Int("min_leaf", f.min_leaf);
  r.Double("feature_fraction", f.feature_fraction);
  r.Bool("bootstrap", f.bootstrap);
  r.Finish();
  if (f.n_trees < 1 || f.min_leaf < 1 || !(f.feature_fraction > 0.0 && f.feature_fraction <= 1.0)) {
    throw ConfigError(path, path + ": invalid forest settings");
  }
}

void ParseGp(const json& j, const std::string& path, GpConfig& g) {
  ObjectReader r(j, path);
  if (r.Has("length_scale")) {
    double v = 0.0;
    r.Double("length_scale", v);
    if (!(v > 0.0)) r.Fail("length_scale", "must be positive");
    g.length_scale = v;
  }
  if (r.Has("noise")) {
    double v = 0.0;
    r.Double("noise", v);
    if (!(v > 0.0)) r.Fail("noise", "must be positive");
    g.noise = v;
  }
  r.Finish();
}

SurrogateConfig ParseSurrogate(const json& j, const std::string& path) {
  SurrogateConfig s;
  ObjectReader r(j, path);
  std::string kind = SurrogateKindName(s.kind);
  r.String("kind", kind);
  s.kind = ParseSurrogateKind(kind);
  r.Int("warmup_true_evals", s.warmup_true_evals);
  r.Double("promote_fraction", s.promote_fraction);
  r.Int("retrain_every", s.retrain_every);
  if (const json* f = r.Take("forest")) ParseForest(*f, r.Child("forest"), s.forest);
  if (const json* g = r.Take("gp")) ParseGp(*g, r.Child("gp"), s.gp);
  r.Finish();
  return s;
}

void ParseGa(const json& j, const std::string& path, GaConfig& ga) {
  ObjectReader r(j, path);
  r.Int("population_size", ga.population_size);
  r.Int("generations", ga.generations);
  r.Double("crossover_prob", ga.crossover_prob);
  if (const json* m = r.Take("mutation")) {
    ObjectReader mr(*m, r.Child("mutation"));
    mr.Double("add", ga.mutation.add);
    mr.Double("remove", ga.mutation.remove);
    mr.Double("swap", ga.mutation.swap);
    mr.Double("params", ga.mutation.params);
    mr.Finish();
  }
  r.Double("param_sigma", ga.param_sigma);
  r.Int("tournament_size", ga.tournament_size);
  r.Int("elitism", ga.elitism);
  r.Int("early_stop_patience", ga.early_stop_patience);
  r.Double("min_delta", ga.min_delta);
  r.Int64("max_true_evals", ga.max_true_evals);
  r.Int("init_min_stages", ga.init_min_stages);
  r.Int("init_max_stages", ga.init_max_stages);
  r.Finish();
}

void ParseBo(const json& j, const std::string& path, BoConfig& bo) {
  ObjectReader r(j, path);
  r.Int("budget", bo.budget);
  r.Int("n_init", bo.n_init);
  r.Int("candidates", bo.candidates);
  r.Int("multistart", bo.multistart);
  r.Int("local_steps", bo.local_steps);
  r.Double("xi", bo.xi);
  if (const json* g = r.Take("gp")) ParseGp(*g, r.Child("gp"), bo.gp);
  r.Finish();
}

void ParseRandom(const json& j, const std::string& path, RandomSearchConfig& rs) {
  ObjectReader r(j, path);
  r.Int64("budget", rs.budget);
  r.Int("batch_size", rs.batch_size);
  r.Int("init_min_stages", rs.init_min_stages);
  r.Int("init_max_stages", rs.init_max_stages);
  r.Finish();
}

BrokerBackend ParseBroker(const json& j, const std::string& path) {
  BrokerBackend b;
  ObjectReader r(j, path);
  r.String("broker", b.listen);
  r.String("dataset_id", b.dataset_id);
  r.Double("liveness_timeout_s", b.liveness_timeout_s);
  r.Int("max_attempts", b.max_attempts);
  r.Double("deadline_s", b.deadline_s);
  r.Finish();
  ParseHostPort(b.listen);
  if (!(b.liveness_timeout_s > 0.0) || b.max_attempts < 1 || b.deadline_s < 0.0) {
    throw ConfigError(path, path + ": invalid broker settings");
  }
  return b;
}

}  // namespace

std::string AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kGa:
      return "ga";
    case Algorithm::kBo:
      return "bo";
    case Algorithm::kRandom:
      return "random";
  }
  return "?";
}

PrepareConfig ParsePrepareConfig(const json& j) {
  PrepareConfig c;
  ObjectReader r(j, "");
  if (const json* p = r.Take("preprocess")) {
    ObjectReader pr(*p, "preprocess");
    PreprocessConfig& pc = c.preprocess;
    pr.Bool("strip_html", pc.strip_html);
    pr.Bool("lowercase", pc.lowercase);
    pr.Bool("remove_digits", pc.remove_digits);
    pr.Bool("remove_stopwords", pc.remove_stopwords);
    pr.Bool("stem", pc.stem);
    pr.Int("min_token_len", pc.min_token_len);
    pr.Strings("extra_stopwords", pc.extra_stopwords);
    if (const json* rep = pr.Take("replacements")) {
      if (!rep->is_object()) pr.Fail("replacements", "expected an object of strings");
      for (const auto& [from, to] : rep->items()) {
        if (!to.is_string()) pr.Fail("replacements", "expected an object of strings");
        pc.replacements[from] = to.get<std::string>();
      }
    }
    pr.Finish();
  }
  r.Int64("min_df", c.min_df);
  r.Double("max_df_ratio", c.max_df_ratio);
  r.Int("window_size", c.window_size);
  r.Double("ppmi_epsilon", c.ppmi_epsilon);
  r.Int("batch_size", c.batch_size);
  r.Finish();
  return c;
}

RunConfig ParseRunConfig(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config", "run config is not valid JSON");
  RunConfig c;
  c.text = text;
  ObjectReader r(j, "");
  std::string corpus;
  r.String("corpus", corpus);
  if (corpus.empty()) throw ConfigError("corpus", "corpus: a prepared corpus directory is required");
  c.corpus = corpus;
  if (c.corpus.is_relative() && !base_dir.empty()) c.corpus = base_dir / c.corpus;
  r.Int("T", c.num_topics);
  r.Int("B", c.num_background);
  std::string representation = RepresentationName(c.representation);
  r.String("representation", representation);
  c.representation = ParseRepresentation(representation);
  std::string algorithm = "ga";
  r.String("algorithm", algorithm);
  if (algorithm == "ga") {
    c.algorithm = Algorithm::kGa;
  } else if (algorithm == "bo") {
    c.algorithm = Algorithm::kBo;
  } else if (algorithm == "random") {
    c.algorithm = Algorithm::kRandom;
  } else {
    r.Fail("algorithm", "expected ga, bo or random");
  }
  r.String("metric", c.metric);
  r.U64("seed", c.seed);
  r.Int("threads", c.threads);
  r.Double("background_smoothing", c.background_smoothing);
  r.Int("topwords_k", c.topwords_k);
  r.Bool("record_elapsed", c.record_elapsed);
  if (const json* ga = r.Take("ga")) ParseGa(*ga, "ga", c.ga);
  if (const json* bo = r.Take("bo")) ParseBo(*bo, "bo", c.bo);
  if (const json* rs = r.Take("random")) ParseRandom(*rs, "random", c.random);
  if (const json* s = r.Take("surrogate")) c.ga.surrogate = ParseSurrogate(*s, "surrogate");
  if (const json* b = r.Take("backend")) {
    if (b->is_string()) {
      if (*b != "local") r.Fail("backend", "expected \"local\" or a broker object");
    } else {
      c.broker = ParseBroker(*b, "backend");
    }
  }
  r.Finish();

  // Cross-field rules.
  if (c.num_topics < 1) throw ConfigError("T", "T must be >= 1");
  if (c.num_background < 0 || c.num_background >= c.num_topics) {
    throw ConfigError("B", "B must be in [0, T) so that specific topics exist");
  }
  if (c.threads < 1) throw ConfigError("threads", "threads must be >= 1");
  if (c.background_smoothing < 0.0) {
    throw ConfigError("background_smoothing", "background_smoothing must be >= 0");
  }
  if (c.topwords_k < 1) throw ConfigError("topwords_k", "topwords_k must be >= 1");
  if (!MetricRegistry::Global().Contains(c.metric)) {
    throw ConfigError("metric", "unknown metric '" + c.metric + "'");
  }
  if (c.algorithm == Algorithm::kBo && c.representation != Representation::kFixed) {
    throw RepresentationUnsupported(
        "algorithm bo works on the fixed representation only (set \"representation\": \"fixed\")");
  }
  if (c.ga.surrogate && c.algorithm != Algorithm::kGa) {
    throw ConfigError("surrogate", "a surrogate block requires algorithm ga");
  }
  c.ga.seed = c.seed;
  c.bo.seed = c.seed;
  c.random.seed = c.seed;
  if (c.algorithm == Algorithm::kGa) {
    if (const std::string p = CheckGaConfig(c.ga); !p.empty()) throw ConfigError("ga", "ga: " + p);
  } else if (c.algorithm == Algorithm::kBo) {
    if (const std::string p = CheckBoConfig(c.bo); !p.empty()) throw ConfigError("bo", "bo: " + p);
  } else if (c.random.budget < 1 || c.random.batch_size < 1) {
    throw ConfigError("random", "random: budget and batch_size must be >= 1");
  }
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read run config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseRunConfig(text.str(), path.parent_path());
}

}  // namespace autotm
