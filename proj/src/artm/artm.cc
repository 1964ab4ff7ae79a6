#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "autotm/artm.h"
#include "autotm/errors.h"
#include "autotm/random.h"
#include "common/binary_io.h"

namespace autotm {
namespace {

constexpr double kLogFloor = 1e-300;

// Topic index range [first, last) targeted by a group.
std::pair<int, int> TargetRange(TopicGroup group, const TopicModel& model) {
  if (group == TopicGroup::kBackground) return {0, model.num_background};
  return {model.num_background, model.num_topics()};
}

// Normalizes each column of the (already non-negative) matrix; all-zero
// columns become uniform. Returns the number of reset columns.
template <typename Matrix>
int64_t NormalizeColumns(Matrix& m) {
  int64_t resets = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double sum = m.col(c).sum();
    if (sum > 0.0) {
      m.col(c) /= sum;
    } else {
      m.col(c).setConstant(1.0 / static_cast<double>(m.rows()));
      ++resets;
    }
  }
  return resets;
}

}  // namespace

TopicModel InitModel(int vocab_size, int num_topics, int num_background, int num_docs,
                     uint64_t seed) {
  if (num_topics < 1 || num_background < 0 || num_background >= num_topics ||
      vocab_size < 2 || num_docs < 1) {
    throw InvalidDimensions("need T >= 1, 0 <= B < T, V >= 2, D >= 1 (got V=" +
                            std::to_string(vocab_size) + " T=" + std::to_string(num_topics) +
                            " B=" + std::to_string(num_background) +
                            " D=" + std::to_string(num_docs) + ")");
  }
  Rng rng(seed);
  // Unit-rate exponential draws normalized per column: a symmetric Dirichlet(1).
  auto draw = [&rng] { return std::max(-std::log1p(-Uniform01(rng)), 1e-12); };
  TopicModel model;
  model.num_background = num_background;
  model.seed = seed;
  model.phi.resize(vocab_size, num_topics);
  for (int t = 0; t < num_topics; ++t) {
    for (int w = 0; w < vocab_size; ++w) model.phi(w, t) = draw();
  }
  model.theta.resize(num_topics, num_docs);
  for (int d = 0; d < num_docs; ++d) {
    for (int t = 0; t < num_topics; ++t) model.theta(t, d) = draw();
  }
  NormalizeColumns(model.phi);
  NormalizeColumns(model.theta);
  return model;
}

EmCounters EStep(const TopicModel& model, const Corpus& corpus) {
  if (corpus.vocab_size() != model.vocab_size() || corpus.num_docs() != model.num_docs()) {
    throw DimensionMismatch("model is " + std::to_string(model.vocab_size()) + "x" +
                            std::to_string(model.num_docs()) + " but corpus is " +
                            std::to_string(corpus.vocab_size()) + "x" +
                            std::to_string(corpus.num_docs()));
  }
  const int num_topics = model.num_topics();
  EmCounters counters{PhiMatrix::Zero(model.vocab_size(), num_topics),
                      ThetaMatrix::Zero(num_topics, corpus.num_docs())};
  Eigen::VectorXd resp(num_topics);
  for (int d = 0; d < corpus.num_docs(); ++d) {
    const auto theta_d = model.theta.col(d);
    auto n_d = counters.n_td.col(d);
    for (const TermCount& term : corpus.docs[d].terms) {
      resp = model.phi.row(term.index).transpose().cwiseProduct(theta_d);
      const double z = resp.sum();
      const double n_dw = static_cast<double>(term.count);
      if (z > 0.0) {
        resp *= n_dw / z;
      } else {
        resp.setConstant(n_dw / num_topics);
      }
      counters.n_wt.row(term.index) += resp.transpose();
      n_d += resp;
    }
  }
  return counters;
}

std::string RegKindName(RegKind kind) {
  switch (kind) {
    case RegKind::kSmoothing:
      return "smoothing";
    case RegKind::kSparsing:
      return "sparsing";
    case RegKind::kDecorrelation:
      return "decorrelation";
  }
  return "unknown";
}

RegKind ParseRegKind(const std::string& name) {
  if (name == "smoothing") return RegKind::kSmoothing;
  if (name == "sparsing") return RegKind::kSparsing;
  if (name == "decorrelation") return RegKind::kDecorrelation;
  throw ConfigError("reg_kind", "unknown regularizer kind '" + name + "'");
}

std::string CheckRegularizer(const RegularizerSpec& spec) {
  switch (spec.kind) {
    case RegKind::kSmoothing:
      if (spec.phi_tau < 0.0 || spec.theta_tau < 0.0) return "smoothing needs a, b >= 0";
      break;
    case RegKind::kSparsing:
      if (spec.phi_tau > 0.0 || spec.theta_tau > 0.0) return "sparsing needs a, b <= 0";
      break;
    case RegKind::kDecorrelation:
      if (spec.phi_tau < 0.0) return "decorrelation needs a >= 0";
      break;
  }
  return {};
}

double RegularizerValue(const RegularizerSpec& spec, const TopicModel& model) {
  const auto [first, last] = TargetRange(spec.target, model);
  if (first >= last) return 0.0;
  const int n = last - first;
  if (spec.kind == RegKind::kDecorrelation) {
    const auto block = model.phi.middleCols(first, n);
    // sum_{t != s} <phi_t, phi_s> = ||sum_t phi_t||^2 - sum_t ||phi_t||^2
    const double cross = block.rowwise().sum().squaredNorm() - block.squaredNorm();
    return -0.5 * spec.phi_tau * cross;
  }
  const double phi_part = model.phi.middleCols(first, n).array().max(kLogFloor).log().sum();
  const double theta_part =
      model.theta.middleRows(first, n).array().max(kLogFloor).log().sum();
  return spec.phi_tau * phi_part + spec.theta_tau * theta_part;
}

RegularizerGradient ComputeRegularizerGradient(const RegularizerSpec& spec,
                                               const TopicModel& model) {
  RegularizerGradient g{PhiMatrix::Zero(model.vocab_size(), model.num_topics()),
                        ThetaMatrix::Zero(model.num_topics(), model.num_docs())};
  const auto [first, last] = TargetRange(spec.target, model);
  if (first >= last) return g;
  const int n = last - first;
  if (spec.kind == RegKind::kDecorrelation) {
    const Eigen::VectorXd row_sum = model.phi.middleCols(first, n).rowwise().sum();
    for (int t = first; t < last; ++t) {
      g.d_phi.col(t) = -spec.phi_tau * (row_sum - model.phi.col(t));
    }
    return g;
  }
  auto inv = [](double x) { return x > 0.0 ? 1.0 / x : 0.0; };
  g.d_phi.middleCols(first, n) = spec.phi_tau * model.phi.middleCols(first, n).unaryExpr(inv);
  g.d_theta.middleRows(first, n) =
      spec.theta_tau * model.theta.middleRows(first, n).unaryExpr(inv);
  return g;
}

RegularizerGradient MStepTerms(const RegularizerSpec& spec, const TopicModel& model) {
  const auto [first, last] = TargetRange(spec.target, model);
  if (spec.kind == RegKind::kDecorrelation) {
    RegularizerGradient g = ComputeRegularizerGradient(spec, model);
    g.d_phi = g.d_phi.cwiseProduct(model.phi);
    return g;
  }
  RegularizerGradient g{PhiMatrix::Zero(model.vocab_size(), model.num_topics()),
                        ThetaMatrix::Zero(model.num_topics(), model.num_docs())};
  if (first >= last) return g;
  g.d_phi.middleCols(first, last - first).setConstant(spec.phi_tau);
  g.d_theta.middleRows(first, last - first).setConstant(spec.theta_tau);
  return g;
}

TopicModel MStep(const EmCounters& counters, const TopicModel& model,
                 const std::vector<RegularizerSpec>& active) {
  if (counters.n_wt.rows() != model.phi.rows() || counters.n_wt.cols() != model.phi.cols() ||
      counters.n_td.rows() != model.theta.rows() ||
      counters.n_td.cols() != model.theta.cols()) {
    throw DimensionMismatch("counters do not match model shape");
  }
  PhiMatrix phi = counters.n_wt;
  ThetaMatrix theta = counters.n_td;
  for (const auto& spec : active) {
    const RegularizerGradient terms = MStepTerms(spec, model);
    phi += terms.d_phi;
    theta += terms.d_theta;
  }
  phi = phi.cwiseMax(0.0);
  theta = theta.cwiseMax(0.0);
  TopicModel next;
  next.num_background = model.num_background;
  next.seed = model.seed;
  next.reset_events = model.reset_events + NormalizeColumns(phi) + NormalizeColumns(theta);
  next.phi = std::move(phi);
  next.theta = std::move(theta);
  return next;
}

TopicModel TrainPasses(TopicModel model, const Corpus& corpus, int passes,
                       const std::vector<RegularizerSpec>& stage_regs,
                       const TrainOptions& options) {
  std::vector<RegularizerSpec> active = stage_regs;
  if (options.background_smoothing > 0.0 && model.num_background > 0) {
    active.push_back({RegKind::kSmoothing, TopicGroup::kBackground,
                      options.background_smoothing, options.background_smoothing});
  }
  for (int pass = 1; pass <= passes; ++pass) {
    const EmCounters counters = EStep(model, corpus);
    model = MStep(counters, model, active);
    if (options.on_pass) options.on_pass(pass, model);
  }
  return model;
}

double LogLikelihood(const TopicModel& model, const Corpus& corpus) {
  if (corpus.vocab_size() != model.vocab_size() || corpus.num_docs() != model.num_docs()) {
    throw DimensionMismatch("model and corpus shapes differ");
  }
  double ll = 0.0;
  for (int d = 0; d < corpus.num_docs(); ++d) {
    const auto theta_d = model.theta.col(d);
    for (const TermCount& term : corpus.docs[d].terms) {
      const double p = model.phi.row(term.index).dot(theta_d.transpose());
      ll += static_cast<double>(term.count) * std::log(std::max(p, kLogFloor));
    }
  }
  return ll;
}

std::vector<int> TopTokenIndices(const TopicModel& model, int topic, int k) {
  if (topic < 0 || topic >= model.num_topics()) {
    throw DimensionMismatch("topic index " + std::to_string(topic) + " out of range");
  }
  const int v = model.vocab_size();
  k = std::clamp(k, 0, v);
  std::vector<int> order(static_cast<size_t>(v));
  std::iota(order.begin(), order.end(), 0);
  const auto col = model.phi.col(topic);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    if (col(a) != col(b)) return col(a) > col(b);
    return a < b;
  });
  order.resize(static_cast<size_t>(k));
  return order;
}

std::vector<std::string> TopTokens(const TopicModel& model, const Vocabulary& vocab,
                                   int topic, int k) {
  std::vector<std::string> out;
  for (int idx : TopTokenIndices(model, topic, k)) out.push_back(vocab.token(idx));
  return out;
}

void SaveModel(const std::filesystem::path& path, const TopicModel& model) {
  io::ByteWriter w;
  w.PutBytes("ATMM");
  w.PutU32(1);
  w.PutU64(static_cast<uint64_t>(model.vocab_size()));
  w.PutU64(static_cast<uint64_t>(model.num_topics()));
  w.PutU64(static_cast<uint64_t>(model.num_background));
  w.PutU64(static_cast<uint64_t>(model.num_docs()));
  w.PutU64(model.seed);
  for (Eigen::Index r = 0; r < model.phi.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.phi.cols(); ++c) w.PutF64(model.phi(r, c));
  }
  for (Eigen::Index r = 0; r < model.theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.theta.cols(); ++c) w.PutF64(model.theta(r, c));
  }
  io::WriteFileBytes(path, w.bytes());
}

TopicModel LoadModel(const std::filesystem::path& path) {
  io::ByteReader r(io::ReadFileBytes(path));
  if (r.GetBytes(4) != "ATMM") throw FormatError(path.string() + ": not a model file");
  if (r.GetU32() != 1) throw FormatError(path.string() + ": unsupported model version");
  const auto v = static_cast<Eigen::Index>(r.GetU64());
  const auto t = static_cast<Eigen::Index>(r.GetU64());
  TopicModel model;
  model.num_background = static_cast<int>(r.GetU64());
  const auto d = static_cast<Eigen::Index>(r.GetU64());
  model.seed = r.GetU64();
  model.phi.resize(v, t);
  for (Eigen::Index i = 0; i < v; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) model.phi(i, j) = r.GetF64();
  }
  model.theta.resize(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) model.theta(i, j) = r.GetF64();
  }
  if (!r.done()) throw FormatError(path.string() + ": trailing bytes");
  return model;
}

std::string FormatTopWords(const TopicModel& model, const Vocabulary& vocab, int k) {
  if (k < 1) throw ConfigError("k", "k must be >= 1");
  if (vocab.size() != model.vocab_size()) {
    throw DimensionMismatch("vocabulary does not match model");
  }
  std::ostringstream out;
  out << std::setprecision(6);
  for (int t = 0; t < model.num_topics(); ++t) {
    const std::string label =
        std::to_string(t) + (model.is_background(t) ? " [bg]" : "");
    for (int idx : TopTokenIndices(model, t, k)) {
      out << label << '\t' << vocab.token(idx) << '\t' << model.phi(idx, t) << '\n';
    }
  }
  return out.str();
}

}  // namespace autotm
