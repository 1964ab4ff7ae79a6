#ifndef AUTOTM_ARTM_H_
#define AUTOTM_ARTM_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autotm/corpus.h"

namespace autotm {

// V x T, row-major so a word's topic row is contiguous.
using PhiMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// T x D, column-major so a document's topic column is contiguous.
using ThetaMatrix = Eigen::MatrixXd;

// Dense column-stochastic factors. phi is V x T (column t = p(w|t)), theta is
// T x D (column d = p(t|d)). Topics [0, num_background) are background topics.
struct TopicModel {
  PhiMatrix phi;
  ThetaMatrix theta;
  int num_background = 0;
  uint64_t seed = 0;
  // Number of columns reset to uniform after full truncation.
  int64_t reset_events = 0;

  int vocab_size() const { return static_cast<int>(phi.rows()); }
  int num_topics() const { return static_cast<int>(phi.cols()); }
  int num_docs() const { return static_cast<int>(theta.cols()); }
  bool is_background(int topic) const { return topic < num_background; }
};

TopicModel InitModel(int vocab_size, int num_topics, int num_background, int num_docs,
                     uint64_t seed);

struct EmCounters {
  PhiMatrix n_wt;
  ThetaMatrix n_td;
};

// Responsibilities p(t|d,w) are uniform where sum_t phi_wt theta_td is zero.
EmCounters EStep(const TopicModel& model, const Corpus& corpus);

enum class RegKind { kSmoothing, kSparsing, kDecorrelation };
enum class TopicGroup { kBackground, kSpecific };

std::string RegKindName(RegKind kind);
RegKind ParseRegKind(const std::string& name);

// One active regularizer. `phi_tau` acts on Phi, `theta_tau` on Theta.
struct RegularizerSpec {
  RegKind kind = RegKind::kSmoothing;
  TopicGroup target = TopicGroup::kBackground;
  double phi_tau = 0.0;
  double theta_tau = 0.0;
};

// Empty when valid, otherwise a description of the sign violation.
std::string CheckRegularizer(const RegularizerSpec& spec);

// The regularizer functionals over the targeted topic set S:
//   Smoothing / Sparsing:  R = phi_tau * sum_{w, t in S} ln phi_wt
//                            + theta_tau * sum_{t in S, d} ln theta_td
//   Decorrelation:         R = -(phi_tau / 2) * sum_{t != s in S} sum_w phi_wt phi_ws
double RegularizerValue(const RegularizerSpec& spec, const TopicModel& model);

struct RegularizerGradient {
  PhiMatrix d_phi;  // zero outside targeted topics
  ThetaMatrix d_theta;
};

// dR/dphi and dR/dtheta of RegularizerValue. The log-prior gradient is
// undefined at zero entries and is reported as zero there.
RegularizerGradient ComputeRegularizerGradient(const RegularizerSpec& spec,
                                               const TopicModel& model);

// The M-step additive terms phi (.) dR/dphi and theta (.) dR/dtheta. For the
// log priors these are the constants phi_tau / theta_tau on every targeted cell
// (including zero cells).
RegularizerGradient MStepTerms(const RegularizerSpec& spec, const TopicModel& model);

// phi_wt <- norm_w max(0, n_wt + sum_specs phi_wt dR/dphi_wt), likewise theta.
// Fully truncated columns are reset to uniform and counted in reset_events.
TopicModel MStep(const EmCounters& counters, const TopicModel& model,
                 const std::vector<RegularizerSpec>& active);

struct TrainOptions {
  // Weak smoothing of background topics kept on in every stage.
  double background_smoothing = 0.01;
  // Called after each M-step with the 1-based pass index within the stage.
  std::function<void(int pass, const TopicModel&)> on_pass;
};

// Runs `passes` (E, M) iterations with `stage_regs` plus background smoothing.
TopicModel TrainPasses(TopicModel model, const Corpus& corpus, int passes,
                       const std::vector<RegularizerSpec>& stage_regs,
                       const TrainOptions& options = {});

double LogLikelihood(const TopicModel& model, const Corpus& corpus);

// Fraction of exactly-zero entries.
template <typename Derived>
double Sparsity(const Eigen::DenseBase<Derived>& matrix) {
  if (matrix.size() == 0) return 0.0;
  return static_cast<double>((matrix.derived().array() == 0.0).count()) /
         static_cast<double>(matrix.size());
}

// k highest-probability token indices of a topic, ties by lower index. k is
// truncated to V.
std::vector<int> TopTokenIndices(const TopicModel& model, int topic, int k);
std::vector<std::string> TopTokens(const TopicModel& model, const Vocabulary& vocab,
                                   int topic, int k);

// Binary model file; layout in docs/FORMATS.md.
void SaveModel(const std::filesystem::path& path, const TopicModel& model);
TopicModel LoadModel(const std::filesystem::path& path);

// One line per (topic, token): "<topic>[ [bg]]\t<token>\t<phi>".
std::string FormatTopWords(const TopicModel& model, const Vocabulary& vocab, int k);

}  // namespace autotm

#endif  // AUTOTM_ARTM_H_
