#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fauna/features.hpp"
#include "fauna/preprocess.hpp"

namespace fauna {

/// Diagonal-covariance Gaussian state emission density.
struct GaussianEmission {
  std::vector<double> mean;
  std::vector<double> variance; // per-dimension, floored
  double variance_floor = 1e-3;
};

/// Left-to-right Gaussian HMM with explicit entry and exit transitions.
/// All probabilities live in log space; impossible transitions are -inf.
/// Per state, exp(self) + exp(next) + exp(exit) == 1; entry is concentrated
/// on state 0.
struct HmmModel {
  int n_states = 0;
  std::vector<double> log_entry;              // [state]
  std::vector<std::vector<double>> log_trans; // [from][to]
  std::vector<double> log_exit;               // [state]
  std::vector<GaussianEmission> emissions;    // [state]

  int dims() const {
    return emissions.empty() ? 0 : static_cast<int>(emissions[0].mean.size());
  }
  void validate() const;
};

/// A label's acoustic model plus its log prior probability.
struct ClassModel {
  std::string label;
  HmmModel hmm;
  double log_prior = 0.0;
};

/// The full recognizer: per-class models, the grammar scale weighting the
/// prior against the acoustic likelihood, and the feature/preprocessing
/// configuration the models were trained under.
struct Recognizer {
  std::vector<ClassModel> classes;
  double grammar_scale = 1.0;
  FeatureConfig feature_config;
  FormatContract contract;

  void validate() const;
};

/// Monotone state index sequence, one entry per frame.
struct StatePath {
  std::vector<int> states;
};

struct ScoredLabel {
  std::string label;
  double score; // softmax posterior, scores over all classes sum to 1
};

/// Result of EM training: the refined model and the total log-likelihood
/// trace. log_likelihoods[0] is the likelihood under the input model;
/// entry i is the likelihood after the i-th parameter update.
struct EmTrainResult {
  HmmModel model;
  std::vector<double> log_likelihoods;
  int iterations = 0;
};

/// log N(y; mean, diag(variance)).
double emission_logpdf(const GaussianEmission& g, const std::vector<double>& y);

/// Joint log-probability of the observations and one specific state path:
/// entry + sum of per-frame emissions and transitions, ending with the exit
/// transition. The path must be a legal left-to-right traversal.
double path_log_likelihood(const HmmModel& model, const FeatureMatrix& features,
                           const StatePath& path);

/// Total log-probability summed over all state paths (forward recursion
/// with log-sum-exp). Returns -inf when no path can generate the sequence.
double forward_log_likelihood(const HmmModel& model,
                              const FeatureMatrix& features);

/// Most likely state path and its joint log-probability. Requires
/// T >= n_states so a left-to-right traversal can reach the exit.
std::pair<StatePath, double> viterbi(const HmmModel& model,
                                     const FeatureMatrix& features);

/// Uniform-segmentation initialization: each clip is cut into n_states
/// equal spans, state Gaussians come from the pooled span statistics, and
/// every transition probability is 0.5.
HmmModel flat_start(const std::vector<FeatureMatrix>& features, int n_states,
                    double variance_floor = 1e-3);

/// Baum-Welch re-estimation until max_iters or the relative likelihood gain
/// drops below rel_tol. The returned likelihood trace is non-decreasing.
EmTrainResult em_train(const HmmModel& model,
                       const std::vector<FeatureMatrix>& features,
                       int max_iters = 50, double rel_tol = 1e-5);

/// Scores L_w = forward(Y | w) + grammar_scale * log P(w) for every class,
/// softmax-normalized and sorted descending (ties by label).
std::vector<ScoredLabel> classify(const Recognizer& rec,
                                  const FeatureMatrix& features);

// Versioned text serialization ("FAUNA-HMM v1"). Values are printed with 17
// significant digits so a load reproduces classification bit-identically.
std::string serialize_recognizer(const Recognizer& rec);
Recognizer parse_recognizer(std::istream& in);
Recognizer parse_recognizer(const std::string& text);

} // namespace fauna
