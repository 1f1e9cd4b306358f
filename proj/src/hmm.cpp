#include "fauna/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fauna {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836; // log(2*pi)

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double log_sum_exp(const std::vector<double>& terms) {
  double m = kNegInf;
  for (double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) {
    if (t != kNegInf) s += std::exp(t - m);
  }
  return m + std::log(s);
}

void check_features(const HmmModel& model, const FeatureMatrix& features,
                    const char* who) {
  if (features.rows.empty()) {
    throw std::invalid_argument(std::string(who) + ": empty feature matrix");
  }
  const int dim = static_cast<int>(features.rows[0].size());
  if (dim != model.dims()) {
    throw std::invalid_argument(
        std::string(who) + ": feature dimension " + std::to_string(dim) +
        " does not match model dimension " + std::to_string(model.dims()));
  }
}

// Per-frame emission log-densities, b[t][j].
std::vector<std::vector<double>> emission_table(const HmmModel& model,
                                                const FeatureMatrix& features) {
  const std::size_t T = features.rows.size();
  std::vector<std::vector<double>> b(T, std::vector<double>(model.n_states));
  for (std::size_t t = 0; t < T; ++t) {
    for (int j = 0; j < model.n_states; ++j) {
      b[t][j] = emission_logpdf(model.emissions[j], features.rows[t]);
    }
  }
  return b;
}

std::vector<std::vector<double>> forward_table(
    const HmmModel& model, const std::vector<std::vector<double>>& b) {
  const std::size_t T = b.size();
  const int N = model.n_states;
  std::vector<std::vector<double>> alpha(T, std::vector<double>(N, kNegInf));
  for (int j = 0; j < N; ++j) {
    if (model.log_entry[j] != kNegInf) {
      alpha[0][j] = model.log_entry[j] + b[0][j];
    }
  }
  for (std::size_t t = 1; t < T; ++t) {
    for (int j = 0; j < N; ++j) {
      double m = kNegInf;
      for (int i = 0; i < N; ++i) {
        m = std::max(m, alpha[t - 1][i] + model.log_trans[i][j]);
      }
      if (m == kNegInf) continue;
      double s = 0.0;
      for (int i = 0; i < N; ++i) {
        const double v = alpha[t - 1][i] + model.log_trans[i][j];
        if (v != kNegInf) s += std::exp(v - m);
      }
      alpha[t][j] = m + std::log(s) + b[t][j];
    }
  }
  return alpha;
}

std::vector<std::vector<double>> backward_table(
    const HmmModel& model, const std::vector<std::vector<double>>& b) {
  const std::size_t T = b.size();
  const int N = model.n_states;
  std::vector<std::vector<double>> beta(T, std::vector<double>(N, kNegInf));
  beta[T - 1] = model.log_exit;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (int i = 0; i < N; ++i) {
      double m = kNegInf;
      for (int j = 0; j < N; ++j) {
        m = std::max(m, model.log_trans[i][j] + b[t + 1][j] + beta[t + 1][j]);
      }
      if (m == kNegInf) continue;
      double s = 0.0;
      for (int j = 0; j < N; ++j) {
        const double v = model.log_trans[i][j] + b[t + 1][j] + beta[t + 1][j];
        if (v != kNegInf) s += std::exp(v - m);
      }
      beta[t][i] = m + std::log(s);
    }
  }
  return beta;
}

double terminal_log_likelihood(const HmmModel& model,
                               const std::vector<std::vector<double>>& alpha) {
  std::vector<double> terms(model.n_states);
  for (int j = 0; j < model.n_states; ++j) {
    terms[j] = alpha.back()[j] + model.log_exit[j];
  }
  return log_sum_exp(terms);
}

} // namespace

void HmmModel::validate() const {
  if (n_states < 1) {
    throw std::invalid_argument("HmmModel: n_states must be >= 1, got " +
                                std::to_string(n_states));
  }
  const auto n = static_cast<std::size_t>(n_states);
  if (log_entry.size() != n || log_trans.size() != n || log_exit.size() != n ||
      emissions.size() != n) {
    throw std::invalid_argument(
        "HmmModel: parameter container sizes do not match n_states");
  }
  const std::size_t dim = emissions[0].mean.size();
  if (dim == 0) {
    throw std::invalid_argument("HmmModel: emission dimension is zero");
  }
  for (std::size_t j = 0; j < n; ++j) {
    const GaussianEmission& g = emissions[j];
    if (g.mean.size() != dim || g.variance.size() != dim) {
      throw std::invalid_argument("HmmModel: state " + std::to_string(j) +
                                  " emission dimensions are inconsistent");
    }
    if (!(g.variance_floor > 0.0)) {
      throw std::invalid_argument("HmmModel: state " + std::to_string(j) +
                                  " variance_floor must be positive");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(g.variance[d] >= g.variance_floor * (1.0 - 1e-12))) {
        throw std::invalid_argument("HmmModel: state " + std::to_string(j) +
                                    " variance[" + std::to_string(d) +
                                    "] is below the variance floor");
      }
    }
  }
  if (std::fabs(log_entry[0]) > 1e-9) {
    throw std::invalid_argument(
        "HmmModel: log_entry must be concentrated on state 0");
  }
  for (std::size_t j = 1; j < n; ++j) {
    if (log_entry[j] != kNegInf) {
      throw std::invalid_argument(
          "HmmModel: log_entry must be -inf for state " + std::to_string(j));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (log_trans[i].size() != n) {
      throw std::invalid_argument("HmmModel: transition row " +
                                  std::to_string(i) + " has wrong length");
    }
    double row_sum = std::exp(log_exit[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && j != i + 1 && log_trans[i][j] != kNegInf) {
        throw std::invalid_argument(
            "HmmModel: transition " + std::to_string(i) + "->" +
            std::to_string(j) + " breaks the left-to-right topology");
      }
      row_sum += std::exp(log_trans[i][j]);
    }
    if (std::fabs(row_sum - 1.0) > 1e-9) {
      throw std::invalid_argument(
          "HmmModel: transition row " + std::to_string(i) +
          " plus exit sums to " + fmt17(row_sum) + ", expected 1");
    }
  }
}

void Recognizer::validate() const {
  if (classes.empty()) {
    throw std::invalid_argument("Recognizer: no classes");
  }
  if (!std::isfinite(grammar_scale)) {
    throw std::invalid_argument("Recognizer: grammar_scale must be finite");
  }
  contract.validate();
  feature_config.validate(contract.target_rate);
  const int dim = feature_config.dims();
  double prior_sum = 0.0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const ClassModel& c = classes[k];
    if (c.label.empty()) {
      throw std::invalid_argument("Recognizer: class " + std::to_string(k) +
                                  " has an empty label");
    }
    for (std::size_t m = 0; m < k; ++m) {
      if (classes[m].label == c.label) {
        throw std::invalid_argument("Recognizer: duplicate label '" + c.label +
                                    "'");
      }
    }
    c.hmm.validate();
    if (c.hmm.dims() != dim) {
      throw std::invalid_argument(
          "Recognizer: class '" + c.label + "' has emission dimension " +
          std::to_string(c.hmm.dims()) + " but the feature config produces " +
          std::to_string(dim));
    }
    prior_sum += std::exp(c.log_prior);
  }
  if (std::fabs(prior_sum - 1.0) > 1e-9) {
    throw std::invalid_argument("Recognizer: class priors sum to " +
                                fmt17(prior_sum) + ", expected 1");
  }
}

double emission_logpdf(const GaussianEmission& g,
                       const std::vector<double>& y) {
  if (y.size() != g.mean.size()) {
    throw std::invalid_argument(
        "emission_logpdf: observation dimension " + std::to_string(y.size()) +
        " does not match emission dimension " + std::to_string(g.mean.size()));
  }
  double acc = 0.0;
  for (std::size_t d = 0; d < y.size(); ++d) {
    const double v = g.variance[d];
    const double diff = y[d] - g.mean[d];
    acc += kLog2Pi + std::log(v) + diff * diff / v;
  }
  return -0.5 * acc;
}

double path_log_likelihood(const HmmModel& model, const FeatureMatrix& features,
                           const StatePath& path) {
  check_features(model, features, "path_log_likelihood");
  const std::size_t T = features.rows.size();
  const auto& p = path.states;
  if (p.size() != T) {
    throw std::invalid_argument(
        "path_log_likelihood: path length " + std::to_string(p.size()) +
        " does not match frame count " + std::to_string(T));
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (p[t] < 0 || p[t] >= model.n_states) {
      throw std::invalid_argument("path_log_likelihood: state " +
                                  std::to_string(p[t]) + " at frame " +
                                  std::to_string(t) + " is out of range");
    }
    if (t > 0 && (p[t] < p[t - 1] || p[t] > p[t - 1] + 1)) {
      throw std::invalid_argument(
          "path_log_likelihood: illegal transition " + std::to_string(p[t - 1]) +
          "->" + std::to_string(p[t]) + " at frame " + std::to_string(t));
    }
  }
  double ll = model.log_entry[p[0]] +
              emission_logpdf(model.emissions[p[0]], features.rows[0]);
  for (std::size_t t = 1; t < T; ++t) {
    ll += model.log_trans[p[t - 1]][p[t]] +
          emission_logpdf(model.emissions[p[t]], features.rows[t]);
  }
  return ll + model.log_exit[p.back()];
}

double forward_log_likelihood(const HmmModel& model,
                              const FeatureMatrix& features) {
  check_features(model, features, "forward_log_likelihood");
  const auto b = emission_table(model, features);
  const auto alpha = forward_table(model, b);
  return terminal_log_likelihood(model, alpha);
}

std::pair<StatePath, double> viterbi(const HmmModel& model,
                                     const FeatureMatrix& features) {
  check_features(model, features, "viterbi");
  const std::size_t T = features.rows.size();
  const int N = model.n_states;
  if (T < static_cast<std::size_t>(N)) {
    throw std::runtime_error(
        "viterbi: sequence has " + std::to_string(T) + " frames but the model "
        "has " + std::to_string(N) +
        " states; a left-to-right traversal cannot reach the exit");
  }
  const auto b = emission_table(model, features);
  std::vector<std::vector<double>> delta(T, std::vector<double>(N, kNegInf));
  std::vector<std::vector<int>> from(T, std::vector<int>(N, -1));
  for (int j = 0; j < N; ++j) {
    if (model.log_entry[j] != kNegInf) {
      delta[0][j] = model.log_entry[j] + b[0][j];
    }
  }
  for (std::size_t t = 1; t < T; ++t) {
    for (int j = 0; j < N; ++j) {
      double best = kNegInf;
      int arg = -1;
      for (int i = 0; i < N; ++i) {
        const double v = delta[t - 1][i] + model.log_trans[i][j];
        if (v > best) { // strict: ties keep the lower state index
          best = v;
          arg = i;
        }
      }
      if (arg >= 0) {
        delta[t][j] = best + b[t][j];
        from[t][j] = arg;
      }
    }
  }
  double best = kNegInf;
  int last = -1;
  for (int j = 0; j < N; ++j) {
    const double v = delta[T - 1][j] + model.log_exit[j];
    if (v > best) {
      best = v;
      last = j;
    }
  }
  if (last < 0 || best == kNegInf) {
    throw std::runtime_error("viterbi: no state path can generate the sequence");
  }
  StatePath path;
  path.states.resize(T);
  path.states[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) {
    path.states[t - 1] = from[t][path.states[t]];
  }
  return {std::move(path), best};
}

HmmModel flat_start(const std::vector<FeatureMatrix>& features, int n_states,
                    double variance_floor) {
  if (n_states < 1) {
    throw std::invalid_argument("flat_start: n_states must be >= 1, got " +
                                std::to_string(n_states));
  }
  if (!(variance_floor > 0.0)) {
    throw std::invalid_argument("flat_start: variance_floor must be positive");
  }
  if (features.empty()) {
    throw std::invalid_argument("flat_start: no feature matrices");
  }
  const int dim = features[0].dims();
  if (dim == 0) {
    throw std::invalid_argument("flat_start: clip 0 has zero-dimensional rows");
  }
  for (std::size_t c = 0; c < features.size(); ++c) {
    const std::size_t T = features[c].rows.size();
    if (features[c].dims() != dim) {
      throw std::invalid_argument(
          "flat_start: clip " + std::to_string(c) + " has dimension " +
          std::to_string(features[c].dims()) + ", expected " +
          std::to_string(dim));
    }
    if (T < static_cast<std::size_t>(n_states)) {
      throw std::invalid_argument(
          "flat_start: clip " + std::to_string(c) + " has " +
          std::to_string(T) + " frames, fewer than n_states " +
          std::to_string(n_states));
    }
  }

  std::vector<std::size_t> count(n_states, 0);
  std::vector<std::vector<double>> sum(n_states, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> sum_sq(n_states,
                                          std::vector<double>(dim, 0.0));
  for (const FeatureMatrix& f : features) {
    const std::size_t T = f.rows.size();
    for (int j = 0; j < n_states; ++j) {
      const std::size_t lo = T * static_cast<std::size_t>(j) /
                             static_cast<std::size_t>(n_states);
      const std::size_t hi = T * static_cast<std::size_t>(j + 1) /
                             static_cast<std::size_t>(n_states);
      for (std::size_t t = lo; t < hi; ++t) {
        ++count[j];
        for (int d = 0; d < dim; ++d) {
          sum[j][d] += f.rows[t][d];
          sum_sq[j][d] += f.rows[t][d] * f.rows[t][d];
        }
      }
    }
  }

  const double log_half = std::log(0.5);
  HmmModel model;
  model.n_states = n_states;
  model.log_entry.assign(n_states, kNegInf);
  model.log_entry[0] = 0.0;
  model.log_trans.assign(n_states, std::vector<double>(n_states, kNegInf));
  model.log_exit.assign(n_states, kNegInf);
  model.emissions.resize(n_states);
  for (int j = 0; j < n_states; ++j) {
    GaussianEmission& g = model.emissions[j];
    g.variance_floor = variance_floor;
    g.mean.resize(dim);
    g.variance.resize(dim);
    const double inv = 1.0 / static_cast<double>(count[j]);
    for (int d = 0; d < dim; ++d) {
      g.mean[d] = sum[j][d] * inv;
      g.variance[d] =
          std::max(sum_sq[j][d] * inv - g.mean[d] * g.mean[d], variance_floor);
    }
    model.log_trans[j][j] = log_half;
    if (j + 1 < n_states) {
      model.log_trans[j][j + 1] = log_half;
    } else {
      model.log_exit[j] = log_half;
    }
  }
  return model;
}

namespace {

struct EmStats {
  double total_ll = 0.0;
  std::vector<double> occ;                  // [j] total state occupancy
  std::vector<std::vector<double>> w_sum;   // [j][d] occupancy-weighted sums
  std::vector<std::vector<double>> w_sq;    // [j][d] weighted squared sums
  std::vector<double> self_num;             // [j] expected self transitions
  std::vector<double> next_num;             // [j] expected advances
  std::vector<double> exit_num;             // [j] expected exits
};

EmStats accumulate_stats(const HmmModel& model,
                         const std::vector<FeatureMatrix>& features,
                         int iteration) {
  const int N = model.n_states;
  const int D = model.dims();
  EmStats s;
  s.occ.assign(N, 0.0);
  s.w_sum.assign(N, std::vector<double>(D, 0.0));
  s.w_sq.assign(N, std::vector<double>(D, 0.0));
  s.self_num.assign(N, 0.0);
  s.next_num.assign(N, 0.0);
  s.exit_num.assign(N, 0.0);

  for (std::size_t c = 0; c < features.size(); ++c) {
    const FeatureMatrix& f = features[c];
    check_features(model, f, "em_train");
    const std::size_t T = f.rows.size();
    const auto b = emission_table(model, f);
    const auto alpha = forward_table(model, b);
    const auto beta = backward_table(model, b);
    const double ll = terminal_log_likelihood(model, alpha);
    if (!std::isfinite(ll)) {
      throw std::runtime_error(
          "em_train: log-likelihood is not finite at iteration " +
          std::to_string(iteration) + " (clip " + std::to_string(c) + ")");
    }
    s.total_ll += ll;

    for (std::size_t t = 0; t < T; ++t) {
      for (int j = 0; j < N; ++j) {
        const double lg = alpha[t][j] + beta[t][j] - ll;
        if (lg == kNegInf) continue;
        const double g = std::exp(lg);
        s.occ[j] += g;
        for (int d = 0; d < D; ++d) {
          const double y = f.rows[t][d];
          s.w_sum[j][d] += g * y;
          s.w_sq[j][d] += g * y * y;
        }
      }
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (int i = 0; i < N; ++i) {
        if (alpha[t][i] == kNegInf) continue;
        const double lself =
            alpha[t][i] + model.log_trans[i][i] + b[t + 1][i] + beta[t + 1][i];
        if (lself != kNegInf) s.self_num[i] += std::exp(lself - ll);
        if (i + 1 < N) {
          const double lnext = alpha[t][i] + model.log_trans[i][i + 1] +
                               b[t + 1][i + 1] + beta[t + 1][i + 1];
          if (lnext != kNegInf) s.next_num[i] += std::exp(lnext - ll);
        }
      }
    }
    for (int j = 0; j < N; ++j) {
      const double lx = alpha[T - 1][j] + model.log_exit[j];
      if (lx != kNegInf) s.exit_num[j] += std::exp(lx - ll);
    }
  }
  return s;
}

HmmModel reestimate(const HmmModel& model, const EmStats& s) {
  // Sum of the three transition numerators equals the occupancy, so the
  // renormalized row plus exit sums to 1 exactly.
  constexpr double kStarved = 1e-8;
  const int N = model.n_states;
  const int D = model.dims();
  HmmModel out = model;
  for (int j = 0; j < N; ++j) {
    if (s.occ[j] <= kStarved) continue; // keep the previous parameters
    GaussianEmission& g = out.emissions[j];
    const double inv = 1.0 / s.occ[j];
    for (int d = 0; d < D; ++d) {
      g.mean[d] = s.w_sum[j][d] * inv;
      g.variance[d] = std::max(s.w_sq[j][d] * inv - g.mean[d] * g.mean[d],
                               g.variance_floor);
    }
    const double denom = s.self_num[j] + s.next_num[j] + s.exit_num[j];
    if (denom > 0.0) {
      const double p_self = s.self_num[j] / denom;
      const double p_next = s.next_num[j] / denom;
      const double p_exit = s.exit_num[j] / denom;
      out.log_trans[j][j] = p_self > 0.0 ? std::log(p_self) : kNegInf;
      if (j + 1 < N) {
        out.log_trans[j][j + 1] = p_next > 0.0 ? std::log(p_next) : kNegInf;
      }
      out.log_exit[j] = p_exit > 0.0 ? std::log(p_exit) : kNegInf;
    }
  }
  return out;
}

} // namespace

EmTrainResult em_train(const HmmModel& model,
                       const std::vector<FeatureMatrix>& features,
                       int max_iters, double rel_tol) {
  model.validate();
  if (max_iters < 1) {
    throw std::invalid_argument("em_train: max_iters must be >= 1, got " +
                                std::to_string(max_iters));
  }
  if (!(rel_tol >= 0.0)) {
    throw std::invalid_argument("em_train: rel_tol must be >= 0");
  }
  if (features.empty()) {
    throw std::invalid_argument("em_train: no feature matrices");
  }

  EmTrainResult res;
  res.model = model;
  EmStats stats = accumulate_stats(res.model, features, 0);
  res.log_likelihoods.push_back(stats.total_ll);
  for (int it = 1; it <= max_iters; ++it) {
    HmmModel updated = reestimate(res.model, stats);
    stats = accumulate_stats(updated, features, it);
    res.model = std::move(updated);
    res.log_likelihoods.push_back(stats.total_ll);
    res.iterations = it;
    const double prev = res.log_likelihoods[it - 1];
    const double gain = (stats.total_ll - prev) / std::max(1.0, std::fabs(prev));
    if (gain < rel_tol) break;
  }
  return res;
}

std::vector<ScoredLabel> classify(const Recognizer& rec,
                                  const FeatureMatrix& features) {
  rec.validate();
  const std::size_t K = rec.classes.size();
  std::vector<double> scores(K);
  double best = kNegInf;
  for (std::size_t k = 0; k < K; ++k) {
    scores[k] = forward_log_likelihood(rec.classes[k].hmm, features) +
                rec.grammar_scale * rec.classes[k].log_prior;
    best = std::max(best, scores[k]);
  }
  if (best == kNegInf) {
    throw std::runtime_error(
        "classify: every class assigns zero probability to the sequence");
  }
  double norm = 0.0;
  for (double s : scores) norm += std::exp(s - best);
  std::vector<ScoredLabel> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k].label = rec.classes[k].label;
    out[k].score = std::exp(scores[k] - best) / norm;
  }
  std::sort(out.begin(), out.end(), [](const ScoredLabel& a,
                                       const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  });
  return out;
}

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

struct LineReader {
  std::istream& in;
  int line_no = 0;

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error("model parse: unexpected end of input, expected " +
                               std::string(what));
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error("model parse: line " + std::to_string(line_no) +
                             ": " + msg);
  }
};

double parse_double_tok(const LineReader& r, const std::string& tok,
                        const char* field) {
  if (tok.empty()) r.fail(std::string("empty value for ") + field);
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) {
    r.fail("bad number '" + tok + "' for " + field);
  }
  return v;
}

long parse_int_tok(const LineReader& r, const std::string& tok,
                   const char* field) {
  if (tok.empty()) r.fail(std::string("empty value for ") + field);
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size()) {
    r.fail("bad integer '" + tok + "' for " + field);
  }
  return v;
}

std::vector<std::string> expect_fields(LineReader& r, const char* key,
                                       std::size_t n_values) {
  const std::string line = r.next(key);
  const auto tokens = split_tokens(line);
  if (tokens.empty() || tokens[0] != key) {
    r.fail("expected '" + std::string(key) + "', got '" + line + "'");
  }
  if (tokens.size() != n_values + 1) {
    r.fail("'" + std::string(key) + "' takes " + std::to_string(n_values) +
           " values, got " + std::to_string(tokens.size() - 1));
  }
  return tokens;
}

} // namespace

std::string serialize_recognizer(const Recognizer& rec) {
  rec.validate();
  std::ostringstream os;
  os << "FAUNA-HMM v1\n";
  const FormatContract& c = rec.contract;
  os << "contract " << c.target_rate << ' ' << c.target_channels << ' '
     << fmt17(c.target_duration) << ' ' << c.target_bit_depth << '\n';
  const FeatureConfig& fc = rec.feature_config;
  os << "features " << fmt17(fc.frame_ms) << ' ' << fmt17(fc.hop_ms) << ' '
     << fc.num_mel_filters << ' ' << fc.num_cepstra << ' ' << fmt17(fc.mel_low)
     << ' ' << fmt17(fc.mel_high) << ' ' << fc.delta_window << ' '
     << (fc.include_deltas ? 1 : 0) << ' ' << fmt17(fc.preemphasis) << '\n';
  os << "grammar_scale " << fmt17(rec.grammar_scale) << '\n';
  os << "classes " << rec.classes.size() << '\n';
  for (const ClassModel& cls : rec.classes) {
    const HmmModel& h = cls.hmm;
    os << "class " << cls.label << '\n';
    os << "prior " << fmt17(cls.log_prior) << '\n';
    os << "states " << h.n_states << " dim " << h.dims() << " vfloor "
       << fmt17(h.emissions[0].variance_floor) << '\n';
    for (int j = 0; j < h.n_states; ++j) {
      os << "state " << j << '\n';
      os << "mean";
      for (double v : h.emissions[j].mean) os << ' ' << fmt17(v);
      os << '\n';
      os << "var";
      for (double v : h.emissions[j].variance) os << ' ' << fmt17(v);
      os << '\n';
      const double next = j + 1 < h.n_states ? h.log_trans[j][j + 1] : kNegInf;
      os << "trans " << fmt17(h.log_trans[j][j]) << ' ' << fmt17(next) << ' '
         << fmt17(h.log_exit[j]) << '\n';
    }
    os << "endclass\n";
  }
  os << "end\n";
  return os.str();
}

Recognizer parse_recognizer(std::istream& in) {
  LineReader r{in};
  const std::string magic = r.next("'FAUNA-HMM v1'");
  if (magic != "FAUNA-HMM v1") {
    r.fail("unsupported model format '" + magic + "', expected 'FAUNA-HMM v1'");
  }

  Recognizer rec;
  {
    const auto t = expect_fields(r, "contract", 4);
    rec.contract.target_rate =
        static_cast<int>(parse_int_tok(r, t[1], "contract rate"));
    rec.contract.target_channels =
        static_cast<int>(parse_int_tok(r, t[2], "contract channels"));
    rec.contract.target_duration = parse_double_tok(r, t[3], "contract duration");
    rec.contract.target_bit_depth =
        static_cast<int>(parse_int_tok(r, t[4], "contract bit depth"));
  }
  {
    const auto t = expect_fields(r, "features", 9);
    FeatureConfig& fc = rec.feature_config;
    fc.frame_ms = parse_double_tok(r, t[1], "frame_ms");
    fc.hop_ms = parse_double_tok(r, t[2], "hop_ms");
    fc.num_mel_filters =
        static_cast<int>(parse_int_tok(r, t[3], "num_mel_filters"));
    fc.num_cepstra = static_cast<int>(parse_int_tok(r, t[4], "num_cepstra"));
    fc.mel_low = parse_double_tok(r, t[5], "mel_low");
    fc.mel_high = parse_double_tok(r, t[6], "mel_high");
    fc.delta_window = static_cast<int>(parse_int_tok(r, t[7], "delta_window"));
    fc.include_deltas = parse_int_tok(r, t[8], "include_deltas") != 0;
    fc.preemphasis = parse_double_tok(r, t[9], "preemphasis");
  }
  {
    const auto t = expect_fields(r, "grammar_scale", 1);
    rec.grammar_scale = parse_double_tok(r, t[1], "grammar_scale");
  }
  const auto classes_line = expect_fields(r, "classes", 1);
  const long n_classes = parse_int_tok(r, classes_line[1], "class count");
  if (n_classes < 1) r.fail("class count must be >= 1");

  for (long k = 0; k < n_classes; ++k) {
    const std::string class_line = r.next("'class <label>'");
    if (class_line.rfind("class ", 0) != 0 || class_line.size() <= 6) {
      r.fail("expected 'class <label>', got '" + class_line + "'");
    }
    ClassModel cls;
    cls.label = class_line.substr(6);

    const auto prior = expect_fields(r, "prior", 1);
    cls.log_prior = parse_double_tok(r, prior[1], "prior");

    const std::string states_line = r.next("'states N dim D vfloor F'");
    const auto st = split_tokens(states_line);
    if (st.size() != 6 || st[0] != "states" || st[2] != "dim" ||
        st[4] != "vfloor") {
      r.fail("expected 'states N dim D vfloor F', got '" + states_line + "'");
    }
    const long n_states = parse_int_tok(r, st[1], "states");
    const long dim = parse_int_tok(r, st[3], "dim");
    const double vfloor = parse_double_tok(r, st[5], "vfloor");
    if (n_states < 1) r.fail("states must be >= 1");
    if (dim < 1) r.fail("dim must be >= 1");

    HmmModel& h = cls.hmm;
    h.n_states = static_cast<int>(n_states);
    h.log_entry.assign(n_states, kNegInf);
    h.log_entry[0] = 0.0;
    h.log_trans.assign(n_states, std::vector<double>(n_states, kNegInf));
    h.log_exit.assign(n_states, kNegInf);
    h.emissions.resize(n_states);
    for (long j = 0; j < n_states; ++j) {
      const auto state = expect_fields(r, "state", 1);
      if (parse_int_tok(r, state[1], "state index") != j) {
        r.fail("expected state " + std::to_string(j));
      }
      GaussianEmission& g = h.emissions[j];
      g.variance_floor = vfloor;
      const auto mean = expect_fields(r, "mean", dim);
      const auto var = expect_fields(r, "var", dim);
      g.mean.resize(dim);
      g.variance.resize(dim);
      for (long d = 0; d < dim; ++d) {
        g.mean[d] = parse_double_tok(r, mean[d + 1], "mean");
        g.variance[d] = parse_double_tok(r, var[d + 1], "var");
      }
      const auto trans = expect_fields(r, "trans", 3);
      h.log_trans[j][j] = parse_double_tok(r, trans[1], "self transition");
      const double next = parse_double_tok(r, trans[2], "next transition");
      if (j + 1 < n_states) {
        h.log_trans[j][j + 1] = next;
      } else if (next != kNegInf) {
        r.fail("last state cannot advance");
      }
      h.log_exit[j] = parse_double_tok(r, trans[3], "exit transition");
    }
    const std::string endclass = r.next("'endclass'");
    if (endclass != "endclass") {
      r.fail("expected 'endclass', got '" + endclass + "'");
    }
    rec.classes.push_back(std::move(cls));
  }
  const std::string end = r.next("'end'");
  if (end != "end") r.fail("expected 'end', got '" + end + "'");

  // Structural damage in a model file is malformed input, not caller misuse.
  try {
    rec.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model parse: ") + e.what());
  }
  return rec;
}

Recognizer parse_recognizer(const std::string& text) {
  std::istringstream is(text);
  return parse_recognizer(is);
}

} // namespace fauna
