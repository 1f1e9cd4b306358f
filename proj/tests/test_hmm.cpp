#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fauna/hmm.hpp"
#include "oracle_utils.hpp"

using oracle::kNegInf;

namespace {

// Deterministic 2-state model with easy numbers for hand checks.
fauna::HmmModel tiny_model() {
  fauna::HmmModel m;
  m.n_states = 2;
  m.log_entry = {0.0, kNegInf};
  m.log_trans = {{std::log(0.6), std::log(0.3)}, {kNegInf, std::log(0.5)}};
  m.log_exit = {std::log(0.1), std::log(0.5)};
  m.emissions.resize(2);
  m.emissions[0].mean = {0.0};
  m.emissions[0].variance = {1.0};
  m.emissions[1].mean = {2.0};
  m.emissions[1].variance = {0.5};
  return m;
}

fauna::FeatureMatrix rows(std::initializer_list<double> values) {
  fauna::FeatureMatrix f;
  for (double v : values) f.rows.push_back({v});
  return f;
}

} // namespace

TEST_CASE("emission_logpdf matches the Gaussian density formula") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.05, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 4;
    fauna::GaussianEmission g;
    std::vector<double> y(dim);
    double expected = 0.0;
    for (int d = 0; d < dim; ++d) {
      g.mean.push_back(u(rng));
      g.variance.push_back(pos(rng));
      y[d] = u(rng);
      const double diff = y[d] - g.mean[d];
      expected += std::log(1.0 / std::sqrt(2.0 * oracle::kPi * g.variance[d])) -
                  diff * diff / (2.0 * g.variance[d]);
    }
    CHECK(fauna::emission_logpdf(g, y) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("path_log_likelihood is the chain-rule product") {
  const auto m = tiny_model();
  const auto f = rows({0.1, 0.2, 1.9});
  const fauna::StatePath path{{0, 0, 1}};
  const double got = fauna::path_log_likelihood(m, f, path);
  CHECK(got == doctest::Approx(oracle::ref_path_ll(m, f, path.states))
                   .epsilon(1e-12));

  SUBCASE("backward steps are rejected") {
    CHECK_THROWS_AS(
        fauna::path_log_likelihood(m, f, fauna::StatePath{{1, 0, 0}}),
        std::invalid_argument);
  }
  SUBCASE("skips are rejected") {
    fauna::HmmModel wide = tiny_model();
    wide.n_states = 3;
    wide.log_entry = {0.0, kNegInf, kNegInf};
    wide.log_trans = {{std::log(0.5), std::log(0.5), kNegInf},
                      {kNegInf, std::log(0.5), std::log(0.25)},
                      {kNegInf, kNegInf, std::log(0.5)}};
    wide.log_exit = {kNegInf, std::log(0.25), std::log(0.5)};
    wide.emissions.resize(3, m.emissions[0]);
    CHECK_THROWS_AS(
        fauna::path_log_likelihood(wide, f, fauna::StatePath{{0, 2, 2}}),
        std::invalid_argument);
  }
  SUBCASE("length mismatch is rejected") {
    CHECK_THROWS_AS(fauna::path_log_likelihood(m, f, fauna::StatePath{{0, 1}}),
                    std::invalid_argument);
  }
}

TEST_CASE("forward and viterbi agree with exhaustive enumeration") {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> n_dist(1, 4);
  std::uniform_int_distribution<int> d_dist(1, 3);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = n_dist(rng);
    const int d = d_dist(rng);
    std::uniform_int_distribution<int> t_dist(n, 6);
    const int T = t_dist(rng);
    const auto m = oracle::random_ltr_model(rng, n, d);
    const auto f = oracle::random_features(rng, T, d);
    const auto [total_ref, best_ref] = oracle::enumeration_ll(m, f);

    CAPTURE(trial);
    CHECK(fauna::forward_log_likelihood(m, f) ==
          doctest::Approx(total_ref).epsilon(1e-10));
    const auto [path, best] = fauna::viterbi(m, f);
    CHECK(best == doctest::Approx(best_ref).epsilon(1e-10));
    // The reported path must itself achieve the reported likelihood.
    CHECK(fauna::path_log_likelihood(m, f, path) ==
          doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("forward handles degenerate shapes") {
  SUBCASE("single state, single frame") {
    fauna::HmmModel m;
    m.n_states = 1;
    m.log_entry = {0.0};
    m.log_trans = {{std::log(0.5)}};
    m.log_exit = {std::log(0.5)};
    m.emissions.resize(1);
    m.emissions[0].mean = {1.0};
    m.emissions[0].variance = {1.0};
    const auto f = rows({1.0});
    const double expected = std::log(0.5) + fauna::emission_logpdf(m.emissions[0], {1.0});
    CHECK(fauna::forward_log_likelihood(m, f) ==
          doctest::Approx(expected).epsilon(1e-12));
    const auto [path, ll] = fauna::viterbi(m, f);
    CHECK(path.states == std::vector<int>{0});
    CHECK(ll == doctest::Approx(expected).epsilon(1e-12));
  }

  // Exit only from the last state, so short observations cannot finish.
  const auto strict = [] {
    auto m = tiny_model();
    m.log_trans = {{std::log(0.6), std::log(0.4)},
                   {oracle::kNegInf, std::log(0.5)}};
    m.log_exit = {oracle::kNegInf, std::log(0.5)};
    return m;
  };

  SUBCASE("T == n_states forces the unique straight-through path") {
    const auto m = strict();
    const auto f = rows({0.0, 2.0});
    const auto [path, ll] = fauna::viterbi(m, f);
    CHECK(path.states == std::vector<int>{0, 1});
    const double expected = fauna::emission_logpdf(m.emissions[0], {0.0}) +
                            std::log(0.4) +
                            fauna::emission_logpdf(m.emissions[1], {2.0}) +
                            std::log(0.5);
    CHECK(ll == doctest::Approx(expected).epsilon(1e-12));
    // Only one legal path exists, so forward equals Viterbi exactly.
    CHECK(fauna::forward_log_likelihood(m, f) == doctest::Approx(ll));
  }

  SUBCASE("T < n_states cannot reach the exit") {
    const auto m = strict();
    const auto f = rows({0.0});
    CHECK(fauna::forward_log_likelihood(m, f) == kNegInf);
    CHECK_THROWS_AS(fauna::viterbi(m, f), std::runtime_error);
  }

  SUBCASE("empty features are rejected") {
    const auto m = tiny_model();
    fauna::FeatureMatrix f;
    CHECK_THROWS_AS(fauna::forward_log_likelihood(m, f),
                    std::invalid_argument);
  }

  SUBCASE("dimension mismatch is rejected") {
    const auto m = tiny_model();
    fauna::FeatureMatrix f;
    f.rows = {{0.0, 1.0}};
    CHECK_THROWS_AS(fauna::forward_log_likelihood(m, f),
                    std::invalid_argument);
  }
}

TEST_CASE("viterbi prefers the lower state on exact ties") {
  // Symmetric model and data make both states equally likely per frame;
  // the resolved path must take the lexicographically smallest states.
  fauna::HmmModel m;
  m.n_states = 2;
  m.log_entry = {0.0, kNegInf};
  m.log_trans = {{std::log(0.25), std::log(0.5)},
                 {kNegInf, std::log(0.25)}};
  m.log_exit = {std::log(0.25), std::log(0.75)};
  m.emissions.resize(2);
  m.emissions[0].mean = {0.0};
  m.emissions[0].variance = {1.0};
  m.emissions[1] = m.emissions[0];
  CHECK_NOTHROW(m.validate());
  const auto f = rows({0.0, 0.0, 0.0});
  // Paths 0-0-1 (0.25 * 0.5) and 0-1-1 (0.5 * 0.25) tie exactly and beat
  // 0-0-0; dwelling in the earlier state must win the tie.
  const auto [path, ll] = fauna::viterbi(m, f);
  CHECK(path.states == std::vector<int>{0, 0, 1});
  CHECK(ll == doctest::Approx(fauna::path_log_likelihood(m, f, path)));
}

TEST_CASE("flat start pools span statistics") {
  std::vector<fauna::FeatureMatrix> data;
  data.push_back(rows({0.0, 2.0, 10.0, 14.0}));
  data.push_back(rows({1.0, 3.0, 11.0, 15.0}));
  const auto m = fauna::flat_start(data, 2);
  REQUIRE(m.n_states == 2);
  // First spans: {0, 2} and {1, 3} -> mean 1.5, pooled variance 1.25.
  CHECK(m.emissions[0].mean[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(m.emissions[0].variance[0] == doctest::Approx(1.25).epsilon(1e-12));
  // Second spans: {10, 14} and {11, 15} -> mean 12.5, variance 4.25.
  CHECK(m.emissions[1].mean[0] == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(m.emissions[1].variance[0] == doctest::Approx(4.25).epsilon(1e-12));
  // All transition probabilities start at 0.5; only the last state exits.
  CHECK(m.log_trans[0][0] == doctest::Approx(std::log(0.5)));
  CHECK(m.log_trans[0][1] == doctest::Approx(std::log(0.5)));
  CHECK(m.log_exit[0] == kNegInf);
  CHECK(m.log_trans[1][1] == doctest::Approx(std::log(0.5)));
  CHECK(m.log_exit[1] == doctest::Approx(std::log(0.5)));
  CHECK_NOTHROW(m.validate());

  SUBCASE("constant data hits the variance floor") {
    std::vector<fauna::FeatureMatrix> flat = {rows({3.0, 3.0, 3.0, 3.0})};
    const auto fm = fauna::flat_start(flat, 2, 1e-3);
    CHECK(fm.emissions[0].variance[0] == 1e-3);
    CHECK(fm.emissions[1].variance[0] == 1e-3);
  }
  SUBCASE("clips shorter than n_states are rejected") {
    std::vector<fauna::FeatureMatrix> shorty = {rows({1.0})};
    CHECK_THROWS_AS(fauna::flat_start(shorty, 2), std::invalid_argument);
  }
  SUBCASE("empty dataset is rejected") {
    CHECK_THROWS_AS(fauna::flat_start({}, 2), std::invalid_argument);
  }
}

TEST_CASE("em_train improves likelihood monotonically") {
  std::mt19937 rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 1 + trial % 3;
    const auto data = oracle::random_dataset(rng, 6, dim, 8, 16);
    const auto m0 = fauna::flat_start(data, 3);
    const auto result = fauna::em_train(m0, data, 12, 0.0);
    REQUIRE(result.log_likelihoods.size() >= 2);
    for (std::size_t i = 1; i < result.log_likelihoods.size(); ++i) {
      CHECK(result.log_likelihoods[i] >=
            result.log_likelihoods[i - 1] - 1e-8);
    }
    CHECK_NOTHROW(result.model.validate());
  }
}

TEST_CASE("em_train with infinite tolerance stops after one update") {
  std::mt19937 rng(41);
  const auto data = oracle::random_dataset(rng, 4, 2, 8, 12);
  const auto m0 = fauna::flat_start(data, 2);
  const auto result = fauna::em_train(
      m0, data, 50, std::numeric_limits<double>::infinity());
  CHECK(result.iterations == 1);
  CHECK(result.log_likelihoods.size() == 2);
}

TEST_CASE("single-state EM recovers the closed-form Gaussian fit") {
  std::mt19937 rng(43);
  std::normal_distribution<double> gen(1.25, 0.8);
  std::vector<fauna::FeatureMatrix> data(5);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (auto& f : data) {
    f.rows.assign(10, std::vector<double>(1));
    for (auto& row : f.rows) {
      row[0] = gen(rng);
      sum += row[0];
      sum_sq += row[0] * row[0];
      ++count;
    }
  }
  const double mean = sum / count;
  const double variance = sum_sq / count - mean * mean;

  const auto m0 = fauna::flat_start(data, 1);
  const auto result = fauna::em_train(m0, data, 50, 1e-12);
  CHECK(result.model.emissions[0].mean[0] ==
        doctest::Approx(mean).epsilon(1e-9));
  CHECK(result.model.emissions[0].variance[0] ==
        doctest::Approx(variance).epsilon(1e-9));
  // With every frame in state 0, transitions count dwell vs exit directly:
  // self = (total - clips) / total, exit = clips / total.
  CHECK(std::exp(result.model.log_trans[0][0]) ==
        doctest::Approx((count - data.size()) / static_cast<double>(count))
            .epsilon(1e-9));
  CHECK(std::exp(result.model.log_exit[0]) ==
        doctest::Approx(data.size() / static_cast<double>(count))
            .epsilon(1e-9));
}

TEST_CASE("classify ranks by scaled posterior and normalizes scores") {
  fauna::Recognizer rec;
  rec.feature_config.include_deltas = false;
  rec.feature_config.num_cepstra = 1;

  const auto make_class = [&](const std::string& label, double mean,
                              double prior) {
    fauna::ClassModel c;
    c.label = label;
    c.log_prior = std::log(prior);
    c.hmm.n_states = 1;
    c.hmm.log_entry = {0.0};
    c.hmm.log_trans = {{std::log(0.5)}};
    c.hmm.log_exit = {std::log(0.5)};
    c.hmm.emissions.resize(1);
    c.hmm.emissions[0].mean = {mean};
    c.hmm.emissions[0].variance = {1.0};
    return c;
  };
  rec.classes.push_back(make_class("near_zero", 0.0, 0.5));
  rec.classes.push_back(make_class("near_five", 5.0, 0.5));

  const auto f = rows({0.2, -0.1, 0.3});
  const auto scored = fauna::classify(rec, f);
  REQUIRE(scored.size() == 2);
  CHECK(scored[0].label == "near_zero");
  CHECK(scored[0].score > scored[1].score);
  CHECK(scored[0].score + scored[1].score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scored[0].score > 0.99);

  SUBCASE("grammar scale zero ignores priors and ties break by label") {
    fauna::Recognizer tied = rec;
    tied.classes[1] = make_class("aaa_same", 0.0, 0.25);
    tied.classes[0] = make_class("zzz_same", 0.0, 0.75);
    tied.grammar_scale = 0.0;
    const auto s = fauna::classify(tied, f);
    CHECK(s[0].label == "aaa_same");
    CHECK(s[0].score == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1].score == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("larger grammar scale lets the prior win") {
    fauna::Recognizer biased = rec;
    // Acoustic gap 3 * 0.3 = 0.9 nats favors the shifted class; prior gap
    // log(0.6/0.4) = 0.41 nats favors near_zero. Scale 1 keeps acoustics
    // on top, scale 50 inflates the prior gap to 20 nats.
    biased.classes[0].log_prior = std::log(0.6);
    biased.classes[1].log_prior = std::log(0.4);
    biased.classes[1].hmm.emissions[0].mean = {1.0};
    const auto near = rows({0.8, 0.8, 0.8});
    const auto plain = fauna::classify(biased, near);
    CHECK(plain[0].label == "near_five");
    biased.grammar_scale = 50.0;
    const auto scaled = fauna::classify(biased, near);
    CHECK(scaled[0].label == "near_zero");
  }
}

TEST_CASE("recognizer serialization round-trips bit-identically") {
  std::mt19937 rng(47);
  fauna::Recognizer rec;
  rec.grammar_scale = 1.25;
  rec.feature_config.num_cepstra = 5;
  rec.feature_config.include_deltas = true;
  rec.feature_config.mel_high = 7100.0;
  const int dim = 15;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const char* labels[] = {"howl", "chirp", "croak"};
  for (const char* label : labels) {
    fauna::ClassModel c;
    c.label = label;
    c.log_prior = std::log(1.0 / 3.0);
    c.hmm = oracle::random_ltr_model(rng, 3, dim);
    rec.classes.push_back(std::move(c));
  }
  // Make priors sum to exactly one in probability space.
  rec.classes[0].log_prior = std::log(0.5);
  rec.classes[1].log_prior = std::log(0.25);
  rec.classes[2].log_prior = std::log(0.25);

  const std::string text = fauna::serialize_recognizer(rec);
  const auto parsed = fauna::parse_recognizer(text);
  CHECK(fauna::serialize_recognizer(parsed) == text);

  // Scoring through the parsed recognizer is bit-identical.
  const auto f = oracle::random_features(rng, 10, dim);
  const auto a = fauna::classify(rec, f);
  const auto b = fauna::classify(parsed, f);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].score == b[i].score);
  }

  SUBCASE("wrong magic is rejected") {
    CHECK_THROWS_WITH_AS(fauna::parse_recognizer("FAUNA-XXX v1\n"),
                         doctest::Contains("FAUNA-HMM"), std::runtime_error);
  }
  SUBCASE("truncated input is rejected") {
    const std::string cut = text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(fauna::parse_recognizer(cut), std::runtime_error);
  }
  SUBCASE("tampered transition row fails validation") {
    std::string bad = text;
    const auto pos = bad.find("trans ");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 11, "trans 0.999");
    CHECK_THROWS_AS(fauna::parse_recognizer(bad), std::runtime_error);
  }
}

TEST_CASE("model validation catches structural damage") {
  auto m = tiny_model();
  CHECK_NOTHROW(m.validate());

  SUBCASE("row sums must be one") {
    m.log_trans[0][0] = std::log(0.8);
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("entry must concentrate on state zero") {
    m.log_entry = {std::log(0.5), std::log(0.5)};
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("backward transitions are forbidden") {
    m.log_trans[1][0] = std::log(0.1);
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("variance below the floor is rejected") {
    m.emissions[0].variance[0] = 1e-9;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
}
