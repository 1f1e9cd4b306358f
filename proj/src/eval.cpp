#include "fauna/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fauna/features.hpp"
#include "fauna/preprocess.hpp"

namespace fauna {

namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string fmt_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5f", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL;
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= kPrime;
  }
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xffULL;
    h *= kPrime;
  }
  return h;
}

FeatureMatrix featurize(const AudioClip& clip, const FormatContract& contract,
                        const FeatureConfig& fcfg) {
  AudioClip prepared = apply_contract(clip, contract);
  // A stereo contract delivers duplicated channels; features are defined
  // on the mono fold, which undoes that duplication exactly.
  if (prepared.channels() > 1) prepared = downmix(prepared);
  return mfcc(prepared, fcfg);
}

// Cached-feature core shared by evaluate() and the checkpoint loop.
ConfusionMatrix evaluate_cached(
    const Recognizer& rec, const Dataset& ds,
    const std::vector<std::pair<std::size_t, FeatureMatrix>>& feats,
    double reject_threshold) {
  std::set<std::string> label_set;
  for (const DatasetItem& item : ds.items) label_set.insert(item.label);
  for (const ClassModel& c : rec.classes) label_set.insert(c.label);
  if (reject_threshold > 0.0) label_set.insert(kUnknownLabel);

  ConfusionMatrix cm;
  cm.labels.assign(label_set.begin(), label_set.end());
  cm.counts.assign(cm.labels.size(),
                   std::vector<long>(cm.labels.size(), 0));
  auto index_of = [&](const std::string& label) {
    const auto it = std::lower_bound(cm.labels.begin(), cm.labels.end(), label);
    return static_cast<std::size_t>(it - cm.labels.begin());
  };
  for (const auto& [idx, features] : feats) {
    const auto scores = classify(rec, features);
    std::string predicted = scores[0].label;
    if (reject_threshold > 0.0 && scores[0].score < reject_threshold) {
      predicted = kUnknownLabel;
    }
    ++cm.counts[index_of(ds.items[idx].label)][index_of(predicted)];
  }
  return cm;
}

} // namespace

std::vector<std::string> Dataset::labels() const {
  std::set<std::string> unique;
  for (const DatasetItem& item : items) unique.insert(item.label);
  return {unique.begin(), unique.end()};
}

void SplitFractions::validate() const {
  if (!(train >= 0.0) || !(validation >= 0.0) || !(test >= 0.0)) {
    throw std::invalid_argument("SplitFractions: fractions must be >= 0");
  }
  const double sum = train + validation + test;
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("SplitFractions: fractions sum to " +
                                fmt17(sum) + ", expected 1");
  }
}

long ConfusionMatrix::total() const {
  long n = 0;
  for (const auto& row : counts) {
    for (long c : row) n += c;
  }
  return n;
}

long ConfusionMatrix::trace() const {
  long n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const long n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

std::string ConfusionMatrix::to_text() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    os << (i == 0 ? "[[" : " [");
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      if (j > 0) os << ' ';
      os << counts[i][j];
    }
    os << (i + 1 == counts.size() ? "]]" : "]");
    if (i + 1 < counts.size()) os << '\n';
  }
  return os.str();
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  for (const std::string& label : labels) os << ',' << label;
  os << '\n';
  for (std::size_t i = 0; i < counts.size(); ++i) {
    os << labels[i];
    for (long c : counts[i]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

void ConfusionMatrix::validate() const {
  if (labels.empty()) {
    throw std::invalid_argument("ConfusionMatrix: no labels");
  }
  if (counts.size() != labels.size()) {
    throw std::invalid_argument("ConfusionMatrix: row count does not match labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) {
      throw std::invalid_argument("ConfusionMatrix: empty label at " +
                                  std::to_string(i));
    }
    if (i > 0 && !(labels[i - 1] < labels[i])) {
      throw std::invalid_argument("ConfusionMatrix: labels not sorted/unique");
    }
    if (counts[i].size() != labels.size()) {
      throw std::invalid_argument("ConfusionMatrix: row " + std::to_string(i) +
                                  " has wrong length");
    }
    for (long c : counts[i]) {
      if (c < 0) {
        throw std::invalid_argument("ConfusionMatrix: negative count in row " +
                                    std::to_string(i));
      }
    }
  }
}

void TrainOptions::validate() const {
  if (n_states < 1) throw std::invalid_argument("TrainOptions: n_states must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("TrainOptions: max_iters must be >= 1");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("TrainOptions: rel_tol must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("TrainOptions: eval_every must be >= 1");
  if (!(variance_floor > 0.0)) {
    throw std::invalid_argument("TrainOptions: variance_floor must be positive");
  }
  if (!std::isfinite(grammar_scale)) {
    throw std::invalid_argument("TrainOptions: grammar_scale must be finite");
  }
}

ExperimentConfig ExperimentConfig::default_grid() {
  ExperimentConfig cfg;
  cfg.cells = {{1, 16000}, {2, 16000}, {1, 32000}, {2, 32000}};
  return cfg;
}

void ExperimentConfig::validate() const {
  if (cells.empty()) throw std::invalid_argument("ExperimentConfig: empty grid");
  for (const ExperimentCell& c : cells) {
    FormatContract contract;
    contract.target_channels = c.channels;
    contract.target_rate = c.rate;
    contract.validate();
  }
}

Dataset load_dataset(const std::string& root, std::ostream* warnings) {
  const fs::path root_path(root);
  if (!fs::exists(root_path)) {
    throw std::invalid_argument("load_dataset: '" + root + "' does not exist");
  }
  if (!fs::is_directory(root_path)) {
    throw std::invalid_argument("load_dataset: '" + root +
                                "' is not a directory");
  }
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root_path)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  Dataset ds;
  for (const fs::path& dir : class_dirs) {
    const std::string label = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
      try {
        auto [clip, spec] = read_wav_file(file.string());
        ds.items.push_back({label, file.string(), std::move(clip)});
      } catch (const std::exception& e) {
        if (warnings) {
          *warnings << "warning: skipping " << file.string() << ": "
                    << e.what() << '\n';
        }
        ++ds.skipped;
      }
    }
  }
  if (ds.items.empty()) {
    throw std::runtime_error("load_dataset: no readable WAV files under '" +
                             root + "'");
  }
  return ds;
}

Split split_dataset(const Dataset& ds, const SplitFractions& fractions,
                    std::uint64_t seed) {
  fractions.validate();
  // Integer percent bands keep the comparison exact for fractions that are
  // whole percentages.
  const long t1 = std::lround(fractions.train * 100.0);
  const long t2 = std::lround((fractions.train + fractions.validation) * 100.0);
  Split split;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const std::string base = fs::path(ds.items[i].path).filename().string();
    const long band =
        static_cast<long>(fnv1a64(base, seed) % 100ULL);
    if (band < t1) {
      split.train.push_back(i);
    } else if (band < t2) {
      split.validation.push_back(i);
    } else {
      split.test.push_back(i);
    }
  }
  return split;
}

TrainResult train_recognizer(const Dataset& ds, const Split& split,
                             const FormatContract& contract,
                             const FeatureConfig& fcfg,
                             const TrainOptions& opts, std::ostream* log) {
  contract.validate();
  fcfg.validate(contract.target_rate);
  opts.validate();
  for (const auto* indices : {&split.train, &split.validation, &split.test}) {
    for (std::size_t idx : *indices) {
      if (idx >= ds.items.size()) {
        throw std::invalid_argument("train_recognizer: split index " +
                                    std::to_string(idx) + " is out of range");
      }
    }
  }

  std::map<std::string, std::vector<FeatureMatrix>> train_feats;
  for (std::size_t idx : split.train) {
    const DatasetItem& item = ds.items[idx];
    if (item.label == kUnknownLabel) continue; // never trained
    train_feats[item.label].push_back(featurize(item.clip, contract, fcfg));
  }
  for (const std::string& label : ds.labels()) {
    if (label == kUnknownLabel || label == kSilenceLabel) continue;
    if (train_feats.find(label) == train_feats.end()) {
      throw std::runtime_error("train_recognizer: class '" + label +
                               "' has no training clips");
    }
  }
  if (train_feats.size() < 2) {
    throw std::runtime_error(
        "train_recognizer: needs at least 2 trainable classes, got " +
        std::to_string(train_feats.size()));
  }

  std::size_t train_total = 0;
  for (const auto& [label, feats] : train_feats) train_total += feats.size();

  std::map<std::string, HmmModel> models;
  for (const auto& [label, feats] : train_feats) {
    try {
      models[label] = flat_start(feats, opts.n_states, opts.variance_floor);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("train_recognizer: class '" + label + "': " +
                                  e.what());
    }
  }

  std::vector<std::pair<std::size_t, FeatureMatrix>> val_feats;
  for (std::size_t idx : split.validation) {
    val_feats.emplace_back(idx, featurize(ds.items[idx].clip, contract, fcfg));
  }

  const auto make_recognizer = [&]() {
    Recognizer rec;
    rec.grammar_scale = opts.grammar_scale;
    rec.feature_config = fcfg;
    rec.contract = contract;
    for (const auto& [label, model] : models) {
      ClassModel cls;
      cls.label = label;
      cls.hmm = model;
      cls.log_prior =
          std::log(static_cast<double>(train_feats.at(label).size()) /
                   static_cast<double>(train_total));
      rec.classes.push_back(std::move(cls));
    }
    return rec;
  };

  std::map<std::string, bool> converged;
  for (const auto& [label, model] : models) converged[label] = false;

  TrainResult result;
  int step = 0;
  while (step < opts.max_iters) {
    const int chunk = std::min(opts.eval_every, opts.max_iters - step);
    for (auto& [label, model] : models) {
      if (converged[label]) continue;
      EmTrainResult em;
      try {
        em = em_train(model, train_feats.at(label), chunk, opts.rel_tol);
      } catch (const std::exception& e) {
        throw std::runtime_error("train_recognizer: class '" + label + "': " +
                                 e.what());
      }
      model = std::move(em.model);
      const auto& lls = em.log_likelihoods;
      const double prev = lls[lls.size() - 2];
      const double gain =
          (lls.back() - prev) / std::max(1.0, std::fabs(prev));
      if (gain < opts.rel_tol) converged[label] = true;
    }
    step += chunk;

    const Recognizer rec = make_recognizer();
    Checkpoint ck;
    ck.step = step;
    ck.confusion = evaluate_cached(rec, ds, val_feats, 0.0);
    ck.validation_accuracy =
        val_feats.empty() ? 0.0 : ck.confusion.accuracy() * 100.0;
    ck.recognizer_text = serialize_recognizer(rec);
    if (log) {
      *log << "Step " << step << ": Validation accuracy = "
           << fmt_pct(ck.validation_accuracy) << "% (N=" << val_feats.size()
           << ")\n";
    }
    result.checkpoints.push_back(std::move(ck));

    bool all_done = true;
    for (const auto& [label, done] : converged) all_done = all_done && done;
    if (all_done) break;
  }

  // Unconditional final checkpoint; no EM ran since the last round, so it
  // duplicates that round's parameters.
  result.checkpoints.push_back(result.checkpoints.back());

  result.best_checkpoint = 0;
  for (std::size_t i = 1; i < result.checkpoints.size(); ++i) {
    if (result.checkpoints[i].validation_accuracy >=
        result.checkpoints[result.best_checkpoint].validation_accuracy) {
      result.best_checkpoint = i;
    }
  }
  result.recognizer =
      parse_recognizer(result.checkpoints[result.best_checkpoint].recognizer_text);
  return result;
}

std::vector<ScoredLabel> classify_clip(const Recognizer& rec,
                                       const AudioClip& clip) {
  return classify(rec, featurize(clip, rec.contract, rec.feature_config));
}

ConfusionMatrix evaluate(const Recognizer& rec, const Dataset& ds,
                         const std::vector<std::size_t>& indices,
                         double reject_threshold) {
  if (indices.empty()) {
    throw std::invalid_argument("evaluate: empty index set");
  }
  std::vector<std::pair<std::size_t, FeatureMatrix>> feats;
  for (std::size_t idx : indices) {
    if (idx >= ds.items.size()) {
      throw std::invalid_argument("evaluate: index " + std::to_string(idx) +
                                  " is out of range");
    }
    feats.emplace_back(idx,
                       featurize(ds.items[idx].clip, rec.contract,
                                 rec.feature_config));
  }
  return evaluate_cached(rec, ds, feats, reject_threshold);
}

std::vector<ExperimentRow> run_experiment_grid(const Dataset& ds,
                                               const ExperimentConfig& cfg,
                                               const SplitFractions& fractions,
                                               std::uint64_t seed,
                                               const FeatureConfig& fcfg,
                                               const TrainOptions& opts,
                                               std::ostream* log) {
  cfg.validate();
  const Split split = split_dataset(ds, fractions, seed);
  if (split.test.empty()) {
    throw std::runtime_error("run_experiment_grid: the test split is empty");
  }

  std::vector<ExperimentRow> rows;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    const ExperimentCell& cell = cfg.cells[c];
    FormatContract contract;
    contract.target_channels = cell.channels;
    contract.target_rate = cell.rate;
    if (log) {
      *log << "== Case " << (c + 1) << ": "
           << (cell.channels == 1 ? "mono" : "stereo") << ' ' << cell.rate
           << " Hz ==\n";
    }
    const TrainResult tr =
        train_recognizer(ds, split, contract, fcfg, opts, log);

    ExperimentRow row;
    row.cell = cell;
    row.validation_accuracy =
        tr.checkpoints[tr.best_checkpoint].validation_accuracy;
    const ConfusionMatrix test_cm =
        evaluate(tr.recognizer, ds, split.test, 0.0);
    row.test_accuracy = test_cm.accuracy() * 100.0;

    std::map<std::string, std::pair<double, long>> true_scores;
    for (std::size_t idx : split.test) {
      const DatasetItem& item = ds.items[idx];
      const auto scores = classify_clip(tr.recognizer, item.clip);
      for (const ScoredLabel& s : scores) {
        if (s.label == item.label) {
          auto& acc = true_scores[item.label];
          acc.first += s.score;
          acc.second += 1;
          break;
        }
      }
    }
    for (const auto& [label, acc] : true_scores) {
      row.mean_true_score.emplace_back(label, acc.first / acc.second);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::vector<std::string> score_labels(const std::vector<ExperimentRow>& rows) {
  std::set<std::string> labels;
  for (const ExperimentRow& row : rows) {
    for (const auto& [label, score] : row.mean_true_score) labels.insert(label);
  }
  return {labels.begin(), labels.end()};
}

double score_for(const ExperimentRow& row, const std::string& label) {
  for (const auto& [l, s] : row.mean_true_score) {
    if (l == label) return s;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

} // namespace

std::string experiment_table_text(const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  os << "Case  Channels  Rate   Validation  Test\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "TC%-3zu %-9s %-6d %5.1f%%      %5.1f%%\n",
                  i + 1, rows[i].cell.channels == 1 ? "mono" : "stereo",
                  rows[i].cell.rate, rows[i].validation_accuracy,
                  rows[i].test_accuracy);
    os << line;
  }
  return os.str();
}

std::string experiment_scores_text(const std::vector<ExperimentRow>& rows) {
  const auto labels = score_labels(rows);
  std::ostringstream os;
  os << "Mean true-class score per test case\n";
  os << "Case";
  for (const std::string& label : labels) os << "  " << label;
  os << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "TC" << (i + 1);
    for (const std::string& label : labels) {
      const double s = score_for(rows[i], label);
      os << "  " << (std::isnan(s) ? std::string("-") : fmt_score(s));
    }
    os << '\n';
  }
  return os.str();
}

std::string experiment_table_csv(const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  os << "case,channels,rate,validation_accuracy,test_accuracy\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "TC" << (i + 1) << ','
       << (rows[i].cell.channels == 1 ? "mono" : "stereo") << ','
       << rows[i].cell.rate << ',' << fmt_pct(rows[i].validation_accuracy)
       << ',' << fmt_pct(rows[i].test_accuracy) << '\n';
  }
  return os.str();
}

std::string experiment_scores_csv(const std::vector<ExperimentRow>& rows) {
  const auto labels = score_labels(rows);
  std::ostringstream os;
  os << "case";
  for (const std::string& label : labels) os << ',' << label;
  os << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "TC" << (i + 1);
    for (const std::string& label : labels) {
      const double s = score_for(rows[i], label);
      os << ',' << (std::isnan(s) ? std::string() : fmt_score(s));
    }
    os << '\n';
  }
  return os.str();
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_checkpoint: cannot open '" + path +
                             "' for writing");
  }
  out << "FAUNA-CKPT v1\n";
  out << "step " << ck.step << '\n';
  out << "validation_accuracy " << fmt17(ck.validation_accuracy) << '\n';
  out << ck.recognizer_text;
  if (!out) {
    throw std::runtime_error("save_checkpoint: failed writing '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_checkpoint: '" + path + "' is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "FAUNA-CKPT v1") {
    throw std::runtime_error("load_checkpoint: unsupported format '" + line +
                             "', expected 'FAUNA-CKPT v1'");
  }
  Checkpoint ck;
  if (!std::getline(in, line) || line.rfind("step ", 0) != 0) {
    throw std::runtime_error("load_checkpoint: missing 'step' line");
  }
  ck.step = std::atoi(line.c_str() + 5);
  if (!std::getline(in, line) || line.rfind("validation_accuracy ", 0) != 0) {
    throw std::runtime_error(
        "load_checkpoint: missing 'validation_accuracy' line");
  }
  ck.validation_accuracy = std::strtod(line.c_str() + 20, nullptr);
  std::ostringstream rest;
  rest << in.rdbuf();
  ck.recognizer_text = rest.str();
  parse_recognizer(ck.recognizer_text); // reject corrupt model bodies now
  return ck;
}

} // namespace fauna
