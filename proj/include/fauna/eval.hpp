#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fauna/audio.hpp"
#include "fauna/hmm.hpp"

namespace fauna {

/// Reserved labels: `_silence_` clips train an ordinary background class;
/// `_unknown_` is never trained and is only assigned when rejection is on.
inline constexpr const char* kSilenceLabel = "_silence_";
inline constexpr const char* kUnknownLabel = "_unknown_";

struct DatasetItem {
  std::string label;
  std::string path;
  AudioClip clip;
};

struct Dataset {
  std::vector<DatasetItem> items;
  int skipped = 0; // unreadable files encountered while loading

  std::vector<std::string> labels() const; // sorted, unique
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;

  void validate() const;
};

/// Disjoint, exhaustive index sets over Dataset::items. Assignment hashes the
/// file basename with the seed, so a file keeps its band when the corpus
/// around it changes.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct ConfusionMatrix {
  std::vector<std::string> labels;        // row = truth, column = predicted
  std::vector<std::vector<long>> counts;

  long total() const;
  long trace() const;
  double accuracy() const; // trace/total, 0 when empty
  std::string to_text() const; // bracketed integer rows
  std::string to_csv() const;
  void validate() const;
};

struct Checkpoint {
  int step = 0;
  double validation_accuracy = 0.0; // percent
  ConfusionMatrix confusion;        // validation split; empty after load
  std::string recognizer_text;
};

struct TrainOptions {
  int n_states = 5;
  int max_iters = 50;
  double rel_tol = 1e-5;
  int eval_every = 5;
  double variance_floor = 1e-3;
  double grammar_scale = 1.0;

  void validate() const;
};

struct TrainResult {
  Recognizer recognizer; // parameters of the best-validation checkpoint
  std::vector<Checkpoint> checkpoints;
  std::size_t best_checkpoint = 0;
};

/// One preprocessing variant of the experiment grid; bit depth is always 16.
struct ExperimentCell {
  int channels = 1;
  int rate = 16000;
};

struct ExperimentConfig {
  std::vector<ExperimentCell> cells;

  /// Mono/stereo crossed with 16/32 kHz, mono 16 kHz first.
  static ExperimentConfig default_grid();
  void validate() const;
};

struct ExperimentRow {
  ExperimentCell cell;
  double validation_accuracy = 0.0; // percent, best checkpoint
  double test_accuracy = 0.0;       // percent
  // Per class: mean softmax score assigned to the true class over its test
  // clips, NaN when the class has no test clips.
  std::vector<std::pair<std::string, double>> mean_true_score;
};

/// Reads `<root>/<label>/*.wav`. Unreadable files are skipped with a warning
/// line and counted. Errors when the root is missing or holds no clips.
Dataset load_dataset(const std::string& root, std::ostream* warnings = nullptr);

Split split_dataset(const Dataset& ds, const SplitFractions& fractions,
                    std::uint64_t seed);

/// Per class: contract preprocessing, MFCC features, flat start, then EM in
/// eval_every-sized rounds. Each round appends a validation checkpoint; a
/// final checkpoint is always recorded. The returned recognizer carries the
/// parameters of the checkpoint with the highest validation accuracy
/// (ties: latest).
TrainResult train_recognizer(const Dataset& ds, const Split& split,
                             const FormatContract& contract,
                             const FeatureConfig& fcfg,
                             const TrainOptions& opts,
                             std::ostream* log = nullptr);

/// Preprocess + featurize one clip under the recognizer's own contract, then
/// rank all classes.
std::vector<ScoredLabel> classify_clip(const Recognizer& rec,
                                       const AudioClip& clip);

/// Classifies every indexed clip. With reject_threshold > 0, clips whose top
/// softmax score falls below it are predicted as `_unknown_`.
ConfusionMatrix evaluate(const Recognizer& rec, const Dataset& ds,
                         const std::vector<std::size_t>& indices,
                         double reject_threshold = 0.0);

/// Trains and tests one recognizer per grid cell on a shared split.
std::vector<ExperimentRow> run_experiment_grid(const Dataset& ds,
                                               const ExperimentConfig& cfg,
                                               const SplitFractions& fractions,
                                               std::uint64_t seed,
                                               const FeatureConfig& fcfg,
                                               const TrainOptions& opts,
                                               std::ostream* log = nullptr);

std::string experiment_table_text(const std::vector<ExperimentRow>& rows);
std::string experiment_scores_text(const std::vector<ExperimentRow>& rows);
std::string experiment_table_csv(const std::vector<ExperimentRow>& rows);
std::string experiment_scores_csv(const std::vector<ExperimentRow>& rows);

// Checkpoint files: "FAUNA-CKPT v1" header (step, validation accuracy)
// followed by the recognizer text. load_checkpoint leaves `confusion` empty.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace fauna
