#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "fauna/eval.hpp"

namespace fauna::cli {

// Subcommand bodies. Each returns a process exit status: 0 success,
// 1 runtime failure, 2 usage error. Messages go to err, reports to out.

/// Normalizes a dataset tree into out_dir. With a noise directory, a noise
/// profile is estimated from its clips and spectral subtraction applied.
int cmd_preprocess(const std::string& in_dir, const std::string& out_dir,
                   const FormatContract& contract, const std::string& noise_dir,
                   std::ostream& out, std::ostream& err);

/// Loads, splits, trains with checkpoints, and writes the best model to
/// model_out plus every checkpoint next to it.
int cmd_train(const std::string& data_dir, const std::string& model_out,
              const FormatContract& contract, const FeatureConfig& fcfg,
              const TrainOptions& opts, const SplitFractions& fractions,
              std::uint64_t seed, std::ostream& out, std::ostream& err);

/// Prints the top_k ranked "label (score = 0.00000)" lines for one clip.
int cmd_classify(const std::string& model_path, const std::string& wav_path,
                 int top_k, std::ostream& out, std::ostream& err);

/// Prints the confusion matrix and final accuracy over one split subset
/// (train/validation/test/all) and writes the matrix as CSV.
int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::string& subset, const SplitFractions& fractions,
                 std::uint64_t seed, double reject_threshold,
                 const std::string& csv_out, std::ostream& out,
                 std::ostream& err);

/// Writes a PGM spectrogram of a clip after contract preprocessing.
int cmd_spectrogram(const std::string& wav_path, const std::string& out_pgm,
                    const FormatContract& contract, const FeatureConfig& fcfg,
                    std::ostream& out, std::ostream& err);

/// Runs the preprocessing-parameter grid and writes the two report CSVs
/// into out_dir.
int cmd_experiment(const std::string& data_dir, const std::string& out_dir,
                   const ExperimentConfig& grid, const FeatureConfig& fcfg,
                   const TrainOptions& opts, const SplitFractions& fractions,
                   std::uint64_t seed, std::ostream& out, std::ostream& err);

/// Averaged-MFCC k-NN over the same split machinery; optional PCA when
/// pca_k > 0. Writes the train-set vectors as CSV when vectors_out is set.
int cmd_knn(const std::string& data_dir, int k, int pca_k,
            const FormatContract& contract, const FeatureConfig& fcfg,
            const SplitFractions& fractions, std::uint64_t seed,
            const std::string& vectors_out, std::ostream& out,
            std::ostream& err);

} // namespace fauna::cli
