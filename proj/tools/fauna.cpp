#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fauna/cli.hpp"

namespace {

void add_contract_flags(CLI::App* cmd, fauna::FormatContract& c) {
  cmd->add_option("--target_rate", c.target_rate, "Target sample rate in Hz")
      ->capture_default_str();
  cmd->add_option("--target_channels", c.target_channels,
                  "Target channel count, 1 (mono) or 2 (stereo)")
      ->capture_default_str();
  cmd->add_option("--target_duration", c.target_duration,
                  "Target clip duration in seconds")
      ->capture_default_str();
  cmd->add_option("--target_bit_depth", c.target_bit_depth,
                  "Stored sample depth, 8 or 16 bits")
      ->capture_default_str();
}

void add_feature_flags(CLI::App* cmd, fauna::FeatureConfig& f) {
  cmd->add_option("--frame_ms", f.frame_ms, "Analysis frame length in ms")
      ->capture_default_str();
  cmd->add_option("--hop_ms", f.hop_ms, "Frame hop in ms")
      ->capture_default_str();
  cmd->add_option("--num_mel_filters", f.num_mel_filters,
                  "Mel filterbank size")
      ->capture_default_str();
  cmd->add_option("--num_cepstra", f.num_cepstra,
                  "Cepstral coefficients kept per frame")
      ->capture_default_str();
  cmd->add_option("--mel_low", f.mel_low, "Filterbank low edge in Hz")
      ->capture_default_str();
  cmd->add_option("--mel_high", f.mel_high,
                  "Filterbank high edge in Hz (0 = 0.45 * rate)")
      ->capture_default_str();
  cmd->add_option("--delta_window", f.delta_window,
                  "Regression half-window for delta features")
      ->capture_default_str();
  cmd->add_option("--include_deltas", f.include_deltas,
                  "Append delta and delta-delta features (0/1)")
      ->capture_default_str();
  cmd->add_option("--preemphasis", f.preemphasis,
                  "Pre-emphasis coefficient")
      ->capture_default_str();
}

void add_training_flags(CLI::App* cmd, fauna::TrainOptions& t) {
  cmd->add_option("--n_states", t.n_states, "HMM states per class")
      ->capture_default_str();
  cmd->add_option("--max_iters", t.max_iters, "Maximum EM iterations")
      ->capture_default_str();
  cmd->add_option("--rel_tol", t.rel_tol,
                  "Relative log-likelihood gain below which EM stops")
      ->capture_default_str();
  cmd->add_option("--eval_every", t.eval_every,
                  "Validation checkpoint period in EM iterations")
      ->capture_default_str();
  cmd->add_option("--variance_floor", t.variance_floor,
                  "Minimum emission variance")
      ->capture_default_str();
  cmd->add_option("--grammar_scale", t.grammar_scale,
                  "Weight of the class log-prior")
      ->capture_default_str();
}

void add_split_flags(CLI::App* cmd, fauna::SplitFractions& s,
                     std::uint64_t& seed) {
  cmd->add_option("--train_fraction", s.train, "Training split fraction")
      ->capture_default_str();
  cmd->add_option("--validation_fraction", s.validation,
                  "Validation split fraction")
      ->capture_default_str();
  cmd->add_option("--test_fraction", s.test, "Test split fraction")
      ->capture_default_str();
  cmd->add_option("--seed", seed, "Split hash seed")
      ->envname("FAUNA_SEED")
      ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch bioacoustic event classification toolkit"};
  app.require_subcommand(1);

  // preprocess
  std::string pre_in, pre_out, pre_noise;
  fauna::FormatContract pre_contract;
  CLI::App* pre = app.add_subcommand(
      "preprocess", "Normalize a dataset tree to the format contract");
  pre->add_option("in_dir", pre_in, "Input dataset root")->required();
  pre->add_option("out_dir", pre_out, "Output dataset root")->required();
  pre->add_option("--noise_dir", pre_noise,
                  "Directory of noise clips for spectral subtraction");
  add_contract_flags(pre, pre_contract);

  // train
  std::string train_data, train_model;
  fauna::FormatContract train_contract;
  fauna::FeatureConfig train_features;
  fauna::TrainOptions train_opts;
  fauna::SplitFractions train_fractions;
  std::uint64_t train_seed = 0;
  CLI::App* train = app.add_subcommand(
      "train", "Train per-class HMMs with validation checkpoints");
  train->add_option("data_dir", train_data, "Dataset root")->required();
  train->add_option("model_out", train_model, "Output model path")->required();
  add_contract_flags(train, train_contract);
  add_feature_flags(train, train_features);
  add_training_flags(train, train_opts);
  add_split_flags(train, train_fractions, train_seed);

  // classify
  std::string cls_model, cls_wav;
  int cls_top_k = 3;
  CLI::App* cls =
      app.add_subcommand("classify", "Rank classes for a single WAV clip");
  cls->add_option("model", cls_model, "Trained model path")->required();
  cls->add_option("wav", cls_wav, "Clip to classify")->required();
  cls->add_option("--top_k", cls_top_k, "Ranked lines to print")
      ->capture_default_str();

  // evaluate
  std::string eval_model, eval_data, eval_subset = "test";
  std::string eval_csv = "confusion.csv";
  fauna::SplitFractions eval_fractions;
  std::uint64_t eval_seed = 0;
  double eval_reject = 0.0;
  CLI::App* eval = app.add_subcommand(
      "evaluate", "Confusion matrix and accuracy over a split subset");
  eval->add_option("model", eval_model, "Trained model path")->required();
  eval->add_option("data_dir", eval_data, "Dataset root")->required();
  eval->add_option("--subset", eval_subset,
                   "Subset to score: train, validation, test, or all")
      ->capture_default_str();
  eval->add_option("--reject_threshold", eval_reject,
                   "Top score below this predicts _unknown_ (0 = off)")
      ->capture_default_str();
  eval->add_option("--csv_out", eval_csv,
                   "Confusion matrix CSV path (empty = skip)")
      ->capture_default_str();
  add_split_flags(eval, eval_fractions, eval_seed);

  // spectrogram
  std::string spec_wav, spec_out;
  fauna::FormatContract spec_contract;
  fauna::FeatureConfig spec_features;
  CLI::App* spec = app.add_subcommand(
      "spectrogram", "Write a PGM spectrogram of a preprocessed clip");
  spec->add_option("wav", spec_wav, "Input clip")->required();
  spec->add_option("out_pgm", spec_out, "Output PGM path")->required();
  add_contract_flags(spec, spec_contract);
  add_feature_flags(spec, spec_features);

  // experiment
  std::string exp_data, exp_out = ".";
  std::vector<int> exp_channels = {1, 2};
  std::vector<int> exp_rates = {16000, 32000};
  fauna::FeatureConfig exp_features;
  fauna::TrainOptions exp_opts;
  fauna::SplitFractions exp_fractions;
  std::uint64_t exp_seed = 0;
  CLI::App* exp = app.add_subcommand(
      "experiment", "Train and test across the preprocessing parameter grid");
  exp->add_option("data_dir", exp_data, "Dataset root")->required();
  exp->add_option("--out_dir", exp_out, "Directory for report CSVs")
      ->capture_default_str();
  exp->add_option("--grid_channels", exp_channels,
                  "Channel counts to cross (1 and/or 2)")
      ->capture_default_str();
  exp->add_option("--grid_rates", exp_rates, "Sample rates to cross")
      ->capture_default_str();
  add_feature_flags(exp, exp_features);
  add_training_flags(exp, exp_opts);
  add_split_flags(exp, exp_fractions, exp_seed);

  // knn
  std::string knn_data, knn_vectors;
  int knn_k = 1;
  int knn_pca = 0;
  fauna::FormatContract knn_contract;
  fauna::FeatureConfig knn_features;
  fauna::SplitFractions knn_fractions;
  std::uint64_t knn_seed = 0;
  CLI::App* knn = app.add_subcommand(
      "knn", "Averaged-MFCC k-nearest-neighbor classification");
  knn->add_option("data_dir", knn_data, "Dataset root")->required();
  knn->add_option("--k", knn_k, "Neighbors to vote")->capture_default_str();
  knn->add_option("--pca_k", knn_pca,
                  "PCA components to keep (0 = no PCA)")
      ->capture_default_str();
  knn->add_option("--vectors_out", knn_vectors,
                  "Write training vectors as CSV to this path");
  add_contract_flags(knn, knn_contract);
  add_feature_flags(knn, knn_features);
  add_split_flags(knn, knn_fractions, knn_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*pre) {
    return fauna::cli::cmd_preprocess(pre_in, pre_out, pre_contract, pre_noise,
                                      std::cout, std::cerr);
  }
  if (*train) {
    return fauna::cli::cmd_train(train_data, train_model, train_contract,
                                 train_features, train_opts, train_fractions,
                                 train_seed, std::cout, std::cerr);
  }
  if (*cls) {
    return fauna::cli::cmd_classify(cls_model, cls_wav, cls_top_k, std::cout,
                                    std::cerr);
  }
  if (*eval) {
    return fauna::cli::cmd_evaluate(eval_model, eval_data, eval_subset,
                                    eval_fractions, eval_seed, eval_reject,
                                    eval_csv, std::cout, std::cerr);
  }
  if (*spec) {
    return fauna::cli::cmd_spectrogram(spec_wav, spec_out, spec_contract,
                                       spec_features, std::cout, std::cerr);
  }
  if (*exp) {
    fauna::ExperimentConfig grid;
    for (int rate : exp_rates) {
      for (int channels : exp_channels) {
        grid.cells.push_back({channels, rate});
      }
    }
    return fauna::cli::cmd_experiment(exp_data, exp_out, grid, exp_features,
                                      exp_opts, exp_fractions, exp_seed,
                                      std::cout, std::cerr);
  }
  if (*knn) {
    return fauna::cli::cmd_knn(knn_data, knn_k, knn_pca, knn_contract,
                               knn_features, knn_fractions, knn_seed,
                               knn_vectors, std::cout, std::cerr);
  }
  return 2;
}
