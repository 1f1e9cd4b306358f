#include "fauna/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <vector>

#include "fauna/features.hpp"
#include "fauna/knn.hpp"
#include "fauna/preprocess.hpp"

namespace fauna::cli {

namespace {

namespace fs = std::filesystem;

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

// Shared error boundary: usage errors exit 2, runtime failures exit 1.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw std::runtime_error("failed writing '" + path + "'");
  }
}

std::vector<std::size_t> subset_indices(const Split& split,
                                        const std::string& subset,
                                        std::size_t item_count) {
  if (subset == "train") return split.train;
  if (subset == "validation") return split.validation;
  if (subset == "test") return split.test;
  if (subset == "all") {
    std::vector<std::size_t> all(item_count);
    for (std::size_t i = 0; i < item_count; ++i) all[i] = i;
    return all;
  }
  throw std::invalid_argument("subset must be train, validation, test, or "
                              "all; got '" + subset + "'");
}

void print_confusion(std::ostream& out, const ConfusionMatrix& cm) {
  out << "Labels:";
  for (const std::string& label : cm.labels) out << ' ' << label;
  out << '\n';
  out << "Confusion Matrix:\n" << cm.to_text() << "\n";
}

} // namespace

int cmd_preprocess(const std::string& in_dir, const std::string& out_dir,
                   const FormatContract& contract, const std::string& noise_dir,
                   std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    contract.validate();
    const Dataset ds = load_dataset(in_dir, &err);

    std::optional<NoiseProfile> profile;
    if (!noise_dir.empty()) {
      const Dataset noise = load_dataset(noise_dir, &err);
      std::vector<AudioClip> prepared;
      const auto band = contract_band(contract.target_rate);
      for (const DatasetItem& item : noise.items) {
        AudioClip clip = resample(downmix(item.clip), contract.target_rate);
        prepared.push_back(bandpass(clip, band.first, band.second));
      }
      profile = estimate_noise_profile(prepared);
    }

    WavSpec spec;
    spec.sample_rate = contract.target_rate;
    spec.channels = contract.target_channels;
    spec.bit_depth = contract.target_bit_depth;
    std::size_t written = 0;
    for (const DatasetItem& item : ds.items) {
      const AudioClip processed = apply_contract(item.clip, contract, profile);
      const fs::path src(item.path);
      const fs::path dst = fs::path(out_dir) / item.label / src.filename();
      fs::create_directories(dst.parent_path());
      write_wav_file(dst.string(), processed, spec);
      ++written;
    }
    out << "Preprocessed " << written << " clips to " << out_dir;
    if (ds.skipped > 0) out << " (" << ds.skipped << " skipped)";
    out << '\n';
  });
}

int cmd_train(const std::string& data_dir, const std::string& model_out,
              const FormatContract& contract, const FeatureConfig& fcfg,
              const TrainOptions& opts, const SplitFractions& fractions,
              std::uint64_t seed, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Dataset ds = load_dataset(data_dir, &err);
    if (ds.skipped > 0) {
      err << "warning: skipped " << ds.skipped << " unreadable files\n";
    }
    const Split split = split_dataset(ds, fractions, seed);
    const TrainResult result =
        train_recognizer(ds, split, contract, fcfg, opts, &out);

    for (const Checkpoint& ck : result.checkpoints) {
      save_checkpoint(model_out + ".step" + std::to_string(ck.step) + ".ckpt",
                      ck);
    }
    const Checkpoint& best = result.checkpoints[result.best_checkpoint];
    save_checkpoint(model_out, best);
    out << "Best checkpoint: step " << best.step << " (validation accuracy = "
        << fmt_pct(best.validation_accuracy) << "%)\n";
    out << "Saved model to " << model_out << '\n';
  });
}

int cmd_classify(const std::string& model_path, const std::string& wav_path,
                 int top_k, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (top_k < 1) {
      throw std::invalid_argument("top_k must be >= 1, got " +
                                  std::to_string(top_k));
    }
    const Checkpoint ck = load_checkpoint(model_path);
    const Recognizer rec = parse_recognizer(ck.recognizer_text);
    const auto [clip, spec] = read_wav_file(wav_path);
    const auto scores = classify_clip(rec, clip);
    const std::size_t n =
        std::min(scores.size(), static_cast<std::size_t>(top_k));
    for (std::size_t i = 0; i < n; ++i) {
      out << scores[i].label << " (score = " << fmt_score(scores[i].score)
          << ")\n";
    }
  });
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::string& subset, const SplitFractions& fractions,
                 std::uint64_t seed, double reject_threshold,
                 const std::string& csv_out, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ck = load_checkpoint(model_path);
    const Recognizer rec = parse_recognizer(ck.recognizer_text);
    const Dataset ds = load_dataset(data_dir, &err);
    const Split split = split_dataset(ds, fractions, seed);
    const auto indices = subset_indices(split, subset, ds.items.size());
    if (indices.empty()) {
      throw std::runtime_error("the " + subset + " split is empty");
    }
    const ConfusionMatrix cm = evaluate(rec, ds, indices, reject_threshold);
    print_confusion(out, cm);
    out << "Final test accuracy = " << fmt_pct(cm.accuracy() * 100.0)
        << "% (N=" << cm.total() << ")\n";
    if (!csv_out.empty()) {
      write_text_file(csv_out, cm.to_csv());
      out << "Wrote " << csv_out << '\n';
    }
  });
}

int cmd_spectrogram(const std::string& wav_path, const std::string& out_pgm,
                    const FormatContract& contract, const FeatureConfig& fcfg,
                    std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto [clip, spec] = read_wav_file(wav_path);
    AudioClip processed = apply_contract(clip, contract);
    if (processed.channels() > 1) processed = downmix(processed);
    const SpectrogramImage image = spectrogram(processed, fcfg);
    const auto bytes = export_pgm(image);
    std::ofstream file(out_pgm, std::ios::binary);
    if (!file) {
      throw std::runtime_error("cannot open '" + out_pgm + "' for writing");
    }
    file.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!file) {
      throw std::runtime_error("failed writing '" + out_pgm + "'");
    }
    out << "Wrote " << out_pgm << " (" << image.num_frames() << "x"
        << image.num_bins() << ")\n";
  });
}

int cmd_experiment(const std::string& data_dir, const std::string& out_dir,
                   const ExperimentConfig& grid, const FeatureConfig& fcfg,
                   const TrainOptions& opts, const SplitFractions& fractions,
                   std::uint64_t seed, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Dataset ds = load_dataset(data_dir, &err);
    const auto rows =
        run_experiment_grid(ds, grid, fractions, seed, fcfg, opts, &out);
    out << '\n' << experiment_table_text(rows) << '\n'
        << experiment_scores_text(rows);
    fs::create_directories(out_dir);
    const std::string results_csv =
        (fs::path(out_dir) / "experiment_results.csv").string();
    const std::string scores_csv =
        (fs::path(out_dir) / "experiment_scores.csv").string();
    write_text_file(results_csv, experiment_table_csv(rows));
    write_text_file(scores_csv, experiment_scores_csv(rows));
    out << "Wrote " << results_csv << " and " << scores_csv << '\n';
  });
}

int cmd_knn(const std::string& data_dir, int k, int pca_k,
            const FormatContract& contract, const FeatureConfig& fcfg,
            const SplitFractions& fractions, std::uint64_t seed,
            const std::string& vectors_out, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    contract.validate();
    fcfg.validate(contract.target_rate);
    if (pca_k < 0) {
      throw std::invalid_argument("pca_k must be >= 0, got " +
                                  std::to_string(pca_k));
    }
    const Dataset ds = load_dataset(data_dir, &err);
    const Split split = split_dataset(ds, fractions, seed);
    if (split.train.empty()) {
      throw std::runtime_error("the train split is empty");
    }
    if (split.test.empty()) {
      throw std::runtime_error("the test split is empty");
    }

    const auto vector_of = [&](std::size_t idx) {
      AudioClip prepared = apply_contract(ds.items[idx].clip, contract);
      if (prepared.channels() > 1) prepared = downmix(prepared);
      AmfccVector v = amfcc(mfcc(prepared, fcfg));
      v.label = ds.items[idx].label;
      return v;
    };
    std::vector<AmfccVector> train;
    for (std::size_t idx : split.train) {
      if (ds.items[idx].label == kUnknownLabel) continue;
      train.push_back(vector_of(idx));
    }
    if (train.empty()) {
      throw std::runtime_error("no labeled training vectors");
    }
    if (!vectors_out.empty()) {
      write_text_file(vectors_out, amfcc_to_csv(train));
      out << "Wrote " << vectors_out << '\n';
    }

    std::optional<PcaTransform> pca;
    if (pca_k > 0) {
      pca = pca_fit(train, pca_k);
      for (AmfccVector& v : train) v.values = pca_project(*pca, v.values);
    }

    std::set<std::string> label_set;
    for (const DatasetItem& item : ds.items) label_set.insert(item.label);
    ConfusionMatrix cm;
    cm.labels.assign(label_set.begin(), label_set.end());
    cm.counts.assign(cm.labels.size(), std::vector<long>(cm.labels.size(), 0));
    const auto index_of = [&](const std::string& label) {
      const auto it =
          std::lower_bound(cm.labels.begin(), cm.labels.end(), label);
      return static_cast<std::size_t>(it - cm.labels.begin());
    };
    for (std::size_t idx : split.test) {
      AmfccVector query = vector_of(idx);
      if (pca) query.values = pca_project(*pca, query.values);
      const KnnResult res = knn_classify(train, query, k);
      ++cm.counts[index_of(ds.items[idx].label)][index_of(res.label)];
    }
    print_confusion(out, cm);
    out << "Final test accuracy = " << fmt_pct(cm.accuracy() * 100.0)
        << "% (N=" << cm.total() << ")\n";
  });
}

} // namespace fauna::cli
