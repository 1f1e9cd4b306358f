#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fauna/features.hpp"

namespace fauna {

/// Time-averaged MFCC vector for one clip, optionally carrying its class.
struct AmfccVector {
  std::vector<double> values;
  std::string label; // empty when unlabeled
};

/// Linear projection onto the top principal components of a vector set.
struct PcaTransform {
  std::vector<double> mean;
  std::vector<std::vector<double>> components; // K x D, orthonormal rows
  std::vector<double> explained_variance;      // descending, nonnegative

  void validate() const;
};

struct KnnResult {
  std::string label;
  std::map<std::string, int> votes; // among the k nearest neighbors
};

/// Column-wise mean over frames.
AmfccVector amfcc(const FeatureMatrix& features);

/// Top-k eigenpairs of the sample covariance (cyclic Jacobi rotations).
/// All-identical inputs produce zero variances.
PcaTransform pca_fit(const std::vector<AmfccVector>& vectors, int k);

/// components * (v - mean).
std::vector<double> pca_project(const PcaTransform& t,
                                const std::vector<double>& values);

/// Majority vote among the k nearest training vectors under Euclidean
/// distance. Distance ties at the k-boundary keep training-set order; vote
/// ties go to the smallest summed distance, then the lexicographically
/// smallest label.
KnnResult knn_classify(const std::vector<AmfccVector>& train,
                       const AmfccVector& query, int k);

// CSV rows: label, then one column per dimension (17 significant digits).
std::string amfcc_to_csv(const std::vector<AmfccVector>& rows);
std::vector<AmfccVector> amfcc_from_csv(std::istream& in);
std::vector<AmfccVector> amfcc_from_csv(const std::string& text);

} // namespace fauna
