#include "fauna/knn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fauna {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_same_dim(const std::vector<AmfccVector>& vectors,
                    const char* who) {
  if (vectors.empty()) {
    throw std::invalid_argument(std::string(who) + ": empty vector set");
  }
  const std::size_t dim = vectors[0].values.size();
  if (dim == 0) {
    throw std::invalid_argument(std::string(who) +
                                ": vector 0 has zero dimensions");
  }
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != dim) {
      throw std::invalid_argument(
          std::string(who) + ": vector " + std::to_string(i) +
          " has dimension " + std::to_string(vectors[i].values.size()) +
          ", expected " + std::to_string(dim));
    }
  }
}

// In-place cyclic Jacobi diagonalization of a symmetric matrix. Returns the
// accumulated rotation V with eigenvectors as columns; eigenvalues end up on
// the diagonal of a.
std::vector<std::vector<double>> jacobi_rotate(
    std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) scale += a[i][j] * a[i][j];
  }
  const double tol = 1e-28 * std::max(scale, 1.0);

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        a[p][p] -= t * apq;
        a[q][q] += t * apq;
        a[p][q] = a[q][p] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a[i][p];
          const double aiq = a[i][q];
          a[i][p] = a[p][i] = c * aip - s * aiq;
          a[i][q] = a[q][i] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v[i][p];
          const double viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }
  return v;
}

} // namespace

void PcaTransform::validate() const {
  const std::size_t dim = mean.size();
  if (dim == 0) {
    throw std::invalid_argument("PcaTransform: empty mean");
  }
  if (components.empty() || components.size() > dim) {
    throw std::invalid_argument("PcaTransform: component count " +
                                std::to_string(components.size()) +
                                " is outside 1.." + std::to_string(dim));
  }
  if (explained_variance.size() != components.size()) {
    throw std::invalid_argument(
        "PcaTransform: explained_variance length does not match components");
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].size() != dim) {
      throw std::invalid_argument("PcaTransform: component " +
                                  std::to_string(i) + " has wrong dimension");
    }
    for (std::size_t j = 0; j <= i; ++j) {
      const double dot = std::inner_product(components[i].begin(),
                                            components[i].end(),
                                            components[j].begin(), 0.0);
      const double want = i == j ? 1.0 : 0.0;
      if (std::fabs(dot - want) > 1e-9) {
        throw std::invalid_argument("PcaTransform: components " +
                                    std::to_string(i) + " and " +
                                    std::to_string(j) + " are not orthonormal");
      }
    }
    if (explained_variance[i] < 0.0) {
      throw std::invalid_argument("PcaTransform: negative variance at " +
                                  std::to_string(i));
    }
    if (i > 0 && explained_variance[i] > explained_variance[i - 1]) {
      throw std::invalid_argument(
          "PcaTransform: explained_variance is not descending at " +
          std::to_string(i));
    }
  }
}

AmfccVector amfcc(const FeatureMatrix& features) {
  const std::size_t T = features.rows.size();
  if (T == 0) {
    throw std::invalid_argument("amfcc: empty feature matrix");
  }
  const std::size_t dim = features.rows[0].size();
  AmfccVector out;
  out.values.assign(dim, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (features.rows[t].size() != dim) {
      throw std::invalid_argument("amfcc: frame " + std::to_string(t) +
                                  " has inconsistent dimension");
    }
    for (std::size_t d = 0; d < dim; ++d) out.values[d] += features.rows[t][d];
  }
  for (double& v : out.values) v /= static_cast<double>(T);
  return out;
}

PcaTransform pca_fit(const std::vector<AmfccVector>& vectors, int k) {
  check_same_dim(vectors, "pca_fit");
  const std::size_t n = vectors.size();
  if (n < 2) {
    throw std::invalid_argument("pca_fit: needs at least 2 vectors, got " +
                                std::to_string(n));
  }
  const std::size_t dim = vectors[0].values.size();
  if (k < 1 || static_cast<std::size_t>(k) > dim) {
    throw std::invalid_argument("pca_fit: k " + std::to_string(k) +
                                " is outside 1.." + std::to_string(dim));
  }

  PcaTransform t;
  t.mean.assign(dim, 0.0);
  for (const AmfccVector& v : vectors) {
    for (std::size_t d = 0; d < dim; ++d) t.mean[d] += v.values[d];
  }
  for (double& m : t.mean) m /= static_cast<double>(n);

  std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
  for (const AmfccVector& v : vectors) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double ci = v.values[i] - t.mean[i];
      for (std::size_t j = i; j < dim; ++j) {
        cov[i][j] += ci * (v.values[j] - t.mean[j]);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      cov[i][j] *= inv;
      cov[j][i] = cov[i][j];
    }
  }

  auto v = jacobi_rotate(cov);
  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cov[a][a] != cov[b][b]) return cov[a][a] > cov[b][b];
    return a < b;
  });

  t.components.resize(k);
  t.explained_variance.resize(k);
  for (int c = 0; c < k; ++c) {
    const std::size_t col = order[c];
    t.explained_variance[c] = std::max(cov[col][col], 0.0);
    auto& row = t.components[c];
    row.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) row[d] = v[d][col];
    // Fix the sign so equal inputs always produce the same transform.
    std::size_t peak = 0;
    for (std::size_t d = 1; d < dim; ++d) {
      if (std::fabs(row[d]) > std::fabs(row[peak])) peak = d;
    }
    if (row[peak] < 0.0) {
      for (double& x : row) x = -x;
    }
  }
  t.validate();
  return t;
}

std::vector<double> pca_project(const PcaTransform& t,
                                const std::vector<double>& values) {
  if (values.size() != t.mean.size()) {
    throw std::invalid_argument(
        "pca_project: vector dimension " + std::to_string(values.size()) +
        " does not match transform dimension " + std::to_string(t.mean.size()));
  }
  std::vector<double> out(t.components.size(), 0.0);
  for (std::size_t c = 0; c < t.components.size(); ++c) {
    for (std::size_t d = 0; d < values.size(); ++d) {
      out[c] += t.components[c][d] * (values[d] - t.mean[d]);
    }
  }
  return out;
}

KnnResult knn_classify(const std::vector<AmfccVector>& train,
                       const AmfccVector& query, int k) {
  if (train.empty()) {
    throw std::invalid_argument("knn_classify: empty training set");
  }
  check_same_dim(train, "knn_classify");
  if (k < 1 || static_cast<std::size_t>(k) > train.size()) {
    throw std::invalid_argument("knn_classify: k " + std::to_string(k) +
                                " is outside 1.." +
                                std::to_string(train.size()));
  }
  const std::size_t dim = train[0].values.size();
  if (query.values.size() != dim) {
    throw std::invalid_argument(
        "knn_classify: query dimension " + std::to_string(query.values.size()) +
        " does not match training dimension " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label.empty()) {
      throw std::invalid_argument("knn_classify: training vector " +
                                  std::to_string(i) + " has no label");
    }
  }

  std::vector<double> dist(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = train[i].values[d] - query.values[d];
      sq += diff * diff;
    }
    dist[i] = std::sqrt(sq);
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return a < b;
  });

  KnnResult res;
  std::map<std::string, double> summed;
  for (int i = 0; i < k; ++i) {
    const AmfccVector& nb = train[order[i]];
    res.votes[nb.label] += 1;
    summed[nb.label] += dist[order[i]];
  }
  for (const auto& [label, count] : res.votes) {
    if (res.label.empty()) {
      res.label = label;
      continue;
    }
    const int best_count = res.votes[res.label];
    if (count > best_count ||
        (count == best_count && summed[label] < summed[res.label])) {
      res.label = label;
    }
  }
  return res;
}

std::string amfcc_to_csv(const std::vector<AmfccVector>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AmfccVector& v = rows[i];
    if (v.label.find(',') != std::string::npos ||
        v.label.find('\n') != std::string::npos) {
      throw std::invalid_argument("amfcc_to_csv: label '" + v.label +
                                  "' contains a comma or newline");
    }
    os << v.label;
    for (double x : v.values) os << ',' << fmt17(x);
    os << '\n';
  }
  return os.str();
}

std::vector<AmfccVector> amfcc_from_csv(std::istream& in) {
  std::vector<AmfccVector> rows;
  std::string line;
  int line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    AmfccVector v;
    std::size_t pos = line.find(',');
    if (pos == std::string::npos) {
      throw std::runtime_error("amfcc csv: line " + std::to_string(line_no) +
                               ": no value columns");
    }
    v.label = line.substr(0, pos);
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string tok =
          line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                         : next - pos - 1);
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end != tok.c_str() + tok.size()) {
        throw std::runtime_error("amfcc csv: line " + std::to_string(line_no) +
                                 ": bad number '" + tok + "'");
      }
      v.values.push_back(x);
      pos = next;
    }
    if (dim == 0) {
      dim = v.values.size();
    } else if (v.values.size() != dim) {
      throw std::runtime_error("amfcc csv: line " + std::to_string(line_no) +
                               ": expected " + std::to_string(dim) +
                               " columns, got " +
                               std::to_string(v.values.size()));
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

std::vector<AmfccVector> amfcc_from_csv(const std::string& text) {
  std::istringstream is(text);
  return amfcc_from_csv(is);
}

} // namespace fauna
