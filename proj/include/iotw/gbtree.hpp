#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iotw::gbtree {

inline constexpr std::size_t kNumAptLabels = 8;

struct FeatureMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;  // row-major

  double operator()(std::size_t r, std::size_t c) const {
    return values[r * n_cols + c];
  }
  const double* row(std::size_t r) const { return values.data() + r * n_cols; }

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);
};

struct GbmParams {
  int n_estimators = 200;
  double learning_rate = 0.1;
  int max_depth = 6;
  double min_impurity_decrease = 0.0;
  int min_samples_leaf = 1;
  bool histogram_mode = false;
  int n_bins = 256;
  std::uint64_t seed = 0;

  void validate() const;  // throws ValidationError

  static GbmParams desk_default() { return {}; }
  // The full-fidelity configuration: 10000 stages, learning rate 0.01,
  // depth cap 500, minimum impurity decrease 1e-2.
  static GbmParams paper_capec();
};

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;   // < 0 marks a leaf
  int right = -1;
  double value = 0.0;  // leaf value (raw Newton step, unscaled)

  bool is_leaf() const { return left < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const double* x) const;
  int depth() const;

  bool operator==(const RegressionTree&) const = default;
};

// Per-feature quantile bin edges plus the precomputed bin ids of the
// training matrix. bin id = number of edges strictly below the value, so
// "x <= edge" and "bin <= boundary" route identically.
struct HistogramBins {
  std::vector<std::vector<double>> edges;  // per feature, strictly increasing
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<int> ids;  // row-major bin ids of the training matrix

  int id_at(std::size_t r, std::size_t c) const { return ids[r * n_cols + c]; }
  static int bin_of(const std::vector<double>& feature_edges, double value);
};

HistogramBins histogram_binning(const FeatureMatrix& x, int n_bins);

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Greedy split search on the weighted variance of the residual targets:
//   gain = (SSE(node) - SSE(left) - SSE(right)) / total_weight
// with SSE(S) = sum w r^2 - (sum w r)^2 / sum w over S. Candidates need
// gain > 0, both sides >= min_samples_leaf, and ties resolve to the lowest
// feature index, then the lowest threshold. Exact mode scans midpoints of
// consecutive distinct values; histogram mode scans bin boundaries, with
// the recorded threshold always the node-local midpoint across the cut so
// the two modes produce identical trees whenever binning is lossless.
SplitCandidate find_best_split(const FeatureMatrix& x,
                               const std::vector<std::size_t>& node_rows,
                               const std::vector<double>& residuals,
                               const std::vector<double>& weights,
                               double total_weight, const GbmParams& params,
                               const HistogramBins* bins = nullptr);

// Second-order tree fit: splits scored on residuals (negative gradients),
// leaf values are Newton steps sum(w r) / (sum(w h) + 1e-6).
RegressionTree fit_tree(const FeatureMatrix& x,
                        const std::vector<double>& gradients,
                        const std::vector<double>& hessians,
                        const std::vector<double>& weights,
                        const GbmParams& params,
                        const HistogramBins* bins = nullptr);

struct GbEnsemble {
  double base_score = 0.0;  // initial log-odds
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  // base_score + learning_rate * sum of tree outputs
  double decision(const double* x) const;
  double predict_proba(const double* x) const;  // sigmoid of decision
};

struct BinaryFitReport {
  // Weighted train log-loss before any tree, then after each kept stage.
  std::vector<double> stage_losses;
};

// Stagewise log-loss boosting: p = sigmoid(F), g = p - y, h = p(1-p).
// Stops early when a stage improves the weighted log-loss by < 1e-12 (the
// non-improving tree is discarded, so the recorded loss curve never rises).
GbEnsemble fit_gbm_binary(const FeatureMatrix& x, const std::vector<int>& y,
                          const std::vector<double>& weights,
                          const GbmParams& params,
                          BinaryFitReport* report = nullptr);

// Balanced per-sample weights: weight(class c) = m / (2 * count(c)); all 1
// when y is single-class. Positive and negative weighted mass come out
// equal.
std::vector<double> label_weights(const std::vector<int>& y);

struct MultiLabelGbm {
  GbmParams params;
  std::vector<GbEnsemble> ensembles;  // one per APT class, fixed order
  std::uint64_t encoder_hash = 0;
};

// Binary relevance: one weighted binary ensemble per label column.
MultiLabelGbm fit_multilabel(const FeatureMatrix& x,
                             const std::vector<std::array<int, kNumAptLabels>>& y,
                             const GbmParams& params);

std::array<double, kNumAptLabels> predict_proba(const MultiLabelGbm& model,
                                                const double* x);
std::array<int, kNumAptLabels> predict_labels(const MultiLabelGbm& model,
                                              const double* x,
                                              double threshold = 0.5);

// Versioned binary container, magic "IOTW-GBM", checksum-terminated.
void save_gbm(const MultiLabelGbm& model, const std::filesystem::path& path);
MultiLabelGbm load_gbm(const std::filesystem::path& path);

double sigmoid(double x);

}  // namespace iotw::gbtree
