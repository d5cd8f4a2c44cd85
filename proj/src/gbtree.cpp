#include "iotw/gbtree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "iotw/binio.hpp"
#include "iotw/errors.hpp"

namespace iotw::gbtree {

namespace {
constexpr double kLeafLambda = 1e-6;
constexpr double kPriorClamp = 1e-6;
constexpr double kLossTolerance = 1e-12;
}  // namespace

FeatureMatrix FeatureMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  m.n_rows = rows.size();
  m.n_cols = rows.empty() ? 0 : rows[0].size();
  m.values.reserve(m.n_rows * m.n_cols);
  for (const auto& row : rows) {
    if (row.size() != m.n_cols) {
      throw ValidationError("FeatureMatrix: ragged rows");
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
  }
  return m;
}

void GbmParams::validate() const {
  if (n_estimators < 1)
    throw ValidationError("gbm: n_estimators must be >= 1");
  if (!(learning_rate > 0.0))
    throw ValidationError("gbm: learning_rate must be > 0");
  if (max_depth < 1) throw ValidationError("gbm: max_depth must be >= 1");
  if (min_impurity_decrease < 0.0)
    throw ValidationError("gbm: min_impurity_decrease must be >= 0");
  if (min_samples_leaf < 1)
    throw ValidationError("gbm: min_samples_leaf must be >= 1");
  if (n_bins < 2 || n_bins > 256)
    throw ValidationError("gbm: n_bins must lie in [2,256]");
}

GbmParams GbmParams::paper_capec() {
  GbmParams p;
  p.n_estimators = 10000;
  p.learning_rate = 0.01;
  p.max_depth = 500;
  p.min_impurity_decrease = 1e-2;
  return p;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double RegressionTree::predict(const double* x) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

int RegressionTree::depth() const {
  // Iterative: depth of node 0 with explicit stack.
  if (nodes.empty()) return 0;
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& n = nodes[static_cast<std::size_t>(idx)];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

int HistogramBins::bin_of(const std::vector<double>& feature_edges,
                          double value) {
  // Number of edges strictly below value: x <= edge goes left of it.
  return static_cast<int>(
      std::lower_bound(feature_edges.begin(), feature_edges.end(), value) -
      feature_edges.begin());
}

HistogramBins histogram_binning(const FeatureMatrix& x, int n_bins) {
  if (n_bins < 2) throw ValidationError("histogram_binning: n_bins must be >= 2");
  if (x.n_rows == 0) throw ValidationError("histogram_binning: empty matrix");

  HistogramBins bins;
  bins.n_rows = x.n_rows;
  bins.n_cols = x.n_cols;
  bins.edges.resize(x.n_cols);
  bins.ids.resize(x.n_rows * x.n_cols);

  std::vector<double> sorted(x.n_rows);
  for (std::size_t f = 0; f < x.n_cols; ++f) {
    for (std::size_t r = 0; r < x.n_rows; ++r) sorted[r] = x(r, f);
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> unique = sorted;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    auto& edges = bins.edges[f];
    if (unique.size() <= static_cast<std::size_t>(n_bins)) {
      // One bin per distinct value: binning is lossless here, which is
      // what makes histogram trees identical to exact trees.
      for (std::size_t i = 0; i + 1 < unique.size(); ++i) {
        edges.push_back((unique[i] + unique[i + 1]) / 2.0);
      }
    } else {
      const auto m = sorted.size();
      for (int b = 1; b < n_bins; ++b) {
        // Quantile at b/n_bins; integer cut points land between samples.
        const double pos = static_cast<double>(b) * static_cast<double>(m) /
                           static_cast<double>(n_bins);
        const auto q = static_cast<std::size_t>(pos);
        double edge;
        if (pos == static_cast<double>(q) && q > 0 && q < m) {
          edge = (sorted[q - 1] + sorted[q]) / 2.0;
        } else {
          edge = sorted[std::min(q, m - 1)];
        }
        // An edge at or above the maximum separates nothing.
        if (edge >= sorted.back()) continue;
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
      }
    }
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      bins.ids[r * x.n_cols + f] = HistogramBins::bin_of(edges, x(r, f));
    }
  }
  return bins;
}

namespace {

struct Aggregate {
  double w = 0, wr = 0, wr2 = 0;
  std::size_t count = 0;

  void add(double weight, double residual) {
    w += weight;
    wr += weight * residual;
    wr2 += weight * residual * residual;
    ++count;
  }
  double sse() const { return w > 0 ? wr2 - wr * wr / w : 0.0; }
};

// Exact scan: sort node rows by value, try midpoints between distinct
// values, accumulating the left aggregate incrementally.
void scan_exact(const FeatureMatrix& x, std::size_t feature,
                const std::vector<std::size_t>& node_rows,
                const std::vector<double>& residuals,
                const std::vector<double>& weights, const Aggregate& total,
                double parent_sse, double total_weight,
                const GbmParams& params, SplitCandidate* best) {
  std::vector<std::size_t> order = node_rows;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return x(a, feature) < x(b, feature);
                   });

  Aggregate left;
  const std::size_t m = order.size();
  for (std::size_t i = 0; i + 1 < m; ++i) {
    left.add(weights[order[i]], residuals[order[i]]);
    const double v = x(order[i], feature);
    const double v_next = x(order[i + 1], feature);
    if (v_next == v) continue;
    if (left.count < static_cast<std::size_t>(params.min_samples_leaf) ||
        m - left.count < static_cast<std::size_t>(params.min_samples_leaf)) {
      continue;
    }
    const double w_r = total.w - left.w;
    if (left.w <= 0 || w_r <= 0) continue;
    const double wr_r = total.wr - left.wr;
    const double sse_r = (total.wr2 - left.wr2) - wr_r * wr_r / w_r;
    const double gain = (parent_sse - left.sse() - sse_r) / total_weight;
    if (gain > 0 && gain > best->gain) {
      best->found = true;
      best->feature = static_cast<int>(feature);
      best->threshold = (v + v_next) / 2.0;
      best->gain = gain;
    }
  }
}

// Histogram scan: accumulate per-bin aggregates from the node rows, then
// sweep boundaries. The recorded threshold is the node-local midpoint
// across the cut, which keeps histogram trees identical to exact trees
// whenever binning loses nothing.
void scan_histogram(const FeatureMatrix& x, std::size_t feature,
                    const std::vector<std::size_t>& node_rows,
                    const std::vector<double>& residuals,
                    const std::vector<double>& weights, const Aggregate& total,
                    double parent_sse, double total_weight,
                    const GbmParams& params, const HistogramBins& bins,
                    SplitCandidate* best) {
  const std::size_t n_bins = bins.edges[feature].size() + 1;
  if (n_bins < 2) return;

  std::vector<Aggregate> agg(n_bins);
  std::vector<double> lo(n_bins, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n_bins, -std::numeric_limits<double>::infinity());
  for (auto row : node_rows) {
    const int b = bins.id_at(row, feature);
    agg[static_cast<std::size_t>(b)].add(weights[row], residuals[row]);
    const double v = x(row, feature);
    lo[static_cast<std::size_t>(b)] = std::min(lo[static_cast<std::size_t>(b)], v);
    hi[static_cast<std::size_t>(b)] = std::max(hi[static_cast<std::size_t>(b)], v);
  }

  // Suffix minima of the raw values to the right of each boundary.
  std::vector<double> right_lo(n_bins + 1,
                               std::numeric_limits<double>::infinity());
  for (std::size_t b = n_bins; b-- > 0;) {
    right_lo[b] = std::min(right_lo[b + 1], lo[b]);
  }

  Aggregate left;
  double left_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b + 1 < n_bins; ++b) {
    left.w += agg[b].w;
    left.wr += agg[b].wr;
    left.wr2 += agg[b].wr2;
    left.count += agg[b].count;
    left_hi = std::max(left_hi, hi[b]);
    if (left.count == 0 || left.count == node_rows.size()) continue;
    if (left.count < static_cast<std::size_t>(params.min_samples_leaf) ||
        node_rows.size() - left.count <
            static_cast<std::size_t>(params.min_samples_leaf)) {
      continue;
    }
    const double w_r = total.w - left.w;
    if (left.w <= 0 || w_r <= 0) continue;
    const double wr_r = total.wr - left.wr;
    const double sse_r = (total.wr2 - left.wr2) - wr_r * wr_r / w_r;
    const double gain = (parent_sse - left.sse() - sse_r) / total_weight;
    if (gain > 0 && gain > best->gain) {
      best->found = true;
      best->feature = static_cast<int>(feature);
      best->threshold = (left_hi + right_lo[b + 1]) / 2.0;
      best->gain = gain;
    }
  }
}

}  // namespace

SplitCandidate find_best_split(const FeatureMatrix& x,
                               const std::vector<std::size_t>& node_rows,
                               const std::vector<double>& residuals,
                               const std::vector<double>& weights,
                               double total_weight, const GbmParams& params,
                               const HistogramBins* bins) {
  SplitCandidate best;
  best.gain = 0.0;
  if (node_rows.size() < 2) return best;

  Aggregate total;
  for (auto row : node_rows) total.add(weights[row], residuals[row]);
  const double parent_sse = total.sse();

  for (std::size_t f = 0; f < x.n_cols; ++f) {
    if (params.histogram_mode && bins) {
      scan_histogram(x, f, node_rows, residuals, weights, total, parent_sse,
                     total_weight, params, *bins, &best);
    } else {
      scan_exact(x, f, node_rows, residuals, weights, total, parent_sse,
                 total_weight, params, &best);
    }
  }
  return best;
}

namespace {

struct TreeBuilder {
  const FeatureMatrix& x;
  const std::vector<double>& residuals;
  const std::vector<double>& hessians;
  const std::vector<double>& weights;
  const GbmParams& params;
  const HistogramBins* bins;
  double total_weight;
  RegressionTree tree;

  double leaf_value(const std::vector<std::size_t>& rows) const {
    double wr = 0, wh = 0;
    for (auto r : rows) {
      wr += weights[r] * residuals[r];
      wh += weights[r] * hessians[r];
    }
    return wr / (wh + kLeafLambda);
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const auto index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().value = leaf_value(rows);

    if (depth >= params.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
      return index;
    }
    const SplitCandidate split = find_best_split(
        x, rows, residuals, weights, total_weight, params, bins);
    if (!split.found || split.gain < params.min_impurity_decrease) {
      return index;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      (x(r, static_cast<std::size_t>(split.feature)) <= split.threshold
           ? left_rows
           : right_rows)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[static_cast<std::size_t>(index)].feature = split.feature;
    tree.nodes[static_cast<std::size_t>(index)].threshold = split.threshold;
    const int left = grow(std::move(left_rows), depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].left = left;
    const int right = grow(std::move(right_rows), depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].right = right;
    return index;
  }
};

}  // namespace

RegressionTree fit_tree(const FeatureMatrix& x,
                        const std::vector<double>& gradients,
                        const std::vector<double>& hessians,
                        const std::vector<double>& weights,
                        const GbmParams& params, const HistogramBins* bins) {
  params.validate();
  const std::size_t m = x.n_rows;
  if (gradients.size() != m || hessians.size() != m || weights.size() != m) {
    throw ValidationError("fit_tree: column length mismatch");
  }
  if (m < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
    throw ValidationError("fit_tree: need at least 2*min_samples_leaf rows");
  }

  // Targets are the negative gradients.
  std::vector<double> residuals(m);
  for (std::size_t i = 0; i < m; ++i) residuals[i] = -gradients[i];

  double total_weight = 0;
  for (double w : weights) total_weight += w;
  if (!(total_weight > 0)) {
    throw ValidationError("fit_tree: total weight must be positive");
  }

  std::vector<std::size_t> rows(m);
  std::iota(rows.begin(), rows.end(), 0);
  TreeBuilder builder{x,      residuals, hessians,     weights,
                      params, bins,      total_weight, {}};
  builder.grow(std::move(rows), 0);
  return std::move(builder.tree);
}

double GbEnsemble::decision(const double* x) const {
  double sum = 0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return base_score + learning_rate * sum;
}

double GbEnsemble::predict_proba(const double* x) const {
  return sigmoid(decision(x));
}

std::vector<double> label_weights(const std::vector<int>& y) {
  const auto m = y.size();
  std::size_t positives = 0;
  for (int v : y) positives += v != 0 ? 1 : 0;
  const std::size_t negatives = m - positives;
  if (positives == 0 || negatives == 0) {
    return std::vector<double>(m, 1.0);
  }
  const double w_pos = static_cast<double>(m) / (2.0 * static_cast<double>(positives));
  const double w_neg = static_cast<double>(m) / (2.0 * static_cast<double>(negatives));
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) w[i] = y[i] != 0 ? w_pos : w_neg;
  return w;
}

namespace {

double weighted_log_loss(const std::vector<double>& decision,
                         const std::vector<int>& y,
                         const std::vector<double>& weights,
                         double total_weight) {
  // softplus(F) - yF is the per-sample log-loss, stable for any F.
  double loss = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double f = decision[i];
    const double softplus =
        f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
    loss += weights[i] * (softplus - static_cast<double>(y[i]) * f);
  }
  return loss / total_weight;
}

}  // namespace

GbEnsemble fit_gbm_binary(const FeatureMatrix& x, const std::vector<int>& y,
                          const std::vector<double>& weights,
                          const GbmParams& params, BinaryFitReport* report) {
  params.validate();
  const std::size_t m = x.n_rows;
  if (y.size() != m || weights.size() != m || m == 0) {
    throw ValidationError("fit_gbm_binary: need matching non-empty X, y, w");
  }
  for (int v : y) {
    if (v != 0 && v != 1) {
      throw ValidationError("fit_gbm_binary: labels must be 0/1");
    }
  }

  double total_weight = 0, positive_weight = 0;
  for (std::size_t i = 0; i < m; ++i) {
    total_weight += weights[i];
    if (y[i] == 1) positive_weight += weights[i];
  }
  if (!(total_weight > 0)) {
    throw ValidationError("fit_gbm_binary: total weight must be positive");
  }

  const double prior = std::clamp(positive_weight / total_weight, kPriorClamp,
                                  1.0 - kPriorClamp);
  GbEnsemble ensemble;
  ensemble.learning_rate = params.learning_rate;
  ensemble.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> decision(m, ensemble.base_score);
  double loss = weighted_log_loss(decision, y, weights, total_weight);
  if (report) report->stage_losses.assign(1, loss);

  const bool single_class =
      std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; });
  if (single_class) return ensemble;  // base score only

  HistogramBins bins;
  if (params.histogram_mode) bins = histogram_binning(x, params.n_bins);

  std::vector<double> gradients(m), hessians(m);
  for (int stage = 0; stage < params.n_estimators; ++stage) {
    for (std::size_t i = 0; i < m; ++i) {
      const double p = sigmoid(decision[i]);
      gradients[i] = p - static_cast<double>(y[i]);
      hessians[i] = p * (1.0 - p);
    }
    RegressionTree tree =
        fit_tree(x, gradients, hessians, weights, params,
                 params.histogram_mode ? &bins : nullptr);

    std::vector<double> next = decision;
    for (std::size_t i = 0; i < m; ++i) {
      next[i] += params.learning_rate * tree.predict(x.row(i));
    }
    const double next_loss = weighted_log_loss(next, y, weights, total_weight);
    if (loss - next_loss < kLossTolerance) {
      break;  // the non-improving tree is dropped
    }
    decision = std::move(next);
    loss = next_loss;
    ensemble.trees.push_back(std::move(tree));
    if (report) report->stage_losses.push_back(loss);
  }
  return ensemble;
}

MultiLabelGbm fit_multilabel(
    const FeatureMatrix& x,
    const std::vector<std::array<int, kNumAptLabels>>& y,
    const GbmParams& params) {
  params.validate();
  if (y.size() != x.n_rows) {
    throw ValidationError("fit_multilabel: X row count != label row count");
  }
  MultiLabelGbm model;
  model.params = params;
  model.ensembles.reserve(kNumAptLabels);
  std::vector<int> column(x.n_rows);
  for (std::size_t l = 0; l < kNumAptLabels; ++l) {
    for (std::size_t i = 0; i < x.n_rows; ++i) column[i] = y[i][l];
    model.ensembles.push_back(
        fit_gbm_binary(x, column, label_weights(column), params));
  }
  return model;
}

std::array<double, kNumAptLabels> predict_proba(const MultiLabelGbm& model,
                                                const double* x) {
  std::array<double, kNumAptLabels> probs{};
  for (std::size_t l = 0; l < kNumAptLabels; ++l) {
    probs[l] = model.ensembles[l].predict_proba(x);
  }
  return probs;
}

std::array<int, kNumAptLabels> predict_labels(const MultiLabelGbm& model,
                                              const double* x,
                                              double threshold) {
  const auto probs = predict_proba(model, x);
  std::array<int, kNumAptLabels> labels{};
  for (std::size_t l = 0; l < kNumAptLabels; ++l) {
    labels[l] = probs[l] >= threshold ? 1 : 0;
  }
  return labels;
}

namespace {
constexpr char kGbmMagic[] = "IOTW-GBM";
constexpr std::uint32_t kGbmVersion = 1;
}  // namespace

void save_gbm(const MultiLabelGbm& model, const std::filesystem::path& path) {
  std::ostringstream body;
  binio::write_string(body, kGbmMagic);
  binio::write_u32(body, kGbmVersion);
  binio::write_u32(body, static_cast<std::uint32_t>(model.params.n_estimators));
  binio::write_f64(body, model.params.learning_rate);
  binio::write_u32(body, static_cast<std::uint32_t>(model.params.max_depth));
  binio::write_f64(body, model.params.min_impurity_decrease);
  binio::write_u32(body, static_cast<std::uint32_t>(model.params.min_samples_leaf));
  binio::write_u8(body, model.params.histogram_mode ? 1 : 0);
  binio::write_u32(body, static_cast<std::uint32_t>(model.params.n_bins));
  binio::write_u64(body, model.params.seed);
  binio::write_u64(body, model.encoder_hash);
  binio::write_u32(body, static_cast<std::uint32_t>(model.ensembles.size()));
  for (const auto& ensemble : model.ensembles) {
    binio::write_f64(body, ensemble.base_score);
    binio::write_f64(body, ensemble.learning_rate);
    binio::write_u32(body, static_cast<std::uint32_t>(ensemble.trees.size()));
    for (const auto& tree : ensemble.trees) {
      binio::write_u32(body, static_cast<std::uint32_t>(tree.nodes.size()));
      for (const auto& node : tree.nodes) {
        binio::write_u32(body, static_cast<std::uint32_t>(node.feature));
        binio::write_f64(body, node.threshold);
        binio::write_u32(body, static_cast<std::uint32_t>(node.left));
        binio::write_u32(body, static_cast<std::uint32_t>(node.right));
        binio::write_f64(body, node.value);
      }
    }
  }
  const std::string payload = body.str();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("save_gbm: cannot write " + path.string());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  binio::Fnv1a checksum;
  checksum.update(payload);
  binio::write_u64(out, checksum.digest());
}

MultiLabelGbm load_gbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("load_gbm: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < 8) throw ValueError("load_gbm: truncated file");

  const std::string payload = bytes.substr(0, bytes.size() - 8);
  binio::Fnv1a checksum;
  checksum.update(payload);
  std::istringstream tail(bytes.substr(bytes.size() - 8));
  if (binio::read_u64(tail) != checksum.digest()) {
    throw IntegrityError("load_gbm: checksum mismatch in " + path.string());
  }

  std::istringstream body(payload);
  if (binio::read_string(body) != kGbmMagic) {
    throw ValueError("load_gbm: " + path.string() + " is not an IOTW-GBM file");
  }
  if (binio::read_u32(body) != kGbmVersion) {
    throw ValueError("load_gbm: unsupported format version");
  }
  MultiLabelGbm model;
  model.params.n_estimators = static_cast<int>(binio::read_u32(body));
  model.params.learning_rate = binio::read_f64(body);
  model.params.max_depth = static_cast<int>(binio::read_u32(body));
  model.params.min_impurity_decrease = binio::read_f64(body);
  model.params.min_samples_leaf = static_cast<int>(binio::read_u32(body));
  model.params.histogram_mode = binio::read_u8(body) != 0;
  model.params.n_bins = static_cast<int>(binio::read_u32(body));
  model.params.seed = binio::read_u64(body);
  model.encoder_hash = binio::read_u64(body);
  const std::uint32_t n_labels = binio::read_u32(body);
  model.ensembles.resize(n_labels);
  for (auto& ensemble : model.ensembles) {
    ensemble.base_score = binio::read_f64(body);
    ensemble.learning_rate = binio::read_f64(body);
    ensemble.trees.resize(binio::read_u32(body));
    for (auto& tree : ensemble.trees) {
      tree.nodes.resize(binio::read_u32(body));
      for (auto& node : tree.nodes) {
        node.feature = static_cast<int>(binio::read_u32(body));
        node.threshold = binio::read_f64(body);
        node.left = static_cast<int>(binio::read_u32(body));
        node.right = static_cast<int>(binio::read_u32(body));
        node.value = binio::read_f64(body);
      }
    }
  }
  return model;
}

}  // namespace iotw::gbtree
