#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "iotw/errors.hpp"
#include "iotw/gbtree.hpp"
#include "iotw/rng.hpp"
#include "test_support.hpp"

using namespace iotw;
using testsupport::TempDir;

namespace {

// Independent exhaustive O(m^2 d) split enumeration: for every candidate
// threshold of every feature, partition the node by direct scan and score
// it with plain subset sums. Shares only the tie rule with the library
// (lower feature first, then lower threshold, strictly better gain wins).
gbtree::SplitCandidate oracle_best_split(
    const gbtree::FeatureMatrix& x, const std::vector<std::size_t>& rows,
    const std::vector<double>& residuals, const std::vector<double>& weights,
    double total_weight, const gbtree::GbmParams& params) {
  auto subset_sse = [&](const std::vector<std::size_t>& subset) {
    double w = 0, wr = 0, wr2 = 0;
    for (auto r : subset) {
      w += weights[r];
      wr += weights[r] * residuals[r];
      wr2 += weights[r] * residuals[r] * residuals[r];
    }
    return w > 0 ? wr2 - wr * wr / w : 0.0;
  };
  const double parent = subset_sse(rows);

  gbtree::SplitCandidate best;
  best.gain = 0.0;
  for (std::size_t f = 0; f < x.n_cols; ++f) {
    std::set<double> values;
    for (auto r : rows) values.insert(x(r, f));
    std::vector<double> sorted(values.begin(), values.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const double threshold = (sorted[i] + sorted[i + 1]) / 2.0;
      std::vector<std::size_t> left, right;
      for (auto r : rows) {
        (x(r, f) <= threshold ? left : right).push_back(r);
      }
      if (left.size() < static_cast<std::size_t>(params.min_samples_leaf) ||
          right.size() < static_cast<std::size_t>(params.min_samples_leaf)) {
        continue;
      }
      const double gain =
          (parent - subset_sse(left) - subset_sse(right)) / total_weight;
      if (gain > 0 && gain > best.gain) {
        best.found = true;
        best.feature = static_cast<int>(f);
        best.threshold = threshold;
        best.gain = gain;
      }
    }
  }
  return best;
}

bool trees_equal(const gbtree::RegressionTree& a,
                 const gbtree::RegressionTree& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& na = a.nodes[i];
    const auto& nb = b.nodes[i];
    if (na.feature != nb.feature || na.left != nb.left ||
        na.right != nb.right || na.threshold != nb.threshold ||
        na.value != nb.value) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("gbtree") {

TEST_CASE("label_weights balances the positive and negative mass") {
  std::vector<int> y(100, 0);
  for (int i = 0; i < 7; ++i) y[static_cast<std::size_t>(i)] = 1;
  const auto w = gbtree::label_weights(y);
  CHECK(w[0] == doctest::Approx(100.0 / 14.0));   // positive
  CHECK(w[99] == doctest::Approx(100.0 / 186.0));  // negative
  double pos = 0, neg = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    (y[i] ? pos : neg) += w[i];
  }
  CHECK(pos == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(neg == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("label_weights on balanced or degenerate labels is all ones") {
  std::vector<int> balanced = {0, 1, 0, 1};
  for (double w : gbtree::label_weights(balanced)) {
    CHECK(w == doctest::Approx(1.0));
  }
  std::vector<int> all_positive = {1, 1, 1};
  for (double w : gbtree::label_weights(all_positive)) {
    CHECK(w == doctest::Approx(1.0));
  }
}

TEST_CASE("fit_tree splits the textbook 1-D fixture at 2.5") {
  const auto x = gbtree::FeatureMatrix::from_rows({{1}, {2}, {3}, {4}});
  // gradients = -targets: targets are {-1,-1,+1,+1}.
  const std::vector<double> gradients = {1, 1, -1, -1};
  const std::vector<double> hessians(4, 1.0);
  const std::vector<double> weights(4, 1.0);
  gbtree::GbmParams params;
  params.max_depth = 3;
  const auto tree = gbtree::fit_tree(x, gradients, hessians, weights, params);

  REQUIRE_FALSE(tree.nodes.empty());
  CHECK_FALSE(tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == doctest::Approx(2.5));
  // Children are pure, so they stay leaves with Newton values -1 and +1.
  const auto& left = tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)];
  const auto& right = tree.nodes[static_cast<std::size_t>(tree.nodes[0].right)];
  CHECK(left.is_leaf());
  CHECK(right.is_leaf());
  CHECK(left.value == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(right.value == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(tree.depth() == 1);
}

TEST_CASE("fit_tree on constant targets returns a depth-0 Newton leaf") {
  const auto x = gbtree::FeatureMatrix::from_rows({{1}, {2}, {3}});
  const std::vector<double> gradients = {-2, -2, -2};  // targets all +2
  const std::vector<double> hessians = {1, 1, 1};
  const std::vector<double> weights = {1, 2, 1};
  const auto tree = gbtree::fit_tree(x, gradients, hessians, weights,
                                     gbtree::GbmParams{});
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].is_leaf());
  // sum(w r) / (sum(w h) + lambda) = 8 / (4 + 1e-6)
  CHECK(tree.nodes[0].value == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("min_impurity_decrease above every gain blocks all splits") {
  const auto x = gbtree::FeatureMatrix::from_rows({{1}, {2}, {3}, {4}});
  const std::vector<double> gradients = {1, 1, -1, -1};
  const std::vector<double> hessians(4, 1.0);
  const std::vector<double> weights(4, 1.0);
  gbtree::GbmParams params;
  params.min_impurity_decrease = 1e9;
  const auto tree = gbtree::fit_tree(x, gradients, hessians, weights, params);
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.depth() == 0);
}

TEST_CASE("split finder matches the exhaustive oracle on random data") {
  Rng rng(20250811);
  int checked = 0;
  for (int trial = 0; trial < 220; ++trial) {
    const std::size_t m = 2 + rng.below(63);   // <= 64 rows
    const std::size_t d = 1 + rng.below(4);    // <= 4 features
    std::vector<std::vector<double>> rows(m, std::vector<double>(d));
    std::vector<double> residuals(m), weights(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < d; ++c) rows[r][c] = rng.uniform();
      residuals[r] = rng.uniform(-2.0, 2.0);
      weights[r] = 0.25 + rng.uniform();
    }
    const auto x = gbtree::FeatureMatrix::from_rows(rows);
    gbtree::GbmParams params;
    params.min_samples_leaf = 1 + static_cast<int>(rng.below(3));

    std::vector<std::size_t> node(m);
    std::iota(node.begin(), node.end(), 0);
    const double total_weight =
        std::accumulate(weights.begin(), weights.end(), 0.0);

    const auto fast = gbtree::find_best_split(x, node, residuals, weights,
                                              total_weight, params);
    const auto slow = oracle_best_split(x, node, residuals, weights,
                                        total_weight, params);
    CHECK(fast.found == slow.found);
    if (fast.found) {
      CHECK(fast.feature == slow.feature);
      CHECK(fast.threshold == slow.threshold);
      CHECK(fast.gain == doctest::Approx(slow.gain).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 150);  // the vast majority of trials admit a split
}

TEST_CASE("fit_gbm_binary drives a separable 1-D problem to zero error") {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({static_cast<double>(i)});
    y.push_back(i < 10 ? 0 : 1);
  }
  const auto x = gbtree::FeatureMatrix::from_rows(rows);
  gbtree::GbmParams params;
  params.n_estimators = 50;
  params.max_depth = 1;
  params.learning_rate = 0.5;
  gbtree::BinaryFitReport report;
  const auto model = gbtree::fit_gbm_binary(x, y, gbtree::label_weights(y),
                                            params, &report);

  int correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int label = model.predict_proba(x.row(i)) >= 0.5 ? 1 : 0;
    correct += label == y[i];
  }
  CHECK(correct == 20);

  // Weighted train log-loss never rises across kept stages.
  for (std::size_t s = 1; s < report.stage_losses.size(); ++s) {
    CHECK(report.stage_losses[s] <= report.stage_losses[s - 1]);
  }
}

TEST_CASE("single-class targets produce a clamped base-only ensemble") {
  const auto x = gbtree::FeatureMatrix::from_rows({{1}, {2}, {3}});
  const std::vector<int> y = {0, 0, 0};
  const auto model = gbtree::fit_gbm_binary(x, y, gbtree::label_weights(y),
                                            gbtree::GbmParams{});
  CHECK(model.trees.empty());
  CHECK(model.predict_proba(x.row(0)) == doctest::Approx(1e-6).epsilon(1e-3));
}

TEST_CASE("parameter validation rejects out-of-range settings") {
  gbtree::GbmParams params;
  params.learning_rate = 0.0;
  CHECK_THROWS_AS(params.validate(), ValidationError);
  params = {};
  params.n_estimators = 0;
  CHECK_THROWS_AS(params.validate(), ValidationError);
  params = {};
  params.n_bins = 1;
  CHECK_THROWS_AS(params.validate(), ValidationError);
  params = {};
  params.n_bins = 257;
  CHECK_THROWS_AS(params.validate(), ValidationError);
  params = {};
  params.max_depth = 0;
  CHECK_THROWS_AS(params.validate(), ValidationError);
}

TEST_CASE("training loss is non-increasing on noisy data too") {
  Rng rng(99);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 80; ++i) {
    rows.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    y.push_back(rng.below(2) == 0 ? 0 : 1);  // pure noise labels
  }
  const auto x = gbtree::FeatureMatrix::from_rows(rows);
  gbtree::GbmParams params;
  params.n_estimators = 60;
  params.max_depth = 3;
  gbtree::BinaryFitReport report;
  gbtree::fit_gbm_binary(x, y, gbtree::label_weights(y), params, &report);
  for (std::size_t s = 1; s < report.stage_losses.size(); ++s) {
    CHECK(report.stage_losses[s] <= report.stage_losses[s - 1]);
  }
}

TEST_CASE("fit_multilabel trains the eight labels independently") {
  Rng rng(7);
  std::vector<std::vector<double>> rows;
  std::vector<std::array<int, 8>> labels;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> features;
    for (int f = 0; f < 8; ++f) features.push_back(rng.uniform());
    std::array<int, 8> row_labels{};
    for (int l = 0; l < 8; ++l) {
      row_labels[static_cast<std::size_t>(l)] =
          features[static_cast<std::size_t>(l)] > 0.5 ? 1 : 0;
    }
    // Guard against degenerate all-zero rows for the dataset invariant.
    rows.push_back(std::move(features));
    labels.push_back(row_labels);
  }
  const auto x = gbtree::FeatureMatrix::from_rows(rows);
  gbtree::GbmParams params;
  params.n_estimators = 40;
  params.max_depth = 2;
  params.learning_rate = 0.5;
  const auto model = gbtree::fit_multilabel(x, labels, params);
  REQUIRE(model.ensembles.size() == 8);

  SUBCASE("exact match on the training rows") {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(gbtree::predict_labels(model, x.row(i)) == labels[i]);
    }
  }

  SUBCASE("permuting label columns permutes the ensembles identically") {
    std::vector<std::array<int, 8>> swapped = labels;
    for (auto& row : swapped) std::swap(row[0], row[5]);
    const auto permuted = gbtree::fit_multilabel(x, swapped, params);
    CHECK(permuted.ensembles[5].trees.size() ==
          model.ensembles[0].trees.size());
    CHECK(permuted.ensembles[5].base_score ==
          doctest::Approx(model.ensembles[0].base_score));
    CHECK(trees_equal(permuted.ensembles[5].trees[0],
                      model.ensembles[0].trees[0]));
  }
}

TEST_CASE("an all-zero label column predicts near zero everywhere") {
  std::vector<std::vector<double>> rows = {{0.1}, {0.7}, {0.3}, {0.9}};
  std::vector<std::array<int, 8>> labels(4);
  for (auto& l : labels) l.fill(0);
  for (std::size_t i = 0; i < 4; ++i) labels[i][1] = i % 2 ? 1 : 0;
  const auto x = gbtree::FeatureMatrix::from_rows(rows);
  const auto model = gbtree::fit_multilabel(x, labels, gbtree::GbmParams{});
  for (std::size_t i = 0; i < 4; ++i) {
    const auto probs = gbtree::predict_proba(model, x.row(i));
    CHECK(probs[0] < 1e-3);
    CHECK(gbtree::predict_labels(model, x.row(i))[0] == 0);
  }
}

TEST_CASE("empty ensemble at base score zero predicts 0.5 and label 1") {
  gbtree::GbEnsemble ensemble;
  ensemble.base_score = 0.0;
  const double x = 0.0;
  CHECK(ensemble.predict_proba(&x) == doctest::Approx(0.5));
  gbtree::MultiLabelGbm model;
  model.ensembles.assign(8, ensemble);
  CHECK(gbtree::predict_labels(model, &x)[0] == 1);  // 0.5 >= threshold
}

TEST_CASE("adding an all-positive-leaf tree raises every probability") {
  gbtree::GbEnsemble ensemble;
  ensemble.base_score = -0.3;
  ensemble.learning_rate = 0.1;
  Rng rng(3);
  std::vector<double> points;
  for (int i = 0; i < 20; ++i) points.push_back(rng.uniform(-5, 5));

  std::vector<double> before;
  for (double p : points) before.push_back(ensemble.predict_proba(&p));

  gbtree::RegressionTree tree;
  tree.nodes.push_back({0, 0.0, 1, 2, 0.0});
  tree.nodes.push_back({-1, 0.0, -1, -1, 0.8});
  tree.nodes.push_back({-1, 0.0, -1, -1, 1.5});
  ensemble.trees.push_back(tree);

  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(ensemble.predict_proba(&points[i]) > before[i]);
  }
}

TEST_CASE("hand-built two-node tree matches a hand-computed sigmoid") {
  gbtree::GbEnsemble ensemble;
  ensemble.base_score = 0.2;
  ensemble.learning_rate = 0.5;
  gbtree::RegressionTree tree;
  tree.nodes.push_back({0, 1.0, 1, 2, 0.0});
  tree.nodes.push_back({-1, 0.0, -1, -1, -2.0});  // x <= 1
  tree.nodes.push_back({-1, 0.0, -1, -1, 3.0});   // x > 1
  ensemble.trees.push_back(tree);

  const double lo = 0.5, hi = 2.0;
  // sigma(0.2 + 0.5 * -2) = sigma(-0.8); sigma(0.2 + 0.5 * 3) = sigma(1.7)
  CHECK(ensemble.predict_proba(&lo) ==
        doctest::Approx(1.0 / (1.0 + std::exp(0.8))).epsilon(1e-12));
  CHECK(ensemble.predict_proba(&hi) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-1.7))).epsilon(1e-12));
}

TEST_CASE("histogram_binning puts the n_bins=2 edge at the median") {
  std::vector<std::vector<double>> rows;
  for (int i = 1; i <= 100; ++i) rows.push_back({static_cast<double>(i)});
  const auto bins = gbtree::histogram_binning(
      gbtree::FeatureMatrix::from_rows(rows), 2);
  REQUIRE(bins.edges[0].size() == 1);
  CHECK(bins.edges[0][0] == doctest::Approx(50.5));
  CHECK(bins.id_at(49, 0) == 0);   // value 50
  CHECK(bins.id_at(50, 0) == 1);   // value 51
}

TEST_CASE("constant features get no edges and never split") {
  std::vector<std::vector<double>> rows(10, std::vector<double>{7.0});
  const auto x = gbtree::FeatureMatrix::from_rows(rows);
  const auto bins = gbtree::histogram_binning(x, 8);
  CHECK(bins.edges[0].empty());

  std::vector<double> residuals(10), weights(10, 1.0);
  for (std::size_t i = 0; i < 10; ++i) residuals[i] = i % 2 ? 1.0 : -1.0;
  gbtree::GbmParams params;
  params.histogram_mode = true;
  std::vector<std::size_t> node(10);
  std::iota(node.begin(), node.end(), 0);
  const auto split =
      gbtree::find_best_split(x, node, residuals, weights, 10.0, params, &bins);
  CHECK_FALSE(split.found);
}

TEST_CASE("lossless binning makes histogram trees equal exact trees") {
  Rng rng(555);
  for (int trial = 0; trial < 25; ++trial) {
    // Each feature takes at most 6 distinct random values; n_bins=16 is
    // lossless for them.
    const std::size_t m = 12 + rng.below(50);
    const std::size_t d = 1 + rng.below(3);
    std::vector<std::vector<double>> levels(d);
    for (auto& pool : levels) {
      const std::size_t k = 2 + rng.below(5);
      for (std::size_t i = 0; i < k; ++i) pool.push_back(rng.uniform());
    }
    std::vector<std::vector<double>> rows(m, std::vector<double>(d));
    std::vector<double> gradients(m), hessians(m, 1.0), weights(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        rows[r][c] = levels[c][rng.below(levels[c].size())];
      }
      gradients[r] = rng.uniform(-1.0, 1.0);
      weights[r] = 0.5 + rng.uniform();
    }
    const auto x = gbtree::FeatureMatrix::from_rows(rows);

    gbtree::GbmParams exact;
    exact.max_depth = 4;
    const auto exact_tree =
        gbtree::fit_tree(x, gradients, hessians, weights, exact);

    gbtree::GbmParams histogram = exact;
    histogram.histogram_mode = true;
    histogram.n_bins = 16;
    const auto bins = gbtree::histogram_binning(x, histogram.n_bins);
    const auto histogram_tree =
        gbtree::fit_tree(x, gradients, hessians, weights, histogram, &bins);

    CHECK(trees_equal(exact_tree, histogram_tree));
  }
}

TEST_CASE("fitting is deterministic for fixed params and data") {
  Rng rng(31);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 50; ++i) {
    rows.push_back({rng.uniform(), rng.uniform()});
    y.push_back(rows.back()[0] + rng.uniform(-0.2, 0.2) > 0.5 ? 1 : 0);
  }
  const auto x = gbtree::FeatureMatrix::from_rows(rows);
  gbtree::GbmParams params;
  params.n_estimators = 20;
  params.max_depth = 3;
  const auto w = gbtree::label_weights(y);
  const auto a = gbtree::fit_gbm_binary(x, y, w, params);
  const auto b = gbtree::fit_gbm_binary(x, y, w, params);
  CHECK(a.base_score == b.base_score);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    CHECK(trees_equal(a.trees[t], b.trees[t]));
  }
}

TEST_CASE("gbm model file round trip") {
  TempDir dir;
  Rng rng(17);
  std::vector<std::vector<double>> rows;
  std::vector<std::array<int, 8>> labels;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({rng.uniform(), rng.uniform()});
    std::array<int, 8> l{};
    l[0] = rows.back()[0] > 0.5;
    l[3] = rows.back()[1] > 0.4;
    labels.push_back(l);
  }
  gbtree::GbmParams params;
  params.n_estimators = 10;
  params.max_depth = 2;
  auto model = gbtree::fit_multilabel(gbtree::FeatureMatrix::from_rows(rows),
                                      labels, params);
  model.encoder_hash = 0x1234abcd5678ef01ULL;

  const auto path = dir.file("gbm.bin");
  gbtree::save_gbm(model, path);
  const auto loaded = gbtree::load_gbm(path);
  CHECK(loaded.encoder_hash == model.encoder_hash);
  CHECK(loaded.params.n_estimators == params.n_estimators);
  REQUIRE(loaded.ensembles.size() == model.ensembles.size());
  for (std::size_t l = 0; l < model.ensembles.size(); ++l) {
    CHECK(loaded.ensembles[l].base_score == model.ensembles[l].base_score);
    REQUIRE(loaded.ensembles[l].trees.size() ==
            model.ensembles[l].trees.size());
    for (std::size_t t = 0; t < model.ensembles[l].trees.size(); ++t) {
      CHECK(trees_equal(loaded.ensembles[l].trees[t],
                        model.ensembles[l].trees[t]));
    }
  }

  auto bytes = testsupport::read_file(path);
  bytes[20] = static_cast<char>(bytes[20] ^ 0x01);
  testsupport::write_file(path, bytes);
  CHECK_THROWS_AS(gbtree::load_gbm(path), IntegrityError);
}

}  // TEST_SUITE
