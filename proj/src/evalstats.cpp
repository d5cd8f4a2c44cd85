#include "iotw/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iotw/errors.hpp"

namespace iotw::evalstats {

std::uint64_t ConfusionMatrix::grand_total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k; ++i) t += at(i, i);
  return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                 const std::vector<int>& pred,
                                 std::size_t k) {
  if (truth.size() != pred.size()) {
    throw ValidationError("confusion_matrix: truth/pred length mismatch");
  }
  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || pred[i] < 0 ||
        static_cast<std::size_t>(truth[i]) >= k ||
        static_cast<std::size_t>(pred[i]) >= k) {
      throw ValidationError("confusion_matrix: label out of range at index " +
                            std::to_string(i));
    }
    ++cm.at(static_cast<std::size_t>(truth[i]),
            static_cast<std::size_t>(pred[i]));
  }
  return cm;
}

MulticlassReport multiclass_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.grand_total();
  if (total == 0) throw EmptyMatrix("multiclass_metrics: empty matrix");

  MulticlassReport r;
  r.precision.resize(cm.k);
  r.recall.resize(cm.k);
  r.precision_undefined.resize(cm.k, false);
  r.recall_undefined.resize(cm.k, false);

  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  for (std::size_t c = 0; c < cm.k; ++c) {
    std::uint64_t tp = cm.at(c, c);
    std::uint64_t col = 0, row = 0;
    for (std::size_t i = 0; i < cm.k; ++i) {
      col += cm.at(i, c);
      row += cm.at(c, i);
    }
    if (col == 0) {
      r.precision_undefined[c] = true;
      r.precision[c] = 0.0;
    } else {
      r.precision[c] = static_cast<double>(tp) / static_cast<double>(col);
    }
    if (row == 0) {
      r.recall_undefined[c] = true;
      r.recall[c] = 0.0;
    } else {
      r.recall[c] = static_cast<double>(tp) / static_cast<double>(row);
    }
    macro_p += r.precision[c];
    macro_r += r.recall[c];
    const double denom = r.precision[c] + r.recall[c];
    macro_f1 += denom > 0 ? 2.0 * r.precision[c] * r.recall[c] / denom : 0.0;
  }

  // Each item contributes one predicted and one true label, so pooled
  // FP == pooled FN and every micro quantity collapses to trace/total.
  const double micro =
      static_cast<double>(cm.trace()) / static_cast<double>(total);
  r.micro_precision = r.micro_recall = r.micro_f1 = r.accuracy = micro;
  r.macro_precision = macro_p / static_cast<double>(cm.k);
  r.macro_recall = macro_r / static_cast<double>(cm.k);
  r.macro_f1 = macro_f1 / static_cast<double>(cm.k);
  return r;
}

namespace {

std::size_t intersection_size(const LabelSet& a, const LabelSet& b) {
  std::size_t n = 0;
  for (int x : a) n += b.count(x);
  return n;
}

}  // namespace

ExampleBasedReport multilabel_example_metrics(
    const std::vector<LabelSet>& truth,
    const std::vector<LabelSet>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw ValidationError(
        "multilabel_example_metrics: need equal, non-empty truth/prediction "
        "lists");
  }
  const auto m = static_cast<double>(truth.size());
  ExampleBasedReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& y = truth[i];
    const auto& z = predicted[i];
    const auto inter = static_cast<double>(intersection_size(y, z));
    const auto uni = static_cast<double>(y.size() + z.size()) - inter;
    if (z.empty()) {
      ++r.empty_prediction_count;  // precision contribution 0
    } else {
      r.precision += inter / static_cast<double>(z.size());
    }
    if (!y.empty()) r.recall += inter / static_cast<double>(y.size());
    if (y.empty() && z.empty()) {
      r.f1 += 1.0;
      r.accuracy += 1.0;
    } else {
      r.f1 += 2.0 * inter / static_cast<double>(y.size() + z.size());
      r.accuracy += inter / uni;
    }
  }
  r.precision /= m;
  r.recall /= m;
  r.f1 /= m;
  r.accuracy /= m;
  return r;
}

namespace {

double binary_metric(char which, double tp, double tn, double fp, double fn) {
  switch (which) {
    case 'p':
      return tp + fp > 0 ? tp / (tp + fp) : 0.0;
    case 'r':
      return tp + fn > 0 ? tp / (tp + fn) : 0.0;
    case 'f':
      return 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    default:  // accuracy
      return tp + tn + fp + fn > 0 ? (tp + tn) / (tp + tn + fp + fn) : 0.0;
  }
}

}  // namespace

LabelBasedReport multilabel_label_metrics(
    const std::vector<std::vector<int>>& truth,
    const std::vector<std::vector<int>>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw ValidationError("multilabel_label_metrics: shape mismatch");
  }
  const std::size_t q = truth[0].size();
  LabelBasedReport r;
  r.per_label.resize(q);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != q || predicted[i].size() != q) {
      throw ValidationError("multilabel_label_metrics: ragged matrix at row " +
                            std::to_string(i));
    }
    for (std::size_t l = 0; l < q; ++l) {
      const bool y = truth[i][l] != 0;
      const bool z = predicted[i][l] != 0;
      auto& c = r.per_label[l];
      if (y && z) ++c.tp;
      else if (!y && !z) ++c.tn;
      else if (!y && z) ++c.fp;
      else ++c.fn;
    }
  }

  for (char which : {'p', 'r', 'f', 'a'}) {
    double macro = 0;
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (const auto& c : r.per_label) {
      macro += binary_metric(which, static_cast<double>(c.tp),
                             static_cast<double>(c.tn),
                             static_cast<double>(c.fp),
                             static_cast<double>(c.fn));
      tp += static_cast<double>(c.tp);
      tn += static_cast<double>(c.tn);
      fp += static_cast<double>(c.fp);
      fn += static_cast<double>(c.fn);
    }
    MacroMicro mm;
    mm.macro = macro / static_cast<double>(q);
    mm.micro = binary_metric(which, tp, tn, fp, fn);
    switch (which) {
      case 'p': r.precision = mm; break;
      case 'r': r.recall = mm; break;
      case 'f': r.f1 = mm; break;
      default: r.accuracy = mm; break;
    }
  }
  return r;
}

AlphaParams AlphaParams::make(double alpha, double beta, double gamma) {
  if (alpha < 0) throw ValidationError("alpha_score: alpha must be >= 0");
  if (beta < 0 || beta > 1 || gamma < 0 || gamma > 1) {
    throw ValidationError("alpha_score: beta and gamma must lie in [0,1]");
  }
  if (beta != 1.0 && gamma != 1.0) {
    throw ValidationError("alpha_score: beta = 1 or gamma = 1 is required");
  }
  return AlphaParams{alpha, beta, gamma};
}

double alpha_score(const LabelSet& truth, const LabelSet& predicted,
                   const AlphaParams& params) {
  const auto inter = intersection_size(truth, predicted);
  const std::size_t missed = truth.size() - inter;        // |Y - P|
  const std::size_t spurious = predicted.size() - inter;  // |P - Y|
  const std::size_t universe = truth.size() + predicted.size() - inter;
  if (universe == 0) {
    throw EmptyUniverse("alpha_score: Y union P is empty");
  }
  const double base = 1.0 - (params.beta * static_cast<double>(missed) +
                             params.gamma * static_cast<double>(spurious)) /
                                static_cast<double>(universe);
  if (base <= 0.0) return 0.0;  // covers the 0^0 := 0 convention
  return std::pow(base, params.alpha);
}

AlphaSummary mean_alpha(const std::vector<LabelSet>& truth,
                        const std::vector<LabelSet>& predicted,
                        const AlphaParams& params) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw ValidationError("mean_alpha: need equal, non-empty lists");
  }
  AlphaSummary s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s.mean += alpha_score(truth[i], predicted[i], params);
    if (truth[i] == predicted[i]) {
      ++s.fully_correct;
    } else if (intersection_size(truth[i], predicted[i]) == 0) {
      ++s.fully_incorrect;
    } else {
      ++s.partly_correct;
    }
  }
  s.mean /= static_cast<double>(truth.size());
  return s;
}

RankTable friedman_ranks(const std::vector<std::vector<double>>& scores,
                         bool higher_is_better) {
  if (scores.size() < 2) {
    throw ValidationError("friedman_ranks: need at least 2 datasets");
  }
  const std::size_t k = scores[0].size();
  if (k < 2) throw ValidationError("friedman_ranks: need at least 2 models");

  RankTable table;
  table.ranks.reserve(scores.size());
  table.mean_ranks.assign(k, 0.0);
  for (const auto& row : scores) {
    if (row.size() != k) {
      throw ValidationError("friedman_ranks: ragged score table");
    }
    // Sort column indices best-first, then assign average ranks to ties.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return higher_is_better ? row[a] > row[b]
                                               : row[a] < row[b];
                     });
    std::vector<double> ranks(k, 0.0);
    std::size_t i = 0;
    while (i < k) {
      std::size_t j = i;
      while (j + 1 < k && row[order[j + 1]] == row[order[i]]) ++j;
      const double avg = (static_cast<double>(i + 1) +
                          static_cast<double>(j + 1)) / 2.0;
      for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
      i = j + 1;
    }
    for (std::size_t c = 0; c < k; ++c) table.mean_ranks[c] += ranks[c];
    table.ranks.push_back(std::move(ranks));
  }
  for (auto& r : table.mean_ranks) r /= static_cast<double>(scores.size());
  return table;
}

double friedman_statistic(const RankTable& table) {
  const auto n = static_cast<double>(table.ranks.size());
  const auto k = static_cast<double>(table.mean_ranks.size());
  double sum_sq = 0;
  for (double r : table.mean_ranks) sum_sq += r * r;
  return 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
}

double iman_davenport(double chi2, std::size_t n_datasets,
                      std::size_t k_models) {
  const auto n = static_cast<double>(n_datasets);
  const auto k = static_cast<double>(k_models);
  const double denom = n * (k - 1.0) - chi2;
  if (denom <= 0.0) {
    throw DegenerateDenominator(
        "iman_davenport: N(k-1) must exceed the Friedman statistic");
  }
  return (n - 1.0) * chi2 / denom;
}

Decision hypothesis_decision(double f_statistic, double critical_value) {
  if (critical_value <= 0) {
    throw ValidationError("hypothesis_decision: critical value must be > 0");
  }
  return f_statistic > critical_value ? Decision::Reject
                                      : Decision::DoNotReject;
}

std::string decision_name(Decision d) {
  return d == Decision::Reject ? "Reject H0" : "Do not reject H0";
}

FriedmanResult friedman_pipeline(
    const std::vector<std::vector<double>>& scores, bool higher_is_better,
    double critical_value) {
  FriedmanResult result;
  result.table = friedman_ranks(scores, higher_is_better);
  result.chi2 = friedman_statistic(result.table);
  const std::size_t n = result.table.ranks.size();
  const std::size_t k = result.table.mean_ranks.size();
  result.f_statistic = iman_davenport(result.chi2, n, k);
  result.critical_value = critical_value > 0
                              ? critical_value
                              : f_critical_value_05(k - 1, (k - 1) * (n - 1));
  result.decision = hypothesis_decision(result.f_statistic,
                                        result.critical_value);
  return result;
}

}  // namespace iotw::evalstats
