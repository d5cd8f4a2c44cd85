#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace iotw::evalstats {

// --- multi-class (weakness task) -----------------------------------------

struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::uint64_t> counts;  // row-major, (truth, predicted)

  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * k + pred];
  }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * k + pred];
  }
  std::uint64_t grand_total() const;
  std::uint64_t trace() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                 const std::vector<int>& pred, std::size_t k);

struct MulticlassReport {
  std::vector<double> precision;  // per class
  std::vector<double> recall;
  // Zero-denominator classes report 0 and raise the matching flag.
  std::vector<bool> precision_undefined;
  std::vector<bool> recall_undefined;
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0, accuracy = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
};

// Micro precision == micro recall == micro F1 == accuracy for every matrix
// (all four equal trace / grand total).
MulticlassReport multiclass_metrics(const ConfusionMatrix& cm);

// --- multi-label (attack-pattern task) ------------------------------------

using LabelSet = std::set<int>;

struct ExampleBasedReport {
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  std::size_t empty_prediction_count = 0;  // |Z|=0 instances, counted as P=0
};

// Example-based means over instances: P = |Y∩Z|/|Z|, R = |Y∩Z|/|Y|,
// F1 = 2|Y∩Z|/(|Y|+|Z|), Acc = |Y∩Z|/|Y∪Z|; both-empty instances count as
// fully correct.
ExampleBasedReport multilabel_example_metrics(
    const std::vector<LabelSet>& truth, const std::vector<LabelSet>& predicted);

struct LabelCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

struct MacroMicro {
  double macro = 0, micro = 0;
};

struct LabelBasedReport {
  std::vector<LabelCounts> per_label;
  MacroMicro precision, recall, f1, accuracy;
};

// Label-based macro/micro aggregation over per-label binary counts.
// Matrices are m x q of {0,1}.
LabelBasedReport multilabel_label_metrics(
    const std::vector<std::vector<int>>& truth,
    const std::vector<std::vector<int>>& predicted);

// --- alpha score -----------------------------------------------------------

struct AlphaParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  // Enforces alpha >= 0, beta/gamma in [0,1], and beta==1 or gamma==1.
  static AlphaParams make(double alpha, double beta = 1.0, double gamma = 1.0);
};

// score = (1 - (beta|Y-P| + gamma|P-Y|) / |Y∪P|)^alpha, with 0^0 := 0 so a
// forgiveness rate of 0 scores 1 except on fully incorrect predictions.
double alpha_score(const LabelSet& truth, const LabelSet& predicted,
                   const AlphaParams& params);

struct AlphaSummary {
  double mean = 0;
  std::size_t fully_correct = 0;
  std::size_t partly_correct = 0;
  std::size_t fully_incorrect = 0;
};

AlphaSummary mean_alpha(const std::vector<LabelSet>& truth,
                        const std::vector<LabelSet>& predicted,
                        const AlphaParams& params);

// --- Friedman / Iman-Davenport ----------------------------------------------

struct RankTable {
  std::vector<std::vector<double>> ranks;  // N x k, average ranks on ties
  std::vector<double> mean_ranks;          // per model (column)
};

// Rank 1 goes to the best score per row; ties receive average ranks.
RankTable friedman_ranks(const std::vector<std::vector<double>>& scores,
                         bool higher_is_better = true);

// chi^2_F = 12N/(k(k+1)) [ sum_j R_j^2 - k(k+1)^2/4 ]
double friedman_statistic(const RankTable& table);

// F_F = (N-1) chi^2_F / (N(k-1) - chi^2_F)
double iman_davenport(double chi2, std::size_t n_datasets, std::size_t k_models);

enum class Decision { Reject, DoNotReject };

// Reject H0 iff F_F strictly exceeds the critical value.
Decision hypothesis_decision(double f_statistic, double critical_value);

std::string decision_name(Decision d);

// F distribution critical value at significance 0.05 from the embedded
// table (df1 <= 12; df2 clamps to 120, which is slightly conservative for
// larger designs).
double f_critical_value_05(std::size_t df1, std::size_t df2);

struct FriedmanResult {
  RankTable table;
  double chi2 = 0;
  double f_statistic = 0;
  double critical_value = 0;
  Decision decision = Decision::DoNotReject;
};

// Full pipeline: ranks -> chi^2_F -> F_F -> decision. critical_value <= 0
// selects the embedded table at df1=k-1, df2=(k-1)(N-1).
FriedmanResult friedman_pipeline(const std::vector<std::vector<double>>& scores,
                                 bool higher_is_better = true,
                                 double critical_value = 0.0);

}  // namespace iotw::evalstats
