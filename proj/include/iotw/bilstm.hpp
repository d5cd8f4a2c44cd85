#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "iotw/textproc.hpp"

namespace iotw::bilstm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Optimizer { Sgd, Adam };

struct BiLstmConfig {
  int hidden_size = 128;
  int embedding_dim = 300;
  int num_classes = 0;
  int max_len = 256;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  // An epoch "improves" when val loss drops by at least this much below
  // the best seen so far; patience counts consecutive non-improvements.
  double min_improvement = 1e-4;

  void validate() const;
};

// One direction's parameters. Rows of the stacked 4H dimension are the
// gates in order [input, forget, cell, output].
struct LstmCell {
  Matrix w;  // 4H x D
  Matrix u;  // 4H x H
  Vector b;  // 4H, forget slice initialised to 1
};

struct BiLstmModel {
  textproc::EmbeddingMatrix embeddings;  // V x D, row 0 = PAD, frozen at 0
  LstmCell forward_cell;
  LstmCell backward_cell;
  Matrix w_out;  // C x 2H
  Vector b_out;  // C
  BiLstmConfig config;
  std::uint64_t vocab_hash = 0;
};

// Weights uniform(-1/sqrt(H), +1/sqrt(H)) from the seed, biases zero except
// the forget gate at 1. Deterministic under the seed.
BiLstmModel init_model(const BiLstmConfig& config, std::size_t vocab_size,
                       const textproc::EmbeddingMatrix& embeddings);

struct StepCache {
  int token = 0;
  Vector i, f, g, o, c, h, tanh_c;
};

struct SequenceCache {
  std::vector<StepCache> fwd;  // scan order: first real position onward
  std::vector<StepCache> bwd;  // scan order: last real position backward
  Vector rep;                  // 2H document representation
};

struct ForwardResult {
  Matrix logits;  // B x C
  std::vector<SequenceCache> docs;
};

// PAD positions never update state, in either direction, so appending
// padding cannot change the logits. The representation concatenates the
// forward state at the last real position with the backward state at the
// first; an all-PAD document yields logits equal to the output bias.
ForwardResult forward(const BiLstmModel& model,
                      const std::vector<textproc::EncodedDoc>& batch);

// Mean softmax cross-entropy, stabilised by max subtraction.
double loss(const Matrix& logits, const std::vector<int>& labels);

Matrix softmax_rows(const Matrix& logits);

struct Gradients {
  Matrix d_embeddings;
  Matrix d_w_fwd, d_u_fwd;
  Vector d_b_fwd;
  Matrix d_w_bwd, d_u_bwd;
  Vector d_b_bwd;
  Matrix d_w_out;
  Vector d_b_out;

  double global_norm() const;
  void scale(double s);
};

// Exact analytic gradients of loss() via backpropagation through time.
// The PAD embedding row always carries zero gradient. No clipping happens
// here; train() clips the global norm before each optimizer step.
Gradients backward(const BiLstmModel& model, const ForwardResult& cache,
                   const std::vector<int>& labels);

// Named flat views over parameters/gradients, in one canonical order
// (serialisation, optimiser state and the finite-difference checker all
// share it).
struct TensorView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

std::vector<TensorView> parameter_views(BiLstmModel& model);
std::vector<TensorView> gradient_views(Gradients& grads);

// Early-stopping bookkeeping. The snapshot follows the exact minimum val
// loss; the patience streak resets only on improvements of at least
// min_improvement.
class EarlyStopTracker {
 public:
  EarlyStopTracker(double min_improvement, int patience)
      : min_improvement_(min_improvement), patience_(patience) {}

  // Feed one epoch's validation loss; true means stop after this epoch.
  bool observe(int epoch, double val_loss) {
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      new_minimum_ = true;
    } else {
      new_minimum_ = false;
    }
    if (improvement_floor_ - val_loss >= min_improvement_) {
      improvement_floor_ = val_loss;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return stale_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  bool hit_new_minimum() const { return new_minimum_; }

 private:
  double min_improvement_;
  int patience_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  double improvement_floor_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int stale_ = 0;
  bool new_minimum_ = false;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based, attains the minimum recorded val loss
  bool stopped_early = false;

  void save_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  BiLstmModel model;  // best-val-loss snapshot
  TrainReport report;
};

// Deterministic shuffled mini-batch training with early stopping on the
// validation loss. Throws NonFiniteLoss naming the offending epoch if the
// loss diverges.
TrainResult train(const BiLstmModel& model,
                  const std::vector<textproc::EncodedDoc>& train_docs,
                  const std::vector<int>& train_labels,
                  const std::vector<textproc::EncodedDoc>& val_docs,
                  const std::vector<int>& val_labels);

struct EvalStats {
  double loss = 0;
  double accuracy = 0;
};

EvalStats evaluate(const BiLstmModel& model,
                   const std::vector<textproc::EncodedDoc>& docs,
                   const std::vector<int>& labels);

struct Prediction {
  int label = 0;
  Vector probabilities;
};

Prediction predict(const BiLstmModel& model, const textproc::EncodedDoc& doc);

// Versioned binary container, magic "IOTW-BILSTM", little-endian 64-bit
// floats, row-major tensors, checksum-terminated.
void save_model(const BiLstmModel& model, const std::filesystem::path& path);
BiLstmModel load_model(const std::filesystem::path& path);

}  // namespace iotw::bilstm
