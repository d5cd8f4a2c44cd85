#include "iotw/bilstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "iotw/binio.hpp"
#include "iotw/errors.hpp"
#include "iotw/rng.hpp"

namespace iotw::bilstm {

void BiLstmConfig::validate() const {
  if (hidden_size < 1 || embedding_dim < 1 || num_classes < 1 || max_len < 1)
    throw ValidationError("bilstm: H, D, C and L must all be >= 1");
  if (!(learning_rate > 0))
    throw ValidationError("bilstm: learning_rate must be > 0");
  if (batch_size < 1) throw ValidationError("bilstm: batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("bilstm: max_epochs must be >= 1");
  if (early_stop_patience < 1)
    throw ValidationError("bilstm: early_stop_patience must be >= 1");
  if (!(clip_norm > 0)) throw ValidationError("bilstm: clip_norm must be > 0");
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Row-major fill so the draw order is independent of Eigen's storage.
void fill_uniform(Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rng.uniform(-bound, bound);
}

}  // namespace

BiLstmModel init_model(const BiLstmConfig& config, std::size_t vocab_size,
                       const textproc::EmbeddingMatrix& embeddings) {
  config.validate();
  const auto h = config.hidden_size;
  const auto d = config.embedding_dim;
  const auto c = config.num_classes;
  if (embeddings.rows() != static_cast<Eigen::Index>(vocab_size) ||
      embeddings.cols() != d) {
    throw ShapeError("init_model: embeddings must be V x D (" +
                     std::to_string(vocab_size) + " x " + std::to_string(d) +
                     "), got " + std::to_string(embeddings.rows()) + " x " +
                     std::to_string(embeddings.cols()));
  }

  BiLstmModel model;
  model.config = config;
  model.embeddings = embeddings;
  model.embeddings.row(textproc::kPadId).setZero();

  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  Rng rng(config.seed);
  auto make_cell = [&](LstmCell& cell) {
    cell.w.resize(4 * h, d);
    cell.u.resize(4 * h, h);
    cell.b = Vector::Zero(4 * h);
    fill_uniform(cell.w, rng, bound);
    fill_uniform(cell.u, rng, bound);
    cell.b.segment(h, h).setOnes();  // forget gate bias
  };
  make_cell(model.forward_cell);
  make_cell(model.backward_cell);
  model.w_out.resize(c, 2 * h);
  fill_uniform(model.w_out, rng, bound);
  model.b_out = Vector::Zero(c);
  return model;
}

namespace {

// One LSTM step: a = Wx + Uh + b; i,f,o = sigma, g = tanh;
// c = f.c_prev + i.g; h = o.tanh(c).
StepCache lstm_step(const LstmCell& cell, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev, int token, int hidden) {
  Vector a = cell.w * x + cell.u * h_prev + cell.b;
  StepCache s;
  s.token = token;
  s.i.resize(hidden);
  s.f.resize(hidden);
  s.g.resize(hidden);
  s.o.resize(hidden);
  for (int j = 0; j < hidden; ++j) {
    s.i(j) = sigmoid(a(j));
    s.f(j) = sigmoid(a(hidden + j));
    s.g(j) = std::tanh(a(2 * hidden + j));
    s.o(j) = sigmoid(a(3 * hidden + j));
  }
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

void run_direction(const BiLstmModel& model, const std::vector<int>& positions,
                   const textproc::EncodedDoc& doc, const LstmCell& cell,
                   std::vector<StepCache>* steps) {
  const int h = model.config.hidden_size;
  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  steps->reserve(positions.size());
  for (int pos : positions) {
    const int token = doc.ids[static_cast<std::size_t>(pos)];
    const Vector x = model.embeddings.row(token).transpose();
    steps->push_back(lstm_step(cell, x, h_prev, c_prev, token, h));
    h_prev = steps->back().h;
    c_prev = steps->back().c;
  }
}

}  // namespace

ForwardResult forward(const BiLstmModel& model,
                      const std::vector<textproc::EncodedDoc>& batch) {
  const int h = model.config.hidden_size;
  const int c = model.config.num_classes;
  const auto v = model.embeddings.rows();

  ForwardResult result;
  result.logits.resize(static_cast<Eigen::Index>(batch.size()), c);
  result.docs.resize(batch.size());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& doc = batch[b];
    std::vector<int> real;
    real.reserve(doc.ids.size());
    for (std::size_t p = 0; p < doc.ids.size(); ++p) {
      const int id = doc.ids[p];
      if (id == textproc::kPadId) continue;  // state not updated
      if (id < 0 || id >= v) {
        throw ShapeError("forward: token id " + std::to_string(id) +
                         " outside vocabulary of size " + std::to_string(v));
      }
      real.push_back(static_cast<int>(p));
    }

    auto& cache = result.docs[b];
    run_direction(model, real, doc, model.forward_cell, &cache.fwd);
    std::vector<int> reversed(real.rbegin(), real.rend());
    run_direction(model, reversed, doc, model.backward_cell, &cache.bwd);

    cache.rep = Vector::Zero(2 * h);
    if (!cache.fwd.empty()) {
      cache.rep.head(h) = cache.fwd.back().h;
      cache.rep.tail(h) = cache.bwd.back().h;
    }
    result.logits.row(static_cast<Eigen::Index>(b)) =
        (model.w_out * cache.rep + model.b_out).transpose();
  }
  return result;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    probs.row(r) = e / e.sum();
  }
  return probs;
}

double loss(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ShapeError("loss: batch size mismatch");
  }
  double total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) {
      throw ValidationError("loss: label out of range");
    }
    const double mx = logits.row(r).maxCoeff();
    const double lse =
        mx + std::log((logits.row(r).array() - mx).exp().sum());
    total += lse - logits(r, y);
  }
  return total / static_cast<double>(logits.rows());
}

double Gradients::global_norm() const {
  double sq = d_embeddings.squaredNorm() + d_w_fwd.squaredNorm() +
              d_u_fwd.squaredNorm() + d_b_fwd.squaredNorm() +
              d_w_bwd.squaredNorm() + d_u_bwd.squaredNorm() +
              d_b_bwd.squaredNorm() + d_w_out.squaredNorm() +
              d_b_out.squaredNorm();
  return std::sqrt(sq);
}

void Gradients::scale(double s) {
  d_embeddings *= s;
  d_w_fwd *= s;
  d_u_fwd *= s;
  d_b_fwd *= s;
  d_w_bwd *= s;
  d_u_bwd *= s;
  d_b_bwd *= s;
  d_w_out *= s;
  d_b_out *= s;
}

namespace {

// BPTT over one direction's cached steps. d_rep_slice seeds dh at the last
// scan step. Gate pre-activation derivatives: sigma' = s(1-s), tanh' =
// 1 - t^2.
void backprop_direction(const BiLstmModel& model, const LstmCell& cell,
                        const std::vector<StepCache>& steps,
                        const Vector& d_rep_slice, Matrix* dw, Matrix* du,
                        Vector* db, Matrix* d_embeddings) {
  if (steps.empty()) return;
  const int h = model.config.hidden_size;
  Vector dh = d_rep_slice;
  Vector dc = Vector::Zero(h);
  Vector da(4 * h);
  for (std::size_t s = steps.size(); s-- > 0;) {
    const StepCache& st = steps[s];
    const Vector* h_prev = s > 0 ? &steps[s - 1].h : nullptr;
    const Vector* c_prev = s > 0 ? &steps[s - 1].c : nullptr;

    const Vector d_o = dh.cwiseProduct(st.tanh_c);
    dc += dh.cwiseProduct(st.o).cwiseProduct(
        (1.0 - st.tanh_c.array().square()).matrix());
    const Vector d_i = dc.cwiseProduct(st.g);
    const Vector d_g = dc.cwiseProduct(st.i);
    Vector d_f;
    if (c_prev) {
      d_f = dc.cwiseProduct(*c_prev);
    } else {
      d_f = Vector::Zero(h);
    }

    da.segment(0, h) =
        d_i.cwiseProduct(st.i).cwiseProduct((1.0 - st.i.array()).matrix());
    da.segment(h, h) =
        d_f.cwiseProduct(st.f).cwiseProduct((1.0 - st.f.array()).matrix());
    da.segment(2 * h, h) =
        d_g.cwiseProduct((1.0 - st.g.array().square()).matrix());
    da.segment(3 * h, h) =
        d_o.cwiseProduct(st.o).cwiseProduct((1.0 - st.o.array()).matrix());

    const Vector x = model.embeddings.row(st.token).transpose();
    dw->noalias() += da * x.transpose();
    if (h_prev) du->noalias() += da * h_prev->transpose();
    *db += da;

    d_embeddings->row(st.token) += (cell.w.transpose() * da).transpose();

    dc = dc.cwiseProduct(st.f);
    if (s > 0) {
      dh = cell.u.transpose() * da;
    }
  }
}

}  // namespace

Gradients backward(const BiLstmModel& model, const ForwardResult& cache,
                   const std::vector<int>& labels) {
  const int h = model.config.hidden_size;
  const auto batch_size = static_cast<double>(cache.docs.size());
  if (cache.docs.size() != labels.size() || cache.docs.empty()) {
    throw ShapeError("backward: cache/label size mismatch");
  }

  Gradients g;
  g.d_embeddings = Matrix::Zero(model.embeddings.rows(), model.embeddings.cols());
  g.d_w_fwd = Matrix::Zero(4 * h, model.config.embedding_dim);
  g.d_u_fwd = Matrix::Zero(4 * h, h);
  g.d_b_fwd = Vector::Zero(4 * h);
  g.d_w_bwd = Matrix::Zero(4 * h, model.config.embedding_dim);
  g.d_u_bwd = Matrix::Zero(4 * h, h);
  g.d_b_bwd = Vector::Zero(4 * h);
  g.d_w_out = Matrix::Zero(model.w_out.rows(), model.w_out.cols());
  g.d_b_out = Vector::Zero(model.b_out.size());

  const Matrix probs = softmax_rows(cache.logits);
  for (std::size_t b = 0; b < cache.docs.size(); ++b) {
    Vector d_logits =
        probs.row(static_cast<Eigen::Index>(b)).transpose() / batch_size;
    d_logits(labels[b]) -= 1.0 / batch_size;

    const auto& doc = cache.docs[b];
    g.d_w_out.noalias() += d_logits * doc.rep.transpose();
    g.d_b_out += d_logits;

    if (doc.fwd.empty()) continue;  // all-PAD: no recurrent gradient
    const Vector d_rep = model.w_out.transpose() * d_logits;
    backprop_direction(model, model.forward_cell, doc.fwd, d_rep.head(h),
                       &g.d_w_fwd, &g.d_u_fwd, &g.d_b_fwd, &g.d_embeddings);
    backprop_direction(model, model.backward_cell, doc.bwd, d_rep.tail(h),
                       &g.d_w_bwd, &g.d_u_bwd, &g.d_b_bwd, &g.d_embeddings);
  }

  g.d_embeddings.row(textproc::kPadId).setZero();
  return g;
}

std::vector<TensorView> parameter_views(BiLstmModel& m) {
  return {
      {"embeddings", m.embeddings.data(), m.embeddings.rows(), m.embeddings.cols()},
      {"w_fwd", m.forward_cell.w.data(), m.forward_cell.w.rows(), m.forward_cell.w.cols()},
      {"u_fwd", m.forward_cell.u.data(), m.forward_cell.u.rows(), m.forward_cell.u.cols()},
      {"b_fwd", m.forward_cell.b.data(), m.forward_cell.b.size(), 1},
      {"w_bwd", m.backward_cell.w.data(), m.backward_cell.w.rows(), m.backward_cell.w.cols()},
      {"u_bwd", m.backward_cell.u.data(), m.backward_cell.u.rows(), m.backward_cell.u.cols()},
      {"b_bwd", m.backward_cell.b.data(), m.backward_cell.b.size(), 1},
      {"w_out", m.w_out.data(), m.w_out.rows(), m.w_out.cols()},
      {"b_out", m.b_out.data(), m.b_out.size(), 1},
  };
}

std::vector<TensorView> gradient_views(Gradients& g) {
  return {
      {"embeddings", g.d_embeddings.data(), g.d_embeddings.rows(), g.d_embeddings.cols()},
      {"w_fwd", g.d_w_fwd.data(), g.d_w_fwd.rows(), g.d_w_fwd.cols()},
      {"u_fwd", g.d_u_fwd.data(), g.d_u_fwd.rows(), g.d_u_fwd.cols()},
      {"b_fwd", g.d_b_fwd.data(), g.d_b_fwd.size(), 1},
      {"w_bwd", g.d_w_bwd.data(), g.d_w_bwd.rows(), g.d_w_bwd.cols()},
      {"u_bwd", g.d_u_bwd.data(), g.d_u_bwd.rows(), g.d_u_bwd.cols()},
      {"b_bwd", g.d_b_bwd.data(), g.d_b_bwd.size(), 1},
      {"w_out", g.d_w_out.data(), g.d_w_out.rows(), g.d_w_out.cols()},
      {"b_out", g.d_b_out.data(), g.d_b_out.size(), 1},
  };
}

EvalStats evaluate(const BiLstmModel& model,
                   const std::vector<textproc::EncodedDoc>& docs,
                   const std::vector<int>& labels) {
  if (docs.empty() || docs.size() != labels.size()) {
    throw ValidationError("evaluate: need matching non-empty docs/labels");
  }
  const auto batch = static_cast<std::size_t>(model.config.batch_size);
  double total_loss = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < docs.size(); start += batch) {
    const auto end = std::min(docs.size(), start + batch);
    std::vector<textproc::EncodedDoc> chunk(docs.begin() + start,
                                            docs.begin() + end);
    std::vector<int> chunk_labels(labels.begin() + start, labels.begin() + end);
    const auto fwd = forward(model, chunk);
    total_loss += loss(fwd.logits, chunk_labels) *
                  static_cast<double>(chunk.size());
    for (Eigen::Index r = 0; r < fwd.logits.rows(); ++r) {
      Eigen::Index argmax = 0;
      fwd.logits.row(r).maxCoeff(&argmax);
      if (static_cast<int>(argmax) == chunk_labels[static_cast<std::size_t>(r)])
        ++correct;
    }
  }
  return {total_loss / static_cast<double>(docs.size()),
          static_cast<double>(correct) / static_cast<double>(docs.size())};
}

namespace {

// Adam/SGD over the canonical tensor views, with global-norm clipping
// applied to the raw gradients first.
class OptimizerState {
 public:
  explicit OptimizerState(BiLstmModel& model) : views_(parameter_views(model)) {
    for (const auto& v : views_) {
      m_.emplace_back(Vector::Zero(v.size()));
      v_.emplace_back(Vector::Zero(v.size()));
    }
  }

  void step(BiLstmModel& model, Gradients& grads) {
    const auto& cfg = model.config;
    const double norm = grads.global_norm();
    if (norm > cfg.clip_norm && norm > 0) {
      grads.scale(cfg.clip_norm / norm);
    }
    auto gviews = gradient_views(grads);
    if (cfg.optimizer == Optimizer::Sgd) {
      for (std::size_t t = 0; t < views_.size(); ++t) {
        Eigen::Map<Vector> p(views_[t].data, views_[t].size());
        Eigen::Map<const Vector> g(gviews[t].data, gviews[t].size());
        p -= cfg.learning_rate * g;
      }
      return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t_);
    for (std::size_t t = 0; t < views_.size(); ++t) {
      Eigen::Map<Vector> p(views_[t].data, views_[t].size());
      Eigen::Map<const Vector> g(gviews[t].data, gviews[t].size());
      m_[t] = cfg.adam_beta1 * m_[t] + (1.0 - cfg.adam_beta1) * g;
      v_[t] = cfg.adam_beta2 * v_[t] +
              (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
      const Vector m_hat = m_[t] / bc1;
      const Vector v_hat = v_[t] / bc2;
      p.array() -= cfg.learning_rate * m_hat.array() /
                   (v_hat.array().sqrt() + cfg.adam_eps);
    }
  }

 private:
  std::vector<TensorView> views_;
  std::vector<Vector> m_, v_;
  int t_ = 0;
};

}  // namespace

TrainResult train(const BiLstmModel& initial,
                  const std::vector<textproc::EncodedDoc>& train_docs,
                  const std::vector<int>& train_labels,
                  const std::vector<textproc::EncodedDoc>& val_docs,
                  const std::vector<int>& val_labels) {
  if (train_docs.empty() || val_docs.empty() ||
      train_docs.size() != train_labels.size() ||
      val_docs.size() != val_labels.size()) {
    throw ValidationError("train: train and validation sets must be non-empty");
  }

  BiLstmModel model = initial;
  const auto& cfg = model.config;
  OptimizerState optimizer(model);
  Rng rng(cfg.seed);

  TrainResult result;
  result.model = model;
  EarlyStopTracker tracker(cfg.min_improvement, cfg.early_stop_patience);

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(),
                                start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<textproc::EncodedDoc> batch;
      std::vector<int> labels;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_docs[order[i]]);
        labels.push_back(train_labels[order[i]]);
      }
      const auto fwd = forward(model, batch);
      const double batch_loss = loss(fwd.logits, labels);
      if (!std::isfinite(batch_loss)) {
        throw NonFiniteLoss("train: non-finite training loss at epoch " +
                            std::to_string(epoch));
      }
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      Gradients grads = backward(model, fwd, labels);
      optimizer.step(model, grads);
    }
    epoch_loss /= static_cast<double>(train_docs.size());

    const EvalStats val = evaluate(model, val_docs, val_labels);
    if (!std::isfinite(val.loss)) {
      throw NonFiniteLoss("train: non-finite validation loss at epoch " +
                          std::to_string(epoch));
    }
    result.report.epochs.push_back(
        EpochStats{epoch, epoch_loss, val.loss, val.accuracy});

    const bool stop = tracker.observe(epoch, val.loss);
    if (tracker.hit_new_minimum()) {
      result.model = model;
    }
    result.report.best_epoch = tracker.best_epoch();
    if (stop) {
      result.report.stopped_early = true;
      break;
    }
  }
  return result;
}

Prediction predict(const BiLstmModel& model, const textproc::EncodedDoc& doc) {
  const auto fwd = forward(model, {doc});
  const Matrix probs = softmax_rows(fwd.logits);
  Eigen::Index argmax = 0;
  probs.row(0).maxCoeff(&argmax);
  Prediction p;
  p.label = static_cast<int>(argmax);
  p.probabilities = probs.row(0).transpose();
  return p;
}

void TrainReport::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("train report: cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  out.precision(17);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ','
        << e.val_accuracy << '\n';
  }
}

namespace {
constexpr char kModelMagic[] = "IOTW-BILSTM";
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void save_model(const BiLstmModel& model, const std::filesystem::path& path) {
  std::ostringstream body;
  binio::write_string(body, kModelMagic);
  binio::write_u32(body, kModelVersion);
  const auto& c = model.config;
  binio::write_u32(body, static_cast<std::uint32_t>(c.hidden_size));
  binio::write_u32(body, static_cast<std::uint32_t>(c.embedding_dim));
  binio::write_u32(body, static_cast<std::uint32_t>(c.num_classes));
  binio::write_u32(body, static_cast<std::uint32_t>(c.max_len));
  binio::write_f64(body, c.learning_rate);
  binio::write_u32(body, static_cast<std::uint32_t>(c.batch_size));
  binio::write_u32(body, static_cast<std::uint32_t>(c.max_epochs));
  binio::write_u32(body, static_cast<std::uint32_t>(c.early_stop_patience));
  binio::write_u64(body, c.seed);
  binio::write_u8(body, c.optimizer == Optimizer::Adam ? 1 : 0);
  binio::write_f64(body, c.adam_beta1);
  binio::write_f64(body, c.adam_beta2);
  binio::write_f64(body, c.adam_eps);
  binio::write_f64(body, c.clip_norm);
  binio::write_f64(body, c.min_improvement);
  binio::write_u64(body, model.vocab_hash);

  auto views = parameter_views(const_cast<BiLstmModel&>(model));
  binio::write_u32(body, static_cast<std::uint32_t>(views.size()));
  for (const auto& view : views) {
    binio::write_string(body, view.name);
    binio::write_u64(body, static_cast<std::uint64_t>(view.rows));
    binio::write_u64(body, static_cast<std::uint64_t>(view.cols));
    // Row-major on disk, independent of Eigen's storage order.
    Eigen::Map<const Matrix> m(view.data, view.rows, view.cols);
    for (Eigen::Index r = 0; r < view.rows; ++r)
      for (Eigen::Index col = 0; col < view.cols; ++col)
        binio::write_f64(body, m(r, col));
  }

  const std::string payload = body.str();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("save_model: cannot write " + path.string());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  binio::Fnv1a checksum;
  checksum.update(payload);
  binio::write_u64(out, checksum.digest());
}

BiLstmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("load_model: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < 8) throw ValueError("load_model: truncated file");

  const std::string payload = bytes.substr(0, bytes.size() - 8);
  binio::Fnv1a checksum;
  checksum.update(payload);
  std::istringstream tail(bytes.substr(bytes.size() - 8));
  if (binio::read_u64(tail) != checksum.digest()) {
    throw IntegrityError("load_model: checksum mismatch in " + path.string());
  }

  std::istringstream body(payload);
  if (binio::read_string(body) != kModelMagic) {
    throw ValueError("load_model: " + path.string() +
                     " is not an IOTW-BILSTM file");
  }
  if (binio::read_u32(body) != kModelVersion) {
    throw ValueError("load_model: unsupported format version");
  }

  BiLstmConfig c;
  c.hidden_size = static_cast<int>(binio::read_u32(body));
  c.embedding_dim = static_cast<int>(binio::read_u32(body));
  c.num_classes = static_cast<int>(binio::read_u32(body));
  c.max_len = static_cast<int>(binio::read_u32(body));
  c.learning_rate = binio::read_f64(body);
  c.batch_size = static_cast<int>(binio::read_u32(body));
  c.max_epochs = static_cast<int>(binio::read_u32(body));
  c.early_stop_patience = static_cast<int>(binio::read_u32(body));
  c.seed = binio::read_u64(body);
  c.optimizer = binio::read_u8(body) == 1 ? Optimizer::Adam : Optimizer::Sgd;
  c.adam_beta1 = binio::read_f64(body);
  c.adam_beta2 = binio::read_f64(body);
  c.adam_eps = binio::read_f64(body);
  c.clip_norm = binio::read_f64(body);
  c.min_improvement = binio::read_f64(body);

  BiLstmModel model;
  model.config = c;
  model.vocab_hash = binio::read_u64(body);

  const std::uint32_t n_tensors = binio::read_u32(body);
  // Size the tensors, then fill them through the canonical views by name.
  model.embeddings.resize(0, c.embedding_dim);
  const int h = c.hidden_size;
  model.forward_cell.w.resize(4 * h, c.embedding_dim);
  model.forward_cell.u.resize(4 * h, h);
  model.forward_cell.b.resize(4 * h);
  model.backward_cell.w.resize(4 * h, c.embedding_dim);
  model.backward_cell.u.resize(4 * h, h);
  model.backward_cell.b.resize(4 * h);
  model.w_out.resize(c.num_classes, 2 * h);
  model.b_out.resize(c.num_classes);

  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    const std::string name = binio::read_string(body);
    const auto rows = static_cast<Eigen::Index>(binio::read_u64(body));
    const auto cols = static_cast<Eigen::Index>(binio::read_u64(body));
    if (name == "embeddings") {
      model.embeddings.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index col = 0; col < cols; ++col)
          model.embeddings(r, col) = binio::read_f64(body);
      continue;
    }
    auto views = parameter_views(model);
    auto it = std::find_if(views.begin(), views.end(),
                           [&](const TensorView& v) { return v.name == name; });
    if (it == views.end()) {
      throw ValueError("load_model: unknown tensor '" + name + "'");
    }
    if (it->rows != rows || it->cols != cols) {
      throw ShapeError("load_model: tensor '" + name + "' has shape " +
                       std::to_string(rows) + "x" + std::to_string(cols) +
                       ", expected " + std::to_string(it->rows) + "x" +
                       std::to_string(it->cols));
    }
    Eigen::Map<Matrix> m(it->data, rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index col = 0; col < cols; ++col)
        m(r, col) = binio::read_f64(body);
  }
  return model;
}

}  // namespace iotw::bilstm
