#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "iotw/bilstm.hpp"
#include "iotw/errors.hpp"
#include "iotw/rng.hpp"
#include "iotw/textproc.hpp"
#include "test_support.hpp"

using namespace iotw;
using testsupport::TempDir;

namespace {

textproc::EncodedDoc make_doc(std::vector<int> ids) {
  textproc::EncodedDoc doc;
  doc.true_length = 0;
  for (int id : ids) {
    if (id != textproc::kPadId) ++doc.true_length;
  }
  doc.ids = std::move(ids);
  return doc;
}

bilstm::BiLstmModel tiny_model(int vocab, int dim, int hidden, int classes,
                               int max_len, std::uint64_t seed) {
  bilstm::BiLstmConfig config;
  config.hidden_size = hidden;
  config.embedding_dim = dim;
  config.num_classes = classes;
  config.max_len = max_len;
  config.seed = seed;
  const auto embeddings = textproc::init_embeddings(
      textproc::build_vocab(
          {[&] {
            std::vector<std::string> tokens;
            for (int i = 0; i < vocab - 2; ++i)
              tokens.push_back("tok" + std::to_string(i));
            return tokens;
          }()},
          1),
      dim, seed + 1);
  return bilstm::init_model(config, static_cast<std::size_t>(vocab),
                            embeddings);
}

double loss_at(const bilstm::BiLstmModel& model,
               const std::vector<textproc::EncodedDoc>& docs,
               const std::vector<int>& labels) {
  return bilstm::loss(bilstm::forward(model, docs).logits, labels);
}

// Central finite differences against the analytic gradients, returning the
// worst relative error across every parameter tensor.
double max_gradient_error(bilstm::BiLstmModel& model,
                          const std::vector<textproc::EncodedDoc>& docs,
                          const std::vector<int>& labels, double eps) {
  const auto fwd = bilstm::forward(model, docs);
  auto grads = bilstm::backward(model, fwd, labels);
  auto params = bilstm::parameter_views(model);
  auto grad_views = bilstm::gradient_views(grads);

  double worst = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index i = 0; i < params[t].size(); ++i) {
      double& p = params[t].data[i];
      const double saved = p;
      p = saved + eps;
      const double up = loss_at(model, docs, labels);
      p = saved - eps;
      const double down = loss_at(model, docs, labels);
      p = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grad_views[t].data[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Separable two-class corpus over disjoint vocabularies.
struct ToyCorpus {
  textproc::Vocabulary vocab;
  std::vector<textproc::EncodedDoc> train_docs, val_docs;
  std::vector<int> train_labels, val_labels;
};

ToyCorpus separable_corpus(std::size_t train_per_class = 25,
                           std::size_t val_per_class = 10,
                           std::size_t max_len = 8) {
  std::vector<std::vector<std::string>> all_docs;
  Rng rng(1234);
  auto make_docs = [&](const std::string& prefix, std::size_t count) {
    std::vector<std::vector<std::string>> docs;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<std::string> tokens;
      const auto len = 3 + rng.below(4);
      for (std::size_t t = 0; t < len; ++t) {
        tokens.push_back(prefix + std::to_string(rng.below(10)));
      }
      docs.push_back(tokens);
      all_docs.push_back(tokens);
    }
    return docs;
  };
  const auto apples = make_docs("apple", train_per_class + val_per_class);
  const auto bolts = make_docs("bolt", train_per_class + val_per_class);

  ToyCorpus corpus;
  corpus.vocab = textproc::build_vocab(all_docs, 1);
  auto encode = [&](const std::vector<std::string>& tokens) {
    return textproc::encode(tokens, corpus.vocab, max_len);
  };
  for (std::size_t i = 0; i < train_per_class; ++i) {
    corpus.train_docs.push_back(encode(apples[i]));
    corpus.train_labels.push_back(0);
    corpus.train_docs.push_back(encode(bolts[i]));
    corpus.train_labels.push_back(1);
  }
  for (std::size_t i = train_per_class; i < train_per_class + val_per_class;
       ++i) {
    corpus.val_docs.push_back(encode(apples[i]));
    corpus.val_labels.push_back(0);
    corpus.val_docs.push_back(encode(bolts[i]));
    corpus.val_labels.push_back(1);
  }
  return corpus;
}

}  // namespace

TEST_SUITE("bilstm") {

TEST_CASE("init_model shapes follow the config") {
  const auto model = tiny_model(10, 4, 3, 2, 6, 0);
  CHECK(model.forward_cell.w.rows() == 12);
  CHECK(model.forward_cell.w.cols() == 4);
  CHECK(model.forward_cell.u.rows() == 12);
  CHECK(model.forward_cell.u.cols() == 3);
  CHECK(model.forward_cell.b.size() == 12);
  CHECK(model.w_out.rows() == 2);
  CHECK(model.w_out.cols() == 6);
  // Forget-gate bias slice is 1, everything else 0.
  CHECK(model.forward_cell.b.segment(3, 3).isOnes());
  CHECK(model.forward_cell.b.segment(0, 3).isZero());
  CHECK(model.forward_cell.b.segment(6, 6).isZero());
}

TEST_CASE("init_model determinism under the seed") {
  const auto a = tiny_model(10, 4, 3, 2, 6, 5);
  const auto b = tiny_model(10, 4, 3, 2, 6, 5);
  const auto c = tiny_model(10, 4, 3, 2, 6, 6);
  CHECK(a.forward_cell.w == b.forward_cell.w);
  CHECK(a.w_out == b.w_out);
  CHECK(a.forward_cell.w != c.forward_cell.w);
}

TEST_CASE("init_model rejects mismatched embedding shapes") {
  bilstm::BiLstmConfig config;
  config.hidden_size = 3;
  config.embedding_dim = 4;
  config.num_classes = 2;
  CHECK_THROWS_AS(
      bilstm::init_model(config, 10, bilstm::Matrix::Zero(10, 5)),
      ShapeError);
}

TEST_CASE("all-PAD document yields logits equal to the output bias") {
  auto model = tiny_model(10, 4, 3, 2, 6, 1);
  model.b_out << 0.25, -0.75;
  const auto fwd = bilstm::forward(model, {make_doc({0, 0, 0, 0})});
  CHECK(fwd.docs[0].rep.isZero());
  CHECK(fwd.logits(0, 0) == doctest::Approx(0.25));
  CHECK(fwd.logits(0, 1) == doctest::Approx(-0.75));
}

TEST_CASE("identical documents produce identical logit rows") {
  const auto model = tiny_model(12, 5, 4, 3, 6, 2);
  const auto doc = make_doc({2, 5, 7, 0, 0, 0});
  const auto fwd = bilstm::forward(model, {doc, doc, doc});
  for (int r = 1; r < 3; ++r) {
    CHECK(fwd.logits.row(r) == fwd.logits.row(0));
  }
}

TEST_CASE("single-token document matches a scalar single-step oracle") {
  const int hidden = 3, dim = 4, classes = 2;
  const auto model = tiny_model(9, dim, hidden, classes, 4, 3);
  const int token = 5;
  const auto fwd = bilstm::forward(model, {make_doc({token, 0, 0, 0})});

  // Plain-double oracle: one step per direction from zero state.
  auto cell_step = [&](const bilstm::LstmCell& cell, std::vector<double>* h) {
    std::vector<double> a(4 * hidden, 0.0);
    for (int r = 0; r < 4 * hidden; ++r) {
      double sum = cell.b(r);
      for (int c = 0; c < dim; ++c) {
        sum += cell.w(r, c) * model.embeddings(token, c);
      }
      a[static_cast<std::size_t>(r)] = sum;  // U h_prev = 0
    }
    for (int j = 0; j < hidden; ++j) {
      const double i_g = 1.0 / (1.0 + std::exp(-a[static_cast<std::size_t>(j)]));
      const double f_g =
          1.0 / (1.0 + std::exp(-a[static_cast<std::size_t>(hidden + j)]));
      const double g_g = std::tanh(a[static_cast<std::size_t>(2 * hidden + j)]);
      const double o_g =
          1.0 / (1.0 + std::exp(-a[static_cast<std::size_t>(3 * hidden + j)]));
      const double c_state = f_g * 0.0 + i_g * g_g;
      h->push_back(o_g * std::tanh(c_state));
    }
  };
  std::vector<double> rep;
  cell_step(model.forward_cell, &rep);
  cell_step(model.backward_cell, &rep);
  for (int k = 0; k < classes; ++k) {
    double logit = model.b_out(k);
    for (int j = 0; j < 2 * hidden; ++j) {
      logit += model.w_out(k, j) * rep[static_cast<std::size_t>(j)];
    }
    CHECK(fwd.logits(0, k) ==
          doctest::Approx(logit).epsilon(1e-12));
  }
}

TEST_CASE("loss on uniform logits is ln C") {
  bilstm::Matrix logits = bilstm::Matrix::Zero(1, 4);
  CHECK(bilstm::loss(logits, {2}) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-12));
}

TEST_CASE("loss vanishes as the true-class margin grows") {
  bilstm::Matrix logits(1, 2);
  logits << 100.0, 0.0;
  CHECK(bilstm::loss(logits, {0}) < 1e-10);
}

TEST_CASE("loss matches a frozen two-example hand computation") {
  bilstm::Matrix logits(2, 3);
  logits << 1.0, 2.0, 0.5, 0.2, -0.3, 0.1;
  CHECK(bilstm::loss(logits, {1, 0}) ==
        doctest::Approx(0.6925982198306021).epsilon(1e-12));
}

TEST_CASE("loss is permutation-invariant over the batch") {
  const auto model = tiny_model(16, 5, 4, 3, 6, 7);
  const std::vector<textproc::EncodedDoc> docs = {
      make_doc({2, 3, 0, 0}), make_doc({4, 5, 6, 0}), make_doc({7, 0, 0, 0})};
  const std::vector<int> labels = {0, 1, 2};
  const double a = loss_at(model, docs, labels);
  const double b = loss_at(model, {docs[2], docs[0], docs[1]}, {2, 0, 1});
  CHECK(a == doctest::Approx(b).epsilon(1e-15));
}

TEST_CASE("analytic gradients agree with central finite differences") {
  // V=20, D=5, H=4, C=3, L=6, B=2 at 64-bit, eps 1e-5.
  auto model = tiny_model(20, 5, 4, 3, 6, 11);
  const std::vector<textproc::EncodedDoc> docs = {
      make_doc({2, 7, 11, 3, 0, 0}), make_doc({5, 2, 0, 0, 0, 0})};
  const std::vector<int> labels = {1, 2};
  CHECK(max_gradient_error(model, docs, labels, 1e-5) < 1e-4);
}

TEST_CASE("PAD embedding row receives zero gradient") {
  auto model = tiny_model(12, 4, 3, 2, 5, 13);
  const auto fwd = bilstm::forward(model, {make_doc({3, 4, 0, 0, 0})});
  const auto grads = bilstm::backward(model, fwd, {1});
  CHECK(grads.d_embeddings.row(textproc::kPadId).isZero());
}

TEST_CASE("duplicated example doubles its contribution before averaging") {
  auto model = tiny_model(12, 4, 3, 2, 5, 17);
  const auto d1 = make_doc({3, 4, 5, 0, 0});
  const auto d2 = make_doc({6, 7, 0, 0, 0});

  auto grad_of = [&](const std::vector<textproc::EncodedDoc>& docs,
                     const std::vector<int>& labels) {
    const auto fwd = bilstm::forward(model, docs);
    return bilstm::backward(model, fwd, labels);
  };
  auto g1 = grad_of({d1}, {0});
  auto g2 = grad_of({d2}, {1});
  auto mixed = grad_of({d1, d1, d2}, {0, 0, 1});

  const bilstm::Matrix expected =
      (2.0 * g1.d_w_fwd + g2.d_w_fwd) / 3.0;
  CHECK((mixed.d_w_fwd - expected).cwiseAbs().maxCoeff() < 1e-12);
  const bilstm::Matrix expected_out =
      (2.0 * g1.d_w_out + g2.d_w_out) / 3.0;
  CHECK((mixed.d_w_out - expected_out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("padding neutrality: extra PAD leaves logits bit-identical") {
  const auto model = tiny_model(14, 5, 4, 3, 12, 19);
  const auto short_doc = make_doc({2, 9, 4});
  const auto padded = make_doc({2, 9, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto a = bilstm::forward(model, {short_doc});
  const auto b = bilstm::forward(model, {padded});
  CHECK(a.logits == b.logits);  // exact
}

TEST_CASE("early stopping follows the patience rule trace") {
  bilstm::EarlyStopTracker tracker(1e-4, 3);
  CHECK_FALSE(tracker.observe(1, 1.0));
  CHECK_FALSE(tracker.observe(2, 0.9));
  CHECK_FALSE(tracker.observe(3, 0.91));
  CHECK_FALSE(tracker.observe(4, 0.92));
  CHECK(tracker.observe(5, 0.93));  // third stale epoch triggers the stop
  CHECK(tracker.best_epoch() == 2);
}

TEST_CASE("early stopping ignores sub-threshold improvements") {
  bilstm::EarlyStopTracker tracker(1e-4, 2);
  CHECK_FALSE(tracker.observe(1, 1.0));
  CHECK_FALSE(tracker.observe(2, 1.0 - 5e-5));  // too small to count
  CHECK(tracker.observe(3, 1.0 - 9e-5));
  CHECK(tracker.best_epoch() == 3);  // exact minimum still tracked
}

TEST_CASE("train runs exactly one epoch when max_epochs is 1") {
  auto corpus = separable_corpus(4, 2, 6);
  auto model = tiny_model(static_cast<int>(corpus.vocab.size()), 4, 3, 2, 6, 23);
  auto config = model.config;
  config.max_epochs = 1;
  config.batch_size = 4;
  model.config = config;
  const auto result = bilstm::train(model, corpus.train_docs,
                                    corpus.train_labels, corpus.val_docs,
                                    corpus.val_labels);
  CHECK(result.report.epochs.size() == 1);
  CHECK(result.report.best_epoch == 1);
}

TEST_CASE("separable toy corpus reaches 100% validation accuracy") {
  auto corpus = separable_corpus();
  bilstm::BiLstmConfig config;
  config.hidden_size = 16;
  config.embedding_dim = 16;
  config.num_classes = 2;
  config.max_len = 8;
  config.learning_rate = 1e-2;
  config.batch_size = 10;
  config.max_epochs = 50;
  config.early_stop_patience = 50;
  config.seed = 29;
  const auto embeddings =
      textproc::init_embeddings(corpus.vocab, config.embedding_dim, 31);
  const auto model =
      bilstm::init_model(config, corpus.vocab.size(), embeddings);
  const auto result = bilstm::train(model, corpus.train_docs,
                                    corpus.train_labels, corpus.val_docs,
                                    corpus.val_labels);
  double best_acc = 0;
  for (const auto& epoch : result.report.epochs) {
    best_acc = std::max(best_acc, epoch.val_accuracy);
  }
  CHECK(best_acc == doctest::Approx(1.0));

  // Held-out documents classify correctly with the returned snapshot.
  const auto eval = bilstm::evaluate(result.model, corpus.val_docs,
                                     corpus.val_labels);
  CHECK(eval.accuracy == doctest::Approx(1.0));
}

TEST_CASE("training is bit-deterministic under the seed") {
  auto corpus = separable_corpus(6, 3, 6);
  bilstm::BiLstmConfig config;
  config.hidden_size = 5;
  config.embedding_dim = 6;
  config.num_classes = 2;
  config.max_len = 6;
  config.batch_size = 4;
  config.max_epochs = 4;
  config.seed = 37;
  const auto embeddings =
      textproc::init_embeddings(corpus.vocab, config.embedding_dim, 41);
  const auto model =
      bilstm::init_model(config, corpus.vocab.size(), embeddings);

  const auto a = bilstm::train(model, corpus.train_docs, corpus.train_labels,
                               corpus.val_docs, corpus.val_labels);
  const auto b = bilstm::train(model, corpus.train_docs, corpus.train_labels,
                               corpus.val_docs, corpus.val_labels);
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
    CHECK(a.report.epochs[e].train_loss == b.report.epochs[e].train_loss);
    CHECK(a.report.epochs[e].val_loss == b.report.epochs[e].val_loss);
  }
  CHECK(a.model.forward_cell.w == b.model.forward_cell.w);
  CHECK(a.model.embeddings == b.model.embeddings);
  CHECK(a.model.w_out == b.model.w_out);
}

TEST_CASE("divergence aborts with NonFiniteLoss naming the epoch") {
  auto corpus = separable_corpus(4, 2, 6);
  bilstm::BiLstmConfig config;
  config.hidden_size = 4;
  config.embedding_dim = 4;
  config.num_classes = 2;
  config.max_len = 6;
  config.batch_size = 2;
  config.max_epochs = 50;
  config.optimizer = bilstm::Optimizer::Sgd;
  config.learning_rate = 1e308;  // guaranteed overflow on the first step
  config.clip_norm = 1e9;
  config.seed = 3;
  const auto embeddings =
      textproc::init_embeddings(corpus.vocab, config.embedding_dim, 4);
  const auto model =
      bilstm::init_model(config, corpus.vocab.size(), embeddings);
  CHECK_THROWS_WITH_AS(
      bilstm::train(model, corpus.train_docs, corpus.train_labels,
                    corpus.val_docs, corpus.val_labels),
      doctest::Contains("epoch"), NonFiniteLoss);
}

TEST_CASE("predict returns normalised probabilities and the argmax") {
  const auto model = tiny_model(12, 4, 3, 3, 5, 43);
  const auto pred = bilstm::predict(model, make_doc({3, 7, 0, 0, 0}));
  CHECK(pred.probabilities.sum() == doctest::Approx(1.0).epsilon(1e-9));
  Eigen::Index argmax = 0;
  pred.probabilities.maxCoeff(&argmax);
  CHECK(pred.label == static_cast<int>(argmax));
}

TEST_CASE("softmax argmax is invariant to constant logit shifts") {
  bilstm::Matrix logits(1, 4);
  logits << 0.3, 1.9, -0.4, 1.1;
  const auto base = bilstm::softmax_rows(logits);
  const auto shifted = bilstm::softmax_rows(
      (logits.array() + 123.0).matrix());
  Eigen::Index a = 0, b = 0;
  base.row(0).maxCoeff(&a);
  shifted.row(0).maxCoeff(&b);
  CHECK(a == b);
  CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("model file round trip is bit exact and checksummed") {
  TempDir dir;
  auto model = tiny_model(15, 5, 4, 3, 6, 47);
  model.vocab_hash = 0xDEADBEEFCAFEF00DULL;
  const auto path = dir.file("model.bin");
  bilstm::save_model(model, path);
  const auto loaded = bilstm::load_model(path);
  CHECK(loaded.vocab_hash == model.vocab_hash);
  CHECK(loaded.config.hidden_size == model.config.hidden_size);
  CHECK(loaded.embeddings == model.embeddings);
  CHECK(loaded.forward_cell.w == model.forward_cell.w);
  CHECK(loaded.forward_cell.u == model.forward_cell.u);
  CHECK(loaded.forward_cell.b == model.forward_cell.b);
  CHECK(loaded.backward_cell.w == model.backward_cell.w);
  CHECK(loaded.w_out == model.w_out);
  CHECK(loaded.b_out == model.b_out);

  // Flipping one payload byte must be caught by the checksum.
  auto bytes = testsupport::read_file(path);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  testsupport::write_file(path, bytes);
  CHECK_THROWS_AS(bilstm::load_model(path), IntegrityError);
}

}  // TEST_SUITE
