#include "iotw/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <set>

#include "iotw/bilstm.hpp"
#include "iotw/binio.hpp"
#include "iotw/capecmap.hpp"
#include "iotw/corpus.hpp"
#include "iotw/csv.hpp"
#include "iotw/errors.hpp"
#include "iotw/evalstats.hpp"
#include "iotw/ingest.hpp"
#include "iotw/rng.hpp"
#include "iotw/textproc.hpp"

namespace iotw::cli {

using nlohmann::json;

RunConfig RunConfig::named(const std::string& preset) {
  RunConfig config;
  config.preset = preset;
  if (preset == "desk-default") {
    config.gbm = gbtree::GbmParams::desk_default();
  } else if (preset == "paper-capec") {
    config.gbm = gbtree::GbmParams::paper_capec();
    config.drop_excess_cwe_rows = true;
  } else {
    throw ValidationError("unknown preset '" + preset +
                          "' (expected desk-default or paper-capec)");
  }
  return config;
}

void RunConfig::apply_override(const std::string& key,
                               const std::string& value) {
  try {
    if (key == "n_estimators") gbm.n_estimators = std::stoi(value);
    else if (key == "learning_rate") gbm.learning_rate = std::stod(value);
    else if (key == "max_depth") gbm.max_depth = std::stoi(value);
    else if (key == "min_impurity_decrease")
      gbm.min_impurity_decrease = std::stod(value);
    else if (key == "min_samples_leaf") gbm.min_samples_leaf = std::stoi(value);
    else if (key == "histogram_mode")
      gbm.histogram_mode = value == "1" || value == "true";
    else if (key == "n_bins") gbm.n_bins = std::stoi(value);
    else if (key == "drop_excess_cwe_rows")
      drop_excess_cwe_rows = value == "1" || value == "true";
    else
      throw ValidationError("unknown configuration key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ValidationError("bad value '" + value + "' for key '" + key + "'");
  }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- shared option plumbing -------------------------------------------------

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string preset = "desk-default";
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  bool offline = false;

  RunConfig resolve() const {
    RunConfig config = RunConfig::named(preset);
    if (!config_file.empty()) {
      json j;
      try {
        j = json::parse(slurp(config_file));
      } catch (const json::parse_error& e) {
        throw ValidationError("config file " + config_file +
                              ": " + e.what());
      }
      for (const auto& [key, value] : j.items()) {
        config.apply_override(
            key, value.is_string() ? value.get<std::string>() : value.dump());
      }
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("override '" + kv + "' is not key=value");
      }
      config.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.gbm.seed = seed;
    return config;
  }
};

std::vector<int> parse_year_range(const std::string& spec) {
  std::vector<int> years;
  const auto dots = spec.find("..");
  try {
    if (dots == std::string::npos) {
      years.push_back(std::stoi(spec));
    } else {
      const int lo = std::stoi(spec.substr(0, dots));
      const int hi = std::stoi(spec.substr(dots + 2));
      if (hi < lo) throw ValidationError("year range '" + spec + "' is empty");
      for (int y = lo; y <= hi; ++y) years.push_back(y);
    }
  } catch (const std::invalid_argument&) {
    throw ValidationError("bad year range '" + spec + "' (expected Y or A..B)");
  }
  return years;
}

std::vector<ingest::CveEntry> load_feeds(
    const std::vector<std::string>& feed_files, const std::string& years_spec,
    const std::string& cache_dir) {
  std::vector<std::filesystem::path> paths(feed_files.begin(),
                                           feed_files.end());
  if (!years_spec.empty()) {
    ingest::FeedCache cache =
        ingest::FeedCache::from_env_or(cache_dir.empty() ? "nvd-cache"
                                                         : cache_dir);
    for (int year : parse_year_range(years_spec)) {
      paths.push_back(cache.feed_path(year));
    }
  }
  if (paths.empty()) {
    throw ValidationError("no feeds given: use --feed and/or --years");
  }
  std::vector<ingest::CveEntry> cves;
  for (const auto& path : paths) {
    std::string bytes = slurp(path);
    if (path.extension() == ".gz") bytes = ingest::gunzip(bytes);
    auto entries = ingest::parse_nvd_feed(bytes);
    cves.insert(cves.end(), std::make_move_iterator(entries.begin()),
                std::make_move_iterator(entries.end()));
  }
  return cves;
}

json multiclass_report_json(const evalstats::MulticlassReport& report,
                            const std::vector<std::string>& groups) {
  json per_class = json::array();
  for (std::size_t c = 0; c < report.precision.size(); ++c) {
    per_class.push_back({{"group", c < groups.size() ? groups[c] : ""},
                         {"precision", report.precision[c]},
                         {"recall", report.recall[c]},
                         {"precision_undefined",
                          static_cast<bool>(report.precision_undefined[c])},
                         {"recall_undefined",
                          static_cast<bool>(report.recall_undefined[c])}});
  }
  return {{"accuracy", report.accuracy},
          {"micro_precision", report.micro_precision},
          {"micro_recall", report.micro_recall},
          {"micro_f1", report.micro_f1},
          {"macro_precision", report.macro_precision},
          {"macro_recall", report.macro_recall},
          {"macro_f1", report.macro_f1},
          {"per_class", per_class}};
}

json confusion_matrix_json(const evalstats::ConfusionMatrix& cm) {
  json rows = json::array();
  for (std::size_t t = 0; t < cm.k; ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < cm.k; ++p) row.push_back(cm.at(t, p));
    rows.push_back(row);
  }
  return rows;
}

// CSV grid: header of predicted groups, one row per true group.
void write_confusion_csv(const evalstats::ConfusionMatrix& cm,
                         const std::vector<std::string>& groups,
                         const std::filesystem::path& path) {
  std::vector<csv::Row> rows;
  csv::Row header = {"truth\\predicted"};
  header.insert(header.end(), groups.begin(), groups.end());
  rows.push_back(header);
  for (std::size_t t = 0; t < cm.k; ++t) {
    csv::Row row = {groups[t]};
    for (std::size_t p = 0; p < cm.k; ++p) {
      row.push_back(std::to_string(cm.at(t, p)));
    }
    rows.push_back(row);
  }
  csv::write_file(path, rows);
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  std::string years;
  std::string cache_dir = "nvd-cache";
  std::string base_url = "https://nvd.nist.gov/feeds/json/cve/1.1/";
  bool force = false;
};

int cmd_ingest(const IngestArgs& args, const GlobalOptions& global) {
  const ingest::FeedCache cache = ingest::FeedCache::from_env_or(args.cache_dir);
  ingest::FetchOptions options;
  options.offline = global.offline;
  options.force = args.force;
  options.base_url = args.base_url;

  json years = json::array();
  std::size_t fetched = 0, from_cache = 0;
  for (int year : parse_year_range(args.years)) {
    const bool cached = cache.has(year) && !args.force;
    const std::string bytes = ingest::fetch_feed(year, cache, options);
    std::size_t drops = 0;
    const auto entries = ingest::parse_nvd_feed(bytes, &drops);
    cached ? ++from_cache : ++fetched;
    years.push_back({{"year", year},
                     {"entries", entries.size()},
                     {"empty_description_drops", drops},
                     {"from_cache", cached}});
  }
  json report = {{"cache_dir", cache.root.string()},
                 {"fetched", fetched},
                 {"from_cache", from_cache},
                 {"years", years}};
  std::cout << report.dump(2) << '\n';
  return 0;
}

// --- build-dataset ----------------------------------------------------------

struct BuildArgs {
  std::string kind = "weakness";
  std::string devices;
  std::vector<std::string> feeds;
  std::string years;
  std::string cache_dir;
  std::string grouping;
  std::string scope = "only-iot";
  std::string version;
  std::size_t min_count = 30;
  std::string capec_map;
  std::string cwe_capec;
  std::string out = "dataset.csv";
  std::string report_path;
};

int cmd_build_dataset(const BuildArgs& args, const GlobalOptions& global) {
  const RunConfig config = global.resolve();
  const auto cves = load_feeds(args.feeds, args.years, args.cache_dir);

  std::vector<ingest::DeviceRecord> devices;
  if (!args.devices.empty()) {
    devices = ingest::load_device_table(args.devices);
  }

  json report;
  if (args.kind == "weakness") {
    if (args.grouping.empty()) {
      throw ValidationError("build-dataset weakness requires --grouping");
    }
    const auto grouping = corpus::WeaknessLabelSpace::load(args.grouping);
    const auto scope = args.scope == "all-systems" ? corpus::Scope::AllSystems
                                                   : corpus::Scope::OnlyIot;
    if (scope == corpus::Scope::OnlyIot && devices.empty()) {
      throw ValidationError(
          "build-dataset --scope only-iot requires --devices");
    }

    const auto linked = ingest::link_devices(devices, cves);

    // CVE-only entries only feed the All-Systems corpus.
    std::set<std::string> linked_ids;
    for (const auto& pair : linked.pairs) linked_ids.insert(pair.cve.cve_id);
    std::vector<ingest::CveEntry> cve_only;
    for (const auto& cve : cves) {
      if (!linked_ids.count(cve.cve_id)) cve_only.push_back(cve);
    }

    std::size_t min_count = args.min_count;
    std::optional<double> balance_hint;
    std::string version_tag;
    if (!args.version.empty()) {
      const auto vc = corpus::version_config(args.version);
      min_count = vc.min_count;
      balance_hint = vc.oversample_ratio;
      version_tag = vc.tag;
    }

    corpus::BuildCounters counters;
    auto dataset =
        corpus::build_weakness_dataset(linked.pairs, cve_only, grouping,
                                       scope, &counters);
    auto filtered = corpus::filter_rare_classes(dataset, min_count);
    filtered.dataset.version_tag = version_tag;
    filtered.dataset.save(args.out);

    json histogram = json::object();
    const auto counts = filtered.dataset.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      histogram[filtered.dataset.groups[c]] = counts[c];
    }
    json removed = json::array();
    for (const auto& [group, count] : filtered.removed) {
      removed.push_back({{"group", group}, {"count", count}});
    }
    report = {{"kind", "weakness"},
              {"scope", corpus::scope_name(scope)},
              {"version", version_tag},
              {"records", filtered.dataset.examples.size()},
              {"records_before_filter", counters.examples},
              {"classes", filtered.dataset.groups.size()},
              {"sentinel_drops", counters.sentinel_drops},
              {"unmapped_drops", counters.unmapped_drops},
              {"unresolved_cve_refs", linked.unresolved.size()},
              {"min_count", min_count},
              {"removed_classes", removed},
              {"class_histogram", histogram},
              {"dataset", args.out}};
    if (balance_hint) {
      // Balancing happens on the training split (train-cwe --balance) to
      // keep duplicated examples out of the held-out split.
      report["train_balance_ratio"] = *balance_hint;
    }
  } else if (args.kind == "capec") {
    if (devices.empty() || args.capec_map.empty() || args.cwe_capec.empty()) {
      throw ValidationError(
          "build-dataset capec requires --devices, --capec-map and "
          "--cwe-capec");
    }
    const auto map = capecmap::load_capec_mapping(args.capec_map);
    const auto assoc = capecmap::load_cwe_capec(args.cwe_capec);
    capecmap::CapecBuildOptions options;
    options.drop_excess_cwe_rows = config.drop_excess_cwe_rows;
    capecmap::CapecBuildCounters counters;
    const auto rows = capecmap::build_capec_dataset(devices, cves, assoc, map,
                                                    options, &counters);
    if (rows.empty()) {
      throw ValidationError("build-dataset capec: no usable rows");
    }
    capecmap::save_capec_dataset(rows, args.out);

    json label_histogram = json::object();
    std::array<std::size_t, capecmap::kNumAptClasses + 1> by_count{};
    std::array<std::size_t, capecmap::kNumAptClasses> by_class{};
    for (const auto& row : rows) {
      const auto set = static_cast<std::size_t>(std::accumulate(
          row.labels.begin(), row.labels.end(), 0));
      ++by_count[set];
      for (std::size_t l = 0; l < capecmap::kNumAptClasses; ++l) {
        by_class[l] += static_cast<std::size_t>(row.labels[l]);
      }
    }
    for (std::size_t n = 1; n <= capecmap::kNumAptClasses; ++n) {
      label_histogram[std::to_string(n)] = by_count[n];
    }
    json class_prevalence = json::object();
    for (std::size_t l = 0; l < capecmap::kNumAptClasses; ++l) {
      class_prevalence[capecmap::apt_class_names()[l]] = by_class[l];
    }
    report = {{"kind", "capec"},
              {"records", rows.size()},
              {"no_weakness_drops", counters.no_weakness_drops},
              {"empty_label_drops", counters.empty_label_drops},
              {"excess_cwe_rows", counters.excess_cwe_rows},
              {"excess_cwe_policy",
               config.drop_excess_cwe_rows ? "delete" : "truncate"},
              {"unmapped_capec_refs", counters.unmapped_capec_refs},
              {"unresolved_cve_refs", counters.unresolved_cves},
              {"labels_per_row", label_histogram},
              {"class_prevalence", class_prevalence},
              {"dataset", args.out}};
  } else {
    throw ValidationError("build-dataset: --kind must be weakness or capec");
  }

  const std::string text = report.dump(2) + "\n";
  if (!args.report_path.empty()) write_text(args.report_path, text);
  std::cout << text;
  return 0;
}

// --- train-cwe ---------------------------------------------------------------

struct TrainCweArgs {
  std::string dataset;
  std::string out = "bilstm.model";
  std::string vocab_out;
  std::string report_path;
  std::string metrics_path;
  std::string embeddings_file;
  int epochs = 100;
  int hidden = 128;
  int embed_dim = 300;
  int max_len = 256;
  int batch = 32;
  double lr = 1e-3;
  int patience = 10;
  std::uint64_t min_freq = 2;
  double test_fraction = 0.10;
  double balance = 0.0;  // oversample target ratio on the train split
  std::string optimizer = "adam";
};

int cmd_train_cwe(const TrainCweArgs& args, const GlobalOptions& global) {
  const auto dataset = corpus::WeaknessDataset::load(args.dataset);

  corpus::SplitSpec spec;
  spec.test_fraction = args.test_fraction;
  spec.seed = global.seed;
  auto split = corpus::stratified_split(dataset, spec);
  if (args.balance > 0) {
    split.train = corpus::oversample_balance(split.train, args.balance,
                                             global.seed);
  }

  auto tokens_of = [](const corpus::WeaknessDataset& ds) {
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(ds.examples.size());
    for (const auto& ex : ds.examples) {
      tokens.push_back(textproc::tokenize(textproc::clean_text(ex.text)));
    }
    return tokens;
  };
  const auto train_tokens = tokens_of(split.train);
  const auto val_tokens = tokens_of(split.test);
  const auto vocab = textproc::build_vocab(train_tokens, args.min_freq);

  auto encode_all = [&](const std::vector<std::vector<std::string>>& docs) {
    std::vector<textproc::EncodedDoc> encoded;
    encoded.reserve(docs.size());
    for (const auto& tokens : docs) {
      encoded.push_back(textproc::encode(tokens, vocab,
                                         static_cast<std::size_t>(args.max_len)));
    }
    return encoded;
  };
  const auto train_docs = encode_all(train_tokens);
  const auto val_docs = encode_all(val_tokens);
  std::vector<int> train_labels, val_labels;
  for (const auto& ex : split.train.examples) train_labels.push_back(ex.label);
  for (const auto& ex : split.test.examples) val_labels.push_back(ex.label);

  bilstm::BiLstmConfig config;
  config.hidden_size = args.hidden;
  config.embedding_dim = args.embed_dim;
  config.num_classes = static_cast<int>(dataset.groups.size());
  config.max_len = args.max_len;
  config.learning_rate = args.lr;
  config.batch_size = args.batch;
  config.max_epochs = args.epochs;
  config.early_stop_patience = args.patience;
  config.seed = global.seed;
  config.optimizer = args.optimizer == "sgd" ? bilstm::Optimizer::Sgd
                                             : bilstm::Optimizer::Adam;
  config.validate();

  std::optional<std::filesystem::path> pretrained;
  if (!args.embeddings_file.empty()) pretrained = args.embeddings_file;
  const auto embeddings = textproc::init_embeddings(
      vocab, config.embedding_dim, global.seed, pretrained);

  auto model = bilstm::init_model(config, vocab.size(), embeddings);
  model.vocab_hash = vocab.hash();
  auto result = bilstm::train(model, train_docs, train_labels, val_docs,
                              val_labels);
  result.model.vocab_hash = vocab.hash();

  bilstm::save_model(result.model, args.out);
  const std::string vocab_path =
      args.vocab_out.empty() ? args.out + ".vocab.csv" : args.vocab_out;
  vocab.save(vocab_path);
  if (!args.report_path.empty()) result.report.save_csv(args.report_path);

  // Validation metrics from the best snapshot.
  std::vector<int> predictions;
  predictions.reserve(val_docs.size());
  for (const auto& doc : val_docs) {
    predictions.push_back(bilstm::predict(result.model, doc).label);
  }
  const auto cm = evalstats::confusion_matrix(val_labels, predictions,
                                              dataset.groups.size());
  const auto report = evalstats::multiclass_metrics(cm);

  json epochs = json::array();
  for (const auto& e : result.report.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}});
  }
  json metrics = {{"model", args.out},
                  {"vocabulary", vocab_path},
                  {"vocab_hash", vocab.hash()},
                  {"classes", dataset.groups.size()},
                  {"train_examples", train_docs.size()},
                  {"val_examples", val_docs.size()},
                  {"best_epoch", result.report.best_epoch},
                  {"stopped_early", result.report.stopped_early},
                  {"epochs", epochs},
                  {"validation", multiclass_report_json(report, dataset.groups)},
                  {"confusion_matrix", confusion_matrix_json(cm)}};
  const std::string text = metrics.dump(2) + "\n";
  if (!args.metrics_path.empty()) write_text(args.metrics_path, text);
  std::cout << text;
  return 0;
}

// --- train-capec -------------------------------------------------------------

struct TrainCapecArgs {
  std::string dataset;
  std::string out = "gbm.model";
  std::string encoders_out;
  std::string metrics_path;
  double test_fraction = 0.10;
  double threshold = 0.5;
};

json multilabel_metrics_json(
    const std::vector<capecmap::LabelVector>& truth,
    const std::vector<capecmap::LabelVector>& predicted) {
  std::vector<std::vector<int>> y, z;
  std::vector<evalstats::LabelSet> y_sets, z_sets;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    y.emplace_back(truth[i].begin(), truth[i].end());
    z.emplace_back(predicted[i].begin(), predicted[i].end());
    evalstats::LabelSet ys, zs;
    for (int l = 0; l < static_cast<int>(capecmap::kNumAptClasses); ++l) {
      if (truth[i][static_cast<std::size_t>(l)]) ys.insert(l);
      if (predicted[i][static_cast<std::size_t>(l)]) zs.insert(l);
    }
    y_sets.push_back(std::move(ys));
    z_sets.push_back(std::move(zs));
  }

  const auto example = evalstats::multilabel_example_metrics(y_sets, z_sets);
  const auto label = evalstats::multilabel_label_metrics(y, z);
  const auto alpha0 =
      evalstats::mean_alpha(y_sets, z_sets, evalstats::AlphaParams::make(0.0));
  const auto alpha1 =
      evalstats::mean_alpha(y_sets, z_sets, evalstats::AlphaParams::make(1.0));

  std::size_t exact = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) ++exact;
  }

  return {{"example_based",
           {{"precision", example.precision},
            {"recall", example.recall},
            {"f1", example.f1},
            {"accuracy", example.accuracy}}},
          {"label_based",
           {{"macro_precision", label.precision.macro},
            {"micro_precision", label.precision.micro},
            {"macro_recall", label.recall.macro},
            {"micro_recall", label.recall.micro},
            {"macro_f1", label.f1.macro},
            {"micro_f1", label.f1.micro},
            {"macro_accuracy", label.accuracy.macro},
            {"micro_accuracy", label.accuracy.micro}}},
          {"alpha_score_0", alpha0.mean},
          {"alpha_score_1", alpha1.mean},
          {"outcomes",
           {{"fully_correct", alpha1.fully_correct},
            {"partly_correct", alpha1.partly_correct},
            {"fully_incorrect", alpha1.fully_incorrect}}},
          {"exact_match_accuracy",
           static_cast<double>(exact) / static_cast<double>(truth.size())}};
}

int cmd_train_capec(const TrainCapecArgs& args, const GlobalOptions& global) {
  const RunConfig config = global.resolve();
  const auto rows = capecmap::load_capec_dataset(args.dataset);
  if (rows.size() < 2) {
    throw ValidationError("train-capec: need at least 2 rows");
  }

  // Shuffled split, same rounding/clamping rule as the weakness corpus.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(global.seed);
  rng.shuffle(order);
  auto n_test = static_cast<std::size_t>(std::llround(
      static_cast<double>(rows.size()) * args.test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);

  std::vector<capecmap::CapecRow> train_rows, test_rows;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? test_rows : train_rows).push_back(rows[order[i]]);
  }

  const auto encoders = capecmap::fit_encoders(train_rows);
  auto encode_rows = [&](const std::vector<capecmap::CapecRow>& subset) {
    std::vector<std::vector<double>> features;
    features.reserve(subset.size());
    for (const auto& row : subset) {
      const auto encoded = capecmap::encode_row(row, encoders);
      features.emplace_back(encoded.begin(), encoded.end());
    }
    return gbtree::FeatureMatrix::from_rows(features);
  };
  const auto train_x = encode_rows(train_rows);
  const auto test_x = encode_rows(test_rows);
  std::vector<capecmap::LabelVector> train_y, test_y;
  for (const auto& row : train_rows) train_y.push_back(row.labels);
  for (const auto& row : test_rows) test_y.push_back(row.labels);

  auto model = gbtree::fit_multilabel(train_x, train_y, config.gbm);
  model.encoder_hash = encoders.hash();
  gbtree::save_gbm(model, args.out);
  const std::string encoders_path =
      args.encoders_out.empty() ? args.out + ".encoders.json"
                                : args.encoders_out;
  encoders.save(encoders_path);

  std::vector<capecmap::LabelVector> predictions;
  predictions.reserve(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    predictions.push_back(
        gbtree::predict_labels(model, test_x.row(i), args.threshold));
  }

  json metrics = {{"model", args.out},
                  {"encoders", encoders_path},
                  {"encoder_hash", encoders.hash()},
                  {"preset", config.preset},
                  {"params",
                   {{"n_estimators", config.gbm.n_estimators},
                    {"learning_rate", config.gbm.learning_rate},
                    {"max_depth", config.gbm.max_depth},
                    {"min_impurity_decrease", config.gbm.min_impurity_decrease},
                    {"min_samples_leaf", config.gbm.min_samples_leaf},
                    {"histogram_mode", config.gbm.histogram_mode},
                    {"n_bins", config.gbm.n_bins}}},
                  {"train_rows", train_rows.size()},
                  {"test_rows", test_rows.size()},
                  {"threshold", args.threshold},
                  {"test_metrics", multilabel_metrics_json(test_y, predictions)}};
  const std::string text = metrics.dump(2) + "\n";
  if (!args.metrics_path.empty()) write_text(args.metrics_path, text);
  std::cout << text;
  return 0;
}

// --- eval / predict ----------------------------------------------------------

enum class ModelKind { BiLstm, Gbm };

ModelKind detect_model_kind(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open model " + path.string());
  try {
    const std::string magic = binio::read_string(in);
    if (magic == "IOTW-BILSTM") return ModelKind::BiLstm;
    if (magic == "IOTW-GBM") return ModelKind::Gbm;
  } catch (const Error&) {
  }
  throw ValueError("model " + path.string() +
                   " carries no recognised IOTW magic");
}

struct EvalArgs {
  std::string model;
  std::string dataset;
  std::string vocab;
  std::string encoders;
  std::string metrics_path;
  std::string confusion_csv;
  double threshold = 0.5;
};

int cmd_eval(const EvalArgs& args, const GlobalOptions&) {
  json metrics;
  if (detect_model_kind(args.model) == ModelKind::BiLstm) {
    if (args.vocab.empty()) {
      throw ValidationError("eval: Bi-LSTM models require --vocab");
    }
    const auto model = bilstm::load_model(args.model);
    const auto vocab = textproc::Vocabulary::load(args.vocab);
    if (vocab.hash() != model.vocab_hash) {
      throw ValidationError(
          "eval: vocabulary hash mismatch: model was trained with a "
          "different vocabulary than " + args.vocab);
    }
    const auto dataset = corpus::WeaknessDataset::load(args.dataset);
    if (static_cast<int>(dataset.groups.size()) != model.config.num_classes) {
      throw ValidationError(
          "eval: dataset has " + std::to_string(dataset.groups.size()) +
          " classes but the model predicts " +
          std::to_string(model.config.num_classes));
    }
    std::vector<int> truth, predicted;
    for (const auto& ex : dataset.examples) {
      const auto doc = textproc::encode(
          textproc::tokenize(textproc::clean_text(ex.text)), vocab,
          static_cast<std::size_t>(model.config.max_len));
      truth.push_back(ex.label);
      predicted.push_back(bilstm::predict(model, doc).label);
    }
    const auto cm =
        evalstats::confusion_matrix(truth, predicted, dataset.groups.size());
    if (!args.confusion_csv.empty()) {
      write_confusion_csv(cm, dataset.groups, args.confusion_csv);
    }
    metrics = {{"model", args.model},
               {"dataset", args.dataset},
               {"examples", truth.size()},
               {"metrics",
                multiclass_report_json(evalstats::multiclass_metrics(cm),
                                       dataset.groups)},
               {"confusion_matrix", confusion_matrix_json(cm)}};
  } else {
    if (args.encoders.empty()) {
      throw ValidationError("eval: GBM models require --encoders");
    }
    const auto model = gbtree::load_gbm(args.model);
    const auto encoders = capecmap::FeatureEncoders::load(args.encoders);
    if (encoders.hash() != model.encoder_hash) {
      throw ValidationError(
          "eval: encoder hash mismatch: model was trained with different "
          "encoders than " + args.encoders);
    }
    const auto rows = capecmap::load_capec_dataset(args.dataset);
    std::vector<capecmap::LabelVector> truth, predicted;
    for (const auto& row : rows) {
      const auto features = capecmap::encode_row(row, encoders);
      truth.push_back(row.labels);
      predicted.push_back(
          gbtree::predict_labels(model, features.data(), args.threshold));
    }
    metrics = {{"model", args.model},
               {"dataset", args.dataset},
               {"examples", rows.size()},
               {"threshold", args.threshold},
               {"metrics", multilabel_metrics_json(truth, predicted)}};
  }
  const std::string text = metrics.dump(2) + "\n";
  if (!args.metrics_path.empty()) write_text(args.metrics_path, text);
  std::cout << text;
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string vocab;
  std::string encoders;
  std::string input;
  std::string out;
  double threshold = 0.5;
};

int cmd_predict(const PredictArgs& args, const GlobalOptions&) {
  const std::string input_bytes = slurp(args.input);
  std::ostringstream out;

  if (input_bytes.empty()) {
    // Empty input file: empty output, success.
  } else if (detect_model_kind(args.model) == ModelKind::BiLstm) {
    if (args.vocab.empty()) {
      throw ValidationError("predict: Bi-LSTM models require --vocab");
    }
    const auto model = bilstm::load_model(args.model);
    const auto vocab = textproc::Vocabulary::load(args.vocab);
    if (vocab.hash() != model.vocab_hash) {
      throw ValidationError(
          "predict: vocabulary hash mismatch: model was trained with a "
          "different vocabulary than " + args.vocab);
    }
    const auto rows = csv::parse(input_bytes);
    if (rows.empty()) {
      throw ValidationError("predict: input has no header row");
    }
    const auto it = std::find(rows[0].begin(), rows[0].end(), "text");
    if (it == rows[0].end()) {
      throw SchemaError("predict: input CSV needs a 'text' column");
    }
    const auto text_col = static_cast<std::size_t>(it - rows[0].begin());
    out << "label,group_probabilities\n";
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() <= text_col) {
        throw ValueError("predict: input row " + std::to_string(r) +
                         " lacks the text column");
      }
      const auto doc = textproc::encode(
          textproc::tokenize(textproc::clean_text(rows[r][text_col])), vocab,
          static_cast<std::size_t>(model.config.max_len));
      const auto pred = bilstm::predict(model, doc);
      out << pred.label << ',';
      for (Eigen::Index i = 0; i < pred.probabilities.size(); ++i) {
        if (i) out << ';';
        out << pred.probabilities(i);
      }
      out << '\n';
    }
  } else {
    if (args.encoders.empty()) {
      throw ValidationError("predict: GBM models require --encoders");
    }
    const auto model = gbtree::load_gbm(args.model);
    const auto encoders = capecmap::FeatureEncoders::load(args.encoders);
    if (encoders.hash() != model.encoder_hash) {
      throw ValidationError(
          "predict: encoder hash mismatch: model was trained with different "
          "encoders than " + args.encoders);
    }
    const auto rows = capecmap::load_capec_dataset(args.input);
    csv::Row header;
    for (const auto& name : capecmap::apt_class_names())
      header.push_back("L_" + name);
    for (const auto& name : capecmap::apt_class_names())
      header.push_back("P_" + name);
    csv::write_row(out, header);
    for (const auto& row : rows) {
      const auto features = capecmap::encode_row(row, encoders);
      const auto probs = gbtree::predict_proba(model, features.data());
      csv::Row line;
      for (double p : probs)
        line.push_back(p >= args.threshold ? "1" : "0");
      for (double p : probs) {
        std::ostringstream ss;
        ss.precision(17);
        ss << p;
        line.push_back(ss.str());
      }
      csv::write_row(out, line);
    }
  }

  if (args.out.empty()) {
    std::cout << out.str();
  } else {
    write_text(args.out, out.str());
  }
  return 0;
}

// --- compare -----------------------------------------------------------------

struct CompareArgs {
  std::string table;
  double critical_value = 0.0;
  bool lower_is_better = false;
  std::string out;
  std::string ranks_csv;
};

int cmd_compare(const CompareArgs& args, const GlobalOptions&) {
  const auto rows = csv::read_file(args.table);
  if (rows.size() < 3 || rows[0].size() < 3) {
    throw ValidationError(
        "compare: table needs a header of model names and at least 2 "
        "dataset rows x 2 model columns");
  }
  const std::size_t k = rows[0].size() - 1;
  std::vector<std::string> models(rows[0].begin() + 1, rows[0].end());
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> scores;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != k + 1) {
      throw ValidationError("compare: row " + std::to_string(r) +
                            " has the wrong column count");
    }
    datasets.push_back(rows[r][0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < rows[r].size(); ++c) {
      try {
        row.push_back(std::stod(rows[r][c]));
      } catch (const std::exception&) {
        throw ValidationError("compare: bad number '" + rows[r][c] +
                              "' at row " + std::to_string(r));
      }
    }
    scores.push_back(std::move(row));
  }

  const auto result = evalstats::friedman_pipeline(
      scores, !args.lower_is_better, args.critical_value);

  json rank_rows = json::array();
  for (std::size_t r = 0; r < result.table.ranks.size(); ++r) {
    json row = {{"dataset", datasets[r]}};
    for (std::size_t c = 0; c < k; ++c) {
      row[models[c]] = result.table.ranks[r][c];
    }
    rank_rows.push_back(row);
  }
  json mean_ranks = json::object();
  for (std::size_t c = 0; c < k; ++c) {
    mean_ranks[models[c]] = result.table.mean_ranks[c];
  }
  json report = {{"models", models},
                 {"datasets", datasets},
                 {"ranks", rank_rows},
                 {"mean_ranks", mean_ranks},
                 {"friedman_chi2", result.chi2},
                 {"iman_davenport_f", result.f_statistic},
                 {"critical_value", result.critical_value},
                 {"decision", evalstats::decision_name(result.decision)}};

  if (!args.ranks_csv.empty()) {
    std::vector<csv::Row> out_rows;
    csv::Row header = {"dataset"};
    header.insert(header.end(), models.begin(), models.end());
    out_rows.push_back(header);
    for (std::size_t r = 0; r < result.table.ranks.size(); ++r) {
      csv::Row row = {datasets[r]};
      for (double rank : result.table.ranks[r]) {
        std::ostringstream ss;
        ss << rank;
        row.push_back(ss.str());
      }
      out_rows.push_back(row);
    }
    csv::Row mean_row = {"mean_rank"};
    for (double rank : result.table.mean_ranks) {
      std::ostringstream ss;
      ss << rank;
      mean_row.push_back(ss.str());
    }
    out_rows.push_back(mean_row);
    csv::write_file(args.ranks_csv, out_rows);
  }

  const std::string text = report.dump(2) + "\n";
  if (!args.out.empty()) write_text(args.out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"IoT weakness and attack-pattern prediction toolkit"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Seed for every stochastic step");
  app.add_option("--preset", global.preset,
                 "Pipeline preset: desk-default or paper-capec");
  app.add_option("--config", global.config_file,
                 "JSON file of key=value parameter overrides");
  app.add_option("-p,--param", global.overrides,
                 "key=value parameter override (repeatable)");
  app.add_flag("--offline", global.offline,
               "Never touch the network; cache misses fail");

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Fetch NVD yearly feeds");
  ingest_cmd->add_option("--years", ingest_args.years, "Year or range A..B")
      ->required();
  ingest_cmd->add_option("--cache", ingest_args.cache_dir, "Cache directory");
  ingest_cmd->add_option("--base-url", ingest_args.base_url, "Feed base URL");
  ingest_cmd->add_flag("--force", ingest_args.force, "Re-download cached years");

  BuildArgs build_args;
  auto* build_cmd =
      app.add_subcommand("build-dataset", "Build weakness or CAPEC datasets");
  build_cmd->add_option("--kind", build_args.kind, "weakness or capec");
  build_cmd->add_option("--devices", build_args.devices, "Device CSV");
  build_cmd->add_option("--feed", build_args.feeds,
                        "Feed file (.json or .json.gz), repeatable");
  build_cmd->add_option("--years", build_args.years, "Cached years A..B");
  build_cmd->add_option("--cache", build_args.cache_dir, "Cache directory");
  build_cmd->add_option("--grouping", build_args.grouping,
                        "CWE grouping CSV (cwe_id,group_id)");
  build_cmd->add_option("--scope", build_args.scope, "only-iot or all-systems");
  build_cmd->add_option("--version", build_args.version,
                        "Dataset version tag (V1.1..V2.3)");
  build_cmd->add_option("--min-count", build_args.min_count,
                        "Minimum class size");
  build_cmd->add_option("--capec-map", build_args.capec_map,
                        "CAPEC->class CSV (capec_id,apt_class)");
  build_cmd->add_option("--cwe-capec", build_args.cwe_capec,
                        "CWE->CAPEC CSV (cwe_id,capec_id)");
  build_cmd->add_option("--out", build_args.out, "Dataset CSV path");
  build_cmd->add_option("--report", build_args.report_path,
                        "Build report JSON path");

  TrainCweArgs cwe_args;
  auto* cwe_cmd = app.add_subcommand("train-cwe",
                                     "Train the Bi-LSTM weakness classifier");
  cwe_cmd->add_option("--dataset", cwe_args.dataset, "Weakness dataset CSV")
      ->required();
  cwe_cmd->add_option("--out", cwe_args.out, "Model output path");
  cwe_cmd->add_option("--vocab-out", cwe_args.vocab_out, "Vocabulary CSV path");
  cwe_cmd->add_option("--report", cwe_args.report_path,
                      "Training curve CSV path");
  cwe_cmd->add_option("--metrics", cwe_args.metrics_path, "Metrics JSON path");
  cwe_cmd->add_option("--embeddings", cwe_args.embeddings_file,
                      "Pretrained word-vector text file");
  cwe_cmd->add_option("--epochs", cwe_args.epochs, "Maximum epochs");
  cwe_cmd->add_option("--hidden", cwe_args.hidden, "Hidden size");
  cwe_cmd->add_option("--embed-dim", cwe_args.embed_dim, "Embedding dimension");
  cwe_cmd->add_option("--max-len", cwe_args.max_len, "Sequence length cap");
  cwe_cmd->add_option("--batch", cwe_args.batch, "Batch size");
  cwe_cmd->add_option("--lr", cwe_args.lr, "Learning rate");
  cwe_cmd->add_option("--patience", cwe_args.patience, "Early-stop patience");
  cwe_cmd->add_option("--min-freq", cwe_args.min_freq,
                      "Vocabulary frequency floor");
  cwe_cmd->add_option("--test-fraction", cwe_args.test_fraction,
                      "Held-out fraction");
  cwe_cmd->add_option("--balance", cwe_args.balance,
                      "Oversample the train split to this ratio (0=off)");
  cwe_cmd->add_option("--optimizer", cwe_args.optimizer, "adam or sgd");

  TrainCapecArgs capec_args;
  auto* capec_cmd = app.add_subcommand(
      "train-capec", "Train the multi-label GBM attack-pattern model");
  capec_cmd->add_option("--dataset", capec_args.dataset, "CAPEC dataset CSV")
      ->required();
  capec_cmd->add_option("--out", capec_args.out, "Model output path");
  capec_cmd->add_option("--encoders-out", capec_args.encoders_out,
                        "Encoder JSON path");
  capec_cmd->add_option("--metrics", capec_args.metrics_path,
                        "Metrics JSON path");
  capec_cmd->add_option("--test-fraction", capec_args.test_fraction,
                        "Held-out fraction");
  capec_cmd->add_option("--threshold", capec_args.threshold,
                        "Label probability threshold");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval_cmd->add_option("--model", eval_args.model, "Model file")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset CSV")
      ->required();
  eval_cmd->add_option("--vocab", eval_args.vocab, "Vocabulary CSV (Bi-LSTM)");
  eval_cmd->add_option("--encoders", eval_args.encoders,
                       "Encoder JSON (GBM)");
  eval_cmd->add_option("--out", eval_args.metrics_path, "Metrics JSON path");
  eval_cmd->add_option("--confusion-csv", eval_args.confusion_csv,
                       "Confusion matrix CSV grid path (Bi-LSTM)");
  eval_cmd->add_option("--threshold", eval_args.threshold,
                       "Label probability threshold");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Predict for new inputs");
  predict_cmd->add_option("--model", predict_args.model, "Model file")
      ->required();
  predict_cmd->add_option("--vocab", predict_args.vocab,
                          "Vocabulary CSV (Bi-LSTM)");
  predict_cmd->add_option("--encoders", predict_args.encoders,
                          "Encoder JSON (GBM)");
  predict_cmd->add_option("--input", predict_args.input, "Input CSV")
      ->required();
  predict_cmd->add_option("--out", predict_args.out,
                          "Output CSV path (default stdout)");
  predict_cmd->add_option("--threshold", predict_args.threshold,
                          "Label probability threshold");

  CompareArgs compare_args;
  auto* compare_cmd = app.add_subcommand(
      "compare", "Friedman ranking and Iman-Davenport test over an accuracy "
                 "table");
  compare_cmd->add_option("--table", compare_args.table,
                          "CSV: dataset,<model names...>")
      ->required();
  compare_cmd->add_option("--critical-value", compare_args.critical_value,
                          "Override the embedded F critical value");
  compare_cmd->add_flag("--lower-is-better", compare_args.lower_is_better,
                        "Rank smaller scores as better");
  compare_cmd->add_option("--out", compare_args.out, "Report JSON path");
  compare_cmd->add_option("--ranks-csv", compare_args.ranks_csv,
                          "Rank table CSV path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    (void)global.resolve();  // reject unknown keys before any work
    if (*ingest_cmd) return cmd_ingest(ingest_args, global);
    if (*build_cmd) return cmd_build_dataset(build_args, global);
    if (*cwe_cmd) return cmd_train_cwe(cwe_args, global);
    if (*capec_cmd) return cmd_train_capec(capec_args, global);
    if (*eval_cmd) return cmd_eval(eval_args, global);
    if (*predict_cmd) return cmd_predict(predict_args, global);
    if (*compare_cmd) return cmd_compare(compare_args, global);
  } catch (const ValidationError& e) {
    std::cerr << "error: validation: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace iotw::cli
