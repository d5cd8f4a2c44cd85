#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "iotw/cli.hpp"
#include "iotw/errors.hpp"
#include "iotw/ingest.hpp"
#include "test_support.hpp"

using namespace iotw;
using nlohmann::json;
using testsupport::TempDir;

namespace {

// run() writes human-facing output to stdout/stderr; capture both.
struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

void write_weakness_fixtures(const TempDir& dir) {
  // Feed with four CVEs; one carries only a sentinel weakness.
  std::vector<ingest::CveEntry> cves;
  auto add = [&](const std::string& id, const std::string& desc,
                 std::vector<std::string> cwes) {
    ingest::CveEntry e;
    e.cve_id = id;
    e.description = desc;
    e.cwe_ids = std::move(cwes);
    e.published_year = 2019;
    cves.push_back(e);
  };
  add("CVE-2019-0001", "XSS in admin page", {"CWE-79"});
  add("CVE-2019-0002", "buffer overflow in parser", {"CWE-120"});
  add("CVE-2019-0003", "weak telnet credentials", {"CWE-79", "CWE-120"});
  add("CVE-2019-0004", "undefined weakness", {"NVD-CWE-noinfo"});
  testsupport::write_file(dir.file("feed.json"),
                          ingest::serialize_nvd_feed(cves));

  testsupport::write_file(
      dir.file("devices.csv"),
      "brand,product_type,category,price,year_difference,protocols,"
      "data_storage,personal_information,communication_capability,"
      "authorisation_encryption,cve_ids\n"
      "Acme,Camera,SmartHome,49.99,2.5,TCP,Local,Yes,WiFi,None,"
      "CVE-2019-0001;CVE-2019-0003\n"
      "Globex,Thermostat,SmartHome,30,1,UDP,Remote,No,Zigbee,Symmetric,"
      "CVE-2019-0002;CVE-2019-0004\n");

  testsupport::write_file(dir.file("grouping.csv"),
                          "cwe_id,group_id\n"
                          "CWE-79,CWE-74-group\n"
                          "CWE-120,CWE-119-group\n");
}

// Weakness dataset large enough to split and train on.
void write_trainable_dataset(const TempDir& dir, const std::string& name) {
  std::ostringstream csv;
  csv << "text,label,group_id,source_cve,provenance\n";
  for (int i = 0; i < 12; ++i) {
    csv << "alpha" << i % 4 << " beta" << i % 3 << " injection flaw,0,"
        << "CWE-74-group,CVE-2019-" << 1000 + i << ",Only-IoT\n";
    csv << "gamma" << i % 4 << " delta" << i % 3 << " overflow bug,1,"
        << "CWE-119-group,CVE-2019-" << 2000 + i << ",Only-IoT\n";
  }
  testsupport::write_file(dir.file(name), csv.str());
}

void write_capec_fixtures(const TempDir& dir) {
  testsupport::write_file(dir.file("capec_map.csv"),
                          "capec_id,apt_class\n"
                          "63,Injection\n"
                          "112,BruteForce\n"
                          "116,InformationGathering\n");
  testsupport::write_file(dir.file("cwe_capec.csv"),
                          "cwe_id,capec_id\n"
                          "CWE-79,63\n"
                          "CWE-120,63\n"
                          "CWE-120,112\n");
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("build-dataset writes the weakness corpus and a count report") {
  TempDir dir;
  write_weakness_fixtures(dir);
  const auto result = run_cli(
      {"build-dataset", "--kind", "weakness", "--devices",
       dir.file("devices.csv").string(), "--feed", dir.file("feed.json").string(),
       "--grouping", dir.file("grouping.csv").string(), "--scope", "only-iot",
       "--min-count", "1", "--out", dir.file("ds.csv").string(), "--report",
       dir.file("report.json").string()});
  REQUIRE(result.exit_code == 0);

  const auto report = json::parse(testsupport::read_file(dir.file("report.json")));
  // Pairs: dev1 x (0001, 0003), dev2 x (0002, 0004) -> weaknesses:
  // 0001: CWE-79; 0003: CWE-79+CWE-120; 0002: CWE-120; 0004 sentinel only.
  CHECK(report["records"] == 4);
  CHECK(report["sentinel_drops"] == 1);
  CHECK(report["classes"] == 2);
  CHECK(report["scope"] == "Only-IoT");

  SUBCASE("rerun is byte-identical") {
    const auto first_ds = testsupport::read_file(dir.file("ds.csv"));
    const auto first_report = testsupport::read_file(dir.file("report.json"));
    const auto again = run_cli(
        {"build-dataset", "--kind", "weakness", "--devices",
         dir.file("devices.csv").string(), "--feed",
         dir.file("feed.json").string(), "--grouping",
         dir.file("grouping.csv").string(), "--scope", "only-iot",
         "--min-count", "1", "--out", dir.file("ds.csv").string(), "--report",
         dir.file("report.json").string()});
    REQUIRE(again.exit_code == 0);
    CHECK(testsupport::read_file(dir.file("ds.csv")) == first_ds);
    CHECK(testsupport::read_file(dir.file("report.json")) == first_report);
  }
}

TEST_CASE("build-dataset all-systems admits CVE-only records") {
  TempDir dir;
  write_weakness_fixtures(dir);
  const auto result = run_cli(
      {"build-dataset", "--kind", "weakness", "--devices",
       dir.file("devices.csv").string(), "--feed", dir.file("feed.json").string(),
       "--grouping", dir.file("grouping.csv").string(), "--scope",
       "all-systems", "--min-count", "1", "--out", dir.file("as.csv").string(),
       "--report", dir.file("as.json").string()});
  REQUIRE(result.exit_code == 0);
  const auto report = json::parse(testsupport::read_file(dir.file("as.json")));
  CHECK(report["records"] == 4);  // every CVE here is device-linked
  CHECK(report["scope"] == "All-Systems");
}

TEST_CASE("build-dataset without the grouping file exits 2 and names it") {
  TempDir dir;
  write_weakness_fixtures(dir);
  const auto missing = dir.file("no-such-grouping.csv").string();
  const auto result = run_cli(
      {"build-dataset", "--kind", "weakness", "--devices",
       dir.file("devices.csv").string(), "--feed",
       dir.file("feed.json").string(), "--grouping", missing, "--out",
       dir.file("ds.csv").string()});
  CHECK(result.exit_code == 2);
  CHECK(result.err.find(missing) != std::string::npos);
  CHECK(std::count(result.err.begin(), result.err.end(), '\n') == 1);
}

TEST_CASE("build-dataset capec emits the 12+8 column table") {
  TempDir dir;
  write_weakness_fixtures(dir);
  write_capec_fixtures(dir);
  const auto result = run_cli(
      {"build-dataset", "--kind", "capec", "--devices",
       dir.file("devices.csv").string(), "--feed", dir.file("feed.json").string(),
       "--capec-map", dir.file("capec_map.csv").string(), "--cwe-capec",
       dir.file("cwe_capec.csv").string(), "--out", dir.file("capec.csv").string(),
       "--report", dir.file("capec.json").string()});
  REQUIRE(result.exit_code == 0);
  const auto report = json::parse(testsupport::read_file(dir.file("capec.json")));
  CHECK(report["records"] == 3);  // 0004 carries no usable weakness
  CHECK(report["no_weakness_drops"] == 1);
  const auto header = testsupport::read_file(dir.file("capec.csv"));
  CHECK(header.rfind("brand,", 0) == 0);
  CHECK(header.find("L_DataManipulation") != std::string::npos);
}

TEST_CASE("train-cwe single epoch writes model, vocab and one report row") {
  TempDir dir;
  write_trainable_dataset(dir, "train.csv");
  const auto result = run_cli(
      {"--seed", "7", "train-cwe", "--dataset", dir.file("train.csv").string(),
       "--out", dir.file("model.bin").string(), "--epochs", "1", "--hidden",
       "4", "--embed-dim", "6", "--max-len", "8", "--batch", "4",
       "--test-fraction", "0.25", "--report", dir.file("curve.csv").string(),
       "--metrics", dir.file("metrics.json").string()});
  REQUIRE(result.exit_code == 0);
  CHECK(std::filesystem::exists(dir.file("model.bin")));
  CHECK(std::filesystem::exists(dir.file("model.bin.vocab.csv")));

  const auto curve = testsupport::read_file(dir.file("curve.csv"));
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 2);  // header + 1 row
  CHECK(curve.rfind("epoch,train_loss,val_loss,val_accuracy\n", 0) == 0);

  const auto metrics = json::parse(testsupport::read_file(dir.file("metrics.json")));
  CHECK(metrics["epochs"].size() == 1);
  CHECK(metrics["classes"] == 2);

  SUBCASE("eval accepts the matching vocabulary") {
    const auto eval = run_cli(
        {"eval", "--model", dir.file("model.bin").string(), "--dataset",
         dir.file("train.csv").string(), "--vocab",
         dir.file("model.bin.vocab.csv").string(), "--out",
         dir.file("eval.json").string(), "--confusion-csv",
         dir.file("cm.csv").string()});
    CHECK(eval.exit_code == 0);
    const auto report = json::parse(testsupport::read_file(dir.file("eval.json")));
    CHECK(report["examples"] == 24);
    const auto cm = testsupport::read_file(dir.file("cm.csv"));
    CHECK(cm.find("CWE-74-group") != std::string::npos);
    CHECK(std::count(cm.begin(), cm.end(), '\n') == 3);  // header + 2 classes
  }

  SUBCASE("eval refuses a mismatched vocabulary hash") {
    testsupport::write_file(dir.file("other_vocab.csv"),
                            "token,id,frequency\n<pad>,0,0\n<unk>,1,0\n"
                            "alpha,2,5\n");
    const auto eval = run_cli(
        {"eval", "--model", dir.file("model.bin").string(), "--dataset",
         dir.file("train.csv").string(), "--vocab",
         dir.file("other_vocab.csv").string()});
    CHECK(eval.exit_code == 2);
    CHECK(eval.err.find("hash mismatch") != std::string::npos);
  }

  SUBCASE("predict on a text column") {
    testsupport::write_file(dir.file("input.csv"),
                            "text\nalpha0 beta1 injection flaw\n");
    const auto predict = run_cli(
        {"predict", "--model", dir.file("model.bin").string(), "--vocab",
         dir.file("model.bin.vocab.csv").string(), "--input",
         dir.file("input.csv").string(), "--out", dir.file("pred.csv").string()});
    CHECK(predict.exit_code == 0);
    const auto pred = testsupport::read_file(dir.file("pred.csv"));
    CHECK(pred.rfind("label,", 0) == 0);
    CHECK(std::count(pred.begin(), pred.end(), '\n') == 2);
  }

  SUBCASE("predict on an empty input file exits 0 with empty output") {
    testsupport::write_file(dir.file("empty.csv"), "");
    const auto predict = run_cli(
        {"predict", "--model", dir.file("model.bin").string(), "--vocab",
         dir.file("model.bin.vocab.csv").string(), "--input",
         dir.file("empty.csv").string(), "--out", dir.file("pred.csv").string()});
    CHECK(predict.exit_code == 0);
    CHECK(testsupport::read_file(dir.file("pred.csv")).empty());
  }
}

TEST_CASE("train-cwe with a corrupt header exits 2 and writes no model") {
  TempDir dir;
  testsupport::write_file(dir.file("bad.csv"),
                          "text,label,wrong,source_cve,provenance\nfoo,0,g,c,p\n");
  const auto result = run_cli(
      {"train-cwe", "--dataset", dir.file("bad.csv").string(), "--out",
       dir.file("model.bin").string()});
  CHECK(result.exit_code == 2);
  CHECK_FALSE(std::filesystem::exists(dir.file("model.bin")));
}

TEST_CASE("train-capec echoes the full-fidelity preset and evaluates the split") {
  TempDir dir;
  write_weakness_fixtures(dir);
  write_capec_fixtures(dir);
  REQUIRE(run_cli({"build-dataset", "--kind", "capec", "--devices",
                   dir.file("devices.csv").string(), "--feed",
                   dir.file("feed.json").string(), "--capec-map",
                   dir.file("capec_map.csv").string(), "--cwe-capec",
                   dir.file("cwe_capec.csv").string(), "--out",
                   dir.file("capec.csv").string()})
              .exit_code == 0);

  const auto result = run_cli(
      {"--seed", "5", "--preset", "paper-capec", "train-capec", "--dataset",
       dir.file("capec.csv").string(), "--out", dir.file("gbm.bin").string(),
       "--test-fraction", "0.34", "--metrics", dir.file("m.json").string()});
  REQUIRE(result.exit_code == 0);
  const auto metrics = json::parse(testsupport::read_file(dir.file("m.json")));
  CHECK(metrics["preset"] == "paper-capec");
  CHECK(metrics["params"]["n_estimators"] == 10000);
  CHECK(metrics["params"]["learning_rate"] == doctest::Approx(0.01));
  CHECK(metrics["params"]["max_depth"] == 500);
  CHECK(metrics["params"]["min_impurity_decrease"] == doctest::Approx(1e-2));
  CHECK(std::filesystem::exists(dir.file("gbm.bin")));
  CHECK(std::filesystem::exists(dir.file("gbm.bin.encoders.json")));

  SUBCASE("eval refuses mismatched encoders") {
    testsupport::write_file(
        dir.file("other.json"),
        R"({"categorical": {"brand": {"X": 0}}, "price": {"mean": 0, "std": 1},
            "year_difference": {"mean": 0, "std": 1}})");
    const auto eval = run_cli(
        {"eval", "--model", dir.file("gbm.bin").string(), "--dataset",
         dir.file("capec.csv").string(), "--encoders",
         dir.file("other.json").string()});
    CHECK(eval.exit_code == 2);
    CHECK(eval.err.find("hash mismatch") != std::string::npos);
  }

  SUBCASE("eval and predict run with the matching encoders") {
    const auto eval = run_cli(
        {"eval", "--model", dir.file("gbm.bin").string(), "--dataset",
         dir.file("capec.csv").string(), "--encoders",
         dir.file("gbm.bin.encoders.json").string(), "--out",
         dir.file("gbm_eval.json").string()});
    CHECK(eval.exit_code == 0);
    const auto report =
        json::parse(testsupport::read_file(dir.file("gbm_eval.json")));
    CHECK(report["metrics"]["label_based"].contains("micro_accuracy"));

    const auto predict = run_cli(
        {"predict", "--model", dir.file("gbm.bin").string(), "--encoders",
         dir.file("gbm.bin.encoders.json").string(), "--input",
         dir.file("capec.csv").string(), "--out", dir.file("p.csv").string()});
    CHECK(predict.exit_code == 0);
    const auto pred = testsupport::read_file(dir.file("p.csv"));
    CHECK(pred.rfind("L_InformationGathering,", 0) == 0);
  }
}

TEST_CASE("unknown preset and unknown override keys are rejected") {
  TempDir dir;
  write_trainable_dataset(dir, "train.csv");
  const auto preset = run_cli({"--preset", "frobnicate", "train-capec",
                               "--dataset", dir.file("train.csv").string()});
  CHECK(preset.exit_code == 2);

  const auto override_result =
      run_cli({"--preset", "desk-default", "-p", "warp_factor=9", "train-capec",
               "--dataset", dir.file("train.csv").string()});
  CHECK(override_result.exit_code == 2);
  CHECK(override_result.err.find("warp_factor") != std::string::npos);
}

TEST_CASE("a config file feeds parameter overrides") {
  TempDir dir;
  write_weakness_fixtures(dir);
  write_capec_fixtures(dir);
  REQUIRE(run_cli({"build-dataset", "--kind", "capec", "--devices",
                   dir.file("devices.csv").string(), "--feed",
                   dir.file("feed.json").string(), "--capec-map",
                   dir.file("capec_map.csv").string(), "--cwe-capec",
                   dir.file("cwe_capec.csv").string(), "--out",
                   dir.file("capec.csv").string()})
              .exit_code == 0);
  testsupport::write_file(dir.file("config.json"),
                          R"({"n_estimators": 7, "max_depth": 2})");
  const auto result = run_cli(
      {"--config", dir.file("config.json").string(), "train-capec",
       "--dataset", dir.file("capec.csv").string(), "--out",
       dir.file("g.bin").string(), "--test-fraction", "0.34", "--metrics",
       dir.file("m.json").string()});
  REQUIRE(result.exit_code == 0);
  const auto metrics = json::parse(testsupport::read_file(dir.file("m.json")));
  CHECK(metrics["params"]["n_estimators"] == 7);
  CHECK(metrics["params"]["max_depth"] == 2);

  testsupport::write_file(dir.file("bad_config.json"),
                          R"({"bogus_knob": true})");
  const auto bad = run_cli(
      {"--config", dir.file("bad_config.json").string(), "train-capec",
       "--dataset", dir.file("capec.csv").string()});
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("bogus_knob") != std::string::npos);
}

TEST_CASE("compare reproduces the rank table and the test statistics") {
  TempDir dir;
  testsupport::write_file(dir.file("acc.csv"),
                          "dataset,Bi-LSTM,BERT,BART,Longformer\n"
                          "OI V1.1,48.1,46.7,49.7,50.4\n"
                          "OI V1.2,49.6,39.7,43.0,40.6\n"
                          "OI V1.3,28.4,24.5,27.3,29.9\n"
                          "AS V2.1,79.1,76.1,76.3,76.4\n"
                          "AS V2.2,67.9,70.3,36.4,70.6\n"
                          "AS V2.3,40.5,49.8,49.9,48.7\n");
  const auto result = run_cli({"compare", "--table", dir.file("acc.csv").string(),
                               "--out", dir.file("friedman.json").string(),
                               "--ranks-csv", dir.file("ranks.csv").string()});
  REQUIRE(result.exit_code == 0);
  const auto report =
      json::parse(testsupport::read_file(dir.file("friedman.json")));
  CHECK(report["ranks"][0]["Bi-LSTM"] == 3.0);
  CHECK(report["ranks"][0]["Longformer"] == 1.0);
  CHECK(report["ranks"][1]["Bi-LSTM"] == 1.0);
  CHECK(report["friedman_chi2"] == doctest::Approx(4.2).epsilon(1e-9));
  CHECK(report["iman_davenport_f"] ==
        doctest::Approx(21.0 / 13.8).epsilon(1e-9));
  CHECK(report["decision"] == "Do not reject H0");

  const auto ranks = testsupport::read_file(dir.file("ranks.csv"));
  CHECK(ranks.find("OI V1.2,1,4,2,3") != std::string::npos);

  SUBCASE("the critical value can be overridden") {
    const auto overridden = run_cli(
        {"compare", "--table", dir.file("acc.csv").string(),
         "--critical-value", "7.6", "--out", dir.file("f2.json").string()});
    REQUIRE(overridden.exit_code == 0);
    const auto report2 =
        json::parse(testsupport::read_file(dir.file("f2.json")));
    CHECK(report2["critical_value"] == doctest::Approx(7.6));
  }
}

TEST_CASE("the installed binary maps errors to exit codes") {
  const std::string binary = IOTW_CLI_PATH;
  CHECK(std::system((binary + " --help > /dev/null 2>&1").c_str()) == 0);
  // Unknown subcommand is a parse/validation failure: exit 2.
  const int rc =
      std::system((binary + " frobnicate > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}

TEST_CASE("ingest fetches a year range from a feed server into the cache") {
  std::vector<ingest::CveEntry> entries(1);
  entries[0].cve_id = "CVE-2018-0001";
  entries[0].description = "fixture entry";
  entries[0].cwe_ids = {"CWE-79"};
  entries[0].published_year = 2018;
  const std::string packed =
      ingest::gzip_compress(ingest::serialize_nvd_feed(entries));

  httplib::Server server;
  for (int year : {2018, 2019}) {
    server.Get("/feeds/nvdcve-1.1-" + std::to_string(year) + ".json.gz",
               [&](const httplib::Request&, httplib::Response& res) {
                 res.set_content(packed, "application/gzip");
               });
  }
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  TempDir dir;
  const auto result = run_cli(
      {"ingest", "--years", "2018..2019", "--cache", dir.path().string(),
       "--base-url", "http://127.0.0.1:" + std::to_string(port) + "/feeds/"});
  server.stop();
  server_thread.join();

  REQUIRE(result.exit_code == 0);
  const auto report = json::parse(result.out);
  CHECK(report["fetched"] == 2);
  CHECK(report["from_cache"] == 0);
  CHECK(report["years"][0]["entries"] == 1);
  CHECK(std::filesystem::exists(dir.file("nvdcve-1.1-2018.json.gz")));
  CHECK(std::filesystem::exists(dir.file("nvdcve-1.1-2019.json.gz")));

  // A second run resolves fully offline from the populated cache.
  const auto offline = run_cli({"--offline", "ingest", "--years",
                                "2018..2019", "--cache", dir.path().string()});
  REQUIRE(offline.exit_code == 0);
  const auto report2 = json::parse(offline.out);
  CHECK(report2["from_cache"] == 2);
  CHECK(report2["fetched"] == 0);
}

TEST_CASE("ingest --offline with a cold cache is a runtime failure") {
  TempDir dir;
  const auto result =
      run_cli({"--offline", "ingest", "--years", "2019", "--cache",
               dir.file("cache").string()});
  CHECK(result.exit_code == 3);
  CHECK(result.err.find("offline") != std::string::npos);
}

}  // TEST_SUITE
