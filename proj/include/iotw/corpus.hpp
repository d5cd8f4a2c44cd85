#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "iotw/ingest.hpp"

namespace iotw::corpus {

struct WeaknessExample {
  std::string text;        // device fields + CVE description, space-joined
  int label = 0;           // index into the dataset's group list
  std::string source_cve;
};

// CWE -> group mapping. Groups are the classifier's label space.
struct WeaknessLabelSpace {
  std::vector<std::string> groups;  // sorted, index = label id
  std::unordered_map<std::string, std::string> member_map;

  // CSV `cwe_id,group_id` with header row.
  static WeaknessLabelSpace load(const std::filesystem::path& path);

  // group_cwe: nullopt means Unmapped; the caller decides drop/keep.
  std::optional<std::string> group_of(const std::string& cwe_id) const;
};

enum class Scope { OnlyIot, AllSystems };

std::string scope_name(Scope s);  // "Only-IoT" / "All-Systems"

struct WeaknessDataset {
  std::vector<WeaknessExample> examples;
  std::vector<std::string> groups;  // dense label space, sorted by group id
  Scope scope = Scope::OnlyIot;
  std::string version_tag;

  std::vector<std::size_t> class_counts() const;

  // CSV `text,label,group_id,source_cve,provenance`.
  void save(const std::filesystem::path& path) const;
  static WeaknessDataset load(const std::filesystem::path& path);
};

struct SplitSpec {
  double test_fraction = 0.10;
  std::uint64_t seed = 0;
  std::size_t k = 5;
};

struct BuildCounters {
  std::size_t examples = 0;
  std::size_t sentinel_drops = 0;   // NVD-CWE-noinfo / NVD-CWE-Other
  std::size_t unmapped_drops = 0;   // CWE absent from the grouping file
};

// One example per (pair, CWE). Only-IoT keeps device-linked pairs only;
// All-Systems also admits the CVE-only entries.
WeaknessDataset build_weakness_dataset(
    const std::vector<ingest::LinkedPair>& pairs,
    const std::vector<ingest::CveEntry>& cve_only,
    const WeaknessLabelSpace& grouping, Scope scope,
    BuildCounters* counters = nullptr);

struct FilterResult {
  WeaknessDataset dataset;
  std::vector<std::pair<std::string, std::size_t>> removed;  // group, count
};

// Removes classes with fewer than min_count examples and re-indexes the
// survivors densely (sorted by group identifier).
FilterResult filter_rare_classes(const WeaknessDataset& ds,
                                 std::size_t min_count = 30);

// Duplicates whole examples (uniform with the seed) until every class
// count reaches ceil(target_ratio * max class count). Originals are kept.
WeaknessDataset oversample_balance(const WeaknessDataset& ds,
                                   double target_ratio, std::uint64_t seed);

struct SplitResult {
  WeaknessDataset train;
  WeaknessDataset test;
};

// Per-class test count = round(count * test_fraction), clamped to
// [1, count-1] so both sides stay populated. Deterministic under
// (seed, dataset order).
SplitResult stratified_split(const WeaknessDataset& ds, const SplitSpec& spec);

struct Fold {
  WeaknessDataset train;
  WeaknessDataset validation;
};

// Class-stratified k-fold partition; validation folds are disjoint and
// cover the dataset exactly once.
std::vector<Fold> kfold(const WeaknessDataset& ds, const SplitSpec& spec);

// Named pipeline configurations standing in for the dataset versions.
struct PipelineConfig {
  std::string tag;
  std::size_t min_count = 30;
  std::optional<double> oversample_ratio;
};

// Tags V1.1/V1.2/V1.3 (Only-IoT) and V2.1/V2.2/V2.3 (All-Systems):
// x.1 = filter(30); x.2 = filter(60) + balance(0.5); x.3 = filter(100) +
// balance(1.0).
PipelineConfig version_config(const std::string& tag);

}  // namespace iotw::corpus
