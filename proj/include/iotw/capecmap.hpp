#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iotw/gbtree.hpp"
#include "iotw/ingest.hpp"

namespace iotw::capecmap {

// The eight APT kill-chain attack classes. Ordinal order is load-bearing:
// it defines label-vector positions everywhere (dataset, model, metrics).
enum class AptClass : int {
  InformationGathering = 0,
  Injection = 1,
  SocialEngineering = 2,
  StateAttack = 3,
  FunctionAbuse = 4,
  BruteForce = 5,
  IllegalAccess = 6,
  DataManipulation = 7,
};

inline constexpr std::size_t kNumAptClasses = gbtree::kNumAptLabels;

const std::array<std::string, kNumAptClasses>& apt_class_names();
std::string apt_class_name(AptClass c);
std::optional<AptClass> parse_apt_class(const std::string& name);

struct CapecMapping {
  AptClass apt_class;
  std::string note;  // provenance
};

struct CapecMap {
  std::map<int, CapecMapping> entries;

  // map_capec: nullopt is Unmapped, a value rather than an error.
  std::optional<AptClass> map_capec(int capec_id) const;
};

// CSV `capec_id,apt_class[,note]`. Duplicate ids and unknown class names
// are rejected.
CapecMap load_capec_mapping(const std::filesystem::path& path);

// CSV `cwe_id,capec_id`: the CWE -> CAPEC association table.
using CweCapecAssoc = std::multimap<std::string, int>;
CweCapecAssoc load_cwe_capec(const std::filesystem::path& path);

using LabelVector = std::array<int, kNumAptClasses>;

struct CapecRow {
  ingest::DeviceRecord device;
  std::string weakness_id_1;
  std::optional<std::string> weakness_id_2;
  LabelVector labels{};
};

struct CapecBuildCounters {
  std::size_t rows = 0;
  std::size_t no_weakness_drops = 0;     // CVE had no usable CWE
  std::size_t empty_label_drops = 0;     // CWEs mapped to no APT class
  std::size_t excess_cwe_rows = 0;       // rows that carried > 2 CWEs
  std::size_t unmapped_capec_refs = 0;   // association hit an unmapped CAPEC
  std::size_t unresolved_cves = 0;
};

struct CapecBuildOptions {
  // Rows with more than two CWEs are truncated to the first two by
  // default; the paper-capec preset deletes them instead.
  bool drop_excess_cwe_rows = false;
};

// One row per (device, vulnerability): the first two non-sentinel CWEs
// populate the weakness columns, labels are the union of the kept CWEs'
// CAPEC classes. Rows without weaknesses or labels are dropped and
// counted, never silently.
std::vector<CapecRow> build_capec_dataset(
    const std::vector<ingest::DeviceRecord>& devices,
    const std::vector<ingest::CveEntry>& cves, const CweCapecAssoc& assoc,
    const CapecMap& map, const CapecBuildOptions& options = {},
    CapecBuildCounters* counters = nullptr);

// Per-column transforms fitted on the training split only: label codes in
// lexicographic value order, mean/std for the two continuous columns.
struct FeatureEncoders {
  // categorical code tables, keyed by encode-order column name
  std::map<std::string, std::map<std::string, int>> categorical;
  double price_mean = 0, price_std = 0;
  double year_diff_mean = 0, year_diff_std = 0;

  std::string to_json() const;
  static FeatureEncoders from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static FeatureEncoders load(const std::filesystem::path& path);
  std::uint64_t hash() const;
};

FeatureEncoders fit_encoders(const std::vector<CapecRow>& train_rows);

inline constexpr std::size_t kFeatureCount = 12;

// Output order: brand, product_type, category, price*, year_difference*,
// protocols, data_storage, personal_information, communication_capability,
// authorisation_encryption, weakness_id_1, weakness_id_2. Starred columns
// are standardised (z-score, 0 when the training std is 0); categoricals
// code unseen values as -1; an absent weakness_id_2 encodes as -1.
std::array<double, kFeatureCount> encode_row(const CapecRow& row,
                                             const FeatureEncoders& encoders);

// CSV persistence: 12 feature columns then L_<AptClass> label columns.
void save_capec_dataset(const std::vector<CapecRow>& rows,
                        const std::filesystem::path& path);
std::vector<CapecRow> load_capec_dataset(const std::filesystem::path& path);

}  // namespace iotw::capecmap
