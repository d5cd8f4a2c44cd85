#include "iotw/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "iotw/csv.hpp"
#include "iotw/errors.hpp"
#include "iotw/rng.hpp"

namespace iotw::corpus {

WeaknessLabelSpace WeaknessLabelSpace::load(
    const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "cwe_id" ||
      rows[0][1] != "group_id") {
    throw SchemaError("grouping file " + path.string() +
                      ": expected header cwe_id,group_id");
  }
  WeaknessLabelSpace space;
  std::set<std::string> groups;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2 || rows[i][0].empty() || rows[i][1].empty()) {
      throw ValueError("grouping file row " + std::to_string(i) +
                       ": expected cwe_id,group_id");
    }
    auto [it, inserted] = space.member_map.emplace(rows[i][0], rows[i][1]);
    if (!inserted && it->second != rows[i][1]) {
      throw ValueError("grouping file row " + std::to_string(i) + ": '" +
                       rows[i][0] + "' mapped to two groups");
    }
    groups.insert(rows[i][1]);
  }
  space.groups.assign(groups.begin(), groups.end());
  return space;
}

std::optional<std::string> WeaknessLabelSpace::group_of(
    const std::string& cwe_id) const {
  auto it = member_map.find(cwe_id);
  if (it == member_map.end()) return std::nullopt;
  return it->second;
}

std::string scope_name(Scope s) {
  return s == Scope::OnlyIot ? "Only-IoT" : "All-Systems";
}

std::vector<std::size_t> WeaknessDataset::class_counts() const {
  std::vector<std::size_t> counts(groups.size(), 0);
  for (const auto& ex : examples) ++counts[static_cast<std::size_t>(ex.label)];
  return counts;
}

namespace {

std::string assemble_text(const ingest::DeviceRecord* device,
                          const ingest::CveEntry& cve) {
  // Fixed field order so identical inputs always produce identical text:
  // brand, product type, category, communication capability, description.
  std::string text;
  if (device) {
    for (const std::string* part :
         {&device->brand, &device->product_type, &device->category,
          &device->communication_capability}) {
      if (!part->empty()) {
        if (!text.empty()) text += ' ';
        text += *part;
      }
    }
  }
  if (!text.empty()) text += ' ';
  text += cve.description;
  return text;
}

// Rebuilds the dense, sorted label space from labelled (group, example)
// pairs. Stable: ordering depends only on group identifiers.
WeaknessDataset index_examples(
    std::vector<std::pair<std::string, WeaknessExample>> labelled,
    Scope scope, std::string version_tag) {
  std::set<std::string> groups;
  for (const auto& [group, ex] : labelled) groups.insert(group);

  WeaknessDataset ds;
  ds.scope = scope;
  ds.version_tag = std::move(version_tag);
  ds.groups.assign(groups.begin(), groups.end());
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < ds.groups.size(); ++i)
    index[ds.groups[i]] = static_cast<int>(i);

  ds.examples.reserve(labelled.size());
  for (auto& [group, ex] : labelled) {
    ex.label = index.at(group);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace

WeaknessDataset build_weakness_dataset(
    const std::vector<ingest::LinkedPair>& pairs,
    const std::vector<ingest::CveEntry>& cve_only,
    const WeaknessLabelSpace& grouping, Scope scope, BuildCounters* counters) {
  BuildCounters local;
  std::vector<std::pair<std::string, WeaknessExample>> labelled;

  auto expand = [&](const ingest::DeviceRecord* device,
                    const ingest::CveEntry& cve) {
    for (const auto& cwe : cve.cwe_ids) {
      if (ingest::is_cwe_sentinel(cwe)) {
        ++local.sentinel_drops;
        continue;
      }
      auto group = grouping.group_of(cwe);
      if (!group) {
        ++local.unmapped_drops;
        continue;
      }
      labelled.emplace_back(
          *group, WeaknessExample{assemble_text(device, cve), 0, cve.cve_id});
    }
  };

  for (const auto& pair : pairs) expand(&pair.device, pair.cve);
  if (scope == Scope::AllSystems) {
    for (const auto& cve : cve_only) expand(nullptr, cve);
  }

  if (labelled.empty()) {
    throw EmptyCorpus("build_weakness_dataset: no examples after sanitisation");
  }
  local.examples = labelled.size();
  if (counters) *counters = local;
  return index_examples(std::move(labelled), scope, "");
}

FilterResult filter_rare_classes(const WeaknessDataset& ds,
                                 std::size_t min_count) {
  if (min_count < 1) {
    throw ValidationError("filter_rare_classes: min_count must be >= 1");
  }
  const auto counts = ds.class_counts();

  FilterResult result;
  std::vector<bool> keep(ds.groups.size(), false);
  for (std::size_t c = 0; c < ds.groups.size(); ++c) {
    if (counts[c] >= min_count) {
      keep[c] = true;
    } else {
      result.removed.emplace_back(ds.groups[c], counts[c]);
    }
  }

  std::vector<std::pair<std::string, WeaknessExample>> labelled;
  labelled.reserve(ds.examples.size());
  for (const auto& ex : ds.examples) {
    if (keep[static_cast<std::size_t>(ex.label)]) {
      labelled.emplace_back(ds.groups[static_cast<std::size_t>(ex.label)], ex);
    }
  }
  if (labelled.empty()) {
    throw EmptyCorpus("filter_rare_classes: no class reaches min_count " +
                      std::to_string(min_count));
  }
  result.dataset = index_examples(std::move(labelled), ds.scope, ds.version_tag);
  return result;
}

WeaknessDataset oversample_balance(const WeaknessDataset& ds,
                                   double target_ratio, std::uint64_t seed) {
  if (!(target_ratio > 0.0 && target_ratio <= 1.0)) {
    throw ValidationError("oversample_balance: target_ratio must be in (0,1]");
  }
  if (ds.examples.empty()) throw EmptyCorpus("oversample_balance: empty dataset");

  const auto counts = ds.class_counts();
  const std::size_t max_count = *std::max_element(counts.begin(), counts.end());
  const auto target = static_cast<std::size_t>(
      std::ceil(target_ratio * static_cast<double>(max_count)));

  std::vector<std::vector<std::size_t>> by_class(ds.groups.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
  }

  WeaknessDataset out = ds;
  Rng rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& members = by_class[c];
    for (std::size_t have = counts[c]; have < target; ++have) {
      out.examples.push_back(ds.examples[members[rng.below(members.size())]]);
    }
  }
  return out;
}

namespace {

// Shared stratified shuffling: per class, the example indices in dataset
// order, shuffled with a single seeded stream (class order fixed).
std::vector<std::vector<std::size_t>> shuffled_class_indices(
    const WeaknessDataset& ds, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(ds.groups.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
  }
  Rng rng(seed);
  for (auto& members : by_class) rng.shuffle(members);
  return by_class;
}

WeaknessDataset subset(const WeaknessDataset& ds,
                       std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  WeaknessDataset out;
  out.groups = ds.groups;
  out.scope = ds.scope;
  out.version_tag = ds.version_tag;
  out.examples.reserve(indices.size());
  for (auto i : indices) out.examples.push_back(ds.examples[i]);
  return out;
}

}  // namespace

SplitResult stratified_split(const WeaknessDataset& ds,
                             const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw ValidationError("stratified_split: test_fraction must be in (0,1)");
  }
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 2) {
      throw ClassTooSmall("stratified_split: class '" + ds.groups[c] +
                          "' has " + std::to_string(counts[c]) +
                          " examples, needs >= 2");
    }
  }

  auto by_class = shuffled_class_indices(ds, spec.seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto count = by_class[c].size();
    auto n_test = static_cast<std::size_t>(std::llround(
        static_cast<double>(count) * spec.test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, count - 1);
    for (std::size_t i = 0; i < count; ++i) {
      (i < n_test ? test_idx : train_idx).push_back(by_class[c][i]);
    }
  }
  return SplitResult{subset(ds, std::move(train_idx)),
                     subset(ds, std::move(test_idx))};
}

std::vector<Fold> kfold(const WeaknessDataset& ds, const SplitSpec& spec) {
  if (spec.k < 2) throw ValidationError("kfold: k must be >= 2");
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < spec.k) {
      throw ClassTooSmall("kfold: class '" + ds.groups[c] + "' has " +
                          std::to_string(counts[c]) +
                          " examples, needs >= k=" + std::to_string(spec.k));
    }
  }

  auto by_class = shuffled_class_indices(ds, spec.seed);
  std::vector<std::vector<std::size_t>> fold_members(spec.k);
  for (auto& members : by_class) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold_members[i % spec.k].push_back(members[i]);
    }
  }

  std::vector<Fold> folds;
  folds.reserve(spec.k);
  for (std::size_t f = 0; f < spec.k; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < spec.k; ++g) {
      if (g == f) continue;
      train_idx.insert(train_idx.end(), fold_members[g].begin(),
                       fold_members[g].end());
    }
    folds.push_back(Fold{subset(ds, std::move(train_idx)),
                         subset(ds, fold_members[f])});
  }
  return folds;
}

void WeaknessDataset::save(const std::filesystem::path& path) const {
  std::vector<csv::Row> rows;
  rows.push_back({"text", "label", "group_id", "source_cve", "provenance"});
  const std::string provenance = scope_name(scope);
  for (const auto& ex : examples) {
    rows.push_back({ex.text, std::to_string(ex.label),
                    groups[static_cast<std::size_t>(ex.label)], ex.source_cve,
                    provenance});
  }
  csv::write_file(path, rows);
}

WeaknessDataset WeaknessDataset::load(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() ||
      rows[0] != csv::Row{"text", "label", "group_id", "source_cve",
                          "provenance"}) {
    throw SchemaError(
        "dataset file " + path.string() +
        ": expected header text,label,group_id,source_cve,provenance");
  }
  WeaknessDataset ds;
  std::map<int, std::string> groups;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 5) {
      throw ValueError("dataset row " + std::to_string(i) +
                       ": expected 5 fields");
    }
    WeaknessExample ex;
    ex.text = rows[i][0];
    ex.label = std::stoi(rows[i][1]);
    ex.source_cve = rows[i][3];
    auto [it, inserted] = groups.emplace(ex.label, rows[i][2]);
    if (!inserted && it->second != rows[i][2]) {
      throw ValueError("dataset row " + std::to_string(i) + ": label " +
                       rows[i][1] + " bound to two group ids");
    }
    if (i == 1) {
      ds.scope = rows[i][4] == "All-Systems" ? Scope::AllSystems
                                             : Scope::OnlyIot;
    }
    ds.examples.push_back(std::move(ex));
  }
  if (groups.empty()) throw EmptyCorpus("dataset file has no rows");
  const int max_label = groups.rbegin()->first;
  if (max_label + 1 != static_cast<int>(groups.size()) ||
      groups.begin()->first != 0) {
    throw ValueError("dataset file labels are not dense 0..C-1");
  }
  ds.groups.resize(groups.size());
  for (const auto& [label, group] : groups) {
    ds.groups[static_cast<std::size_t>(label)] = group;
  }
  return ds;
}

PipelineConfig version_config(const std::string& tag) {
  // The x.1 configurations are the primary datasets; x.2 and x.3 trade
  // size for balance.
  if (tag == "V1.1" || tag == "V2.1") return {tag, 30, std::nullopt};
  if (tag == "V1.2" || tag == "V2.2") return {tag, 60, 0.5};
  if (tag == "V1.3" || tag == "V2.3") return {tag, 100, 1.0};
  throw ValidationError("unknown dataset version tag '" + tag +
                        "' (expected V1.1..V1.3 or V2.1..V2.3)");
}

}  // namespace iotw::corpus
