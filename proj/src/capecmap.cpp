#include "iotw/capecmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "iotw/binio.hpp"
#include "iotw/csv.hpp"
#include "iotw/errors.hpp"

namespace iotw::capecmap {

using nlohmann::json;

const std::array<std::string, kNumAptClasses>& apt_class_names() {
  static const std::array<std::string, kNumAptClasses> names = {
      "InformationGathering", "Injection",  "SocialEngineering",
      "StateAttack",          "FunctionAbuse", "BruteForce",
      "IllegalAccess",        "DataManipulation"};
  return names;
}

std::string apt_class_name(AptClass c) {
  return apt_class_names()[static_cast<std::size_t>(c)];
}

std::optional<AptClass> parse_apt_class(const std::string& name) {
  const auto& names = apt_class_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<AptClass>(i);
  }
  return std::nullopt;
}

std::optional<AptClass> CapecMap::map_capec(int capec_id) const {
  auto it = entries.find(capec_id);
  if (it == entries.end()) return std::nullopt;
  return it->second.apt_class;
}

CapecMap load_capec_mapping(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "capec_id" ||
      rows[0][1] != "apt_class") {
    throw SchemaError("capec mapping " + path.string() +
                      ": expected header capec_id,apt_class");
  }
  CapecMap map;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2) {
      throw ValueError("capec mapping row " + std::to_string(i) +
                       ": expected capec_id,apt_class");
    }
    int id = 0;
    try {
      id = std::stoi(rows[i][0]);
    } catch (const std::exception&) {
      throw ValueError("capec mapping row " + std::to_string(i) +
                       ": bad capec_id '" + rows[i][0] + "'");
    }
    if (id <= 0) {
      throw ValueError("capec mapping row " + std::to_string(i) +
                       ": capec_id must be positive");
    }
    const auto cls = parse_apt_class(rows[i][1]);
    if (!cls) {
      throw UnknownClass("capec mapping row " + std::to_string(i) +
                         ": unknown class '" + rows[i][1] + "'");
    }
    CapecMapping mapping{*cls, rows[i].size() > 2 ? rows[i][2] : ""};
    if (!map.entries.emplace(id, mapping).second) {
      throw DuplicateId("capec mapping row " + std::to_string(i) +
                        ": duplicate capec_id " + std::to_string(id));
    }
  }
  return map;
}

CweCapecAssoc load_cwe_capec(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "cwe_id" ||
      rows[0][1] != "capec_id") {
    throw SchemaError("cwe-capec association " + path.string() +
                      ": expected header cwe_id,capec_id");
  }
  CweCapecAssoc assoc;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2 || rows[i][0].empty()) {
      throw ValueError("cwe-capec association row " + std::to_string(i) +
                       ": expected cwe_id,capec_id");
    }
    try {
      assoc.emplace(rows[i][0], std::stoi(rows[i][1]));
    } catch (const std::exception&) {
      throw ValueError("cwe-capec association row " + std::to_string(i) +
                       ": bad capec_id '" + rows[i][1] + "'");
    }
  }
  return assoc;
}

std::vector<CapecRow> build_capec_dataset(
    const std::vector<ingest::DeviceRecord>& devices,
    const std::vector<ingest::CveEntry>& cves, const CweCapecAssoc& assoc,
    const CapecMap& map, const CapecBuildOptions& options,
    CapecBuildCounters* counters) {
  std::map<std::string, const ingest::CveEntry*> by_id;
  for (const auto& c : cves) by_id[c.cve_id] = &c;

  CapecBuildCounters local;
  std::vector<CapecRow> rows;

  for (const auto& device : devices) {
    for (const auto& cve_id : device.cve_ids) {
      auto found = by_id.find(cve_id);
      if (found == by_id.end()) {
        ++local.unresolved_cves;
        continue;
      }
      const auto& cve = *found->second;

      std::vector<std::string> cwes;
      for (const auto& cwe : cve.cwe_ids) {
        if (!ingest::is_cwe_sentinel(cwe)) cwes.push_back(cwe);
      }
      if (cwes.empty()) {
        ++local.no_weakness_drops;
        continue;
      }
      if (cwes.size() > 2) {
        ++local.excess_cwe_rows;
        if (options.drop_excess_cwe_rows) continue;
        cwes.resize(2);
      }

      CapecRow row;
      row.device = device;
      row.weakness_id_1 = cwes[0];
      if (cwes.size() > 1) row.weakness_id_2 = cwes[1];

      for (const auto& cwe : cwes) {
        auto [lo, hi] = assoc.equal_range(cwe);
        for (auto it = lo; it != hi; ++it) {
          if (auto cls = map.map_capec(it->second)) {
            row.labels[static_cast<std::size_t>(*cls)] = 1;
          } else {
            ++local.unmapped_capec_refs;
          }
        }
      }
      if (std::all_of(row.labels.begin(), row.labels.end(),
                      [](int v) { return v == 0; })) {
        ++local.empty_label_drops;
        continue;
      }
      rows.push_back(std::move(row));
    }
  }

  local.rows = rows.size();
  if (counters) *counters = local;
  return rows;
}

namespace {

const std::vector<std::string>& categorical_columns() {
  static const std::vector<std::string> cols = {
      "brand",         "product_type",
      "category",      "protocols",
      "data_storage",  "personal_information",
      "communication_capability", "authorisation_encryption",
      "weakness_id_1", "weakness_id_2"};
  return cols;
}

std::string categorical_value(const CapecRow& row, const std::string& col) {
  if (col == "brand") return row.device.brand;
  if (col == "product_type") return row.device.product_type;
  if (col == "category") return row.device.category;
  if (col == "protocols") return row.device.protocols;
  if (col == "data_storage") return row.device.data_storage;
  if (col == "personal_information") return row.device.personal_information;
  if (col == "communication_capability")
    return row.device.communication_capability;
  if (col == "authorisation_encryption")
    return row.device.authorisation_encryption;
  if (col == "weakness_id_1") return row.weakness_id_1;
  return row.weakness_id_2.value_or("");
}

void mean_std(const std::vector<double>& xs, double* mean, double* std) {
  double m = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= static_cast<double>(xs.size());  // population variance
  *mean = m;
  *std = std::sqrt(var);
}

}  // namespace

FeatureEncoders fit_encoders(const std::vector<CapecRow>& train_rows) {
  if (train_rows.empty()) {
    throw ValidationError("fit_encoders: empty training split");
  }
  FeatureEncoders enc;
  for (const auto& col : categorical_columns()) {
    std::set<std::string> values;
    for (const auto& row : train_rows) {
      const auto v = categorical_value(row, col);
      if (col == "weakness_id_2" && v.empty()) continue;  // Absent
      values.insert(v);
    }
    auto& table = enc.categorical[col];
    int code = 0;
    for (const auto& v : values) table[v] = code++;
  }

  std::vector<double> prices, diffs;
  prices.reserve(train_rows.size());
  diffs.reserve(train_rows.size());
  for (const auto& row : train_rows) {
    prices.push_back(row.device.price);
    diffs.push_back(row.device.year_difference);
  }
  mean_std(prices, &enc.price_mean, &enc.price_std);
  mean_std(diffs, &enc.year_diff_mean, &enc.year_diff_std);
  return enc;
}

std::array<double, kFeatureCount> encode_row(const CapecRow& row,
                                             const FeatureEncoders& encoders) {
  auto code = [&](const std::string& col) -> double {
    const auto v = categorical_value(row, col);
    if (col == "weakness_id_2" && v.empty()) return -1.0;  // Absent
    const auto& table = encoders.categorical.at(col);
    auto it = table.find(v);
    return it == table.end() ? -1.0 : static_cast<double>(it->second);
  };
  auto z = [](double x, double mean, double std) {
    return std > 0 ? (x - mean) / std : 0.0;
  };

  return {code("brand"),
          code("product_type"),
          code("category"),
          z(row.device.price, encoders.price_mean, encoders.price_std),
          z(row.device.year_difference, encoders.year_diff_mean,
            encoders.year_diff_std),
          code("protocols"),
          code("data_storage"),
          code("personal_information"),
          code("communication_capability"),
          code("authorisation_encryption"),
          code("weakness_id_1"),
          code("weakness_id_2")};
}

std::string FeatureEncoders::to_json() const {
  json j;
  for (const auto& [col, table] : categorical) {
    json t = json::object();
    for (const auto& [value, code] : table) t[value] = code;
    j["categorical"][col] = t;
  }
  j["price"] = {{"mean", price_mean}, {"std", price_std}};
  j["year_difference"] = {{"mean", year_diff_mean}, {"std", year_diff_std}};
  return j.dump(2);
}

FeatureEncoders FeatureEncoders::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValueError(std::string("encoders: not valid JSON: ") + e.what());
  }
  FeatureEncoders enc;
  if (!j.contains("categorical") || !j.contains("price") ||
      !j.contains("year_difference")) {
    throw SchemaError("encoders: missing categorical/price/year_difference");
  }
  for (const auto& [col, table] : j["categorical"].items()) {
    auto& target = enc.categorical[col];  // keep empty columns present
    for (const auto& [value, code] : table.items()) {
      target[value] = code.get<int>();
    }
  }
  enc.price_mean = j["price"]["mean"].get<double>();
  enc.price_std = j["price"]["std"].get<double>();
  enc.year_diff_mean = j["year_difference"]["mean"].get<double>();
  enc.year_diff_std = j["year_difference"]["std"].get<double>();
  return enc;
}

void FeatureEncoders::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("encoders: cannot write " + path.string());
  out << to_json() << '\n';
}

FeatureEncoders FeatureEncoders::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("encoders: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::uint64_t FeatureEncoders::hash() const {
  return binio::fnv1a(to_json());
}

void save_capec_dataset(const std::vector<CapecRow>& rows,
                        const std::filesystem::path& path) {
  std::vector<csv::Row> out;
  csv::Row header = {"brand",          "product_type",
                     "category",       "price",
                     "year_difference", "protocols",
                     "data_storage",   "personal_information",
                     "communication_capability", "authorisation_encryption",
                     "weakness_id_1",  "weakness_id_2"};
  for (const auto& name : apt_class_names()) header.push_back("L_" + name);
  out.push_back(header);

  auto fmt = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  for (const auto& row : rows) {
    csv::Row r = {row.device.brand,
                  row.device.product_type,
                  row.device.category,
                  fmt(row.device.price),
                  fmt(row.device.year_difference),
                  row.device.protocols,
                  row.device.data_storage,
                  row.device.personal_information,
                  row.device.communication_capability,
                  row.device.authorisation_encryption,
                  row.weakness_id_1,
                  row.weakness_id_2.value_or("")};
    for (int label : row.labels) r.push_back(std::to_string(label));
    out.push_back(std::move(r));
  }
  csv::write_file(path, out);
}

std::vector<CapecRow> load_capec_dataset(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) {
    throw SchemaError("capec dataset " + path.string() + ": missing header");
  }
  csv::Row expected = {"brand",          "product_type",
                       "category",       "price",
                       "year_difference", "protocols",
                       "data_storage",   "personal_information",
                       "communication_capability", "authorisation_encryption",
                       "weakness_id_1",  "weakness_id_2"};
  for (const auto& name : apt_class_names()) expected.push_back("L_" + name);
  if (rows[0] != expected) {
    throw SchemaError("capec dataset " + path.string() +
                      ": header does not match the 12+8 column layout");
  }

  std::vector<CapecRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != expected.size()) {
      throw ValueError("capec dataset row " + std::to_string(i) +
                       ": expected " + std::to_string(expected.size()) +
                       " fields");
    }
    CapecRow row;
    row.device.brand = r[0];
    row.device.product_type = r[1];
    row.device.category = r[2];
    row.device.price = std::stod(r[3]);
    row.device.year_difference = std::stod(r[4]);
    row.device.protocols = r[5];
    row.device.data_storage = r[6];
    row.device.personal_information = r[7];
    row.device.communication_capability = r[8];
    row.device.authorisation_encryption = r[9];
    row.weakness_id_1 = r[10];
    if (!r[11].empty()) row.weakness_id_2 = r[11];
    bool any = false;
    for (std::size_t l = 0; l < kNumAptClasses; ++l) {
      row.labels[l] = std::stoi(r[12 + l]);
      any = any || row.labels[l] != 0;
    }
    if (row.weakness_id_1.empty()) {
      throw ValueError("capec dataset row " + std::to_string(i) +
                       ": weakness_id_1 must be present");
    }
    if (!any) {
      throw ValueError("capec dataset row " + std::to_string(i) +
                       ": no label set");
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace iotw::capecmap
