#include "iotw/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "iotw/csv.hpp"
#include "iotw/errors.hpp"

#include <httplib.h>  // CPPHTTPLIB_OPENSSL_SUPPORT comes from the build

namespace iotw::ingest {

using nlohmann::json;

bool is_cwe_sentinel(const std::string& cwe_id) {
  return cwe_id == "NVD-CWE-noinfo" || cwe_id == "NVD-CWE-Other";
}

bool is_valid_cve_id(const std::string& id) {
  // CVE-\d{4}-\d{4,}
  if (id.size() < 13 || id.compare(0, 4, "CVE-") != 0 || id[8] != '-')
    return false;
  for (int i = 4; i < 8; ++i)
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
  for (std::size_t i = 9; i < id.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
  return true;
}

FeedCache FeedCache::from_env_or(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("IOTW_CACHE_DIR"); env && *env) {
    return FeedCache{std::filesystem::path(env)};
  }
  return FeedCache{fallback};
}

std::filesystem::path FeedCache::feed_path(int year) const {
  return root / ("nvdcve-1.1-" + std::to_string(year) + ".json.gz");
}

bool FeedCache::has(int year) const {
  return std::filesystem::exists(feed_path(year));
}

Transport http_transport() {
  return [](const std::string& url) -> std::string {
    // Split "<scheme>://<host>[:port]" from the path.
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw NetworkUnavailable("fetch: malformed url: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);
#ifndef IOTW_HAVE_OPENSSL
    if (origin.rfind("https://", 0) == 0) {
      throw NetworkUnavailable(
          "fetch: built without TLS support, cannot reach " + origin);
    }
#endif
    httplib::Client client(origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    auto res = client.Get(path);
    if (!res) {
      throw NetworkUnavailable("fetch: request to " + url +
                               " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw NetworkUnavailable("fetch: " + url + " returned status " +
                               std::to_string(res->status));
    }
    return res->body;
  };
}

namespace {

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

int current_year() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return tm.tm_year + 1900;
}

}  // namespace

std::string gzip_compress(const std::string& bytes) {
  z_stream strm{};
  if (deflateInit2(&strm, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + 15, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw RuntimeFailure("gzip: deflateInit2 failed");
  }
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  strm.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  do {
    strm.next_out = reinterpret_cast<Bytef*>(buf);
    strm.avail_out = sizeof buf;
    rc = deflate(&strm, Z_FINISH);
    out.append(buf, sizeof buf - strm.avail_out);
  } while (rc == Z_OK);
  deflateEnd(&strm);
  if (rc != Z_STREAM_END) throw RuntimeFailure("gzip: deflate failed");
  return out;
}

std::string gunzip(const std::string& bytes) {
  z_stream strm{};
  if (inflateInit2(&strm, 16 + 15) != Z_OK) {
    throw IntegrityError("gunzip: inflateInit2 failed");
  }
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  strm.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  do {
    strm.next_out = reinterpret_cast<Bytef*>(buf);
    strm.avail_out = sizeof buf;
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw IntegrityError("gunzip: corrupt gzip stream (zlib rc " +
                           std::to_string(rc) + ")");
    }
    out.append(buf, sizeof buf - strm.avail_out);
  } while (rc != Z_STREAM_END);
  inflateEnd(&strm);
  return out;
}

std::string fetch_feed(int year, const FeedCache& cache,
                       const FetchOptions& options,
                       const Transport& transport) {
  if (year < 2002 || year > current_year()) {
    throw ValidationError("fetch: year " + std::to_string(year) +
                          " outside 2002..current");
  }
  const auto path = cache.feed_path(year);
  if (!options.force && cache.has(year)) {
    return gunzip(read_file_bytes(path));
  }
  if (options.offline) {
    throw CacheMiss("fetch: year " + std::to_string(year) +
                    " not cached at " + path.string() +
                    " and offline mode forbids network access");
  }
  std::string url = options.base_url;
  if (!url.empty() && url.back() != '/') url += '/';
  url += "nvdcve-1.1-" + std::to_string(year) + ".json.gz";
  const std::string body = transport(url);
  const std::string decompressed = gunzip(body);  // validate before caching
  write_file_bytes(path, body);
  return decompressed;
}

namespace {

// json access helpers that raise MalformedFeed with a feed path.
const json& need(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw MalformedFeed("feed: missing '" + std::string(key) + "' at " + path);
  }
  return *it;
}

const json& need_array(const json& j, const char* key,
                       const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_array()) {
    throw MalformedFeed("feed: '" + std::string(key) + "' is not an array at " +
                        path);
  }
  return v;
}

void collect_cpe_uris(const json& node, std::vector<std::string>* out) {
  if (auto it = node.find("cpe_match"); it != node.end() && it->is_array()) {
    for (const auto& m : *it) {
      if (auto uri = m.find("cpe23Uri"); uri != m.end() && uri->is_string()) {
        out->push_back(uri->get<std::string>());
      }
    }
  }
  if (auto it = node.find("children"); it != node.end() && it->is_array()) {
    for (const auto& child : *it) collect_cpe_uris(child, out);
  }
}

}  // namespace

std::vector<CveEntry> parse_nvd_feed(const std::string& bytes,
                                     std::size_t* empty_description_drops) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw MalformedFeed(std::string("feed: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedFeed("feed: top level is not an object");
  if (doc.contains("vulnerabilities") && !doc.contains("CVE_Items")) {
    throw UnsupportedSchema(
        "feed: looks like an NVD 2.0 API payload; only the 1.1 feed layout "
        "is supported");
  }
  if (auto it = doc.find("CVE_data_version");
      it != doc.end() && it->is_string() && it->get<std::string>() != "4.0") {
    throw UnsupportedSchema("feed: CVE_data_version '" +
                            it->get<std::string>() + "' is not supported");
  }
  const json& items = need_array(doc, "CVE_Items", "$");

  std::vector<CveEntry> entries;
  entries.reserve(items.size());
  std::size_t dropped = 0;

  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string path = "CVE_Items[" + std::to_string(i) + "]";
    const json& item = items[i];
    if (!item.is_object())
      throw MalformedFeed("feed: item is not an object at " + path);
    const json& cve = need(item, "cve", path);
    const json& meta = need(cve, "CVE_data_meta", path + ".cve");
    const json& id = need(meta, "ID", path + ".cve.CVE_data_meta");
    if (!id.is_string() || !is_valid_cve_id(id.get<std::string>())) {
      throw MalformedFeed("feed: bad CVE id at " + path +
                          ".cve.CVE_data_meta.ID");
    }

    CveEntry entry;
    entry.cve_id = id.get<std::string>();

    const json& desc = need(cve, "description", path + ".cve");
    const json& desc_data =
        need_array(desc, "description_data", path + ".cve.description");
    for (const auto& d : desc_data) {
      if (d.value("lang", "") == "en") {
        entry.description = d.value("value", "");
        break;
      }
    }
    if (entry.description.empty()) {
      ++dropped;
      continue;
    }

    if (auto pt = cve.find("problemtype"); pt != cve.end()) {
      if (auto pd = pt->find("problemtype_data");
          pd != pt->end() && pd->is_array()) {
        for (const auto& block : *pd) {
          if (auto dl = block.find("description");
              dl != block.end() && dl->is_array()) {
            for (const auto& d : *dl) {
              if (auto v = d.find("value"); v != d.end() && v->is_string()) {
                const auto s = v->get<std::string>();
                if (!s.empty()) entry.cwe_ids.push_back(s);
              }
            }
          }
        }
      }
    }

    if (auto pub = item.find("publishedDate");
        pub != item.end() && pub->is_string() &&
        pub->get<std::string>().size() >= 4) {
      entry.published_year = std::atoi(pub->get<std::string>().substr(0, 4).c_str());
    } else {
      entry.published_year = std::atoi(entry.cve_id.substr(4, 4).c_str());
    }

    if (auto conf = item.find("configurations"); conf != item.end()) {
      if (auto nodes = conf->find("nodes");
          nodes != conf->end() && nodes->is_array()) {
        for (const auto& node : *nodes) collect_cpe_uris(node, &entry.cpe_uris);
      }
    }

    entries.push_back(std::move(entry));
  }

  if (empty_description_drops) *empty_description_drops = dropped;
  return entries;
}

std::string serialize_nvd_feed(const std::vector<CveEntry>& entries) {
  json items = json::array();
  for (const auto& e : entries) {
    json cwe_list = json::array();
    for (const auto& cwe : e.cwe_ids) {
      cwe_list.push_back({{"lang", "en"}, {"value", cwe}});
    }
    json cpe_matches = json::array();
    for (const auto& uri : e.cpe_uris) {
      cpe_matches.push_back({{"vulnerable", true}, {"cpe23Uri", uri}});
    }
    items.push_back(
        {{"cve",
          {{"CVE_data_meta", {{"ID", e.cve_id}}},
           {"problemtype",
            {{"problemtype_data", json::array({{{"description", cwe_list}}})}}},
           {"description",
            {{"description_data",
              json::array({{{"lang", "en"}, {"value", e.description}}})}}}}},
         {"configurations",
          {{"CVE_data_version", "4.0"},
           {"nodes", json::array({{{"operator", "OR"},
                                   {"cpe_match", cpe_matches}}})}}},
         {"publishedDate",
          std::to_string(e.published_year) + "-01-01T00:00Z"}});
  }
  json doc = {{"CVE_data_type", "CVE"},
              {"CVE_data_format", "MITRE"},
              {"CVE_data_version", "4.0"},
              {"CVE_data_numberOfCVEs", std::to_string(entries.size())},
              {"CVE_Items", items}};
  return doc.dump(1);
}

std::vector<DeviceRecord> load_device_table(
    const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) {
    throw SchemaError("device table " + path.string() + ": missing header");
  }
  static const std::vector<std::string> columns = {
      "brand",          "product_type",
      "category",       "price",
      "year_difference", "protocols",
      "data_storage",   "personal_information",
      "communication_capability", "authorisation_encryption",
      "cve_ids"};
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rows[0].size(); ++i) index[rows[0][i]] = i;
  for (const auto& col : columns) {
    if (!index.count(col)) {
      throw SchemaError("device table " + path.string() +
                        ": missing column '" + col + "'");
    }
  }

  static const std::vector<std::string> categories = {
      "SmartHome", "Medical", "Wearable", "Telecomm", "Other"};
  static const std::vector<std::string> storage = {"Local", "Remote"};
  static const std::vector<std::string> yesno = {"Yes", "No"};
  static const std::vector<std::string> auth_enc = {"Symmetric", "Asymmetric",
                                                    "None", "Both"};

  auto check_set = [&](const std::string& value,
                       const std::vector<std::string>& allowed,
                       std::size_t row, const std::string& col) {
    if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
      std::string set;
      for (const auto& a : allowed) set += (set.empty() ? "" : ", ") + a;
      throw ValueError("device table row " + std::to_string(row) +
                       ", column '" + col + "': value '" + value +
                       "' not in {" + set + "}");
    }
  };

  std::vector<DeviceRecord> devices;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](const std::string& col) -> const std::string& {
      const auto i = index.at(col);
      if (i >= row.size()) {
        throw ValueError("device table row " + std::to_string(r) +
                         ": too few fields");
      }
      return row[i];
    };

    DeviceRecord d;
    d.brand = cell("brand");
    d.product_type = cell("product_type");
    d.category = cell("category");
    check_set(d.category, categories, r, "category");
    try {
      d.price = std::stod(cell("price"));
    } catch (const std::exception&) {
      throw ValueError("device table row " + std::to_string(r) +
                       ", column 'price': not a number: '" + cell("price") +
                       "'");
    }
    if (d.price < 0) {
      throw ValueError("device table row " + std::to_string(r) +
                       ", column 'price': negative value");
    }
    try {
      d.year_difference = std::stod(cell("year_difference"));
    } catch (const std::exception&) {
      throw ValueError("device table row " + std::to_string(r) +
                       ", column 'year_difference': not a number: '" +
                       cell("year_difference") + "'");
    }
    d.protocols = cell("protocols");
    d.data_storage = cell("data_storage");
    check_set(d.data_storage, storage, r, "data_storage");
    d.personal_information = cell("personal_information");
    check_set(d.personal_information, yesno, r, "personal_information");
    d.communication_capability = cell("communication_capability");
    d.authorisation_encryption = cell("authorisation_encryption");
    check_set(d.authorisation_encryption, auth_enc, r,
              "authorisation_encryption");

    std::string ids = cell("cve_ids");
    std::size_t start = 0;
    while (start <= ids.size() && !ids.empty()) {
      auto sep = ids.find(';', start);
      std::string id = ids.substr(
          start, sep == std::string::npos ? std::string::npos : sep - start);
      if (!id.empty()) d.cve_ids.push_back(id);
      if (sep == std::string::npos) break;
      start = sep + 1;
    }

    devices.push_back(std::move(d));
  }
  return devices;
}

LinkResult link_devices(const std::vector<DeviceRecord>& devices,
                        const std::vector<CveEntry>& cves) {
  std::map<std::string, const CveEntry*> by_id;
  for (const auto& c : cves) by_id[c.cve_id] = &c;

  LinkResult result;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    for (const auto& id : devices[i].cve_ids) {
      if (auto it = by_id.find(id); it != by_id.end()) {
        result.pairs.push_back(LinkedPair{devices[i], *it->second});
      } else {
        result.unresolved.push_back(UnresolvedRef{i, id});
      }
    }
  }
  return result;
}

}  // namespace iotw::ingest
