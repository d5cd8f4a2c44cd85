#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace iotw::ingest {

struct CveEntry {
  std::string cve_id;                 // CVE-YYYY-NNNN+
  std::string description;           // English entry, non-empty
  std::vector<std::string> cwe_ids;  // verbatim, may hold NVD sentinels
  int published_year = 0;
  std::vector<std::string> cpe_uris;
};

// NVD weakness sentinels: preserved at parse time, filtered by corpus.
bool is_cwe_sentinel(const std::string& cwe_id);
bool is_valid_cve_id(const std::string& id);

struct DeviceRecord {
  std::string brand;
  std::string product_type;
  std::string category;        // SmartHome|Medical|Wearable|Telecomm|Other
  double price = 0.0;          // USD, >= 0
  double year_difference = 0.0;
  std::string protocols;
  std::string data_storage;           // Local|Remote
  std::string personal_information;   // Yes|No
  std::string communication_capability;
  std::string authorisation_encryption;  // Symmetric|Asymmetric|None|Both
  std::vector<std::string> cve_ids;
};

// Yearly feed cache. A cached year is never re-downloaded unless forced.
struct FeedCache {
  std::filesystem::path root;

  // IOTW_CACHE_DIR wins over the fallback when set.
  static FeedCache from_env_or(const std::filesystem::path& fallback);

  std::filesystem::path feed_path(int year) const;
  bool has(int year) const;
};

// url -> response body; throws NetworkUnavailable on any failure.
using Transport = std::function<std::string(const std::string& url)>;

// httplib-backed GET (https when built with OpenSSL).
Transport http_transport();

struct FetchOptions {
  bool offline = false;
  bool force = false;
  std::string base_url = "https://nvd.nist.gov/feeds/json/cve/1.1/";
};

// Returns decompressed feed bytes. Populates the cache on first fetch;
// offline mode never invokes the transport.
std::string fetch_feed(int year, const FeedCache& cache,
                       const FetchOptions& options,
                       const Transport& transport = http_transport());

// gzip wrappers (zlib). gunzip throws IntegrityError on corrupt input.
std::string gzip_compress(const std::string& bytes);
std::string gunzip(const std::string& bytes);

// Parses an NVD JSON 1.1 feed document. One entry per item with a
// non-empty English description, order preserved; items lacking one are
// skipped and counted via empty_description_drops.
std::vector<CveEntry> parse_nvd_feed(
    const std::string& bytes, std::size_t* empty_description_drops = nullptr);

// Re-emits entries in the 1.1 feed layout (fixture generation; also backs
// the parse/serialize round-trip property).
std::string serialize_nvd_feed(const std::vector<CveEntry>& entries);

std::vector<DeviceRecord> load_device_table(
    const std::filesystem::path& path);

struct LinkedPair {
  DeviceRecord device;
  CveEntry cve;
};

struct UnresolvedRef {
  std::size_t device_index = 0;
  std::string cve_id;
};

struct LinkResult {
  std::vector<LinkedPair> pairs;
  std::vector<UnresolvedRef> unresolved;
};

// One pair per (device, cve_id) that resolves against the parsed feeds;
// unresolved ids are reported, never silently dropped.
LinkResult link_devices(const std::vector<DeviceRecord>& devices,
                        const std::vector<CveEntry>& cves);

}  // namespace iotw::ingest
