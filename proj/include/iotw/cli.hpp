#pragma once

#include <string>
#include <vector>

#include "iotw/gbtree.hpp"

namespace iotw::cli {

// Named pipeline presets. Unknown override keys are rejected.
struct RunConfig {
  std::string preset = "desk-default";
  gbtree::GbmParams gbm;
  bool drop_excess_cwe_rows = false;

  static RunConfig named(const std::string& preset);
  void apply_override(const std::string& key, const std::string& value);
};

// Entry point used by both the binary and the CLI tests. args excludes
// argv[0]. Exit codes: 0 success, 2 validation error, 3 runtime error.
int run(const std::vector<std::string>& args);

}  // namespace iotw::cli
