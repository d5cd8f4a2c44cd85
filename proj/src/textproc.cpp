#include "iotw/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "iotw/binio.hpp"
#include "iotw/csv.hpp"
#include "iotw/errors.hpp"
#include "iotw/rng.hpp"

namespace iotw::textproc {

namespace {

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

bool is_ascii_digit(unsigned char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string clean_text(const std::string& s) {
  std::string lowered;
  lowered.reserve(s.size());
  for (unsigned char c : s) {
    lowered.push_back(static_cast<char>(
        (c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
  }

  std::string spaced;
  spaced.reserve(lowered.size());
  for (std::size_t i = 0; i < lowered.size(); ++i) {
    const auto c = static_cast<unsigned char>(lowered[i]);
    if (is_ascii_alnum(c) || c >= 0x80) {
      // Non-ASCII bytes pass through untouched; cleaning is ASCII-scoped.
      spaced.push_back(static_cast<char>(c));
      continue;
    }
    const bool prev_alnum =
        i > 0 && is_ascii_alnum(static_cast<unsigned char>(lowered[i - 1]));
    const bool next_alnum =
        i + 1 < lowered.size() &&
        is_ascii_alnum(static_cast<unsigned char>(lowered[i + 1]));
    const bool prev_digit =
        i > 0 && is_ascii_digit(static_cast<unsigned char>(lowered[i - 1]));
    const bool next_digit =
        i + 1 < lowered.size() &&
        is_ascii_digit(static_cast<unsigned char>(lowered[i + 1]));
    if (c == '-' && prev_alnum && next_alnum) {
      spaced.push_back('-');
    } else if (c == '.' && prev_digit && next_digit) {
      spaced.push_back('.');
    } else {
      spaced.push_back(' ');
    }
  }

  std::string out;
  out.reserve(spaced.size());
  for (char c : spaced) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnkId : it->second;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::uint64_t min_frequency) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) ++counts[tok];
  }

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  kept.reserve(counts.size());
  for (const auto& [tok, n] : counts) {
    if (n >= min_frequency) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_frequency = min_frequency;
  v.id_to_token = {"<pad>", "<unk>"};
  v.frequency = {0, 0};
  v.token_to_id.reserve(kept.size() + 2);
  for (const auto& [tok, n] : kept) {
    v.token_to_id.emplace(tok, static_cast<int>(v.id_to_token.size()));
    v.id_to_token.push_back(tok);
    v.frequency.push_back(n);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::vector<csv::Row> rows;
  rows.push_back({"token", "id", "frequency"});
  for (std::size_t id = 0; id < id_to_token.size(); ++id) {
    rows.push_back({id_to_token[id], std::to_string(id),
                    std::to_string(frequency[id])});
  }
  csv::write_file(path, rows);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != csv::Row{"token", "id", "frequency"}) {
    throw SchemaError("vocabulary file missing token,id,frequency header: " +
                      path.string());
  }
  Vocabulary v;
  v.id_to_token.resize(rows.size() - 1);
  v.frequency.resize(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) {
      throw ValueError("vocabulary row " + std::to_string(i) +
                       ": expected 3 fields");
    }
    const int id = std::stoi(rows[i][1]);
    if (id < 0 || static_cast<std::size_t>(id) >= v.id_to_token.size()) {
      throw ValueError("vocabulary row " + std::to_string(i) +
                       ": id out of range");
    }
    v.id_to_token[id] = rows[i][0];
    v.frequency[id] = std::stoull(rows[i][2]);
    if (id >= 2) v.token_to_id.emplace(rows[i][0], id);
  }
  return v;
}

std::uint64_t Vocabulary::hash() const {
  binio::Fnv1a h;
  for (std::size_t id = 0; id < id_to_token.size(); ++id) {
    h.update(id_to_token[id]);
    h.update("\x1f");
    const std::uint64_t f = frequency[id];
    h.update(&f, sizeof f);
    h.update("\x1e");
  }
  return h.digest();
}

EncodedDoc encode(const std::vector<std::string>& tokens,
                  const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw ValidationError("encode: max_len must be >= 1");
  EncodedDoc doc;
  doc.true_length = std::min(tokens.size(), max_len);
  doc.ids.assign(max_len, kPadId);
  for (std::size_t i = 0; i < doc.true_length; ++i) {
    doc.ids[i] = vocab.id_of(tokens[i]);
  }
  return doc;
}

EmbeddingMatrix init_embeddings(
    const Vocabulary& vocab, int dim, std::uint64_t seed,
    const std::optional<std::filesystem::path>& pretrained_file) {
  if (dim < 1) throw ValidationError("init_embeddings: dim must be >= 1");
  const auto v = static_cast<Eigen::Index>(vocab.size());
  EmbeddingMatrix m(v, dim);

  Rng rng(seed);
  for (Eigen::Index r = 0; r < v; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      m(r, c) = rng.uniform(-0.05, 0.05);
    }
  }

  if (pretrained_file) {
    std::ifstream in(*pretrained_file);
    if (!in) {
      throw ValueError("init_embeddings: cannot open word-vector file: " +
                       pretrained_file->string());
    }
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::vector<std::string> fields;
      std::string f;
      while (ss >> f) fields.push_back(f);
      if (fields.empty()) continue;
      if (first) {
        first = false;
        // Optional "V D" header.
        if (fields.size() == 2) {
          int hv = 0, hd = 0;
          auto r1 = std::from_chars(fields[0].data(),
                                    fields[0].data() + fields[0].size(), hv);
          auto r2 = std::from_chars(fields[1].data(),
                                    fields[1].data() + fields[1].size(), hd);
          if (r1.ec == std::errc{} && r2.ec == std::errc{} &&
              r1.ptr == fields[0].data() + fields[0].size() &&
              r2.ptr == fields[1].data() + fields[1].size()) {
            if (hd != dim) {
              throw DimensionMismatch(
                  "word-vector file declares dimension " + std::to_string(hd) +
                  ", expected " + std::to_string(dim));
            }
            continue;
          }
        }
      }
      if (fields.size() != static_cast<std::size_t>(dim) + 1) {
        if (fields.size() > 1) {
          throw DimensionMismatch(
              "word-vector line " + std::to_string(lineno) + " has " +
              std::to_string(fields.size() - 1) + " values, expected " +
              std::to_string(dim));
        }
        throw MalformedVectorLine("word-vector line " +
                                  std::to_string(lineno) +
                                  ": expected token followed by " +
                                  std::to_string(dim) + " values");
      }
      auto it = vocab.token_to_id.find(fields[0]);
      if (it == vocab.token_to_id.end()) continue;
      for (int c = 0; c < dim; ++c) {
        double val;
        const auto& tok = fields[static_cast<std::size_t>(c) + 1];
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), val);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
          throw MalformedVectorLine("word-vector line " +
                                    std::to_string(lineno) +
                                    ": bad number '" + tok + "'");
        }
        m(it->second, c) = val;
      }
    }
  }

  m.row(kPadId).setZero();
  return m;
}

}  // namespace iotw::textproc
