#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace iotw::textproc {

// Reserved token ids. PAD fills short sequences, UNK absorbs
// out-of-vocabulary tokens at encode time.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

// Lowercase, strip punctuation to single spaces (keeping intra-token
// hyphens and periods between digits, so "cross-site" and "v2.1" survive),
// collapse whitespace runs, trim. May return an empty string.
std::string clean_text(const std::string& s);

// Whitespace split of a cleaned string. Never yields empty tokens.
std::vector<std::string> tokenize(const std::string& s);

struct Vocabulary {
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;   // index = id; [0]=PAD, [1]=UNK
  std::vector<std::uint64_t> frequency;   // build-time counts, 0 for PAD/UNK
  std::uint64_t min_frequency = 2;

  std::size_t size() const { return id_to_token.size(); }
  int id_of(const std::string& token) const;  // kUnkId when absent

  void save(const std::filesystem::path& path) const;  // token,id,frequency
  static Vocabulary load(const std::filesystem::path& path);

  // Fingerprint embedded in model files so eval/predict can refuse a
  // vocabulary that does not match the one the model was trained with.
  std::uint64_t hash() const;
};

// Tokens with frequency >= min_frequency get ids from 2 upward in
// descending frequency order, ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::uint64_t min_frequency = 2);

struct EncodedDoc {
  std::vector<int> ids;          // fixed length = max_len, PAD-filled tail
  std::size_t true_length = 0;   // count of real (non-PAD) positions
};

// OOV -> UNK, truncate from the tail beyond max_len, pad the rest.
EncodedDoc encode(const std::vector<std::string>& tokens,
                  const Vocabulary& vocab, std::size_t max_len);

using EmbeddingMatrix = Eigen::MatrixXd;  // V x D, row 0 (PAD) all zeros

// All rows drawn i.i.d. uniform(-0.05, 0.05) from the seed; rows whose
// token appears in the word-vector file are then overwritten with the file
// vector; the PAD row is zeroed last. The file is plain text, one token
// followed by D reals per line; an optional leading "V D" header line is
// skipped.
EmbeddingMatrix init_embeddings(
    const Vocabulary& vocab, int dim, std::uint64_t seed,
    const std::optional<std::filesystem::path>& pretrained_file = {});

}  // namespace iotw::textproc
