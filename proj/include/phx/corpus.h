// Dataset loading, Penn-bracketed parse trees, vocabulary, and phrase
// concept extraction.
#ifndef PHX_CORPUS_H
#define PHX_CORPUS_H

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace phx::corpus {

// One node of a constituency tree. Token leaves carry the token string in
// `label` with is_token set; internal nodes carry the non-terminal symbol.
// Spans are half-open token intervals assigned by left-to-right leaf order.
struct ParseNode {
  std::string label;
  int64_t start = 0;
  int64_t end = 0;
  bool is_token = false;
  std::vector<ParseNode> children;

  int64_t len() const { return end - start; }
};

struct ParseError : std::runtime_error {
  size_t offset;
  ParseError(const std::string& msg, size_t off)
      : std::runtime_error(msg + " at offset " + std::to_string(off)),
        offset(off) {}
};

// Parses one bracketed tree; throws ParseError on unbalanced parentheses,
// empty nodes, label-less nodes, or trailing content.
ParseNode parse_ptb(const std::string& text);

// Inverse of parse_ptb up to whitespace.
std::string to_bracketed(const ParseNode& root);

std::vector<std::string> leaf_tokens(const ParseNode& root);

struct Concept {
  std::string phrase;
  std::string source_sample;
  int64_t start = 0;
  int64_t end = 0;
  std::string node_label;
};

struct Sample {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<int64_t> token_ids;
  ParseNode parse;
  int64_t label = 0;
  // generator ground truth, when present in the record
  std::optional<std::pair<int64_t, int64_t>> decisive_span;
};

// Every non-root non-terminal, deduplicated by span keeping the node
// closest to the root, ordered by (start, -length).
std::vector<Concept> extract_concepts(const Sample& sample);

class Vocab {
 public:
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kUnk = 1;
  static constexpr int64_t kPool = 2;

  Vocab();
  int64_t add(const std::string& token);          // returns existing id if known
  int64_t id_of(const std::string& token) const;  // kUnk for unseen
  const std::string& token_of(int64_t id) const;
  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::unordered_map<std::string, int64_t> ids_;
  std::vector<std::string> tokens_;
};

// label string -> contiguous index, lexicographic over the label strings.
using LabelManifest = std::map<std::string, int64_t>;

struct Dataset {
  std::vector<Sample> samples;
  Vocab vocab;
  LabelManifest labels;
};

// JSON Lines loader. Records: {"id"?: str, "text": str, "parse": str,
// "label": str, "decisive_span"?: [int,int]}. When `vocab` is supplied the
// vocabulary is reused (unseen tokens map to UNK); when `manifest` is
// supplied an unknown label is an error, otherwise labels are collected
// and indexed lexicographically.
Dataset load_dataset(const std::string& path, const Vocab* vocab = nullptr,
                     const LabelManifest* manifest = nullptr,
                     bool lowercase = false);

// Parses one record; the label comes back as its raw string and token ids
// are left unresolved (see resolve_token_ids).
std::pair<Sample, std::string> sample_from_json(const nlohmann::json& rec,
                                                bool lowercase,
                                                const std::string& fallback_id);

void resolve_token_ids(Sample& s, const Vocab& vocab);

}  // namespace phx::corpus

#endif
