#include "phx/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace phx::corpus {

using nlohmann::json;

namespace {

// Offsets in parse errors are 1-based character positions; end-of-input is
// reported one past the last character.
struct PtbParser {
  const std::string& text;
  size_t pos = 0;
  int64_t next_leaf = 0;

  explicit PtbParser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }

  bool is_atom_char(char c) const {
    return c != '(' && c != ')' && !std::isspace(static_cast<unsigned char>(c));
  }

  std::string read_atom() {
    const size_t s = pos;
    while (pos < text.size() && is_atom_char(text[pos])) ++pos;
    return text.substr(s, pos - s);
  }

  ParseNode parse_tree() {
    if (pos >= text.size() || text[pos] != '(')
      throw ParseError("expected '('", pos + 1);
    ++pos;
    skip_ws();
    if (pos >= text.size())
      throw ParseError("unbalanced parentheses", text.size() + 1);
    if (text[pos] == '(') throw ParseError("label-less node", pos + 1);
    if (text[pos] == ')') throw ParseError("empty node", pos + 1);
    ParseNode node;
    node.label = read_atom();
    node.start = next_leaf;
    while (true) {
      skip_ws();
      if (pos >= text.size())
        throw ParseError("unbalanced parentheses", text.size() + 1);
      if (text[pos] == ')') {
        ++pos;
        if (node.children.empty())
          throw ParseError("empty node", pos);  // label with no children
        node.end = next_leaf;
        return node;
      }
      if (text[pos] == '(') {
        node.children.push_back(parse_tree());
      } else {
        ParseNode leaf;
        leaf.label = read_atom();
        leaf.is_token = true;
        leaf.start = next_leaf;
        leaf.end = ++next_leaf;
        node.children.push_back(std::move(leaf));
      }
    }
  }
};

void collect_leaves(const ParseNode& n, std::vector<std::string>& out) {
  if (n.is_token) {
    out.push_back(n.label);
    return;
  }
  for (const ParseNode& c : n.children) collect_leaves(c, out);
}

void lowercase_leaves(ParseNode& n) {
  if (n.is_token) {
    for (char& ch : n.label) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return;
  }
  for (ParseNode& c : n.children) lowercase_leaves(c);
}

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join_span(const std::vector<std::string>& tokens, int64_t s,
                      int64_t e) {
  std::string out;
  for (int64_t i = s; i < e; ++i) {
    if (i > s) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

ParseNode parse_ptb(const std::string& text) {
  PtbParser p(text);
  p.skip_ws();
  ParseNode root = p.parse_tree();
  p.skip_ws();
  if (p.pos != text.size())
    throw ParseError("trailing content after tree", p.pos + 1);
  return root;
}

std::string to_bracketed(const ParseNode& n) {
  if (n.is_token) return n.label;
  std::string out = "(" + n.label;
  for (const ParseNode& c : n.children) {
    out += ' ';
    out += to_bracketed(c);
  }
  out += ')';
  return out;
}

std::vector<std::string> leaf_tokens(const ParseNode& root) {
  std::vector<std::string> out;
  collect_leaves(root, out);
  return out;
}

std::vector<Concept> extract_concepts(const Sample& sample) {
  struct Cand {
    std::string label;
    int64_t start, end;
  };
  std::vector<Cand> cands;
  std::map<std::pair<int64_t, int64_t>, bool> seen;
  // preorder: for a shared span the ancestor (closest to root) comes first
  std::vector<const ParseNode*> stack;
  for (auto it = sample.parse.children.rbegin(); it != sample.parse.children.rend(); ++it)
    stack.push_back(&*it);
  while (!stack.empty()) {
    const ParseNode* n = stack.back();
    stack.pop_back();
    if (n->is_token) continue;
    const auto key = std::make_pair(n->start, n->end);
    if (!seen[key]) {
      seen[key] = true;
      cands.push_back({n->label, n->start, n->end});
    }
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it)
      stack.push_back(&*it);
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.start != b.start) return a.start < b.start;
    return (a.end - a.start) > (b.end - b.start);
  });
  std::vector<Concept> out;
  out.reserve(cands.size());
  for (const Cand& c : cands)
    out.push_back({join_span(sample.tokens, c.start, c.end), sample.id, c.start,
                   c.end, c.label});
  return out;
}

Vocab::Vocab() {
  tokens_ = {"<pad>", "<unk>", "<s>"};
  for (size_t i = 0; i < tokens_.size(); ++i)
    ids_[tokens_[i]] = static_cast<int64_t>(i);
}

int64_t Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int64_t id = size();
  ids_[token] = id;
  tokens_.push_back(token);
  return id;
}

int64_t Vocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int64_t id) const {
  return tokens_.at(static_cast<size_t>(id));
}

std::pair<Sample, std::string> sample_from_json(const json& rec, bool lowercase,
                                                const std::string& fallback_id) {
  for (const char* field : {"text", "parse", "label"})
    if (!rec.contains(field))
      throw std::runtime_error(std::string("missing field '") + field + "'");

  Sample s;
  s.id = rec.contains("id") ? rec["id"].get<std::string>() : fallback_id;
  try {
    s.parse = parse_ptb(rec["parse"].get<std::string>());
  } catch (const ParseError& e) {
    throw std::runtime_error(std::string("bad parse: ") + e.what());
  }
  if (lowercase) lowercase_leaves(s.parse);
  s.tokens = leaf_tokens(s.parse);

  std::string text = rec["text"].get<std::string>();
  if (lowercase) text = lower(text);
  if (split_ws(text) != s.tokens)
    throw std::runtime_error("parse leaves do not match text tokens");

  if (rec.contains("decisive_span")) {
    const auto& sp = rec["decisive_span"];
    s.decisive_span = {sp.at(0).get<int64_t>(), sp.at(1).get<int64_t>()};
  }
  return {std::move(s), rec["label"].get<std::string>()};
}

void resolve_token_ids(Sample& s, const Vocab& vocab) {
  s.token_ids.clear();
  s.token_ids.reserve(s.tokens.size());
  for (const std::string& t : s.tokens) s.token_ids.push_back(vocab.id_of(t));
}

Dataset load_dataset(const std::string& path, const Vocab* vocab,
                     const LabelManifest* manifest, bool lowercase) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  Dataset ds;
  if (vocab) ds.vocab = *vocab;
  if (manifest) ds.labels = *manifest;

  std::vector<std::string> raw_labels;
  std::map<std::string, int64_t> seen_ids;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = " (line " + std::to_string(lineno) + " of " + path + ")";
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(std::string("invalid JSON: ") + e.what() + at);
    }
    std::pair<Sample, std::string> parsed;
    try {
      parsed = sample_from_json(rec, lowercase, std::to_string(lineno));
    } catch (const std::exception& e) {
      throw std::runtime_error(e.what() + at);
    }
    Sample& s = parsed.first;
    if (seen_ids.count(s.id))
      throw std::runtime_error("duplicate sample id '" + s.id + "'" + at);
    seen_ids[s.id] = lineno;
    raw_labels.push_back(std::move(parsed.second));
    ds.samples.push_back(std::move(s));
  }

  if (manifest) {
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      auto it = ds.labels.find(raw_labels[i]);
      if (it == ds.labels.end())
        throw std::runtime_error("unknown label '" + raw_labels[i] +
                                 "' not present in supplied manifest");
      ds.samples[i].label = it->second;
    }
  } else {
    for (const std::string& l : raw_labels) ds.labels.emplace(l, 0);
    int64_t next = 0;
    for (auto& [k, v] : ds.labels) v = next++;  // std::map: lexicographic
    for (size_t i = 0; i < ds.samples.size(); ++i)
      ds.samples[i].label = ds.labels.at(raw_labels[i]);
  }

  if (!vocab) {
    for (const Sample& s : ds.samples)
      for (const std::string& t : s.tokens) ds.vocab.add(t);
  }
  for (Sample& s : ds.samples) resolve_token_ids(s, ds.vocab);
  return ds;
}

}  // namespace phx::corpus
