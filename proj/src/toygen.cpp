#include "phx/toygen.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "phx/corpus.h"

namespace phx::toygen {

using nlohmann::json;

namespace {

const std::vector<std::string> kPosAdj = {
    "good",     "great",  "wonderful", "delightful", "superb",    "charming",
    "pleasant", "lovely", "excellent", "graceful",   "marvelous", "splendid"};
const std::vector<std::string> kNegAdj = {
    "bad",     "awful", "terrible", "dreadful", "dull",   "boring",
    "tedious", "bland", "dismal",   "lousy",    "clumsy", "dreary"};
const std::vector<std::string> kAdv = {"very",  "truly",  "really",
                                       "quite", "rather", "simply"};
const std::vector<std::string> kNoun = {
    "film",  "movie",   "story",  "plot", "soundtrack", "acting", "script",
    "dinner", "soup",   "service", "cast", "hotel",      "scene",  "ending"};
const std::vector<std::string> kVerb = {"was", "seemed", "felt", "looked",
                                        "sounded"};
const std::vector<std::string> kOpener = {"overall", "honestly", "frankly",
                                          "anyway"};
const std::vector<std::string> kTailNoun = {"end", "whole", "morning",
                                            "evening"};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[static_cast<size_t>(rng.below(v.size()))];
}

struct Built {
  std::vector<std::string> tokens;
  std::string parse;
  int64_t dec_start = 0, dec_end = 0;
};

// Templates share the sentiment-bearing "(ADJP (RB adv) (JJ adj))" and keep
// every other slot label-independent.
Built build_sentence(int64_t tmpl, int64_t label, Rng& rng) {
  const std::string adj = label == 1 ? pick(kPosAdj, rng) : pick(kNegAdj, rng);
  const std::string adv = pick(kAdv, rng);
  const std::string noun = pick(kNoun, rng);
  std::string noun2 = pick(kNoun, rng);
  if (noun2 == noun) noun2 = pick(kNoun, rng);
  const std::string verb = pick(kVerb, rng);
  const std::string opener = pick(kOpener, rng);
  const std::string tail = pick(kTailNoun, rng);

  const std::string adjp =
      "(ADJP (RB " + adv + ") (JJ " + adj + "))";

  Built b;
  std::ostringstream p;
  switch (tmpl) {
    case 0:
      // opener , the N V adv ADJ in the T .
      p << "(S (ADVP (RB " << opener << ")) (, ,) (NP (DT the) (NN " << noun
        << ")) (VP (VBD " << verb << ") " << adjp
        << " (PP (IN in) (NP (DT the) (NN " << tail << ")))) (. .))";
      b.dec_start = 5;
      b.dec_end = 7;
      break;
    case 1:
      // this N V adv ADJ to the N2 from the start .
      p << "(S (NP (DT this) (NN " << noun << ")) (VP (VBD " << verb << ") "
        << adjp << " (PP (TO to) (NP (DT the) (NN " << noun2
        << "))) (PP (IN from) (NP (DT the) (NN start)))) (. .))";
      b.dec_start = 3;
      b.dec_end = 5;
      break;
    case 2:
      // the N V adv ADJ and the N2 went by quickly .
      p << "(S (S (NP (DT the) (NN " << noun << ")) (VP (VBD " << verb << ") "
        << adjp << ")) (CC and) (S (NP (DT the) (NN " << noun2
        << ")) (VP (VBD went) (ADVP (RB by) (RB quickly)))) (. .))";
      b.dec_start = 3;
      b.dec_end = 5;
      break;
    case 3:
      // the N near the N2 V a adv ADJ thing on the T .
      p << "(S (NP (NP (DT the) (NN " << noun << ")) (PP (IN near) (NP (DT the) (NN "
        << noun2 << ")))) (VP (VBD " << verb << ") (NP (DT a) " << adjp
        << " (NN thing)) (PP (IN on) (NP (DT the) (NN " << tail
        << ")))) (. .))";
      b.dec_start = 7;
      b.dec_end = 9;
      break;
    default:
      // opener , the N2 and the N V adv ADJ all along .
      p << "(S (ADVP (RB " << opener << ")) (, ,) (NP (NP (DT the) (NN "
        << noun2 << ")) (CC and) (NP (DT the) (NN " << noun
        << "))) (VP (VBD " << verb << ") " << adjp
        << " (ADVP (RB all) (RB along))) (. .))";
      b.dec_start = 8;
      b.dec_end = 10;
      break;
  }
  b.parse = p.str();
  b.tokens = corpus::leaf_tokens(corpus::parse_ptb(b.parse));
  return b;
}

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace

json make_record(int64_t index, const std::string& id_prefix, Rng& rng) {
  const int64_t label = index % 2;  // exactly balanced
  const int64_t tmpl = static_cast<int64_t>(rng.below(5));
  const Built b = build_sentence(tmpl, label, rng);
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "%s%06lld", id_prefix.c_str(),
                static_cast<long long>(index));
  return json{{"id", idbuf},
              {"text", join(b.tokens)},
              {"parse", b.parse},
              {"label", label == 1 ? "pos" : "neg"},
              {"decisive_span", {b.dec_start, b.dec_end}}};
}

std::vector<json> make_records(int64_t n, const std::string& id_prefix,
                               uint64_t seed) {
  Rng rng(seed);
  std::vector<json> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out.push_back(make_record(i, id_prefix, rng));
  return out;
}

json perturb_neutral(const json& record, Rng& rng) {
  corpus::ParseNode root = corpus::parse_ptb(record.at("parse").get<std::string>());
  const std::unordered_set<std::string> nouns(kNoun.begin(), kNoun.end());

  // first leaf that is a lexicon noun, swapped for a different one
  bool done = false;
  std::function<void(corpus::ParseNode&)> walk = [&](corpus::ParseNode& n) {
    if (done) return;
    if (n.is_token) {
      if (nouns.count(n.label)) {
        std::string repl = n.label;
        while (repl == n.label) repl = pick(kNoun, rng);
        n.label = repl;
        done = true;
      }
      return;
    }
    for (auto& c : n.children) walk(c);
  };
  walk(root);
  if (!done) throw std::runtime_error("perturb_neutral: record has no noun to swap");

  json out = record;
  out["id"] = record.at("id").get<std::string>() + "-p";
  out["parse"] = corpus::to_bracketed(root);
  out["text"] = join(corpus::leaf_tokens(root));
  return out;
}

void write_toy_dataset(const std::string& out_dir, int64_t n_train,
                       int64_t n_test, int64_t n_pairs, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto write = [](const std::string& path, const std::vector<json>& recs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const json& r : recs) out << r.dump() << "\n";
  };
  write(out_dir + "/train.jsonl", make_records(n_train, "tr", seed));
  const auto test = make_records(n_test, "te", seed + 1);
  write(out_dir + "/test.jsonl", test);

  Rng rng(seed + 2);
  std::vector<json> pairs;
  const int64_t np = std::min<int64_t>(n_pairs, n_test);
  for (int64_t i = 0; i < np; ++i) {
    const json& a = test[static_cast<size_t>(i)];
    pairs.push_back(json{{"a", a}, {"b", perturb_neutral(a, rng)}});
  }
  write(out_dir + "/pairs.jsonl", pairs);
}

}  // namespace phx::toygen
