#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "phx/corpus.h"
#include "phx/rng.h"
#include "test_util.h"

using namespace phx;
using corpus::ParseNode;
using corpus::Sample;

namespace {

bool same_tree(const ParseNode& a, const ParseNode& b) {
  if (a.label != b.label || a.is_token != b.is_token || a.start != b.start ||
      a.end != b.end || a.children.size() != b.children.size())
    return false;
  for (size_t i = 0; i < a.children.size(); ++i)
    if (!same_tree(a.children[i], b.children[i])) return false;
  return true;
}

// random sentence trees for the round-trip and concept properties
ParseNode random_tree(Rng& rng, int depth, int64_t& leaf_counter) {
  static const std::vector<std::string> labels = {"A", "B", "C", "D"};
  static const std::vector<std::string> words = {"red", "cat", "ran", "far",
                                                 "dog", "saw"};
  ParseNode n;
  n.label = labels[static_cast<size_t>(rng.below(labels.size()))];
  n.start = leaf_counter;
  const uint64_t n_children = 1 + rng.below(3);
  for (uint64_t i = 0; i < n_children; ++i) {
    if (depth >= 4 || rng.below(3) == 0) {
      ParseNode leaf;
      leaf.label = words[static_cast<size_t>(rng.below(words.size()))];
      leaf.is_token = true;
      leaf.start = leaf_counter;
      leaf.end = ++leaf_counter;
      n.children.push_back(std::move(leaf));
    } else {
      n.children.push_back(random_tree(rng, depth + 1, leaf_counter));
    }
  }
  n.end = leaf_counter;
  return n;
}

Sample sample_of(const std::string& bracketed) {
  Sample s;
  s.id = "t";
  s.parse = corpus::parse_ptb(bracketed);
  s.tokens = corpus::leaf_tokens(s.parse);
  s.label = 0;
  return s;
}

}  // namespace

TEST_CASE("parse_ptb builds spans by leaf order") {
  const ParseNode root =
      corpus::parse_ptb("(S (NP (DT the) (NN dog)) (VP (VBD barked)))");
  CHECK(root.label == "S");
  CHECK(root.start == 0);
  CHECK(root.end == 3);
  REQUIRE(root.children.size() == 2);
  CHECK(root.children[0].label == "NP");
  CHECK(root.children[0].start == 0);
  CHECK(root.children[0].end == 2);
  CHECK(root.children[1].label == "VP");
  CHECK(root.children[1].start == 2);
  CHECK(root.children[1].end == 3);
  const auto toks = corpus::leaf_tokens(root);
  CHECK(toks == std::vector<std::string>{"the", "dog", "barked"});
}

TEST_CASE("parse_ptb single-leaf tree") {
  const ParseNode root = corpus::parse_ptb("(NP (NN soup))");
  CHECK(root.label == "NP");
  CHECK(root.start == 0);
  CHECK(root.end == 1);
  REQUIRE(root.children.size() == 1);
}

TEST_CASE("parse_ptb reports unbalanced input at 1-based offset") {
  try {
    corpus::parse_ptb("(S (NP the dog");
    FAIL("expected ParseError");
  } catch (const corpus::ParseError& e) {
    CHECK(e.offset == 15);
  }
}

TEST_CASE("parse_ptb error cases") {
  CHECK_THROWS_AS(corpus::parse_ptb("()"), corpus::ParseError);
  CHECK_THROWS_AS(corpus::parse_ptb("(NP)"), corpus::ParseError);
  CHECK_THROWS_AS(corpus::parse_ptb("( (NP (NN x)))"), corpus::ParseError);
  CHECK_THROWS_AS(corpus::parse_ptb("(S a) (S b)"), corpus::ParseError);
  CHECK_THROWS_AS(corpus::parse_ptb("dog"), corpus::ParseError);
  CHECK_THROWS_AS(corpus::parse_ptb(""), corpus::ParseError);
}

TEST_CASE("bracketed round-trip is identity") {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    int64_t leaves = 0;
    const ParseNode t = random_tree(rng, 0, leaves);
    const ParseNode back = corpus::parse_ptb(corpus::to_bracketed(t));
    CHECK(same_tree(t, back));
  }
}

TEST_CASE("extract_concepts: dedup keeps shallowest, order (start, -len)") {
  const Sample s = sample_of("(S (NP (DT the) (NN dog)) (VP (VBD barked)))");
  const auto cs = corpus::extract_concepts(s);
  REQUIRE(cs.size() == 4);
  CHECK(cs[0].node_label == "NP");
  CHECK(cs[0].start == 0);
  CHECK(cs[0].end == 2);
  CHECK(cs[0].phrase == "the dog");
  CHECK(cs[1].node_label == "DT");
  CHECK(cs[1].phrase == "the");
  CHECK(cs[2].node_label == "NN");
  CHECK(cs[2].phrase == "dog");
  // VP and VBD share [2,3); the shallower VP is kept
  CHECK(cs[3].node_label == "VP");
  CHECK(cs[3].phrase == "barked");
}

TEST_CASE("extract_concepts: root-only tree yields nothing") {
  CHECK(corpus::extract_concepts(sample_of("(S dog)")).empty());
}

TEST_CASE("extract_concepts: unary chain dedups to the top") {
  const auto cs = corpus::extract_concepts(sample_of("(S (X (Y (Z a))))"));
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].node_label == "X");
  CHECK(cs[0].start == 0);
  CHECK(cs[0].end == 1);
}

TEST_CASE("extract_concepts properties on random trees") {
  Rng rng(4242);
  for (int i = 0; i < 40; ++i) {
    int64_t leaves = 0;
    Sample s;
    s.id = "r";
    s.parse = random_tree(rng, 0, leaves);
    s.tokens = corpus::leaf_tokens(s.parse);
    const auto cs = corpus::extract_concepts(s);
    std::set<std::pair<int64_t, int64_t>> spans;
    for (const auto& c : cs) {
      // phrase matches the joined tokens of its span
      std::string joined;
      for (int64_t t = c.start; t < c.end; ++t) {
        if (t > c.start) joined += ' ';
        joined += s.tokens[static_cast<size_t>(t)];
      }
      CHECK(c.phrase == joined);
      CHECK(spans.insert({c.start, c.end}).second);  // no duplicate spans
      CHECK(c.end > c.start);
    }
    // no full-span concept unless the root is a unary chain
    if (s.parse.children.size() > 1)
      CHECK(spans.count({0, static_cast<int64_t>(s.tokens.size())}) == 0);
  }
}

TEST_CASE("vocab reserved ids and UNK contract") {
  corpus::Vocab v;
  CHECK(v.size() == 3);
  CHECK(v.id_of("<pad>") == corpus::Vocab::kPad);
  CHECK(v.id_of("<unk>") == corpus::Vocab::kUnk);
  CHECK(v.id_of("<s>") == corpus::Vocab::kPool);
  const int64_t dog = v.add("dog");
  CHECK(v.add("dog") == dog);
  CHECK(v.id_of("dog") == dog);
  CHECK(v.token_of(dog) == "dog");
  CHECK(v.id_of("never-seen") == corpus::Vocab::kUnk);
}

TEST_CASE("load_dataset builds lexicographic label manifest") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string path = dir + "/two.jsonl";
  phx_test::write_file(
      path,
      R"js({"text": "the dog", "parse": "(S (DT the) (NN dog))", "label": "pos"})js"
      "\n"
      R"js({"text": "a cat", "parse": "(S (DT a) (NN cat))", "label": "neg"})js"
      "\n");
  const auto ds = corpus::load_dataset(path);
  REQUIRE(ds.samples.size() == 2);
  CHECK(ds.labels.size() == 2);
  CHECK(ds.labels.at("neg") == 0);
  CHECK(ds.labels.at("pos") == 1);
  CHECK(ds.samples[0].label == 1);
  CHECK(ds.samples[1].label == 0);
  CHECK(ds.samples[0].id == "1");  // auto-assigned line number
  CHECK(ds.samples[0].token_ids.size() == 2);
}

TEST_CASE("load_dataset errors name the line") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string path = dir + "/bad.jsonl";
  phx_test::write_file(path,
                       R"js({"text": "ok", "parse": "(S (X ok))", "label": "a"})js"
                       "\n"
                       R"js({"text": "missing", "label": "a"})js"
                       "\n");
  try {
    corpus::load_dataset(path);
    FAIL("expected error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("parse") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects parse/text token mismatch") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string path = dir + "/mismatch.jsonl";
  phx_test::write_file(
      path, R"js({"text": "the cat", "parse": "(S (DT the) (NN dog))", "label": "a"})js"
            "\n");
  CHECK_THROWS(corpus::load_dataset(path));
}

TEST_CASE("reloading with a supplied vocab maps unseen tokens to UNK") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string p1 = dir + "/train.jsonl";
  const std::string p2 = dir + "/eval.jsonl";
  phx_test::write_file(
      p1, R"js({"text": "the dog", "parse": "(S (DT the) (NN dog))", "label": "x"})js"
          "\n");
  phx_test::write_file(
      p2,
      R"js({"text": "the wombat", "parse": "(S (DT the) (NN wombat))", "label": "x"})js"
      "\n");
  const auto train = corpus::load_dataset(p1);
  const auto eval = corpus::load_dataset(p2, &train.vocab, &train.labels);
  CHECK(eval.samples[0].token_ids[0] == train.vocab.id_of("the"));
  CHECK(eval.samples[0].token_ids[1] == corpus::Vocab::kUnk);
}

TEST_CASE("unknown label with supplied manifest is an error") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string p1 = dir + "/m1.jsonl";
  const std::string p2 = dir + "/m2.jsonl";
  phx_test::write_file(
      p1, R"js({"text": "ok", "parse": "(S (X ok))", "label": "known"})js" "\n");
  phx_test::write_file(
      p2, R"js({"text": "ok", "parse": "(S (X ok))", "label": "novel"})js" "\n");
  const auto train = corpus::load_dataset(p1);
  CHECK_THROWS(corpus::load_dataset(p2, &train.vocab, &train.labels));
}

TEST_CASE("duplicate ids are rejected") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string path = dir + "/dup.jsonl";
  phx_test::write_file(
      path, R"js({"id": "x", "text": "a", "parse": "(S (X a))", "label": "l"})js"
            "\n"
            R"js({"id": "x", "text": "b", "parse": "(S (X b))", "label": "l"})js"
            "\n");
  CHECK_THROWS(corpus::load_dataset(path));
}

TEST_CASE("lowercase flag applies to tokens") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string path = dir + "/case.jsonl";
  phx_test::write_file(
      path, R"js({"text": "The Dog", "parse": "(S (DT The) (NN Dog))", "label": "l"})js"
            "\n");
  const auto ds = corpus::load_dataset(path, nullptr, nullptr, /*lowercase=*/true);
  CHECK(ds.samples[0].tokens == std::vector<std::string>{"the", "dog"});
}

TEST_CASE("decisive_span is picked up when present") {
  const auto dir = phx_test::scratch_dir("corpus");
  const std::string path = dir + "/dec.jsonl";
  phx_test::write_file(
      path,
      R"js({"text": "the dog", "parse": "(S (DT the) (NN dog))", "label": "l", "decisive_span": [1, 2]})js"
      "\n");
  const auto ds = corpus::load_dataset(path);
  REQUIRE(ds.samples[0].decisive_span.has_value());
  CHECK(ds.samples[0].decisive_span->first == 1);
  CHECK(ds.samples[0].decisive_span->second == 2);
}
