#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mdtc/data.hpp"
#include "mdtc/errors.hpp"
#include "mdtc/synth.hpp"

using namespace mdtc;

namespace {

Corpus word_corpus(std::vector<std::string> texts) {
  std::vector<Example> ex;
  for (std::size_t i = 0; i < texts.size(); ++i)
    ex.push_back({texts[i], "l" + std::to_string(i % 2), "d0"});
  return make_corpus(std::move(ex));
}

std::string temp_path(const std::string& name) {
  return std::string("mdtc_test_") + name;
}

}  // namespace

TEST_CASE("byte tokenizer is total, closed, and length-exact") {
  TokenizerSpec spec = byte_tokenizer();
  spec.max_len = 4;
  Vocab v = byte_vocab();
  CHECK(v.size() == 257);
  CHECK(v.pad_id() == 256);

  std::vector<int> ids = tokenize("ab", spec, v);
  CHECK(ids == std::vector<int>{97, 98, 256, 256});

  std::vector<int> trunc = tokenize("abcdef", spec, v);
  CHECK(trunc == std::vector<int>{97, 98, 99, 100});

  // Arbitrary bytes, including non-ASCII, stay inside [0, 256].
  std::string wild = "caf\xc3\xa9 \x01\xff";
  spec.max_len = 16;
  std::vector<int> w = tokenize(wild, spec, v);
  REQUIRE(w.size() == 16);
  for (int id : w) {
    CHECK(id >= 0);
    CHECK(id <= 256);
  }
  CHECK(w[3] == 0xc3);
  CHECK(w[4] == 0xa9);
}

TEST_CASE("word vocab: lowercasing, frequency floor, lexicographic ids") {
  Corpus c = word_corpus({"The the zebra", "apple zebra Apple", "apple once"});
  TokenizerSpec spec = word_tokenizer();
  spec.max_len = 5;
  Vocab v = build_vocab(c, spec);
  // apple x3, the x2, zebra x2 survive min_freq 2; "once" does not.
  REQUIRE(v.words == std::vector<std::string>{"apple", "the", "zebra"});
  CHECK(v.size() == 5);  // PAD, UNK, then three words
  CHECK(v.word_to_id.at("apple") == 2);
  CHECK(v.word_to_id.at("the") == 3);
  CHECK(v.word_to_id.at("zebra") == 4);

  std::vector<int> ids = tokenize("The the unknown", spec, v);
  CHECK(ids == std::vector<int>{3, 3, 1, 0, 0});  // UNK = 1, PAD = 0
}

TEST_CASE("word tokenizer respects max_len exactly") {
  Corpus c = word_corpus({"a a b b c c"});
  TokenizerSpec spec = word_tokenizer();
  spec.max_len = 3;
  Vocab v = build_vocab(c, spec);
  std::vector<int> ids = tokenize("a b c a b c", spec, v);
  REQUIRE(ids.size() == 3);
  CHECK(ids == std::vector<int>{2, 3, 4});
  CHECK(tokenize("", spec, v) == std::vector<int>{0, 0, 0});
}

TEST_CASE("corpus files round-trip bit for bit") {
  std::vector<Example> ex = {
      {"hello \"quoted\" text", "pos", "books"},
      {"tabs\tand\nnewlines", "neg", "dvd"},
      {"unicode caf\xc3\xa9", "pos", "dvd"},
  };
  Corpus c = make_corpus(ex);
  CHECK(c.labels == std::vector<std::string>{"neg", "pos"});
  CHECK(c.domains == std::vector<std::string>{"books", "dvd"});

  std::string path = temp_path("roundtrip.jsonl");
  save_corpus(c, path);
  Corpus back = load_corpus(path);
  REQUIRE(back.examples.size() == c.examples.size());
  for (std::size_t i = 0; i < c.examples.size(); ++i) {
    CHECK(back.examples[i].text == c.examples[i].text);
    CHECK(back.examples[i].label == c.examples[i].label);
    CHECK(back.examples[i].domain == c.examples[i].domain);
  }
  CHECK(back.labels == c.labels);
  CHECK(back.domains == c.domains);
  std::remove(path.c_str());
}

TEST_CASE("corpus parser rejects malformed lines by number") {
  auto write_and_load = [](const std::string& body) {
    std::string path = temp_path("bad.jsonl");
    std::ofstream out(path, std::ios::binary);
    out << body;
    out.close();
    try {
      load_corpus(path);
      std::remove(path.c_str());
      return std::string("no error");
    } catch (const ParseError& e) {
      std::remove(path.c_str());
      return std::string(e.what());
    }
  };

  std::string good = "{\"text\":\"x\",\"label\":\"a\",\"domain\":\"d\"}\n";
  CHECK(write_and_load(good + "not json\n").find("line 2") !=
        std::string::npos);
  CHECK(write_and_load("{\"text\":\"x\",\"label\":\"a\"}\n")
            .find("missing string field \"domain\"") != std::string::npos);
  CHECK(write_and_load(
            "{\"text\":\"x\",\"label\":\"a\",\"domain\":\"d\",\"extra\":1}\n")
            .find("unknown field \"extra\"") != std::string::npos);
  CHECK(write_and_load("{\"text\":\"\",\"label\":\"a\",\"domain\":\"d\"}\n")
            .find("empty") != std::string::npos);
  CHECK(write_and_load("").find("empty corpus") != std::string::npos);
  CHECK(write_and_load(
            "{\"text\":7,\"label\":\"a\",\"domain\":\"d\"}\n")
            .find("line 1") != std::string::npos);
}

TEST_CASE("index_corpus maps inventories and skips token-free records") {
  Corpus c = make_corpus({{"aa bb", "pos", "books"},
                          {"   ", "neg", "dvd"},
                          {"aa", "odd", "electronics"}});
  TokenizerSpec spec = word_tokenizer();
  spec.max_len = 4;
  spec.min_freq = 1;
  Vocab v = build_vocab(c, spec);
  IndexedCorpus ic = index_corpus(c, spec, v, {"neg", "pos"}, {"books", "dvd"});
  REQUIRE(ic.items.size() == 2);  // the whitespace-only record is skipped
  CHECK(ic.skipped == 1);
  REQUIRE(ic.warnings.size() == 1);
  CHECK(ic.warnings[0].find("record 2") != std::string::npos);
  CHECK(ic.items[0].label == 1);
  CHECK(ic.items[0].domain == 0);
  // Unknown label and domain fall outside the inventories.
  CHECK(ic.items[1].label == -1);
  CHECK(ic.items[1].domain == -1);
  CHECK(ic.source == std::vector<std::size_t>{0, 2});
}

TEST_CASE("batch_indices covers everything in deterministic chunks") {
  Rng rng(3);
  auto batches = batch_indices(5, 2, rng, false);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0] == std::vector<std::size_t>{0, 1});
  CHECK(batches[1] == std::vector<std::size_t>{2, 3});
  CHECK(batches[2] == std::vector<std::size_t>{4});

  Rng r1(4), r2(4);
  auto s1 = batch_indices(7, 3, r1, true);
  auto s2 = batch_indices(7, 3, r2, true);
  CHECK(s1 == s2);
  std::set<std::size_t> seen;
  for (const auto& b : s1) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(batch_indices(5, 0, rng, false), ConfigError);
}

TEST_CASE("kfold partitions each stratum evenly") {
  std::vector<Example> ex;
  for (int d = 0; d < 2; ++d)
    for (int l = 0; l < 2; ++l)
      for (int i = 0; i < 7; ++i)
        ex.push_back({"t" + std::to_string(i), "l" + std::to_string(l),
                      "d" + std::to_string(d)});
  Corpus c = make_corpus(ex);

  std::vector<std::string> warnings;
  auto folds = kfold_split(c, 3, 99, &warnings);
  REQUIRE(folds.size() == 3);
  CHECK(warnings.empty());

  std::map<std::size_t, int> test_count;
  for (const auto& f : folds) {
    CHECK(f.train.size() + f.test.size() == ex.size());
    for (auto i : f.test) ++test_count[i];
    // Each stratum of 7 splits 3/2/2 across folds: at most 3 per fold.
    std::map<std::string, int> per;
    for (auto i : f.test)
      ++per[c.examples[i].domain + "|" + c.examples[i].label];
    for (const auto& [k, n] : per) {
      CHECK(n >= 2);
      CHECK(n <= 3);
    }
  }
  CHECK(test_count.size() == ex.size());  // every example tested exactly once
  for (const auto& [i, n] : test_count) CHECK(n == 1);

  auto again = kfold_split(c, 3, 99, nullptr);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    CHECK(folds[f].train == again[f].train);
    CHECK(folds[f].test == again[f].test);
  }
}

TEST_CASE("kfold keeps undersized strata in training and flags them") {
  Corpus c = make_corpus({{"a", "pos", "books"},
                          {"b", "pos", "books"},
                          {"c", "pos", "books"},
                          {"lonely", "neg", "books"}});
  std::vector<std::string> warnings;
  auto folds = kfold_split(c, 3, 1, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("neg") != std::string::npos);
  for (const auto& f : folds) {
    bool in_train = false;
    for (auto i : f.train) in_train = in_train || i == 3;
    CHECK(in_train);
    for (auto i : f.test) CHECK(i != 3);
  }
  CHECK_THROWS_AS(kfold_split(c, 1, 1, nullptr), ConfigError);
}

TEST_CASE("synth generator: counts, inventories, determinism") {
  SynthSpec spec;
  spec.n_labels = 3;
  spec.n_train_domains = 2;
  spec.n_heldout_domains = 1;
  spec.docs_per_domain_label = 5;
  spec.doc_length = 12;

  SynthResult a = synth_corpus(spec, 77);
  SynthResult b = synth_corpus(spec, 77);
  CHECK(a.train.examples.size() == 2 * 3 * 5);
  CHECK(a.heldout.examples.size() == 1 * 3 * 5);
  CHECK(a.train.labels == std::vector<std::string>{"label0", "label1", "label2"});
  CHECK(a.train.domains == std::vector<std::string>{"d0", "d1"});
  CHECK(a.heldout.domains == std::vector<std::string>{"h0"});
  for (std::size_t i = 0; i < a.train.examples.size(); ++i) {
    CHECK(a.train.examples[i].text == b.train.examples[i].text);
    CHECK(a.train.examples[i].label == b.train.examples[i].label);
  }

  SynthResult c = synth_corpus(spec, 78);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train.examples.size(); ++i)
    any_diff = any_diff || a.train.examples[i].text != c.train.examples[i].text;
  CHECK(any_diff);
}

TEST_CASE("synth rates shape the token mix") {
  SynthSpec spec;
  spec.n_labels = 2;
  spec.n_train_domains = 2;
  spec.n_heldout_domains = 1;
  spec.docs_per_domain_label = 50;
  spec.doc_length = 30;
  spec.spur_rate = 0.0;

  SynthResult r = synth_corpus(spec, 5);
  std::size_t label_tokens = 0, spur_tokens = 0, total = 0;
  for (const auto& ex : r.train.examples) {
    std::stringstream ss(ex.text);
    std::string tok;
    while (ss >> tok) {
      ++total;
      if (tok.rfind("lbl", 0) == 0) ++label_tokens;
      if (tok.rfind("spur", 0) == 0) ++spur_tokens;
    }
  }
  CHECK(spur_tokens == 0);
  CHECK(total == r.train.examples.size() * spec.doc_length);
  // Binomial(total, 0.06): three sigmas around the mean.
  const double n = static_cast<double>(total);
  const double mean = n * spec.label_rate;
  const double sigma = std::sqrt(n * spec.label_rate * (1 - spec.label_rate));
  CHECK(static_cast<double>(label_tokens) > mean - 3 * sigma);
  CHECK(static_cast<double>(label_tokens) < mean + 3 * sigma);
}

TEST_CASE("synth validates its configuration") {
  SynthSpec bad;
  bad.label_rate = 0.6;
  bad.domain_rate = 0.3;
  bad.spur_rate = 0.2;  // sums above 1
  CHECK_THROWS_AS(synth_corpus(bad, 1), ConfigError);

  SynthSpec neg;
  neg.spur_rate = -0.1;
  CHECK_THROWS_AS(synth_corpus(neg, 1), ConfigError);

  SynthSpec zero;
  zero.n_labels = 0;
  CHECK_THROWS_AS(synth_corpus(zero, 1), ConfigError);
}
