#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdtc/rng.hpp"

namespace mdtc {

// ---------------------------------------------------------------------------
// Corpus

struct Example {
  std::string text;
  std::string label;
  std::string domain;
};

struct Corpus {
  std::vector<Example> examples;
  // Sorted lexicographically so index assignment is reproducible.
  std::vector<std::string> labels;
  std::vector<std::string> domains;
};

// Builds sorted label/domain inventories from the examples.
Corpus make_corpus(std::vector<Example> examples);

// One JSON object per line with exactly the string fields text, label,
// domain. Throws ParseError naming the line on malformed input and on an
// empty corpus.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// ---------------------------------------------------------------------------
// Tokenization

enum class TokenMode { Byte, Word };

struct TokenizerSpec {
  TokenMode mode = TokenMode::Byte;
  std::size_t max_len = 1000;
  bool lowercase = true;     // word mode only
  std::size_t min_freq = 2;  // word mode only
};

TokenizerSpec byte_tokenizer();
TokenizerSpec word_tokenizer();

// Byte mode is fixed: ids 0..255 are the byte values, PAD = 256, V = 257.
// Word mode reserves PAD = 0 and UNK = 1; remaining ids are assigned densely
// to training tokens meeting the frequency threshold, in lexicographic order.
struct Vocab {
  TokenMode mode = TokenMode::Byte;
  std::vector<std::string> words;  // word mode: token with id 2 + position
  std::map<std::string, int> word_to_id;

  std::size_t size() const;
  int pad_id() const;
  int unk_id() const;  // word mode only; throws for byte mode
};

Vocab byte_vocab();
Vocab build_vocab(const Corpus& corpus, const TokenizerSpec& spec);

// Total and length-exact: always returns exactly spec.max_len ids,
// truncating or right-padding with PAD.
std::vector<int> tokenize(const std::string& text, const TokenizerSpec& spec,
                          const Vocab& vocab);

// ---------------------------------------------------------------------------
// Indexed corpus and batches

struct IndexedExample {
  std::vector<int> ids;
  int label = -1;   // -1: label unseen by the model
  int domain = -1;  // -1: domain outside the training inventory
};

struct IndexedCorpus {
  std::vector<IndexedExample> items;
  std::vector<std::size_t> source;  // item -> index into corpus.examples
  std::size_t skipped = 0;          // records with no real tokens
  std::vector<std::string> warnings;
};

IndexedCorpus index_corpus(const Corpus& corpus, const TokenizerSpec& spec,
                           const Vocab& vocab,
                           const std::vector<std::string>& labels,
                           const std::vector<std::string>& domains);

struct Batch {
  std::vector<std::vector<int>> ids;
  std::vector<int> labels;
  std::vector<int> domains;
  std::size_t size() const { return ids.size(); }
};

// Chunks a seeded permutation of [0, n) into batches; the final partial
// batch is emitted. shuffle=false preserves order and consumes no
// randomness.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n,
                                                    std::size_t batch_size,
                                                    Rng& rng, bool shuffle);
Batch make_batch(const IndexedCorpus& corpus,
                 const std::vector<std::size_t>& idxs);

// ---------------------------------------------------------------------------
// Cross-validation folds

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified by (domain, label). Strata smaller than k are flagged via
// `warnings` and kept in the training side of every fold; all other examples
// appear in exactly one test fold.
std::vector<FoldSplit> kfold_split(const Corpus& corpus, std::size_t k,
                                   std::uint64_t seed,
                                   std::vector<std::string>* warnings = nullptr);

}  // namespace mdtc
