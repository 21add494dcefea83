#include "mdtc/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mdtc/errors.hpp"

namespace mdtc {

namespace {

constexpr int kBytePad = 256;
constexpr int kWordPad = 0;
constexpr int kWordUnk = 1;

std::string lowercase_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> toks;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

std::vector<std::string> sorted_unique(std::set<std::string> s) {
  return {s.begin(), s.end()};
}

}  // namespace

Corpus make_corpus(std::vector<Example> examples) {
  Corpus c;
  std::set<std::string> labels, domains;
  for (const auto& ex : examples) {
    labels.insert(ex.label);
    domains.insert(ex.domain);
  }
  c.examples = std::move(examples);
  c.labels = sorted_unique(std::move(labels));
  c.domains = sorted_unique(std::move(domains));
  return c;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus file: " + path);
  std::vector<Example> examples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("corpus line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (!j.is_object())
      throw ParseError("corpus line " + std::to_string(lineno) +
                       ": expected an object");
    for (const char* field : {"text", "label", "domain"}) {
      if (!j.contains(field) || !j[field].is_string())
        throw ParseError("corpus line " + std::to_string(lineno) +
                         ": missing string field \"" + field + "\"");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k != "text" && k != "label" && k != "domain")
        throw ParseError("corpus line " + std::to_string(lineno) +
                         ": unknown field \"" + k + "\"");
    }
    Example ex{j["text"].get<std::string>(), j["label"].get<std::string>(),
               j["domain"].get<std::string>()};
    if (ex.text.empty() || ex.label.empty() || ex.domain.empty())
      throw ParseError("corpus line " + std::to_string(lineno) +
                       ": empty text, label, or domain");
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw ParseError("empty corpus: " + path);
  return make_corpus(std::move(examples));
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write corpus file: " + path);
  for (const auto& ex : corpus.examples) {
    nlohmann::json j;
    j["text"] = ex.text;
    j["label"] = ex.label;
    j["domain"] = ex.domain;
    out << j.dump() << '\n';
  }
  if (!out) throw ParseError("write failed: " + path);
}

TokenizerSpec byte_tokenizer() { return TokenizerSpec{}; }

TokenizerSpec word_tokenizer() {
  TokenizerSpec s;
  s.mode = TokenMode::Word;
  s.max_len = 256;
  return s;
}

std::size_t Vocab::size() const {
  return mode == TokenMode::Byte ? 257 : 2 + words.size();
}

int Vocab::pad_id() const {
  return mode == TokenMode::Byte ? kBytePad : kWordPad;
}

int Vocab::unk_id() const {
  if (mode == TokenMode::Byte)
    throw ConfigError("byte vocabulary is closed; it has no UNK");
  return kWordUnk;
}

Vocab byte_vocab() { return Vocab{}; }

Vocab build_vocab(const Corpus& corpus, const TokenizerSpec& spec) {
  if (spec.mode == TokenMode::Byte) return byte_vocab();
  std::map<std::string, std::size_t> freq;
  for (const auto& ex : corpus.examples) {
    const std::string text =
        spec.lowercase ? lowercase_ascii(ex.text) : ex.text;
    for (auto& tok : split_ws(text)) ++freq[tok];
  }
  Vocab v;
  v.mode = TokenMode::Word;
  for (const auto& [tok, n] : freq) {  // std::map iterates sorted
    if (n < spec.min_freq) continue;
    v.word_to_id[tok] = static_cast<int>(2 + v.words.size());
    v.words.push_back(tok);
  }
  return v;
}

std::vector<int> tokenize(const std::string& text, const TokenizerSpec& spec,
                          const Vocab& vocab) {
  if (vocab.mode != spec.mode)
    throw ConfigError("tokenizer mode does not match vocabulary mode");
  std::vector<int> ids;
  ids.reserve(spec.max_len);
  if (spec.mode == TokenMode::Byte) {
    for (std::size_t i = 0; i < text.size() && ids.size() < spec.max_len; ++i)
      ids.push_back(static_cast<unsigned char>(text[i]));
  } else {
    const std::string t = spec.lowercase ? lowercase_ascii(text) : text;
    for (auto& tok : split_ws(t)) {
      if (ids.size() >= spec.max_len) break;
      auto it = vocab.word_to_id.find(tok);
      ids.push_back(it == vocab.word_to_id.end() ? kWordUnk : it->second);
    }
  }
  ids.resize(spec.max_len, vocab.pad_id());
  return ids;
}

IndexedCorpus index_corpus(const Corpus& corpus, const TokenizerSpec& spec,
                           const Vocab& vocab,
                           const std::vector<std::string>& labels,
                           const std::vector<std::string>& domains) {
  auto find_index = [](const std::vector<std::string>& inv,
                       const std::string& s) {
    auto it = std::find(inv.begin(), inv.end(), s);
    return it == inv.end() ? -1 : static_cast<int>(it - inv.begin());
  };
  IndexedCorpus out;
  const int pad = vocab.pad_id();
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const auto& ex = corpus.examples[i];
    std::vector<int> ids = tokenize(ex.text, spec, vocab);
    const bool all_pad =
        std::all_of(ids.begin(), ids.end(), [&](int t) { return t == pad; });
    if (all_pad) {
      ++out.skipped;
      out.warnings.push_back("record " + std::to_string(i + 1) +
                             " produced no tokens; skipped");
      continue;
    }
    IndexedExample item;
    item.ids = std::move(ids);
    item.label = find_index(labels, ex.label);
    item.domain = find_index(domains, ex.domain);
    out.items.push_back(std::move(item));
    out.source.push_back(i);
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n,
                                                    std::size_t batch_size,
                                                    Rng& rng, bool shuffle) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) mdtc::shuffle(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch make_batch(const IndexedCorpus& corpus,
                 const std::vector<std::size_t>& idxs) {
  Batch b;
  for (std::size_t i : idxs) {
    const auto& item = corpus.items.at(i);
    b.ids.push_back(item.ids);
    b.labels.push_back(item.label);
    b.domains.push_back(item.domain);
  }
  return b;
}

std::vector<FoldSplit> kfold_split(const Corpus& corpus, std::size_t k,
                                   std::uint64_t seed,
                                   std::vector<std::string>* warnings) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>>
      strata;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i)
    strata[{corpus.examples[i].domain, corpus.examples[i].label}].push_back(i);

  std::vector<FoldSplit> folds(k);
  std::vector<std::vector<std::size_t>> test_of(k);
  std::vector<std::size_t> always_train;
  Rng rng(seed);
  for (auto& [key, members] : strata) {  // sorted stratum order
    if (members.size() < k) {
      if (warnings)
        warnings->push_back("stratum (" + key.first + ", " + key.second +
                            ") has " + std::to_string(members.size()) +
                            " < k examples; kept in training for all folds");
      always_train.insert(always_train.end(), members.begin(), members.end());
      continue;
    }
    shuffle(members, rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      test_of[i % k].push_back(members[i]);
  }
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(test_of[f].begin(), test_of[f].end());
    std::set<std::size_t> in_test(test_of[f].begin(), test_of[f].end());
    folds[f].test = test_of[f];
    for (std::size_t i = 0; i < corpus.examples.size(); ++i)
      if (!in_test.count(i)) folds[f].train.push_back(i);
  }
  return folds;
}

}  // namespace mdtc
