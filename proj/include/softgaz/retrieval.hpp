// Copyright 2026 the softgaz authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "softgaz/corpus.hpp"
#include "softgaz/kb.hpp"

namespace softgaz {

struct Candidate {
  std::string entry_id;
  std::string etype;
  double score = 0.0;  // always in [0,1]
};

// Candidates ordered by descending score, ties by ascending entry id, no
// duplicate ids.
using CandidateList = std::vector<Candidate>;

// Sorts, deduplicates (keeping the best score per id) and truncates to k.
CandidateList finalize_candidates(CandidateList cands, std::size_t k);

// Character n-gram embedding table. Strings are embedded as the sum of
// the vectors of all their n-grams (with ^/$ boundary markers); n-grams
// absent from the table share one reserved OOV vector.
class NgramEmbeddingTable {
 public:
  NgramEmbeddingTable() = default;
  NgramEmbeddingTable(std::vector<int> sizes, std::size_t dim);

  // Collects every n-gram of the KB names/aliases and lexicon surface
  // forms; vectors are seeded-random.
  static NgramEmbeddingTable build(const KnowledgeBase& kb, const BilingualLexicon& lex,
                                   std::vector<int> sizes, std::size_t dim, uint64_t seed);

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return grams_.size(); }

  // Row index for an n-gram; 0 (the OOV slot) when unknown.
  std::size_t slot(const std::string& gram) const;
  double* vec(std::size_t slot) { return data_.data() + slot * dim_; }
  const double* vec(std::size_t slot) const { return data_.data() + slot * dim_; }

  std::vector<std::string> ngrams_of(const std::string& s) const;

  std::string save() const;
  void save_file(const std::string& path) const;
  static NgramEmbeddingTable parse(const std::string& text, const std::string& origin);
  static NgramEmbeddingTable load_file(const std::string& path);

  friend bool operator==(const NgramEmbeddingTable& a, const NgramEmbeddingTable& b);

 private:
  void add_gram(const std::string& gram);
  void init_vectors(uint64_t seed);

  std::vector<int> sizes_;
  std::size_t dim_ = 0;
  std::vector<std::string> grams_;  // grams_[0] is the OOV slot
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;  // (1 + |grams|) x dim, row 0 = OOV
};

// Sum of n-gram vectors of s. Empty input is an error.
std::vector<double> embed_ngrams(const std::string& s, const NgramEmbeddingTable& table);

// Inverted n-gram index over KB entries with precomputed embeddings for
// every name and alias.
class NgramIndex {
 public:
  NgramIndex(const KnowledgeBase& kb, const NgramEmbeddingTable& table);

  const KnowledgeBase& kb() const { return *kb_; }

  // Entry ordinals sharing at least one raw n-gram with the query string.
  std::vector<std::size_t> candidates_sharing_ngram(const std::string& query) const;

  // Max over the entry's name/alias vectors of cos(query, variant),
  // mapped to (cos+1)/2. Returns false for zero-norm pairs.
  bool score_entry(std::size_t entry_ord, const std::vector<double>& query_vec,
                   double query_norm, double* score) const;

 private:
  const KnowledgeBase* kb_;
  const NgramEmbeddingTable* table_;
  std::unordered_map<std::string, std::vector<std::size_t>> postings_;
  std::vector<std::vector<std::vector<double>>> variant_vecs_;  // per entry, per variant
  std::vector<std::vector<double>> variant_norms_;
};

// Exact lexicon lookup; every match scores 1.0.
CandidateList retrieve_exact(const std::string& span_text, const BilingualLexicon& lexicon,
                             const KnowledgeBase& kb, std::size_t k);

// Top-k by cosine similarity over entries sharing >= 1 n-gram with the
// query. Scores are (cos+1)/2. A zero query embedding yields [].
CandidateList retrieve_charagram(const std::string& span_text, const NgramIndex& index,
                                 const NgramEmbeddingTable& table, std::size_t k);

// Reference implementation scoring every KB entry; used to validate the
// pruned path.
CandidateList retrieve_charagram_exhaustive(const std::string& span_text, const NgramIndex& index,
                                            const NgramEmbeddingTable& table, std::size_t k);

// Gold-link oracle: the linked entry with score 1.0, or [] for NIL /
// unannotated spans. Unknown link ids are a data error.
CandidateList retrieve_oracle_el(const std::optional<std::string>& gold_link, const KnowledgeBase& kb);

struct CharagramTrainConfig {
  int epochs = 30;
  double margin = 0.4;
  int negatives_per_pair = 5;
  double lr = 0.1;
  uint64_t seed = 1;
};

// Hinge-loss contrastive training of the n-gram table on lexicon pairs
// with random negative KB entries. Deterministic given the seed; returns
// the mean cos(foreign, linked entry) after the final epoch.
double train_charagram(const BilingualLexicon& lexicon, const KnowledgeBase& kb,
                       NgramEmbeddingTable& table, const CharagramTrainConfig& config);

double mean_pair_cosine(const BilingualLexicon& lexicon, const KnowledgeBase& kb,
                        const NgramEmbeddingTable& table);

// Span -> candidates, the interface consumed by feature extraction.
using SpanRetriever = std::function<CandidateList(const Sentence&, int start, int len)>;

// Candidate cache over every span of length 1..max_span_len of a corpus.
struct CandidateCache {
  int max_span_len = 3;
  // key: (sentence << 20) | (start << 8) | len; values finalized lists
  std::unordered_map<uint64_t, CandidateList> spans;

  static uint64_t key(std::size_t sentence, int start, int len);
  const CandidateList& get(std::size_t sentence, int start, int len) const;
};

CandidateCache retrieve_corpus(const Corpus& corpus, const SpanRetriever& retriever,
                               int max_span_len, std::size_t k, int threads = 1);

// Rows: sentence_idx<TAB>start<TAB>len<TAB>entry_id<TAB>score.
std::string format_candidate_cache(const CandidateCache& cache);
void save_candidate_cache(const CandidateCache& cache, const std::string& path);
CandidateCache parse_candidate_cache(const std::string& text, const std::string& origin,
                                     const KnowledgeBase& kb, int max_span_len);
CandidateCache load_candidate_cache(const std::string& path, const KnowledgeBase& kb, int max_span_len);

}  // namespace softgaz
