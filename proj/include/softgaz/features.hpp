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
#include <string>
#include <vector>

#include "softgaz/corpus.hpp"
#include "softgaz/kb.hpp"
#include "softgaz/retrieval.hpp"

namespace softgaz {

enum FeatureBlock : uint32_t {
  kTop1 = 1u << 0,
  kTop3Score = 1u << 1,
  kTop3Count = 1u << 2,
  kTop30Count = 1u << 3,
  kMargin = 1u << 4,
};

constexpr uint32_t kAllBlocks = kTop1 | kTop3Score | kTop3Count | kTop30Count | kMargin;

struct FeatureConfig {
  uint32_t blocks = kAllBlocks;
  int max_span_len = 3;  // N
  EntityTypeSet types;
  std::size_t k_retrieve = 30;

  void validate() const;
  // Width D of one span feature vector under this config.
  std::size_t span_dim() const;
  // Per-word width: max_span_len * 2 * span_dim.
  std::size_t word_dim() const { return static_cast<std::size_t>(max_span_len) * 2 * span_dim(); }
};

uint32_t parse_blocks(const std::string& csv);
std::string blocks_to_string(uint32_t blocks);

// Per-word feature rows for one sentence, row-major.
struct WordFeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  WordFeatureMatrix() = default;
  WordFeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Span-level feature vector from a scored candidate list. Layout:
// [top1 |T|][top3score 3|T|][top3count |T|][top30count |T|][margin 3],
// restricted to enabled blocks. Empty candidates give a zero vector.
std::vector<double> span_feature_vector(const CandidateList& cands, const FeatureConfig& config);

// Aggregates span vectors into per-word features: for every span length
// n in 1..N, each covering span's vector lands in the word's B-half when
// the word starts the span and in the I-half otherwise; both halves are
// divided by the number of covering spans, and the n-sections are
// concatenated.
WordFeatureMatrix word_features(const Sentence& sentence, const SpanRetriever& retriever,
                                const FeatureConfig& config);

// Same geometry with indicator span vectors from exact gazetteer lookup;
// covering spans combine by max, not averaging.
WordFeatureMatrix binary_gazetteer_features(const Sentence& sentence, const Gazetteer& gaz,
                                            int max_span_len, const EntityTypeSet& types);

// Top1-shaped indicator: 1.0 at type(c1) when score(c1) >= threshold.
std::vector<double> binary_from_retrieval(const CandidateList& cands, double threshold,
                                          const EntityTypeSet& types);

// Concatenates soft features with oracle indicator features zeroed
// outside words covered by gold NIL mentions.
WordFeatureMatrix nil_augment(const WordFeatureMatrix& soft, const WordFeatureMatrix& oracle_bits,
                              const std::vector<bool>& nil_mask);

// True for words inside gold mentions whose link is NIL.
std::vector<bool> nil_word_mask(const Sentence& sentence);

// Feature matrices for a whole corpus plus the header needed to validate
// a reload.
struct FeatureSet {
  std::string kind;  // e.g. "soft", "binarygaz", "nilaug"
  std::string blocks;
  int max_span_len = 0;
  std::vector<std::string> types;
  std::size_t dim = 0;
  std::vector<WordFeatureMatrix> sentences;

  void validate_against(const Corpus& corpus) const;
};

std::string format_feature_set(const FeatureSet& fs);
void save_feature_set(const FeatureSet& fs, const std::string& path);
FeatureSet parse_feature_set(const std::string& text, const std::string& origin);
FeatureSet load_feature_set(const std::string& path);

}  // namespace softgaz
