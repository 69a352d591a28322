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

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "softgaz/corpus.hpp"

namespace softgaz {

// Span-level scores in percent. fold is -1 for aggregate reports.
struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::string, std::array<double, 3>> per_type;  // P, R, F1
  std::optional<double> non_nil_recall;
  std::optional<double> unseen_recall;
  int fold = -1;
  std::size_t n_gold = 0;
  std::size_t n_pred = 0;
  std::size_t n_correct = 0;
};

// A predicted span is correct iff (start, end, type) all match a gold
// span of the same sentence.
EvalReport span_f1(const std::vector<std::vector<SpanMention>>& gold,
                   const std::vector<std::vector<SpanMention>>& pred);

std::vector<std::vector<SpanMention>> corpus_spans(const Corpus& corpus);
std::vector<std::vector<SpanMention>> decode_corpus(const std::vector<std::vector<std::string>>& tags);

struct RecallSubsets {
  std::optional<double> non_nil;  // absent when no non-NIL gold mentions
  std::optional<double> unseen;   // absent when no unseen gold mentions
};

// Recall over gold mentions with a KB link, and over gold mentions whose
// exact surface form never occurs as a training-split gold mention.
// Every gold mention must carry a link annotation.
RecallSubsets recall_subsets(const Corpus& gold_corpus,
                             const std::vector<std::vector<SpanMention>>& pred,
                             const std::set<std::string>& train_mentions);

std::set<std::string> gold_mention_surfaces(const Corpus& corpus, const std::vector<std::size_t>& idx);

struct FoldPlan {
  int k = 0;
  uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // disjoint, covering, sizes differ <= 1
};

FoldPlan make_folds(std::size_t n_sentences, int k, uint64_t seed);

// Trains on the train indices and returns predicted tag sequences for the
// test indices, in order.
using FoldRunner = std::function<std::vector<std::vector<std::string>>(
    const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& test_idx,
    int fold, uint64_t fold_seed)>;

struct CvResult {
  std::vector<EvalReport> folds;
  EvalReport mean;    // unweighted mean of per-fold metrics
  EvalReport pooled;  // computed from summed match counts
};

// Per fold: train on the other k-1 parts, evaluate on the held-out part.
// Unseen-mention sets come from each fold's training split. Folds may run
// on several threads; results do not depend on the schedule.
CvResult cross_validate(const Corpus& corpus, const FoldRunner& runner, int k, uint64_t seed,
                        int threads = 1);

}  // namespace softgaz
