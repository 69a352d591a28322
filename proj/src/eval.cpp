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

#include "softgaz/eval.hpp"

#include <algorithm>
#include <thread>

#include "softgaz/error.hpp"
#include "softgaz/rng.hpp"

namespace softgaz {

namespace {

double pct(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

EvalReport span_f1(const std::vector<std::vector<SpanMention>>& gold,
                   const std::vector<std::vector<SpanMention>>& pred) {
  if (gold.size() != pred.size()) {
    throw InvalidInput("span_f1: gold and predictions cover different sentence counts");
  }
  EvalReport rep;
  struct TypeCounts {
    std::size_t gold = 0, pred = 0, correct = 0;
  };
  std::map<std::string, TypeCounts> by_type;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::multiset<SpanMention> gold_set(gold[i].begin(), gold[i].end());
    for (const auto& g : gold[i]) {
      ++by_type[g.etype].gold;
      ++rep.n_gold;
    }
    for (const auto& p : pred[i]) {
      ++by_type[p.etype].pred;
      ++rep.n_pred;
      auto it = gold_set.find(p);
      if (it != gold_set.end()) {
        gold_set.erase(it);
        ++by_type[p.etype].correct;
        ++rep.n_correct;
      }
    }
  }
  rep.precision = pct(rep.n_correct, rep.n_pred);
  rep.recall = pct(rep.n_correct, rep.n_gold);
  rep.f1 = f1_of(rep.precision, rep.recall);
  for (const auto& [etype, c] : by_type) {
    double p = pct(c.correct, c.pred);
    double r = pct(c.correct, c.gold);
    rep.per_type[etype] = {p, r, f1_of(p, r)};
  }
  return rep;
}

std::vector<std::vector<SpanMention>> corpus_spans(const Corpus& corpus) {
  std::vector<std::vector<SpanMention>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(decode_bio(s.tags));
  return out;
}

std::vector<std::vector<SpanMention>> decode_corpus(const std::vector<std::vector<std::string>>& tags) {
  std::vector<std::vector<SpanMention>> out;
  out.reserve(tags.size());
  for (const auto& t : tags) out.push_back(decode_bio(t));
  return out;
}

RecallSubsets recall_subsets(const Corpus& gold_corpus,
                             const std::vector<std::vector<SpanMention>>& pred,
                             const std::set<std::string>& train_mentions) {
  if (gold_corpus.size() != pred.size()) {
    throw InvalidInput("recall_subsets: gold and predictions cover different sentence counts");
  }
  std::size_t non_nil_total = 0, non_nil_hit = 0;
  std::size_t unseen_total = 0, unseen_hit = 0;
  for (std::size_t i = 0; i < gold_corpus.size(); ++i) {
    const Sentence& sent = gold_corpus[i];
    std::multiset<SpanMention> pred_set(pred[i].begin(), pred[i].end());
    for (const auto& g : decode_bio(sent.tags)) {
      auto link = mention_link(sent, g.start);
      if (!link) {
        throw InvalidInput("recall_subsets: gold mention without a link annotation (sentence " +
                           std::to_string(i) + ")");
      }
      bool hit = pred_set.find(g) != pred_set.end();
      if (*link != kNilLink) {
        ++non_nil_total;
        if (hit) ++non_nil_hit;
      }
      if (!train_mentions.count(span_surface(sent, g.start, g.end))) {
        ++unseen_total;
        if (hit) ++unseen_hit;
      }
    }
  }
  RecallSubsets out;
  if (non_nil_total) out.non_nil = pct(non_nil_hit, non_nil_total);
  if (unseen_total) out.unseen = pct(unseen_hit, unseen_total);
  return out;
}

std::set<std::string> gold_mention_surfaces(const Corpus& corpus, const std::vector<std::size_t>& idx) {
  std::set<std::string> out;
  for (std::size_t i : idx) {
    const Sentence& sent = corpus[i];
    for (const auto& span : decode_bio(sent.tags)) {
      out.insert(span_surface(sent, span.start, span.end));
    }
  }
  return out;
}

FoldPlan make_folds(std::size_t n_sentences, int k, uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > n_sentences) {
    throw InvalidInput("make_folds: need 1 <= k <= n_sentences");
  }
  std::vector<std::size_t> order(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) order[i] = i;
  Rng rng(named_seed(seed, "folds"));
  rng.shuffle(order);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  std::size_t base = n_sentences / static_cast<std::size_t>(k);
  std::size_t extra = n_sentences % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    plan.folds[f].assign(order.begin() + static_cast<long>(pos),
                         order.begin() + static_cast<long>(pos + len));
    std::sort(plan.folds[f].begin(), plan.folds[f].end());
    pos += len;
  }
  return plan;
}

CvResult cross_validate(const Corpus& corpus, const FoldRunner& runner, int k, uint64_t seed,
                        int threads) {
  FoldPlan plan = make_folds(corpus.size(), k, seed);
  CvResult result;
  result.folds.resize(static_cast<std::size_t>(k));

  auto run_fold = [&](int fold) {
    const auto& test_idx = plan.folds[static_cast<std::size_t>(fold)];
    std::vector<std::size_t> train_idx;
    train_idx.reserve(corpus.size() - test_idx.size());
    for (int f = 0; f < k; ++f) {
      if (f == fold) continue;
      const auto& part = plan.folds[static_cast<std::size_t>(f)];
      train_idx.insert(train_idx.end(), part.begin(), part.end());
    }
    std::sort(train_idx.begin(), train_idx.end());

    uint64_t fold_seed = named_seed(seed, "fold-" + std::to_string(fold));
    auto pred_tags = runner(train_idx, test_idx, fold, fold_seed);
    if (pred_tags.size() != test_idx.size()) {
      throw InternalError("fold runner returned a wrong number of predictions");
    }

    Corpus test;
    test.reserve(test_idx.size());
    for (std::size_t i : test_idx) test.push_back(corpus[i]);
    auto gold = corpus_spans(test);
    auto pred = decode_corpus(pred_tags);
    EvalReport rep = span_f1(gold, pred);
    rep.fold = fold;
    bool has_links = true;
    for (const auto& s : test) {
      for (const auto& g : decode_bio(s.tags)) {
        if (!mention_link(s, g.start)) has_links = false;
      }
    }
    if (has_links) {
      RecallSubsets subsets = recall_subsets(test, pred, gold_mention_surfaces(corpus, train_idx));
      rep.non_nil_recall = subsets.non_nil;
      rep.unseen_recall = subsets.unseen;
    }
    result.folds[static_cast<std::size_t>(fold)] = rep;
  };

  if (threads <= 1) {
    for (int f = 0; f < k; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    std::size_t stride = static_cast<std::size_t>(threads);
    for (std::size_t t = 0; t < stride; ++t) {
      pool.emplace_back([&, t]() {
        for (std::size_t f = t; f < static_cast<std::size_t>(k); f += stride) {
          run_fold(static_cast<int>(f));
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Aggregates: unweighted mean of per-fold metrics, plus pooled counts.
  EvalReport& mean = result.mean;
  EvalReport& pooled = result.pooled;
  double nn_sum = 0.0, un_sum = 0.0;
  int nn_n = 0, un_n = 0;
  for (const auto& rep : result.folds) {
    mean.precision += rep.precision / k;
    mean.recall += rep.recall / k;
    mean.f1 += rep.f1 / k;
    pooled.n_gold += rep.n_gold;
    pooled.n_pred += rep.n_pred;
    pooled.n_correct += rep.n_correct;
    if (rep.non_nil_recall) {
      nn_sum += *rep.non_nil_recall;
      ++nn_n;
    }
    if (rep.unseen_recall) {
      un_sum += *rep.unseen_recall;
      ++un_n;
    }
  }
  if (nn_n) mean.non_nil_recall = nn_sum / nn_n;
  if (un_n) mean.unseen_recall = un_sum / un_n;
  pooled.precision = pct(pooled.n_correct, pooled.n_pred);
  pooled.recall = pct(pooled.n_correct, pooled.n_gold);
  pooled.f1 = f1_of(pooled.precision, pooled.recall);
  return result;
}

}  // namespace softgaz
