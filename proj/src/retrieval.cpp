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

#include "softgaz/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "softgaz/error.hpp"
#include "softgaz/rng.hpp"
#include "softgaz/strutil.hpp"

namespace softgaz {

CandidateList finalize_candidates(CandidateList cands, std::size_t k) {
  // Best score per id, then descending score with ascending-id ties.
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.entry_id != b.entry_id) return a.entry_id < b.entry_id;
    return a.score > b.score;
  });
  cands.erase(std::unique(cands.begin(), cands.end(),
                          [](const Candidate& a, const Candidate& b) {
                            return a.entry_id == b.entry_id;
                          }),
              cands.end());
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry_id < b.entry_id;
  });
  if (cands.size() > k) cands.resize(k);
  return cands;
}

// ---------------------------------------------------------------------------
// NgramEmbeddingTable
// ---------------------------------------------------------------------------

NgramEmbeddingTable::NgramEmbeddingTable(std::vector<int> sizes, std::size_t dim)
    : sizes_(std::move(sizes)), dim_(dim) {
  if (sizes_.empty() || dim_ == 0) throw InvalidInput("ngram table needs sizes and a positive dim");
  for (int n : sizes_) {
    if (n < 1) throw InvalidInput("ngram sizes must be >= 1");
  }
  grams_.push_back("");  // OOV slot
  data_.assign(dim_, 0.0);
}

void NgramEmbeddingTable::add_gram(const std::string& gram) {
  if (index_.count(gram)) return;
  index_.emplace(gram, grams_.size());
  grams_.push_back(gram);
  data_.resize(grams_.size() * dim_, 0.0);
}

void NgramEmbeddingTable::init_vectors(uint64_t seed) {
  Rng rng(seed);
  for (double& v : data_) v = rng.uniform(-0.1, 0.1);
}

std::size_t NgramEmbeddingTable::slot(const std::string& gram) const {
  auto it = index_.find(gram);
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::string> NgramEmbeddingTable::ngrams_of(const std::string& s) const {
  std::string padded = "^" + s + "$";
  std::vector<std::string> out;
  for (int n : sizes_) {
    if (padded.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= padded.size(); ++i) {
      out.push_back(padded.substr(i, static_cast<std::size_t>(n)));
    }
  }
  return out;
}

NgramEmbeddingTable NgramEmbeddingTable::build(const KnowledgeBase& kb, const BilingualLexicon& lex,
                                               std::vector<int> sizes, std::size_t dim, uint64_t seed) {
  NgramEmbeddingTable table(std::move(sizes), dim);
  auto ingest = [&table](const std::string& s) {
    for (const auto& g : table.ngrams_of(s)) table.add_gram(g);
  };
  for (const auto& e : kb.entries()) {
    ingest(e.name);
    for (const auto& a : e.aliases) ingest(a);
  }
  for (const auto& [surface, _] : lex.pairs()) ingest(surface);
  table.init_vectors(seed);
  return table;
}

std::string NgramEmbeddingTable::save() const {
  std::string out = "sizes=";
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(sizes_[i]);
  }
  out += "\tdim=" + std::to_string(dim_) + "\n";
  // Row 0 (empty key) is the reserved OOV vector.
  for (std::size_t g = 0; g < grams_.size(); ++g) {
    out += grams_[g];
    out += '\t';
    for (std::size_t j = 0; j < dim_; ++j) {
      if (j) out += ',';
      out += fmt_double(data_[g * dim_ + j]);
    }
    out += '\n';
  }
  return out;
}

void NgramEmbeddingTable::save_file(const std::string& path) const { write_file(path, save()); }

NgramEmbeddingTable NgramEmbeddingTable::parse(const std::string& text, const std::string& origin) {
  std::size_t nl = text.find('\n');
  if (nl == std::string::npos) throw InvalidInput(origin + ": missing embedding table header");
  auto header = split(text.substr(0, nl), '\t');
  if (header.size() != 2 || header[0].rfind("sizes=", 0) != 0 || header[1].rfind("dim=", 0) != 0) {
    throw InvalidInput(origin + ": malformed embedding table header");
  }
  std::vector<int> sizes;
  for (const auto& s : split(header[0].substr(6), ',')) {
    sizes.push_back(static_cast<int>(parse_long(s, origin + " header sizes")));
  }
  std::size_t dim = static_cast<std::size_t>(parse_long(header[1].substr(4), origin + " header dim"));
  NgramEmbeddingTable table(sizes, dim);

  std::size_t lineno = 1;
  std::size_t start = nl + 1;
  bool oov_seen = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    ++lineno;
    start = end + 1;
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected 2 columns");
    }
    auto vals = split(cols[1], ',');
    if (vals.size() != dim) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) + " values");
    }
    std::size_t slot;
    if (cols[0].empty()) {
      slot = 0;
      oov_seen = true;
    } else {
      table.add_gram(cols[0]);
      slot = table.slot(cols[0]);
    }
    for (std::size_t j = 0; j < dim; ++j) {
      table.data_[slot * dim + j] = parse_double(vals[j], origin + ":" + std::to_string(lineno));
    }
  }
  if (!oov_seen) throw InvalidInput(origin + ": missing OOV row (empty first column)");
  return table;
}

NgramEmbeddingTable NgramEmbeddingTable::load_file(const std::string& path) {
  return parse(read_file(path), path);
}

bool operator==(const NgramEmbeddingTable& a, const NgramEmbeddingTable& b) {
  return a.sizes_ == b.sizes_ && a.dim_ == b.dim_ && a.grams_ == b.grams_ && a.data_ == b.data_;
}

std::vector<double> embed_ngrams(const std::string& s, const NgramEmbeddingTable& table) {
  if (s.empty()) throw InvalidInput("embed_ngrams: empty string");
  std::vector<double> out(table.dim(), 0.0);
  for (const auto& g : table.ngrams_of(s)) {
    const double* v = table.vec(table.slot(g));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v[j];
  }
  return out;
}

namespace {

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// NgramIndex
// ---------------------------------------------------------------------------

NgramIndex::NgramIndex(const KnowledgeBase& kb, const NgramEmbeddingTable& table)
    : kb_(&kb), table_(&table) {
  variant_vecs_.resize(kb.size());
  variant_norms_.resize(kb.size());
  for (std::size_t e = 0; e < kb.size(); ++e) {
    const KBEntry& entry = kb.entry(e);
    std::vector<std::string> variants{entry.name};
    variants.insert(variants.end(), entry.aliases.begin(), entry.aliases.end());
    std::vector<std::string> entry_grams;
    for (const auto& variant : variants) {
      variant_vecs_[e].push_back(embed_ngrams(variant, table));
      variant_norms_[e].push_back(vec_norm(variant_vecs_[e].back()));
      auto grams = table.ngrams_of(variant);
      entry_grams.insert(entry_grams.end(), grams.begin(), grams.end());
    }
    std::sort(entry_grams.begin(), entry_grams.end());
    entry_grams.erase(std::unique(entry_grams.begin(), entry_grams.end()), entry_grams.end());
    for (const auto& g : entry_grams) postings_[g].push_back(e);
  }
}

std::vector<std::size_t> NgramIndex::candidates_sharing_ngram(const std::string& query) const {
  auto grams = table_->ngrams_of(query);
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  std::vector<std::size_t> out;
  for (const auto& g : grams) {
    auto it = postings_.find(g);
    if (it == postings_.end()) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool NgramIndex::score_entry(std::size_t entry_ord, const std::vector<double>& query_vec,
                             double query_norm, double* score) const {
  if (query_norm <= 0.0) return false;
  double best = -2.0;
  for (std::size_t v = 0; v < variant_vecs_[entry_ord].size(); ++v) {
    double n = variant_norms_[entry_ord][v];
    if (n <= 0.0) continue;
    double cos = vec_dot(query_vec, variant_vecs_[entry_ord][v]) / (query_norm * n);
    best = std::max(best, cos);
  }
  if (best < -1.5) return false;
  *score = (best + 1.0) / 2.0;
  // Guard rounding just outside [0,1].
  *score = std::min(1.0, std::max(0.0, *score));
  return true;
}

// ---------------------------------------------------------------------------
// Retrieval operations
// ---------------------------------------------------------------------------

CandidateList retrieve_exact(const std::string& span_text, const BilingualLexicon& lexicon,
                             const KnowledgeBase& kb, std::size_t k) {
  if (k < 1) throw InvalidInput("retrieve_exact: k must be >= 1");
  const std::vector<std::string>* ids = lexicon.lookup(span_text);
  if (!ids) return {};
  CandidateList out;
  for (const auto& id : *ids) {
    const KBEntry* e = kb.find(id);
    if (!e) throw InvalidInput("lexicon references unknown KB id: " + id);
    out.push_back({id, e->etype, 1.0});
  }
  return finalize_candidates(std::move(out), k);
}

CandidateList retrieve_charagram(const std::string& span_text, const NgramIndex& index,
                                 const NgramEmbeddingTable& table, std::size_t k) {
  std::vector<double> q = embed_ngrams(span_text, table);
  double qn = vec_norm(q);
  if (qn <= 0.0) return {};
  CandidateList out;
  for (std::size_t e : index.candidates_sharing_ngram(span_text)) {
    double score;
    if (index.score_entry(e, q, qn, &score)) {
      const KBEntry& entry = index.kb().entry(e);
      out.push_back({entry.id, entry.etype, score});
    }
  }
  return finalize_candidates(std::move(out), k);
}

CandidateList retrieve_charagram_exhaustive(const std::string& span_text, const NgramIndex& index,
                                            const NgramEmbeddingTable& table, std::size_t k) {
  std::vector<double> q = embed_ngrams(span_text, table);
  double qn = vec_norm(q);
  if (qn <= 0.0) return {};
  CandidateList out;
  for (std::size_t e = 0; e < index.kb().size(); ++e) {
    double score;
    if (index.score_entry(e, q, qn, &score)) {
      const KBEntry& entry = index.kb().entry(e);
      out.push_back({entry.id, entry.etype, score});
    }
  }
  return finalize_candidates(std::move(out), k);
}

CandidateList retrieve_oracle_el(const std::optional<std::string>& gold_link, const KnowledgeBase& kb) {
  if (!gold_link || *gold_link == kNilLink) return {};
  const KBEntry* e = kb.find(*gold_link);
  if (!e) throw InvalidInput("gold link references unknown KB id: " + *gold_link);
  return {{e->id, e->etype, 1.0}};
}

// ---------------------------------------------------------------------------
// Charagram training
// ---------------------------------------------------------------------------

namespace {

struct GramString {
  std::vector<std::size_t> slots;
  std::vector<double> vec;
  double norm = 0.0;
};

void refresh(GramString& g, const NgramEmbeddingTable& table) {
  std::fill(g.vec.begin(), g.vec.end(), 0.0);
  for (std::size_t s : g.slots) {
    const double* v = table.vec(s);
    for (std::size_t j = 0; j < g.vec.size(); ++j) g.vec[j] += v[j];
  }
  g.norm = vec_norm(g.vec);
}

GramString make_gram_string(const std::string& s, const NgramEmbeddingTable& table) {
  GramString g;
  for (const auto& gram : table.ngrams_of(s)) g.slots.push_back(table.slot(gram));
  g.vec.assign(table.dim(), 0.0);
  return g;
}

// d cos(a,b) / d a, given precomputed cosine.
void cos_grad(const std::vector<double>& a, const std::vector<double>& b, double na, double nb,
              double cos_ab, std::vector<double>& out) {
  double inv = 1.0 / (na * nb);
  double self = cos_ab / (na * na);
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = b[j] * inv - a[j] * self;
}

}  // namespace

double mean_pair_cosine(const BilingualLexicon& lexicon, const KnowledgeBase& kb,
                        const NgramEmbeddingTable& table) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [surface, ids] : lexicon.pairs()) {
    auto f = embed_ngrams(surface, table);
    double fn = vec_norm(f);
    for (const auto& id : ids) {
      const KBEntry* e = kb.find(id);
      if (!e) throw InvalidInput("lexicon references unknown KB id: " + id);
      auto ev = embed_ngrams(e->name, table);
      double en = vec_norm(ev);
      if (fn > 0.0 && en > 0.0) {
        total += vec_dot(f, ev) / (fn * en);
        ++count;
      }
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double train_charagram(const BilingualLexicon& lexicon, const KnowledgeBase& kb,
                       NgramEmbeddingTable& table, const CharagramTrainConfig& config) {
  if (lexicon.size() == 0) throw InvalidInput("train_charagram: empty lexicon");
  if (config.epochs < 0 || config.negatives_per_pair < 1) {
    throw InvalidInput("train_charagram: bad epochs or negatives");
  }

  struct Pair {
    GramString foreign;
    std::size_t entry_ord;
  };
  std::vector<Pair> pairs;
  for (const auto& [surface, ids] : lexicon.pairs()) {
    for (const auto& id : ids) {
      long ord = kb.index_of(id);
      if (ord < 0) throw InvalidInput("lexicon references unknown KB id: " + id);
      pairs.push_back({make_gram_string(surface, table), static_cast<std::size_t>(ord)});
    }
  }
  std::vector<GramString> entry_vecs(kb.size());
  std::vector<bool> entry_ready(kb.size(), false);
  auto entry_gram = [&](std::size_t ord) -> GramString& {
    if (!entry_ready[ord]) {
      entry_vecs[ord] = make_gram_string(kb.entry(ord).name, table);
      entry_ready[ord] = true;
    }
    return entry_vecs[ord];
  };

  Rng rng(config.seed);
  std::size_t dim = table.dim();
  std::vector<double> gf(dim), ge(dim), tmp(dim);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t oi : order) {
      Pair& pr = pairs[oi];
      refresh(pr.foreign, table);
      GramString& pos = entry_gram(pr.entry_ord);
      refresh(pos, table);
      if (pr.foreign.norm <= 0.0 || pos.norm <= 0.0) continue;
      double cos_pos = vec_dot(pr.foreign.vec, pos.vec) / (pr.foreign.norm * pos.norm);
      for (int neg = 0; neg < config.negatives_per_pair; ++neg) {
        std::size_t nord = rng.index(kb.size());
        if (nord == pr.entry_ord) continue;
        GramString& negg = entry_gram(nord);
        refresh(negg, table);
        if (negg.norm <= 0.0) continue;
        double cos_neg = vec_dot(pr.foreign.vec, negg.vec) / (pr.foreign.norm * negg.norm);
        if (config.margin - cos_pos + cos_neg <= 0.0) continue;
        // Hinge is active: push the pair together, the negative apart.
        cos_grad(pr.foreign.vec, pos.vec, pr.foreign.norm, pos.norm, cos_pos, gf);
        cos_grad(pr.foreign.vec, negg.vec, pr.foreign.norm, negg.norm, cos_neg, tmp);
        for (std::size_t j = 0; j < dim; ++j) gf[j] = -gf[j] + tmp[j];
        cos_grad(pos.vec, pr.foreign.vec, pos.norm, pr.foreign.norm, cos_pos, ge);
        for (std::size_t j = 0; j < dim; ++j) ge[j] = -ge[j];
        cos_grad(negg.vec, pr.foreign.vec, negg.norm, pr.foreign.norm, cos_neg, tmp);

        for (std::size_t s : pr.foreign.slots) {
          double* v = table.vec(s);
          for (std::size_t j = 0; j < dim; ++j) v[j] -= config.lr * gf[j];
        }
        for (std::size_t s : pos.slots) {
          double* v = table.vec(s);
          for (std::size_t j = 0; j < dim; ++j) v[j] -= config.lr * ge[j];
        }
        for (std::size_t s : negg.slots) {
          double* v = table.vec(s);
          for (std::size_t j = 0; j < dim; ++j) v[j] -= config.lr * tmp[j];
        }
        refresh(pr.foreign, table);
        refresh(pos, table);
        cos_pos = vec_dot(pr.foreign.vec, pos.vec) / (pr.foreign.norm * pos.norm);
      }
    }
  }
  return mean_pair_cosine(lexicon, kb, table);
}

// ---------------------------------------------------------------------------
// Corpus-level retrieval and the candidate cache
// ---------------------------------------------------------------------------

uint64_t CandidateCache::key(std::size_t sentence, int start, int len) {
  if (start < 0 || start >= (1 << 12) || len < 1 || len >= (1 << 8)) {
    throw InternalError("candidate cache span out of addressable range");
  }
  return (static_cast<uint64_t>(sentence) << 20) |
         (static_cast<uint64_t>(start) << 8) | static_cast<uint64_t>(len);
}

const CandidateList& CandidateCache::get(std::size_t sentence, int start, int len) const {
  static const CandidateList empty;
  auto it = spans.find(key(sentence, start, len));
  return it == spans.end() ? empty : it->second;
}

CandidateCache retrieve_corpus(const Corpus& corpus, const SpanRetriever& retriever,
                               int max_span_len, std::size_t k, int threads) {
  CandidateCache cache;
  cache.max_span_len = max_span_len;
  if (threads < 1) threads = 1;
  std::vector<CandidateCache> parts(static_cast<std::size_t>(threads));
  auto work = [&](int tid) {
    CandidateCache& part = parts[static_cast<std::size_t>(tid)];
    for (std::size_t si = static_cast<std::size_t>(tid); si < corpus.size();
         si += static_cast<std::size_t>(threads)) {
      const Sentence& sent = corpus[si];
      int len = static_cast<int>(sent.size());
      for (int n = 1; n <= max_span_len; ++n) {
        for (int a = 0; a + n <= len; ++a) {
          CandidateList cands = retriever(sent, a, n);
          if (!cands.empty()) {
            part.spans.emplace(CandidateCache::key(si, a, n), finalize_candidates(std::move(cands), k));
          }
        }
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& part : parts) {
    for (auto& [key, val] : part.spans) cache.spans.emplace(key, std::move(val));
  }
  return cache;
}

std::string format_candidate_cache(const CandidateCache& cache) {
  std::vector<uint64_t> keys;
  keys.reserve(cache.spans.size());
  for (const auto& [key, _] : cache.spans) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  std::string out;
  for (uint64_t key : keys) {
    std::size_t sentence = key >> 20;
    int start = static_cast<int>((key >> 8) & 0xfff);
    int len = static_cast<int>(key & 0xff);
    for (const auto& c : cache.spans.at(key)) {
      out += std::to_string(sentence);
      out += '\t';
      out += std::to_string(start);
      out += '\t';
      out += std::to_string(len);
      out += '\t';
      out += c.entry_id;
      out += '\t';
      out += fmt_double(c.score);
      out += '\n';
    }
  }
  return out;
}

void save_candidate_cache(const CandidateCache& cache, const std::string& path) {
  write_file(path, format_candidate_cache(cache));
}

CandidateCache parse_candidate_cache(const std::string& text, const std::string& origin,
                                     const KnowledgeBase& kb, int max_span_len) {
  CandidateCache cache;
  cache.max_span_len = max_span_len;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    ++lineno;
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 5) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected 5 columns");
    }
    std::string where = origin + ":" + std::to_string(lineno);
    std::size_t sentence = static_cast<std::size_t>(parse_long(cols[0], where));
    int span_start = static_cast<int>(parse_long(cols[1], where));
    int span_len = static_cast<int>(parse_long(cols[2], where));
    const KBEntry* e = kb.find(cols[3]);
    if (!e) throw InvalidInput(where + ": unknown KB id '" + cols[3] + "'");
    double score = parse_double(cols[4], where);
    if (score < 0.0 || score > 1.0) throw InvalidInput(where + ": score outside [0,1]");
    cache.spans[CandidateCache::key(sentence, span_start, span_len)].push_back({cols[3], e->etype, score});
  }
  for (auto& [_, cands] : cache.spans) {
    cands = finalize_candidates(std::move(cands), cands.size());
  }
  return cache;
}

CandidateCache load_candidate_cache(const std::string& path, const KnowledgeBase& kb, int max_span_len) {
  return parse_candidate_cache(read_file(path), path, kb, max_span_len);
}

}  // namespace softgaz
