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

#include "softgaz/softgaz.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <sstream>
#include <string>

#include "softgaz/corpus.hpp"
#include "softgaz/error.hpp"
#include "softgaz/eval.hpp"
#include "softgaz/features.hpp"
#include "softgaz/kb.hpp"
#include "softgaz/model.hpp"
#include "softgaz/pipeline.hpp"
#include "softgaz/retrieval.hpp"
#include "softgaz/rng.hpp"
#include "softgaz/strutil.hpp"

// Opaque handle definitions; each wraps one core value.
struct sgz_corpus {
  softgaz::Corpus value;
};
struct sgz_kb {
  softgaz::KnowledgeBase value;
};
struct sgz_gazetteer {
  softgaz::Gazetteer value;
};
struct sgz_lexicon {
  softgaz::BilingualLexicon value;
};
struct sgz_embtable {
  softgaz::NgramEmbeddingTable value;
};
struct sgz_candidates {
  softgaz::CandidateCache value;
};
struct sgz_features {
  softgaz::FeatureSet value;
};
struct sgz_model {
  softgaz::NerModel value;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

sgz_status status_of(const std::exception& e) {
  if (dynamic_cast<const softgaz::InvalidInput*>(&e)) return SGZ_ERR_INVALID;
  return SGZ_ERR_INTERNAL;
}

template <typename Fn>
sgz_status guard_status(Fn&& fn) {
  try {
    fn();
    return SGZ_OK;
  } catch (const std::exception& e) {
    set_error(e.what());
    return status_of(e);
  }
}

template <typename Fn>
auto guard_ptr(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    set_error(e.what());
    return nullptr;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const softgaz::Corpus& corpus_of(const sgz_corpus* c) {
  if (!c) throw softgaz::InvalidInput("null corpus handle");
  return c->value;
}

const softgaz::Sentence& sentence_of(const sgz_corpus* c, int64_t index) {
  const auto& corpus = corpus_of(c);
  if (index < 0 || static_cast<std::size_t>(index) >= corpus.size()) {
    throw softgaz::InvalidInput("sentence index out of range: " + std::to_string(index));
  }
  return corpus[static_cast<std::size_t>(index)];
}

template <typename H>
auto& value_of(const H* h, const char* what) {
  if (!h) throw softgaz::InvalidInput(std::string("null ") + what + " handle");
  return h->value;
}

std::vector<softgaz::WordFeatureMatrix> features_or_zero(const sgz_features* features,
                                                         const softgaz::Corpus& corpus,
                                                         std::size_t* dim_out) {
  if (!features) {
    *dim_out = 0;
    std::vector<softgaz::WordFeatureMatrix> out(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      out[i] = softgaz::WordFeatureMatrix(corpus[i].size(), 0);
    }
    return out;
  }
  features->value.validate_against(corpus);
  *dim_out = features->value.dim;
  return features->value.sentences;
}

}  // namespace

extern "C" {

const char* sgz_version(void) { return "0.1.0"; }

const char* sgz_last_error(void) { return g_last_error.c_str(); }

void sgz_string_free(char* s) { std::free(s); }

/* -- corpus ------------------------------------------------------------ */

sgz_corpus* sgz_corpus_read(const char* path) {
  return guard_ptr([&]() -> sgz_corpus* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_corpus{softgaz::read_corpus(path)};
  });
}

sgz_status sgz_corpus_write(const sgz_corpus* corpus, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    softgaz::write_corpus(corpus_of(corpus), path);
  });
}

int64_t sgz_corpus_size(const sgz_corpus* corpus) {
  return corpus ? static_cast<int64_t>(corpus->value.size()) : -1;
}

int64_t sgz_corpus_sentence_len(const sgz_corpus* corpus, int64_t index) {
  try {
    return static_cast<int64_t>(sentence_of(corpus, index).size());
  } catch (const std::exception& e) {
    set_error(e.what());
    return -1;
  }
}

char* sgz_corpus_sentence(const sgz_corpus* corpus, int64_t index) {
  return guard_ptr([&]() -> char* {
    const auto& s = sentence_of(corpus, index);
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.tokens[i];
      out += '\t';
      out += s.tags[i];
      if (i < s.links.size() && !s.links[i].empty()) {
        out += '\t';
        out += s.links[i];
      }
      out += '\n';
    }
    return dup_string(out);
  });
}

void sgz_corpus_free(sgz_corpus* corpus) { delete corpus; }

sgz_status sgz_synth_generate(uint64_t seed, int64_t n_sentences, int64_t kb_size,
                              double nil_fraction, int64_t gaz_size, sgz_corpus** corpus_out,
                              sgz_kb** kb_out, sgz_gazetteer** gaz_out, sgz_lexicon** lex_out) {
  return guard_status([&]() {
    if (!corpus_out || !kb_out || !gaz_out || !lex_out) {
      throw softgaz::InvalidInput("null output pointer");
    }
    softgaz::SynthParams p;
    p.seed = seed;
    p.n_sentences = n_sentences;
    p.kb_size = kb_size;
    p.nil_fraction = nil_fraction;
    p.gaz_size = gaz_size;
    softgaz::SynthData data = softgaz::synth_generate(p);
    *corpus_out = new sgz_corpus{std::move(data.corpus)};
    *kb_out = new sgz_kb{std::move(data.kb)};
    *gaz_out = new sgz_gazetteer{std::move(data.gazetteer)};
    *lex_out = new sgz_lexicon{std::move(data.lexicon)};
  });
}

/* -- knowledge resources ------------------------------------------------ */

sgz_kb* sgz_kb_load(const char* path) {
  return guard_ptr([&]() -> sgz_kb* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_kb{softgaz::load_kb(path, softgaz::EntityTypeSet())};
  });
}

sgz_status sgz_kb_write(const sgz_kb* kb, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    softgaz::write_file(path, softgaz::format_kb(value_of(kb, "kb")));
  });
}

int64_t sgz_kb_size(const sgz_kb* kb) { return kb ? static_cast<int64_t>(kb->value.size()) : -1; }

void sgz_kb_free(sgz_kb* kb) { delete kb; }

sgz_gazetteer* sgz_gazetteer_load(const char* path) {
  return guard_ptr([&]() -> sgz_gazetteer* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_gazetteer{softgaz::load_gazetteer(path, softgaz::EntityTypeSet())};
  });
}

sgz_status sgz_gazetteer_write(const sgz_gazetteer* gaz, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    softgaz::write_file(path, softgaz::format_gazetteer(value_of(gaz, "gazetteer")));
  });
}

int64_t sgz_gazetteer_size(const sgz_gazetteer* gaz) {
  return gaz ? static_cast<int64_t>(gaz->value.size()) : -1;
}

sgz_gazetteer* sgz_gazetteer_augment(const sgz_gazetteer* gaz, const sgz_corpus* corpus) {
  return guard_ptr([&]() -> sgz_gazetteer* {
    return new sgz_gazetteer{
        softgaz::augment_gazetteer(value_of(gaz, "gazetteer"), corpus_of(corpus))};
  });
}

void sgz_gazetteer_free(sgz_gazetteer* gaz) { delete gaz; }

sgz_lexicon* sgz_lexicon_load(const char* path, const sgz_kb* kb) {
  return guard_ptr([&]() -> sgz_lexicon* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_lexicon{softgaz::load_lexicon(path, value_of(kb, "kb"))};
  });
}

sgz_status sgz_lexicon_write(const sgz_lexicon* lex, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    softgaz::write_file(path, softgaz::format_lexicon(value_of(lex, "lexicon")));
  });
}

int64_t sgz_lexicon_size(const sgz_lexicon* lex) {
  return lex ? static_cast<int64_t>(lex->value.size()) : -1;
}

void sgz_lexicon_free(sgz_lexicon* lex) { delete lex; }

/* -- character n-gram embeddings ----------------------------------------- */

sgz_embtable* sgz_embtable_build(const sgz_kb* kb, const sgz_lexicon* lex,
                                 const int32_t* ngram_sizes, int32_t n_sizes, int32_t dim,
                                 uint64_t seed) {
  return guard_ptr([&]() -> sgz_embtable* {
    if (!ngram_sizes || n_sizes < 1) throw softgaz::InvalidInput("need at least one n-gram size");
    std::vector<int> sizes(ngram_sizes, ngram_sizes + n_sizes);
    return new sgz_embtable{softgaz::NgramEmbeddingTable::build(
        value_of(kb, "kb"), value_of(lex, "lexicon"), sizes, static_cast<std::size_t>(dim), seed)};
  });
}

sgz_status sgz_embtable_train(sgz_embtable* table, const sgz_lexicon* lex, const sgz_kb* kb,
                              int32_t epochs, double margin, int32_t negatives, double lr,
                              uint64_t seed, double* mean_cos_out) {
  return guard_status([&]() {
    if (!table) throw softgaz::InvalidInput("null embtable handle");
    softgaz::CharagramTrainConfig cfg;
    cfg.epochs = epochs;
    cfg.margin = margin;
    cfg.negatives_per_pair = negatives;
    cfg.lr = lr;
    cfg.seed = seed;
    double mean_cos =
        softgaz::train_charagram(value_of(lex, "lexicon"), value_of(kb, "kb"), table->value, cfg);
    if (mean_cos_out) *mean_cos_out = mean_cos;
  });
}

sgz_status sgz_embtable_save(const sgz_embtable* table, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    value_of(table, "embtable").save_file(path);
  });
}

sgz_embtable* sgz_embtable_load(const char* path) {
  return guard_ptr([&]() -> sgz_embtable* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_embtable{softgaz::NgramEmbeddingTable::load_file(path)};
  });
}

void sgz_embtable_free(sgz_embtable* table) { delete table; }

/* -- candidate retrieval -------------------------------------------------- */

sgz_candidates* sgz_retrieve_exact(const sgz_corpus* corpus, const sgz_lexicon* lex,
                                   const sgz_kb* kb, int32_t max_span_len, int32_t k) {
  return guard_ptr([&]() -> sgz_candidates* {
    const auto& c = corpus_of(corpus);
    const auto& l = value_of(lex, "lexicon");
    const auto& b = value_of(kb, "kb");
    auto cache = softgaz::retrieve_corpus(
        c,
        [&](const softgaz::Sentence& s, int a, int n) {
          return softgaz::retrieve_exact(softgaz::span_surface(s, a, a + n), l, b,
                                         static_cast<std::size_t>(k));
        },
        max_span_len, static_cast<std::size_t>(k));
    return new sgz_candidates{std::move(cache)};
  });
}

sgz_candidates* sgz_retrieve_charagram(const sgz_corpus* corpus, const sgz_kb* kb,
                                       const sgz_embtable* table, int32_t max_span_len, int32_t k) {
  return guard_ptr([&]() -> sgz_candidates* {
    const auto& c = corpus_of(corpus);
    const auto& b = value_of(kb, "kb");
    const auto& t = value_of(table, "embtable");
    softgaz::NgramIndex index(b, t);
    auto cache = softgaz::retrieve_corpus(
        c,
        [&](const softgaz::Sentence& s, int a, int n) {
          return softgaz::retrieve_charagram(softgaz::span_surface(s, a, a + n), index, t,
                                             static_cast<std::size_t>(k));
        },
        max_span_len, static_cast<std::size_t>(k));
    return new sgz_candidates{std::move(cache)};
  });
}

sgz_candidates* sgz_retrieve_oracle(const sgz_corpus* corpus, const sgz_kb* kb,
                                    int32_t max_span_len) {
  return guard_ptr([&]() -> sgz_candidates* {
    const auto& c = corpus_of(corpus);
    const auto& b = value_of(kb, "kb");
    softgaz::CandidateCache cache;
    cache.max_span_len = max_span_len;
    for (std::size_t si = 0; si < c.size(); ++si) {
      for (const auto& span : softgaz::decode_bio(c[si].tags)) {
        if (span.end - span.start > max_span_len) continue;
        auto link = softgaz::mention_link(c[si], span.start);
        auto cands = softgaz::retrieve_oracle_el(link, b);
        if (!cands.empty()) {
          cache.spans.emplace(
              softgaz::CandidateCache::key(si, span.start, span.end - span.start),
              std::move(cands));
        }
      }
    }
    return new sgz_candidates{std::move(cache)};
  });
}

char* sgz_candidates_for_span(const sgz_candidates* cands, int64_t sentence, int32_t start,
                              int32_t len) {
  return guard_ptr([&]() -> char* {
    const auto& cache = value_of(cands, "candidates");
    std::string out;
    for (const auto& c : cache.get(static_cast<std::size_t>(sentence), start, len)) {
      out += c.entry_id;
      out += '\t';
      out += c.etype;
      out += '\t';
      out += softgaz::fmt_double(c.score);
      out += '\n';
    }
    return dup_string(out);
  });
}

sgz_status sgz_candidates_save(const sgz_candidates* cands, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    softgaz::save_candidate_cache(value_of(cands, "candidates"), path);
  });
}

sgz_candidates* sgz_candidates_load(const char* path, const sgz_kb* kb, int32_t max_span_len) {
  return guard_ptr([&]() -> sgz_candidates* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_candidates{
        softgaz::load_candidate_cache(path, value_of(kb, "kb"), max_span_len)};
  });
}

void sgz_candidates_free(sgz_candidates* cands) { delete cands; }

/* -- features -------------------------------------------------------------- */

sgz_features* sgz_features_soft(const sgz_corpus* corpus, const sgz_candidates* cands,
                                const char* blocks_csv, int32_t max_span_len, int32_t k_retrieve) {
  return guard_ptr([&]() -> sgz_features* {
    const auto& c = corpus_of(corpus);
    const auto& cache = value_of(cands, "candidates");
    softgaz::FeatureConfig fc;
    fc.blocks = softgaz::parse_blocks(blocks_csv ? blocks_csv : "");
    fc.max_span_len = max_span_len;
    fc.k_retrieve = static_cast<std::size_t>(k_retrieve);
    fc.validate();
    auto mf = softgaz::features_from_candidates(c, cache, fc);
    softgaz::FeatureSet fs;
    fs.kind = "soft";
    fs.blocks = softgaz::blocks_to_string(fc.blocks);
    fs.max_span_len = max_span_len;
    fs.types = fc.types.types();
    fs.dim = mf.dim;
    fs.sentences = std::move(mf.sentences);
    return new sgz_features{std::move(fs)};
  });
}

sgz_features* sgz_features_binary_gaz(const sgz_corpus* corpus, const sgz_gazetteer* gaz,
                                      int32_t max_span_len) {
  return guard_ptr([&]() -> sgz_features* {
    const auto& c = corpus_of(corpus);
    const auto& g = value_of(gaz, "gazetteer");
    softgaz::EntityTypeSet types;
    softgaz::FeatureSet fs;
    fs.kind = "binarygaz";
    fs.max_span_len = max_span_len;
    fs.types = types.types();
    fs.dim = static_cast<std::size_t>(max_span_len) * 2 * types.size();
    fs.sentences.reserve(c.size());
    for (const auto& s : c) {
      fs.sentences.push_back(softgaz::binary_gazetteer_features(s, g, max_span_len, types));
    }
    return new sgz_features{std::move(fs)};
  });
}

sgz_features* sgz_features_nil_augment(const sgz_corpus* corpus, const sgz_features* soft,
                                       const sgz_features* oracle_bits) {
  return guard_ptr([&]() -> sgz_features* {
    const auto& c = corpus_of(corpus);
    const auto& s = value_of(soft, "features");
    const auto& o = value_of(oracle_bits, "features");
    s.validate_against(c);
    o.validate_against(c);
    softgaz::FeatureSet fs;
    fs.kind = "nilaug";
    fs.blocks = s.blocks;
    fs.max_span_len = s.max_span_len;
    fs.types = s.types;
    fs.dim = s.dim + o.dim;
    fs.sentences.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      fs.sentences.push_back(
          softgaz::nil_augment(s.sentences[i], o.sentences[i], softgaz::nil_word_mask(c[i])));
    }
    return new sgz_features{std::move(fs)};
  });
}

int64_t sgz_features_dim(const sgz_features* features) {
  return features ? static_cast<int64_t>(features->value.dim) : -1;
}

sgz_status sgz_features_save(const sgz_features* features, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    softgaz::save_feature_set(value_of(features, "features"), path);
  });
}

sgz_features* sgz_features_load(const char* path) {
  return guard_ptr([&]() -> sgz_features* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_features{softgaz::load_feature_set(path)};
  });
}

void sgz_features_free(sgz_features* features) { delete features; }

/* -- model ------------------------------------------------------------------ */

sgz_model* sgz_model_train(const sgz_corpus* train, const sgz_features* features,
                           const char* model_config_json, uint64_t seed) {
  return guard_ptr([&]() -> sgz_model* {
    const auto& c = corpus_of(train);
    nlohmann::json mj = nlohmann::json::object();
    if (model_config_json && *model_config_json) {
      try {
        mj = nlohmann::json::parse(model_config_json);
      } catch (const nlohmann::json::exception& e) {
        throw softgaz::InvalidInput(std::string("invalid model config JSON: ") + e.what());
      }
    }
    softgaz::ModelConfig mc = softgaz::model_config_from_json(mj);
    mc.seed = seed;
    std::size_t dim = 0;
    auto feats = features_or_zero(features, c, &dim);
    softgaz::NerModel model(mc, softgaz::EntityTypeSet(), dim);
    model.fit(c, feats);
    return new sgz_model{std::move(model)};
  });
}

sgz_status sgz_model_save(const sgz_model* model, const char* path) {
  return guard_status([&]() {
    if (!path) throw softgaz::InvalidInput("null path");
    value_of(model, "model").save_file(path);
  });
}

sgz_model* sgz_model_load(const char* path) {
  return guard_ptr([&]() -> sgz_model* {
    if (!path) throw softgaz::InvalidInput("null path");
    return new sgz_model{softgaz::NerModel::load_file(path)};
  });
}

char* sgz_model_predict(const sgz_model* model, const sgz_corpus* corpus,
                        const sgz_features* features, int64_t sentence) {
  return guard_ptr([&]() -> char* {
    const auto& m = value_of(model, "model");
    const auto& s = sentence_of(corpus, sentence);
    softgaz::WordFeatureMatrix f(s.size(), m.feature_dim());
    if (features) {
      const auto& fs = value_of(features, "features");
      if (static_cast<std::size_t>(sentence) >= fs.sentences.size()) {
        throw softgaz::InvalidInput("feature set does not cover this sentence");
      }
      f = fs.sentences[static_cast<std::size_t>(sentence)];
    } else if (m.feature_dim() != 0) {
      throw softgaz::InvalidInput("model expects features but none were given");
    }
    std::string out;
    for (const auto& tag : m.predict(s, f)) {
      out += tag;
      out += '\n';
    }
    return dup_string(out);
  });
}

void sgz_model_free(sgz_model* model) { delete model; }

/* -- evaluation -------------------------------------------------------------- */

char* sgz_eval_span_f1(const sgz_corpus* gold, const sgz_corpus* pred) {
  return guard_ptr([&]() -> char* {
    const auto& g = corpus_of(gold);
    const auto& p = corpus_of(pred);
    softgaz::EvalReport rep = softgaz::span_f1(softgaz::corpus_spans(g), softgaz::corpus_spans(p));
    return dup_string(softgaz::report_to_json(rep).dump(2) + "\n");
  });
}

/* -- experiment commands ------------------------------------------------------ */

static sgz_status run_command_impl(const char* command, const char* config_json,
                                   std::string* capture) {
  return guard_status([&]() {
    if (!command) throw softgaz::InvalidInput("null command");
    nlohmann::json cfg = nlohmann::json::object();
    if (config_json && *config_json) {
      try {
        cfg = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::exception& e) {
        throw softgaz::InvalidInput(std::string("invalid config JSON: ") + e.what());
      }
    }
    if (capture) {
      std::ostringstream ss;
      softgaz::run_command(command, cfg, ss);
      *capture = ss.str();
    } else {
      softgaz::run_command(command, cfg, std::cout);
    }
  });
}

sgz_status sgz_run_command(const char* command, const char* config_json) {
  return run_command_impl(command, config_json, nullptr);
}

sgz_status sgz_run_command_capture(const char* command, const char* config_json, char** output) {
  std::string text;
  sgz_status rc = run_command_impl(command, config_json, &text);
  if (output) *output = dup_string(text);
  return rc;
}

}  // extern "C"
