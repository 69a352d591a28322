/*
 * Copyright 2026 the softgaz authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the softgaz toolkit: sequence labeling with continuous
 * "soft gazetteer" features derived from cross-lingual entity-linking
 * candidate retrieval, plus the experiment harness around it.
 *
 * All functions returning a pointer return NULL on failure; functions
 * returning sgz_status return SGZ_OK on success. In both cases
 * sgz_last_error() describes the most recent failure on the calling
 * thread. Strings returned as char* are owned by the caller and must be
 * released with sgz_string_free().
 */

#ifndef SOFTGAZ_SOFTGAZ_H
#define SOFTGAZ_SOFTGAZ_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SGZ_OK = 0,
  SGZ_ERR_INVALID = 2, /* bad input file, config, or argument */
  SGZ_ERR_INTERNAL = 3 /* broken invariant */
} sgz_status;

typedef struct sgz_corpus sgz_corpus;
typedef struct sgz_kb sgz_kb;
typedef struct sgz_gazetteer sgz_gazetteer;
typedef struct sgz_lexicon sgz_lexicon;
typedef struct sgz_embtable sgz_embtable;
typedef struct sgz_candidates sgz_candidates;
typedef struct sgz_features sgz_features;
typedef struct sgz_model sgz_model;

const char* sgz_version(void);
const char* sgz_last_error(void);
void sgz_string_free(char* s);

/* -- corpus ------------------------------------------------------------ */

/* Column format: token<TAB>tag[<TAB>link], blank line between sentences.
 * GPE tags are merged into LOC on load. */
sgz_corpus* sgz_corpus_read(const char* path);
sgz_status sgz_corpus_write(const sgz_corpus* corpus, const char* path);
int64_t sgz_corpus_size(const sgz_corpus* corpus);
int64_t sgz_corpus_sentence_len(const sgz_corpus* corpus, int64_t index);
/* One token<TAB>tag[<TAB>link] line per token. */
char* sgz_corpus_sentence(const sgz_corpus* corpus, int64_t index);
void sgz_corpus_free(sgz_corpus* corpus);

/* Seeded synthetic benchmark: corpus, KB, gazetteer and lexicon with the
 * requested shape; deterministic given the seed. */
sgz_status sgz_synth_generate(uint64_t seed, int64_t n_sentences, int64_t kb_size,
                              double nil_fraction, int64_t gaz_size, sgz_corpus** corpus_out,
                              sgz_kb** kb_out, sgz_gazetteer** gaz_out, sgz_lexicon** lex_out);

/* -- knowledge resources ------------------------------------------------ */

sgz_kb* sgz_kb_load(const char* path);
sgz_status sgz_kb_write(const sgz_kb* kb, const char* path);
int64_t sgz_kb_size(const sgz_kb* kb);
void sgz_kb_free(sgz_kb* kb);

sgz_gazetteer* sgz_gazetteer_load(const char* path);
sgz_status sgz_gazetteer_write(const sgz_gazetteer* gaz, const char* path);
int64_t sgz_gazetteer_size(const sgz_gazetteer* gaz);
/* Union with every gold mention of the corpus (the gazetteer oracle). */
sgz_gazetteer* sgz_gazetteer_augment(const sgz_gazetteer* gaz, const sgz_corpus* corpus);
void sgz_gazetteer_free(sgz_gazetteer* gaz);

sgz_lexicon* sgz_lexicon_load(const char* path, const sgz_kb* kb);
sgz_status sgz_lexicon_write(const sgz_lexicon* lex, const char* path);
int64_t sgz_lexicon_size(const sgz_lexicon* lex);
void sgz_lexicon_free(sgz_lexicon* lex);

/* -- character n-gram embeddings ----------------------------------------- */

sgz_embtable* sgz_embtable_build(const sgz_kb* kb, const sgz_lexicon* lex,
                                 const int32_t* ngram_sizes, int32_t n_sizes, int32_t dim,
                                 uint64_t seed);
/* Hinge-loss training on lexicon pairs with random negatives; reports the
 * mean cosine between lexicon surface forms and their linked entries. */
sgz_status sgz_embtable_train(sgz_embtable* table, const sgz_lexicon* lex, const sgz_kb* kb,
                              int32_t epochs, double margin, int32_t negatives, double lr,
                              uint64_t seed, double* mean_cos_out);
sgz_status sgz_embtable_save(const sgz_embtable* table, const char* path);
sgz_embtable* sgz_embtable_load(const char* path);
void sgz_embtable_free(sgz_embtable* table);

/* -- candidate retrieval -------------------------------------------------- */

/* Scored KB candidates for every span of length 1..max_span_len. */
sgz_candidates* sgz_retrieve_exact(const sgz_corpus* corpus, const sgz_lexicon* lex,
                                   const sgz_kb* kb, int32_t max_span_len, int32_t k);
sgz_candidates* sgz_retrieve_charagram(const sgz_corpus* corpus, const sgz_kb* kb,
                                       const sgz_embtable* table, int32_t max_span_len, int32_t k);
/* Perfect retrieval from gold links; NIL mentions get no candidates. */
sgz_candidates* sgz_retrieve_oracle(const sgz_corpus* corpus, const sgz_kb* kb,
                                    int32_t max_span_len);
/* Rows "entry_id<TAB>type<TAB>score", best first; empty string when the
 * span has no candidates. */
char* sgz_candidates_for_span(const sgz_candidates* cands, int64_t sentence, int32_t start,
                              int32_t len);
sgz_status sgz_candidates_save(const sgz_candidates* cands, const char* path);
sgz_candidates* sgz_candidates_load(const char* path, const sgz_kb* kb, int32_t max_span_len);
void sgz_candidates_free(sgz_candidates* cands);

/* -- features -------------------------------------------------------------- */

/* blocks_csv: comma-separated subset of
 * top1,top3score,top3count,top30count,margin. */
sgz_features* sgz_features_soft(const sgz_corpus* corpus, const sgz_candidates* cands,
                                const char* blocks_csv, int32_t max_span_len, int32_t k_retrieve);
sgz_features* sgz_features_binary_gaz(const sgz_corpus* corpus, const sgz_gazetteer* gaz,
                                      int32_t max_span_len);
/* Soft features concatenated with oracle indicators restricted to words
 * inside gold NIL mentions. */
sgz_features* sgz_features_nil_augment(const sgz_corpus* corpus, const sgz_features* soft,
                                       const sgz_features* oracle_bits);
int64_t sgz_features_dim(const sgz_features* features);
sgz_status sgz_features_save(const sgz_features* features, const char* path);
sgz_features* sgz_features_load(const char* path);
void sgz_features_free(sgz_features* features);

/* -- model ------------------------------------------------------------------ */

/* config_json: optional object with char_dim, char_filters, char_window,
 * word_dim, hidden, feat_proj, dropout, lr, momentum, lr_decay, clip,
 * epochs, batch_size, unk_prob. NULL features trains the plain model. */
sgz_model* sgz_model_train(const sgz_corpus* train, const sgz_features* features,
                           const char* model_config_json, uint64_t seed);
sgz_status sgz_model_save(const sgz_model* model, const char* path);
sgz_model* sgz_model_load(const char* path);
/* Newline-separated BIO tags for one sentence. */
char* sgz_model_predict(const sgz_model* model, const sgz_corpus* corpus,
                        const sgz_features* features, int64_t sentence);
void sgz_model_free(sgz_model* model);

/* -- evaluation -------------------------------------------------------------- */

/* Span-level P/R/F1 JSON report comparing two tag assignments of the same
 * sentences. */
char* sgz_eval_span_f1(const sgz_corpus* gold, const sgz_corpus* pred);

/* -- experiment commands ------------------------------------------------------ */

/* command: synth | kb-build | retrieve | featurize | train | evaluate |
 * cv | report. config_json follows the documented run-config schema. */
sgz_status sgz_run_command(const char* command, const char* config_json);
sgz_status sgz_run_command_capture(const char* command, const char* config_json, char** output);

#ifdef __cplusplus
}
#endif

#endif /* SOFTGAZ_SOFTGAZ_H */
