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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softgaz/kb.hpp"

namespace softgaz {

inline constexpr const char* kNilLink = "NIL";

// Ordered entity type inventory. Feature layouts, label sets and reports
// all follow this order.
class EntityTypeSet {
 public:
  EntityTypeSet() : types_{"LOC", "PER", "ORG"} {}
  explicit EntityTypeSet(std::vector<std::string> types);

  std::size_t size() const { return types_.size(); }
  const std::string& at(std::size_t i) const { return types_[i]; }
  const std::vector<std::string>& types() const { return types_; }
  // -1 when absent.
  int index_of(const std::string& type) const;
  bool contains(const std::string& type) const { return index_of(type) >= 0; }

 private:
  std::vector<std::string> types_;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  // Per-token link column; empty string when absent. Gold conventions:
  // a link (KB entry id or "NIL") sits on the B- token of its mention.
  std::vector<std::string> links;

  std::size_t size() const { return tokens.size(); }
  bool has_links() const;
};

struct SpanMention {
  int start = 0;  // inclusive
  int end = 0;    // exclusive
  std::string etype;

  friend bool operator==(const SpanMention& a, const SpanMention& b) {
    return a.start == b.start && a.end == b.end && a.etype == b.etype;
  }
  friend bool operator<(const SpanMention& a, const SpanMention& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.etype < b.etype;
  }
};

using Corpus = std::vector<Sentence>;

// Relaxed BIO decoding: B- always starts a span; I- after O or after a
// different type also starts one (conlleval convention, total on any
// valid-alphabet sequence).
std::vector<SpanMention> decode_bio(const std::vector<std::string>& tags);

// Inverse of decode_bio for non-overlapping, ordered spans.
std::vector<std::string> encode_bio(const std::vector<SpanMention>& spans, std::size_t len);

// Surface form of a span, tokens joined by single spaces.
std::string span_surface(const Sentence& s, int start, int end);

// Gold link of the mention starting at `start`, or nullopt when the
// sentence carries no annotation there.
std::optional<std::string> mention_link(const Sentence& s, int start);

// Column format: token<TAB>tag[<TAB>link], blank line between sentences.
// Tags are validated against `types` after applying `type_merge`
// (defaults merge GPE into LOC).
Corpus read_corpus(const std::string& path,
                   const std::map<std::string, std::string>& type_merge = {{"GPE", "LOC"}},
                   const EntityTypeSet& types = EntityTypeSet());
Corpus parse_corpus(const std::string& text, const std::string& origin,
                    const std::map<std::string, std::string>& type_merge = {{"GPE", "LOC"}},
                    const EntityTypeSet& types = EntityTypeSet());

std::string format_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::string& path);

struct SynthParams {
  uint64_t seed = 1;
  long n_sentences = 100;
  long kb_size = 1000;
  double nil_fraction = 0.3;
  long gaz_size = 100;
};

struct SynthData {
  Corpus corpus;
  KnowledgeBase kb;
  Gazetteer gazetteer;
  BilingualLexicon lexicon;
};

// Seeded generator standing in for licensed NER corpora: KB entries carry
// invented canonical names, the "target language" is a deterministic
// character-noising of those names, and gold mentions are marked NIL at
// exactly the requested rate.
SynthData synth_generate(const SynthParams& params);

}  // namespace softgaz
