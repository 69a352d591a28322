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

#include "softgaz/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <unordered_set>

#include "softgaz/error.hpp"
#include "softgaz/rng.hpp"
#include "softgaz/strutil.hpp"

namespace softgaz {

EntityTypeSet::EntityTypeSet(std::vector<std::string> types) : types_(std::move(types)) {
  if (types_.empty()) throw InvalidInput("entity type set must be non-empty");
  std::set<std::string> seen(types_.begin(), types_.end());
  if (seen.size() != types_.size()) throw InvalidInput("duplicate entity type");
}

int EntityTypeSet::index_of(const std::string& type) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i] == type) return static_cast<int>(i);
  }
  return -1;
}

bool Sentence::has_links() const {
  for (const auto& l : links) {
    if (!l.empty()) return true;
  }
  return false;
}

std::vector<SpanMention> decode_bio(const std::vector<std::string>& tags) {
  std::vector<SpanMention> spans;
  int cur_start = -1;
  std::string cur_type;
  auto close = [&](int end) {
    if (cur_start >= 0) {
      spans.push_back({cur_start, end, cur_type});
      cur_start = -1;
      cur_type.clear();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      close(static_cast<int>(i));
    } else if (t.size() > 2 && t[1] == '-' && (t[0] == 'B' || t[0] == 'I')) {
      std::string etype = t.substr(2);
      if (t[0] == 'B' || cur_start < 0 || cur_type != etype) {
        // I- after O or after a different type starts a fresh span.
        close(static_cast<int>(i));
        cur_start = static_cast<int>(i);
        cur_type = etype;
      }
    } else {
      throw InvalidInput("tag outside BIO alphabet: '" + t + "'");
    }
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

std::vector<std::string> encode_bio(const std::vector<SpanMention>& spans, std::size_t len) {
  std::vector<std::string> tags(len, "O");
  int prev_end = 0;
  for (const auto& sp : spans) {
    if (sp.start < prev_end || sp.start >= sp.end || sp.end > static_cast<int>(len)) {
      throw InternalError("spans must be ordered, non-overlapping and in range");
    }
    tags[sp.start] = "B-" + sp.etype;
    for (int i = sp.start + 1; i < sp.end; ++i) tags[i] = "I-" + sp.etype;
    prev_end = sp.end;
  }
  return tags;
}

std::string span_surface(const Sentence& s, int start, int end) {
  std::string out;
  for (int i = start; i < end; ++i) {
    if (i > start) out += ' ';
    out += s.tokens[i];
  }
  return out;
}

std::optional<std::string> mention_link(const Sentence& s, int start) {
  if (s.links.empty() || start < 0 || start >= static_cast<int>(s.links.size())) {
    return std::nullopt;
  }
  if (s.links[start].empty()) return std::nullopt;
  return s.links[start];
}

namespace {

void validate_tag(const std::string& tag, const EntityTypeSet& types,
                  const std::string& origin, std::size_t lineno) {
  if (tag == "O") return;
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-' &&
      types.contains(tag.substr(2))) {
    return;
  }
  throw InvalidInput(origin + ":" + std::to_string(lineno) + ": tag outside BIO alphabet: '" + tag + "'");
}

}  // namespace

Corpus parse_corpus(const std::string& text, const std::string& origin,
                    const std::map<std::string, std::string>& type_merge,
                    const EntityTypeSet& types) {
  Corpus corpus;
  Sentence cur;
  std::size_t lineno = 0;
  std::size_t start = 0;
  auto flush = [&]() {
    if (!cur.tokens.empty()) {
      corpus.push_back(std::move(cur));
      cur = Sentence{};
    }
  };
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    ++lineno;
    bool last = nl >= text.size();
    start = nl + 1;
    if (line.empty()) {
      flush();
      if (last) break;
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 2 && cols.size() != 3) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected 2 or 3 tab-separated columns, got " +
                         std::to_string(cols.size()));
    }
    std::string tag = cols[1];
    // Apply the type merge (GPE -> LOC by default) before validation.
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      auto it = type_merge.find(tag.substr(2));
      if (it != type_merge.end()) tag = tag.substr(0, 2) + it->second;
    }
    validate_tag(tag, types, origin, lineno);
    std::string link = cols.size() == 3 ? cols[2] : std::string();
    if (!link.empty() && tag.rfind("B-", 0) != 0) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": link annotations are only valid on B- tokens");
    }
    cur.tokens.push_back(cols[0]);
    cur.tags.push_back(tag);
    cur.links.push_back(link);
    if (last) break;
  }
  flush();
  return corpus;
}

Corpus read_corpus(const std::string& path,
                   const std::map<std::string, std::string>& type_merge,
                   const EntityTypeSet& types) {
  return parse_corpus(read_file(path), path, type_merge, types);
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      out += '\t';
      out += s.tags[i];
      if (i < s.links.size() && !s.links[i].empty()) {
        out += '\t';
        out += s.links[i];
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  write_file(path, format_corpus(corpus));
}

// ---------------------------------------------------------------------------
// Synthetic data generator
// ---------------------------------------------------------------------------

namespace {

constexpr const char kConsonants[] = "bdfgjklmnprstvz";
constexpr const char kVowels[] = "aeiou";

char pick(const char* set, std::size_t n, Rng& rng) { return set[rng.index(n)]; }

std::string syllable(Rng& rng) {
  std::string s;
  switch (rng.index(4)) {
    case 0:
      s += pick(kConsonants, 15, rng);
      s += pick(kVowels, 5, rng);
      break;
    case 1:
      s += pick(kConsonants, 15, rng);
      s += pick(kVowels, 5, rng);
      s += pick(kConsonants, 15, rng);
      break;
    case 2:
      s += pick(kVowels, 5, rng);
      s += pick(kConsonants, 15, rng);
      break;
    default:
      s += pick(kConsonants, 15, rng);
      s += pick(kVowels, 5, rng);
      s += pick(kVowels, 5, rng);
      break;
  }
  return s;
}

std::string make_word(Rng& rng, int min_syl, int max_syl) {
  int n = min_syl + static_cast<int>(rng.index(static_cast<std::size_t>(max_syl - min_syl + 1)));
  std::string w;
  for (int i = 0; i < n; ++i) w += syllable(rng);
  return w;
}

std::string make_name(Rng& rng) {
  double roll = rng.uniform();
  int n_tokens = roll < 0.55 ? 1 : (roll < 0.90 ? 2 : 3);
  std::string name;
  for (int i = 0; i < n_tokens; ++i) {
    if (i) name += ' ';
    name += make_word(rng, 2, 3);
  }
  return name;
}

// One substitution table per generated "language": each letter keeps its
// identity, shifts to another letter, or expands to a digraph. Systematic
// by construction, so string overlap with the source names survives in a
// learnable way.
struct LangNoise {
  std::array<std::string, 26> sub;

  std::string apply(const std::string& s) const {
    std::string out;
    out.reserve(s.size() + 4);
    for (char c : s) {
      if (c >= 'a' && c <= 'z') {
        out += sub[static_cast<std::size_t>(c - 'a')];
      } else {
        out += c;
      }
    }
    return out;
  }
};

LangNoise make_lang_noise(Rng& rng) {
  LangNoise noise;
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  for (int i = 0; i < 26; ++i) {
    double roll = rng.uniform();
    char c = static_cast<char>('a' + i);
    if (roll < 0.17) {
      char r = alphabet[rng.index(26)];
      noise.sub[i] = std::string(1, r == c ? 'q' : r);
    } else if (roll < 0.32) {
      noise.sub[i] = std::string(1, c) + kVowels[rng.index(5)];
    } else {
      noise.sub[i] = std::string(1, c);
    }
  }
  return noise;
}

// Small per-mention variation so that exact-lookup resources miss a
// realistic share of mentions while n-gram similarity still fires.
std::string perturb_surface(const std::string& s, Rng& rng) {
  std::string out = s;
  switch (rng.index(3)) {
    case 0:
      if (out.size() > 4 && out.back() != ' ') out.pop_back();
      break;
    case 1: {
      std::size_t i = rng.index(out.size());
      if (out[i] != ' ') out.insert(out.begin() + static_cast<long>(i), out[i]);
      break;
    }
    default: {
      if (out.size() >= 2) {
        std::size_t i = rng.index(out.size() - 1);
        if (out[i] != ' ' && out[i + 1] != ' ') std::swap(out[i], out[i + 1]);
      }
      break;
    }
  }
  return out;
}

struct MentionSlot {
  std::size_t sentence = 0;
  std::size_t item = 0;  // index into the sentence plan
  bool nil = false;
};

struct PlanItem {
  enum Kind { kFiller, kEntityLikeFiller, kMention } kind = kFiller;
  std::size_t filler_id = 0;  // for kFiller
  bool trigger = false;       // for kMention: preceded by a type cue word
};

}  // namespace

SynthData synth_generate(const SynthParams& p) {
  if (p.nil_fraction < 0.0 || p.nil_fraction > 1.0) {
    throw InvalidInput("nil_fraction must lie in [0,1]");
  }
  if (p.gaz_size > p.kb_size) throw InvalidInput("gaz_size must not exceed kb_size");
  if (p.kb_size <= 0) throw InvalidInput("kb_size must be positive");
  if (p.n_sentences < 0) throw InvalidInput("n_sentences must be non-negative");

  EntityTypeSet types;
  Rng rng_lang(named_seed(p.seed, "language"));
  Rng rng_kb(named_seed(p.seed, "kb"));
  Rng rng_corpus(named_seed(p.seed, "corpus"));
  Rng rng_nil(named_seed(p.seed, "nil"));
  Rng rng_gaz(named_seed(p.seed, "gazetteer"));
  Rng rng_lex(named_seed(p.seed, "lexicon"));

  LangNoise noise = make_lang_noise(rng_lang);

  // Knowledge base with unique canonical names.
  std::vector<KBEntry> entries;
  entries.reserve(static_cast<std::size_t>(p.kb_size));
  std::unordered_set<std::string> used_names;
  for (long i = 0; i < p.kb_size; ++i) {
    std::string name = make_name(rng_kb);
    while (used_names.count(name)) name = make_name(rng_kb);
    used_names.insert(name);
    double roll = rng_kb.uniform();
    std::string etype = roll < 0.40 ? "LOC" : (roll < 0.75 ? "PER" : "ORG");
    KBEntry e;
    char id[24];
    std::snprintf(id, sizeof(id), "e%06ld", i);
    e.id = id;
    e.name = name;
    e.etype = etype;
    if (rng_kb.bernoulli(0.25)) {
      std::string alias = name + syllable(rng_kb);
      if (!used_names.count(alias)) e.aliases.push_back(alias);
    }
    entries.push_back(std::move(e));
  }
  KnowledgeBase kb(std::move(entries));

  // Corpus mentions are drawn from a "popular" subset of the KB so that
  // gazetteer and lexicon coverage of corpus entities is substantial.
  std::size_t pool_size = static_cast<std::size_t>(
      std::min<long>(p.kb_size, std::max<long>(std::min<long>(p.kb_size, 200), (p.gaz_size * 3) / 2)));
  std::vector<std::size_t> kb_order(static_cast<std::size_t>(p.kb_size));
  for (std::size_t i = 0; i < kb_order.size(); ++i) kb_order[i] = i;
  rng_kb.shuffle(kb_order);
  std::vector<std::size_t> pool(kb_order.begin(), kb_order.begin() + static_cast<long>(pool_size));

  // Entities absent from the KB; these become NIL mentions.
  std::size_t nil_pool_size = std::max<std::size_t>(8, pool_size / 3);
  std::vector<std::pair<std::string, std::string>> nil_pool;  // name, type
  for (std::size_t i = 0; i < nil_pool_size; ++i) {
    std::string name = make_name(rng_kb);
    while (used_names.count(name)) name = make_name(rng_kb);
    used_names.insert(name);
    double roll = rng_kb.uniform();
    nil_pool.emplace_back(name, roll < 0.40 ? "LOC" : (roll < 0.75 ? "PER" : "ORG"));
  }

  // Target-language filler vocabulary and per-type cue words.
  std::size_t n_fillers = 700;
  std::vector<std::string> fillers;
  std::unordered_set<std::string> filler_seen;
  while (fillers.size() < n_fillers) {
    std::string w = noise.apply(make_word(rng_corpus, 1, 2));
    if (filler_seen.insert(w).second) fillers.push_back(std::move(w));
  }
  std::vector<std::array<std::string, 3>> triggers(types.size());
  for (std::size_t t = 0; t < types.size(); ++t) {
    for (auto& w : triggers[t]) {
      std::string cand = noise.apply(make_word(rng_corpus, 1, 2));
      while (filler_seen.count(cand)) cand = noise.apply(make_word(rng_corpus, 1, 2));
      filler_seen.insert(cand);
      w = cand;
    }
  }

  // Pass 1: structural plans and mention slots.
  std::vector<std::vector<PlanItem>> plans(static_cast<std::size_t>(p.n_sentences));
  std::vector<MentionSlot> slots;
  for (std::size_t si = 0; si < plans.size(); ++si) {
    double roll = rng_corpus.uniform();
    int n_mentions = roll < 0.15 ? 0 : (roll < 0.60 ? 1 : (roll < 0.90 ? 2 : 3));
    int n_words = 3 + static_cast<int>(rng_corpus.index(9));
    std::vector<PlanItem> plan;
    for (int i = 0; i < n_words; ++i) {
      PlanItem item;
      if (rng_corpus.bernoulli(0.012)) {
        item.kind = PlanItem::kEntityLikeFiller;
      } else {
        item.kind = PlanItem::kFiller;
        item.filler_id = rng_corpus.index(fillers.size());
      }
      plan.push_back(item);
    }
    for (int m = 0; m < n_mentions; ++m) {
      PlanItem item;
      item.kind = PlanItem::kMention;
      item.trigger = rng_corpus.bernoulli(0.45);
      std::size_t pos = rng_corpus.index(plan.size() + 1);
      plan.insert(plan.begin() + static_cast<long>(pos), item);
    }
    for (std::size_t ii = 0; ii < plan.size(); ++ii) {
      if (plan[ii].kind == PlanItem::kMention) slots.push_back({si, ii, false});
    }
    plans[si] = std::move(plan);
  }

  // Exact NIL quota over all mention slots.
  std::size_t n_nil = static_cast<std::size_t>(std::llround(p.nil_fraction * static_cast<double>(slots.size())));
  std::vector<std::size_t> slot_order(slots.size());
  for (std::size_t i = 0; i < slot_order.size(); ++i) slot_order[i] = i;
  rng_nil.shuffle(slot_order);
  for (std::size_t i = 0; i < n_nil; ++i) slots[slot_order[i]].nil = true;

  // Pass 2: realize sentences.
  Corpus corpus(plans.size());
  std::size_t slot_idx = 0;
  for (std::size_t si = 0; si < plans.size(); ++si) {
    Sentence& sent = corpus[si];
    for (std::size_t ii = 0; ii < plans[si].size(); ++ii) {
      const PlanItem& item = plans[si][ii];
      if (item.kind == PlanItem::kFiller) {
        sent.tokens.push_back(fillers[item.filler_id]);
        sent.tags.push_back("O");
        sent.links.push_back("");
        continue;
      }
      if (item.kind == PlanItem::kEntityLikeFiller) {
        // An entity surface used as a plain word; keeps gazetteer lookups
        // from being a perfect entity detector.
        const KBEntry& e = kb.entry(pool[rng_corpus.index(pool.size())]);
        std::string surface = noise.apply(e.name);
        auto toks = split(surface, ' ');
        sent.tokens.push_back(toks[0]);
        sent.tags.push_back("O");
        sent.links.push_back("");
        continue;
      }
      const MentionSlot& slot = slots[slot_idx++];
      std::string name;
      std::string etype;
      std::string link;
      if (slot.nil) {
        const auto& [n, t] = nil_pool[rng_corpus.index(nil_pool.size())];
        name = n;
        etype = t;
        link = kNilLink;
      } else {
        const KBEntry& e = kb.entry(pool[rng_corpus.index(pool.size())]);
        name = e.name;
        etype = e.etype;
        link = e.id;
      }
      std::string surface = noise.apply(name);
      if (rng_corpus.bernoulli(0.25)) surface = perturb_surface(surface, rng_corpus);
      if (item.trigger) {
        int t = types.index_of(etype);
        sent.tokens.push_back(triggers[static_cast<std::size_t>(t)][rng_corpus.index(3)]);
        sent.tags.push_back("O");
        sent.links.push_back("");
      }
      auto toks = split(surface, ' ');
      for (std::size_t k = 0; k < toks.size(); ++k) {
        sent.tokens.push_back(toks[k]);
        sent.tags.push_back((k == 0 ? "B-" : "I-") + etype);
        sent.links.push_back(k == 0 ? link : "");
      }
    }
  }
  if (slot_idx != slots.size()) throw InternalError("mention slot bookkeeping out of sync");

  // Gazetteer: noised surfaces of a sample of popular entries.
  Gazetteer gaz;
  {
    std::vector<std::size_t> order = pool;
    for (std::size_t i = pool_size; i < kb_order.size(); ++i) order.push_back(kb_order[i]);
    rng_gaz.shuffle(order);
    for (std::size_t i = 0; i < order.size() && gaz.size() < static_cast<std::size_t>(p.gaz_size); ++i) {
      const KBEntry& e = kb.entry(order[i]);
      std::string surface = noise.apply(e.name);
      if (!gaz.contains(surface)) gaz.add(surface, e.etype);
    }
  }

  // Bilingual lexicon of comparable size, drawn independently.
  BilingualLexicon lex;
  {
    std::vector<std::size_t> order = pool;
    for (std::size_t i = pool_size; i < kb_order.size(); ++i) order.push_back(kb_order[i]);
    rng_lex.shuffle(order);
    for (std::size_t i = 0; i < order.size() && lex.size() < static_cast<std::size_t>(p.gaz_size); ++i) {
      const KBEntry& e = kb.entry(order[i]);
      lex.add(noise.apply(e.name), e.id);
    }
  }

  return SynthData{std::move(corpus), std::move(kb), std::move(gaz), std::move(lex)};
}

}  // namespace softgaz
