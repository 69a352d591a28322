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

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace softgaz {

class EntityTypeSet;
struct Sentence;

struct KBEntry {
  std::string id;
  std::string name;
  std::string etype;
  std::vector<std::string> aliases;
};

// Immutable after construction; ids unique.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(std::vector<KBEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const KBEntry& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<KBEntry>& entries() const { return entries_; }
  // -1 when the id is unknown.
  long index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_of(id) >= 0; }
  const KBEntry* find(const std::string& id) const;

 private:
  std::vector<KBEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Surface form -> set of entity types. Multi-typed keys are kept; strings
// are stored verbatim and matched exactly.
class Gazetteer {
 public:
  void add(const std::string& surface, const std::string& etype);
  bool contains(const std::string& surface) const;
  // Empty set when absent.
  const std::set<std::string>& types_of(const std::string& surface) const;
  std::size_t size() const;  // number of (surface, type) pairs
  std::size_t surface_count() const { return entries_.size(); }
  const std::map<std::string, std::set<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::set<std::string>> entries_;
};

// Target-language surface form -> KB entry ids (sorted, unique).
class BilingualLexicon {
 public:
  void add(const std::string& surface, const std::string& entry_id);
  const std::vector<std::string>* lookup(const std::string& surface) const;
  std::size_t size() const;  // number of (surface, id) pairs
  const std::map<std::string, std::vector<std::string>>& pairs() const { return pairs_; }

 private:
  std::map<std::string, std::vector<std::string>> pairs_;
};

// TSV: id<TAB>name<TAB>type[<TAB>alias1|alias2|...]. Duplicate ids are an
// ingestion error.
KnowledgeBase load_kb(const std::string& path, const EntityTypeSet& types);
KnowledgeBase parse_kb(const std::string& text, const std::string& origin, const EntityTypeSet& types);
std::string format_kb(const KnowledgeBase& kb);

// TSV: name<TAB>type per line.
Gazetteer load_gazetteer(const std::string& path, const EntityTypeSet& types);
Gazetteer parse_gazetteer(const std::string& text, const std::string& origin, const EntityTypeSet& types);
std::string format_gazetteer(const Gazetteer& gaz);

// TSV: foreign_string<TAB>entry_id. Rows referencing unknown KB ids are
// rejected, all offenders listed.
BilingualLexicon load_lexicon(const std::string& path, const KnowledgeBase& kb);
BilingualLexicon parse_lexicon(const std::string& text, const std::string& origin, const KnowledgeBase& kb);
std::string format_lexicon(const BilingualLexicon& lex);

// Union of `gaz` with every gold mention (surface, type) in `corpus`.
// Input unmodified; idempotent and monotone.
Gazetteer augment_gazetteer(const Gazetteer& gaz, const std::vector<Sentence>& corpus);

}  // namespace softgaz
