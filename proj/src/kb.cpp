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

#include "softgaz/kb.hpp"

#include <algorithm>

#include "softgaz/corpus.hpp"
#include "softgaz/error.hpp"
#include "softgaz/strutil.hpp"

namespace softgaz {

KnowledgeBase::KnowledgeBase(std::vector<KBEntry> entries) : entries_(std::move(entries)) {
  by_id_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(entries_[i].id, i);
    if (!inserted) throw InvalidInput("duplicate KB id: " + entries_[i].id);
  }
}

long KnowledgeBase::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? -1 : static_cast<long>(it->second);
}

const KBEntry* KnowledgeBase::find(const std::string& id) const {
  long i = index_of(id);
  return i < 0 ? nullptr : &entries_[static_cast<std::size_t>(i)];
}

void Gazetteer::add(const std::string& surface, const std::string& etype) {
  if (surface.empty()) throw InvalidInput("gazetteer surface form must be non-empty");
  entries_[surface].insert(etype);
}

bool Gazetteer::contains(const std::string& surface) const {
  return entries_.find(surface) != entries_.end();
}

const std::set<std::string>& Gazetteer::types_of(const std::string& surface) const {
  static const std::set<std::string> empty;
  auto it = entries_.find(surface);
  return it == entries_.end() ? empty : it->second;
}

std::size_t Gazetteer::size() const {
  std::size_t n = 0;
  for (const auto& [_, ts] : entries_) n += ts.size();
  return n;
}

void BilingualLexicon::add(const std::string& surface, const std::string& entry_id) {
  if (surface.empty()) throw InvalidInput("lexicon surface form must be non-empty");
  auto& ids = pairs_[surface];
  auto it = std::lower_bound(ids.begin(), ids.end(), entry_id);
  if (it == ids.end() || *it != entry_id) ids.insert(it, entry_id);
}

const std::vector<std::string>* BilingualLexicon::lookup(const std::string& surface) const {
  auto it = pairs_.find(surface);
  return it == pairs_.end() ? nullptr : &it->second;
}

std::size_t BilingualLexicon::size() const {
  std::size_t n = 0;
  for (const auto& [_, ids] : pairs_) n += ids.size();
  return n;
}

namespace {

struct Row {
  std::size_t lineno;
  std::vector<std::string> cols;
};

std::vector<Row> tsv_rows(const std::string& text) {
  std::vector<Row> rows;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    ++lineno;
    start = nl + 1;
    if (line.empty() || line[0] == '#') continue;
    rows.push_back({lineno, split(line, '\t')});
  }
  return rows;
}

void check_type(const std::string& etype, const EntityTypeSet& types,
                const std::string& origin, std::size_t lineno) {
  if (!types.contains(etype)) {
    throw InvalidInput(origin + ":" + std::to_string(lineno) + ": unknown entity type '" + etype + "'");
  }
}

}  // namespace

KnowledgeBase parse_kb(const std::string& text, const std::string& origin, const EntityTypeSet& types) {
  std::vector<KBEntry> entries;
  for (const auto& row : tsv_rows(text)) {
    if (row.cols.size() != 3 && row.cols.size() != 4) {
      throw InvalidInput(origin + ":" + std::to_string(row.lineno) + ": expected 3 or 4 columns");
    }
    KBEntry e;
    e.id = row.cols[0];
    e.name = row.cols[1];
    e.etype = row.cols[2];
    check_type(e.etype, types, origin, row.lineno);
    if (e.id.empty() || e.name.empty()) {
      throw InvalidInput(origin + ":" + std::to_string(row.lineno) + ": empty id or name");
    }
    if (row.cols.size() == 4 && !row.cols[3].empty()) {
      e.aliases = split(row.cols[3], '|');
    }
    entries.push_back(std::move(e));
  }
  return KnowledgeBase(std::move(entries));
}

KnowledgeBase load_kb(const std::string& path, const EntityTypeSet& types) {
  return parse_kb(read_file(path), path, types);
}

std::string format_kb(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& e : kb.entries()) {
    out += e.id;
    out += '\t';
    out += e.name;
    out += '\t';
    out += e.etype;
    if (!e.aliases.empty()) {
      out += '\t';
      out += join(e.aliases, "|");
    }
    out += '\n';
  }
  return out;
}

Gazetteer parse_gazetteer(const std::string& text, const std::string& origin, const EntityTypeSet& types) {
  Gazetteer gaz;
  for (const auto& row : tsv_rows(text)) {
    if (row.cols.size() != 2) {
      throw InvalidInput(origin + ":" + std::to_string(row.lineno) + ": expected 2 columns");
    }
    check_type(row.cols[1], types, origin, row.lineno);
    if (row.cols[0].empty()) {
      throw InvalidInput(origin + ":" + std::to_string(row.lineno) + ": empty surface form");
    }
    gaz.add(row.cols[0], row.cols[1]);
  }
  return gaz;
}

Gazetteer load_gazetteer(const std::string& path, const EntityTypeSet& types) {
  return parse_gazetteer(read_file(path), path, types);
}

std::string format_gazetteer(const Gazetteer& gaz) {
  std::string out;
  for (const auto& [surface, ts] : gaz.entries()) {
    for (const auto& t : ts) {
      out += surface;
      out += '\t';
      out += t;
      out += '\n';
    }
  }
  return out;
}

BilingualLexicon parse_lexicon(const std::string& text, const std::string& origin, const KnowledgeBase& kb) {
  BilingualLexicon lex;
  std::vector<std::string> dangling;
  for (const auto& row : tsv_rows(text)) {
    if (row.cols.size() != 2) {
      throw InvalidInput(origin + ":" + std::to_string(row.lineno) + ": expected 2 columns");
    }
    if (row.cols[0].empty()) {
      throw InvalidInput(origin + ":" + std::to_string(row.lineno) + ": empty surface form");
    }
    if (!kb.contains(row.cols[1])) {
      dangling.push_back(origin + ":" + std::to_string(row.lineno) + ": '" + row.cols[1] + "'");
      continue;
    }
    lex.add(row.cols[0], row.cols[1]);
  }
  if (!dangling.empty()) {
    throw InvalidInput("lexicon references unknown KB ids: " + join(dangling, ", "));
  }
  return lex;
}

BilingualLexicon load_lexicon(const std::string& path, const KnowledgeBase& kb) {
  return parse_lexicon(read_file(path), path, kb);
}

std::string format_lexicon(const BilingualLexicon& lex) {
  std::string out;
  for (const auto& [surface, ids] : lex.pairs()) {
    for (const auto& id : ids) {
      out += surface;
      out += '\t';
      out += id;
      out += '\n';
    }
  }
  return out;
}

Gazetteer augment_gazetteer(const Gazetteer& gaz, const std::vector<Sentence>& corpus) {
  Gazetteer out = gaz;
  for (const auto& sent : corpus) {
    for (const auto& span : decode_bio(sent.tags)) {
      out.add(span_surface(sent, span.start, span.end), span.etype);
    }
  }
  return out;
}

}  // namespace softgaz
