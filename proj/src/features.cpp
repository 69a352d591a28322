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

#include "softgaz/features.hpp"

#include <algorithm>
#include <cmath>

#include "softgaz/error.hpp"
#include "softgaz/strutil.hpp"

namespace softgaz {

void FeatureConfig::validate() const {
  if (blocks == 0) throw InvalidInput("feature config: at least one block must be enabled");
  if ((blocks & ~kAllBlocks) != 0) throw InvalidInput("feature config: unknown block bit");
  if (max_span_len < 1) throw InvalidInput("feature config: max span length must be >= 1");
  if ((blocks & kTop30Count) && k_retrieve < 30) {
    throw InvalidInput("feature config: top30count requires k_retrieve >= 30");
  }
  if (k_retrieve < 1) throw InvalidInput("feature config: k_retrieve must be >= 1");
}

std::size_t FeatureConfig::span_dim() const {
  std::size_t t = types.size();
  std::size_t d = 0;
  if (blocks & kTop1) d += t;
  if (blocks & kTop3Score) d += 3 * t;
  if (blocks & kTop3Count) d += t;
  if (blocks & kTop30Count) d += t;
  if (blocks & kMargin) d += 3;
  return d;
}

uint32_t parse_blocks(const std::string& csv) {
  uint32_t out = 0;
  for (const auto& name : split(csv, ',')) {
    if (name == "top1") {
      out |= kTop1;
    } else if (name == "top3score") {
      out |= kTop3Score;
    } else if (name == "top3count") {
      out |= kTop3Count;
    } else if (name == "top30count") {
      out |= kTop30Count;
    } else if (name == "margin") {
      out |= kMargin;
    } else if (!name.empty()) {
      throw InvalidInput("unknown feature block: '" + name + "'");
    }
  }
  if (out == 0) throw InvalidInput("no feature blocks in '" + csv + "'");
  return out;
}

std::string blocks_to_string(uint32_t blocks) {
  std::vector<std::string> names;
  if (blocks & kTop1) names.push_back("top1");
  if (blocks & kTop3Score) names.push_back("top3score");
  if (blocks & kTop3Count) names.push_back("top3count");
  if (blocks & kTop30Count) names.push_back("top30count");
  if (blocks & kMargin) names.push_back("margin");
  return join(names, ",");
}

std::vector<double> span_feature_vector(const CandidateList& cands, const FeatureConfig& config) {
  std::size_t t = config.types.size();
  std::vector<double> out(config.span_dim(), 0.0);
  std::size_t off = 0;
  auto score_of = [&](std::size_t r) { return r < cands.size() ? cands[r].score : 0.0; };
  auto type_of = [&](std::size_t r) {
    int idx = config.types.index_of(cands[r].etype);
    if (idx < 0) throw InvalidInput("candidate type outside the configured type set: " + cands[r].etype);
    return static_cast<std::size_t>(idx);
  };

  if (config.blocks & kTop1) {
    if (!cands.empty()) out[off + type_of(0)] = cands[0].score;
    off += t;
  }
  if (config.blocks & kTop3Score) {
    for (std::size_t r = 0; r < 3 && r < cands.size(); ++r) {
      out[off + r * t + type_of(r)] = cands[r].score;
    }
    off += 3 * t;
  }
  if (config.blocks & kTop3Count) {
    for (std::size_t r = 0; r < 3 && r < cands.size(); ++r) out[off + type_of(r)] += 1.0 / 3.0;
    off += t;
  }
  if (config.blocks & kTop30Count) {
    for (std::size_t r = 0; r < 30 && r < cands.size(); ++r) out[off + type_of(r)] += 1.0 / 30.0;
    off += t;
  }
  if (config.blocks & kMargin) {
    // Consecutive score gaps within the top-4, absent scores count as 0.
    for (std::size_t r = 0; r < 3; ++r) {
      if (r < cands.size()) out[off + r] = score_of(r) - score_of(r + 1);
    }
    off += 3;
  }
  return out;
}

WordFeatureMatrix word_features(const Sentence& sentence, const SpanRetriever& retriever,
                                const FeatureConfig& config) {
  config.validate();
  std::size_t len = sentence.size();
  std::size_t d = config.span_dim();
  int n_max = config.max_span_len;
  WordFeatureMatrix out(len, config.word_dim());

  for (int n = 1; n <= n_max; ++n) {
    std::size_t section = static_cast<std::size_t>(n - 1) * 2 * d;
    if (static_cast<std::size_t>(n) > len) continue;
    // One retrieval per span, accumulated into every covered word.
    std::vector<std::size_t> cover(len, 0);
    for (int a = 0; a + n <= static_cast<int>(len); ++a) {
      CandidateList cands = retriever(sentence, a, n);
      std::vector<double> f = span_feature_vector(cands, config);
      for (int i = a; i < a + n; ++i) {
        std::size_t half = (i == a) ? 0 : d;  // B-half for the first word
        for (std::size_t j = 0; j < d; ++j) {
          out.at(static_cast<std::size_t>(i), section + half + j) += f[j];
        }
        ++cover[static_cast<std::size_t>(i)];
      }
    }
    for (std::size_t i = 0; i < len; ++i) {
      if (cover[i] == 0) continue;
      double inv = 1.0 / static_cast<double>(cover[i]);
      for (std::size_t j = 0; j < 2 * d; ++j) out.at(i, section + j) *= inv;
    }
  }
  return out;
}

WordFeatureMatrix binary_gazetteer_features(const Sentence& sentence, const Gazetteer& gaz,
                                            int max_span_len, const EntityTypeSet& types) {
  std::size_t len = sentence.size();
  std::size_t d = types.size();
  WordFeatureMatrix out(len, static_cast<std::size_t>(max_span_len) * 2 * d);

  for (int n = 1; n <= max_span_len; ++n) {
    std::size_t section = static_cast<std::size_t>(n - 1) * 2 * d;
    for (int a = 0; a + n <= static_cast<int>(len); ++a) {
      const auto& ts = gaz.types_of(span_surface(sentence, a, a + n));
      if (ts.empty()) continue;
      for (int i = a; i < a + n; ++i) {
        std::size_t half = (i == a) ? 0 : d;
        for (const auto& etype : ts) {
          int idx = types.index_of(etype);
          if (idx < 0) continue;
          // Indicators OR-combine across covering spans.
          double& cell = out.at(static_cast<std::size_t>(i), section + half + static_cast<std::size_t>(idx));
          cell = std::max(cell, 1.0);
        }
      }
    }
  }
  return out;
}

std::vector<double> binary_from_retrieval(const CandidateList& cands, double threshold,
                                          const EntityTypeSet& types) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw InvalidInput("binary_from_retrieval: threshold must lie in (0,1)");
  }
  std::vector<double> out(types.size(), 0.0);
  if (!cands.empty() && cands[0].score >= threshold) {
    int idx = types.index_of(cands[0].etype);
    if (idx < 0) throw InvalidInput("candidate type outside the configured type set: " + cands[0].etype);
    out[static_cast<std::size_t>(idx)] = 1.0;
  }
  return out;
}

WordFeatureMatrix nil_augment(const WordFeatureMatrix& soft, const WordFeatureMatrix& oracle_bits,
                              const std::vector<bool>& nil_mask) {
  if (soft.rows != oracle_bits.rows || soft.rows != nil_mask.size()) {
    throw InvalidInput("nil_augment: row count mismatch");
  }
  WordFeatureMatrix out(soft.rows, soft.cols + oracle_bits.cols);
  for (std::size_t i = 0; i < soft.rows; ++i) {
    for (std::size_t j = 0; j < soft.cols; ++j) out.at(i, j) = soft.at(i, j);
    if (nil_mask[i]) {
      for (std::size_t j = 0; j < oracle_bits.cols; ++j) {
        out.at(i, soft.cols + j) = oracle_bits.at(i, j);
      }
    }
  }
  return out;
}

std::vector<bool> nil_word_mask(const Sentence& sentence) {
  std::vector<bool> mask(sentence.size(), false);
  for (const auto& span : decode_bio(sentence.tags)) {
    auto link = mention_link(sentence, span.start);
    if (link && *link == kNilLink) {
      for (int i = span.start; i < span.end; ++i) mask[static_cast<std::size_t>(i)] = true;
    }
  }
  return mask;
}

void FeatureSet::validate_against(const Corpus& corpus) const {
  if (sentences.size() != corpus.size()) {
    throw InvalidInput("feature set covers " + std::to_string(sentences.size()) +
                       " sentences but the corpus has " + std::to_string(corpus.size()));
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (sentences[i].rows != corpus[i].size() || sentences[i].cols != dim) {
      throw InvalidInput("feature set shape mismatch at sentence " + std::to_string(i));
    }
  }
}

std::string format_feature_set(const FeatureSet& fs) {
  std::string out = "#features kind=" + fs.kind + " blocks=" + (fs.blocks.empty() ? "-" : fs.blocks) +
                    " N=" + std::to_string(fs.max_span_len) + " types=" + join(fs.types, ",") +
                    " dim=" + std::to_string(fs.dim) + "\n";
  for (const auto& m : fs.sentences) {
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) {
        if (j) out += ',';
        out += fmt_double(m.at(i, j));
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void save_feature_set(const FeatureSet& fs, const std::string& path) {
  write_file(path, format_feature_set(fs));
}

FeatureSet parse_feature_set(const std::string& text, const std::string& origin) {
  std::size_t nl = text.find('\n');
  if (nl == std::string::npos || text.rfind("#features ", 0) != 0) {
    throw InvalidInput(origin + ": missing feature header");
  }
  FeatureSet fs;
  for (const auto& field : split(text.substr(10, nl - 10), ' ')) {
    auto eq = field.find('=');
    if (eq == std::string::npos) throw InvalidInput(origin + ": malformed header field '" + field + "'");
    std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "kind") {
      fs.kind = val;
    } else if (key == "blocks") {
      fs.blocks = val == "-" ? "" : val;
    } else if (key == "N") {
      fs.max_span_len = static_cast<int>(parse_long(val, origin + " header N"));
    } else if (key == "types") {
      fs.types = split(val, ',');
    } else if (key == "dim") {
      fs.dim = static_cast<std::size_t>(parse_long(val, origin + " header dim"));
    } else {
      throw InvalidInput(origin + ": unknown header field '" + key + "'");
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  std::size_t start = nl + 1;
  auto flush = [&]() {
    if (!rows.empty()) {
      WordFeatureMatrix m(rows.size(), fs.dim);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), m.data.begin() + static_cast<long>(i * fs.dim));
      }
      fs.sentences.push_back(std::move(m));
      rows.clear();
    }
  };
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    ++lineno;
    bool last = end >= text.size();
    start = end + 1;
    if (line.empty()) {
      flush();
      if (last) break;
      continue;
    }
    auto vals = split(line, ',');
    if (vals.size() != fs.dim) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(fs.dim) + " values, got " + std::to_string(vals.size()));
    }
    std::vector<double> row(fs.dim);
    for (std::size_t j = 0; j < fs.dim; ++j) {
      row[j] = parse_double(vals[j], origin + ":" + std::to_string(lineno));
    }
    rows.push_back(std::move(row));
    if (last) break;
  }
  flush();
  return fs;
}

FeatureSet load_feature_set(const std::string& path) {
  return parse_feature_set(read_file(path), path);
}

}  // namespace softgaz
