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

#include "softgaz/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <ostream>
#include <thread>

#include "softgaz/error.hpp"
#include "softgaz/rng.hpp"
#include "softgaz/strutil.hpp"

namespace softgaz {

namespace fs = std::filesystem;
using Json = nlohmann::json;

Method parse_method(const std::string& name) {
  if (name == "nofeat") return Method::kNoFeat;
  if (name == "binarygaz") return Method::kBinaryGaz;
  if (name == "wikimen") return Method::kWikiMen;
  if (name == "charagram-sup") return Method::kCharagramSup;
  if (name == "oracle-el") return Method::kOracleEl;
  if (name == "oracle-gaz") return Method::kOracleGaz;
  throw InvalidInput("unknown method '" + name +
                     "' (expected nofeat|binarygaz|wikimen|charagram-sup|oracle-el|oracle-gaz)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kNoFeat: return "nofeat";
    case Method::kBinaryGaz: return "binarygaz";
    case Method::kWikiMen: return "wikimen";
    case Method::kCharagramSup: return "charagram-sup";
    case Method::kOracleEl: return "oracle-el";
    case Method::kOracleGaz: return "oracle-gaz";
  }
  throw InternalError("unhandled method");
}

bool method_uses_retrieval(Method m) {
  return m == Method::kWikiMen || m == Method::kCharagramSup || m == Method::kOracleEl;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void config_error(const std::string& what) { throw InvalidInput("config: " + what); }

template <typename T>
T get_or(const Json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    config_error(std::string("field '") + key + "' has the wrong type");
  }
}

const std::map<std::string, std::string> kDefaultNames = {
    {"corpus", "corpus.tsv"},         {"kb", "kb.tsv"},
    {"gazetteer", "gazetteer.tsv"},   {"lexicon", "lexicon.tsv"},
    {"candidates", "candidates.tsv"}, {"features", "features.tsv"},
    {"embeddings", "embeddings.tsv"}, {"model", "model.json"},
    {"report", "report.json"},
};

}  // namespace

std::string RunConfig::path(const std::string& key, const std::string& default_name) const {
  auto it = paths.find(key);
  if (it != paths.end() && !it->second.empty()) return it->second;
  if (out_dir.empty()) config_error("need paths." + key + " or an output directory ('out')");
  return out_dir + "/" + default_name;
}

std::string RunConfig::require_path(const std::string& key) const {
  auto it = kDefaultNames.find(key);
  if (it == kDefaultNames.end()) {
    auto p = paths.find(key);
    if (p == paths.end() || p->second.empty()) config_error("missing required path '" + key + "'");
    return p->second;
  }
  return path(key, it->second);
}

int RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

ModelConfig model_config_from_json(const Json& mj) {
  if (!mj.is_object()) config_error("'model' must be an object");
  ModelConfig mc;
  mc.char_dim = get_or<int>(mj, "char_dim", 30);
  mc.char_filters = get_or<int>(mj, "char_filters", 30);
  mc.char_window = get_or<int>(mj, "char_window", 3);
  mc.word_dim = get_or<int>(mj, "word_dim", 100);
  mc.hidden = get_or<int>(mj, "hidden", 200);
  mc.feat_proj = get_or<int>(mj, "feat_proj", 100);
  mc.dropout = get_or<double>(mj, "dropout", 0.5);
  mc.lr = get_or<double>(mj, "lr", 0.015);
  mc.momentum = get_or<double>(mj, "momentum", 0.9);
  mc.lr_decay = get_or<double>(mj, "lr_decay", 0.05);
  mc.clip = get_or<double>(mj, "clip", 5.0);
  mc.epochs = get_or<int>(mj, "epochs", 30);
  mc.batch_size = get_or<int>(mj, "batch_size", 10);
  mc.unk_prob = get_or<double>(mj, "unk_prob", 0.5);
  mc.validate();
  return mc;
}

RunConfig parse_run_config(const Json& config) {
  if (!config.is_object()) config_error("top level must be a JSON object");
  RunConfig cfg;
  cfg.raw = config;
  cfg.seed = get_or<uint64_t>(config, "seed", 1);
  cfg.out_dir = get_or<std::string>(config, "out", "");
  cfg.threads = get_or<int>(config, "threads", 0);
  cfg.method = get_or<std::string>(config, "method", "nofeat");
  cfg.methods = get_or<std::vector<std::string>>(config, "methods", {});
  cfg.nil_augment = get_or<bool>(config, "nil_augment", false);
  if (config.contains("paths")) {
    if (!config.at("paths").is_object()) config_error("'paths' must be an object");
    for (const auto& [key, val] : config.at("paths").items()) {
      if (!val.is_string()) config_error("paths." + key + " must be a string");
      cfg.paths[key] = val.get<std::string>();
    }
  }

  Json fj = config.value("features", Json::object());
  cfg.features.blocks =
      parse_blocks(get_or<std::string>(fj, "blocks", "top1,top3score,top3count,top30count,margin"));
  cfg.features.max_span_len = get_or<int>(fj, "max_span_len", 3);
  cfg.features.k_retrieve = get_or<std::size_t>(fj, "k_retrieve", 30);
  cfg.features.validate();

  Json cj = config.value("charagram", Json::object());
  cfg.charagram.ngram_sizes = get_or<std::vector<int>>(cj, "ngram_sizes", {2, 3, 4});
  cfg.charagram.dim = get_or<std::size_t>(cj, "dim", 32);
  cfg.charagram.train.epochs = get_or<int>(cj, "epochs", 30);
  cfg.charagram.train.margin = get_or<double>(cj, "margin", 0.4);
  cfg.charagram.train.negatives_per_pair = get_or<int>(cj, "negatives", 5);
  cfg.charagram.train.lr = get_or<double>(cj, "lr", 0.1);

  cfg.model = model_config_from_json(config.value("model", Json::object()));

  Json ej = config.value("eval", Json::object());
  cfg.folds = get_or<int>(ej, "folds", 10);
  if (cfg.folds < 1) config_error("eval.folds must be >= 1");

  Json rj = config.value("report", Json::object());
  cfg.report_recall = get_or<bool>(rj, "recall", false);
  cfg.report_inputs = get_or<std::vector<std::string>>(rj, "inputs", {});

  Json sj = config.value("synth", Json::object());
  cfg.synth.n_sentences = get_or<long>(sj, "sentences", 951);
  cfg.synth.kb_size = get_or<long>(sj, "kb_size", 5000);
  cfg.synth.nil_fraction = get_or<double>(sj, "nil_fraction", 0.41);
  cfg.synth.gaz_size = get_or<long>(sj, "gaz_size", 912);
  cfg.synth.seed = cfg.seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Feature extraction per method
// ---------------------------------------------------------------------------

namespace {

std::vector<WordFeatureMatrix> map_sentences(const Corpus& corpus, int threads,
                                             const std::function<WordFeatureMatrix(std::size_t)>& fn) {
  std::vector<WordFeatureMatrix> out(corpus.size());
  if (threads <= 1 || corpus.size() < 2) {
    for (std::size_t i = 0; i < corpus.size(); ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::size_t stride = static_cast<std::size_t>(threads);
  for (std::size_t t = 0; t < stride; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < corpus.size(); i += stride) out[i] = fn(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

// Gold (start,end) -> link per sentence, for the EL oracle.
std::vector<std::map<std::pair<int, int>, std::string>> gold_link_map(const Corpus& corpus) {
  std::vector<std::map<std::pair<int, int>, std::string>> out(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& span : decode_bio(corpus[i].tags)) {
      auto link = mention_link(corpus[i], span.start);
      if (link) out[i][{span.start, span.end}] = *link;
    }
  }
  return out;
}

MethodFeatures soft_features(
    const Corpus& corpus, const FeatureConfig& fc, int threads,
    const std::function<CandidateList(std::size_t, const Sentence&, int, int)>& retrieve) {
  MethodFeatures mf;
  mf.dim = fc.word_dim();
  mf.sentences = map_sentences(corpus, threads, [&](std::size_t si) {
    SpanRetriever r = [&, si](const Sentence& s, int a, int n) { return retrieve(si, s, a, n); };
    return word_features(corpus[si], r, fc);
  });
  return mf;
}

MethodFeatures binary_features(const Corpus& corpus, const Gazetteer& gaz, int max_span_len,
                               const EntityTypeSet& types, int threads) {
  MethodFeatures mf;
  mf.dim = static_cast<std::size_t>(max_span_len) * 2 * types.size();
  mf.sentences = map_sentences(corpus, threads, [&](std::size_t si) {
    return binary_gazetteer_features(corpus[si], gaz, max_span_len, types);
  });
  return mf;
}

MethodFeatures apply_nil_augment(const Corpus& corpus, MethodFeatures soft,
                                 const MethodFeatures& oracle_bits) {
  MethodFeatures out;
  out.dim = soft.dim + oracle_bits.dim;
  out.sentences.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.sentences[i] =
        nil_augment(soft.sentences[i], oracle_bits.sentences[i], nil_word_mask(corpus[i]));
  }
  return out;
}

}  // namespace

MethodFeatures features_from_candidates(const Corpus& corpus, const CandidateCache& cache,
                                        const FeatureConfig& fc) {
  return soft_features(corpus, fc, 1, [&cache](std::size_t si, const Sentence&, int a, int n) {
    return cache.get(si, a, n);
  });
}

MethodFeatures extract_method_features(Method m, const Corpus& corpus, const KnowledgeBase& kb,
                                       const Gazetteer& gaz, const BilingualLexicon& lex,
                                       const RunConfig& cfg) {
  const EntityTypeSet types;
  FeatureConfig fc = cfg.features;
  int threads = cfg.effective_threads();

  if (cfg.nil_augment && m != Method::kWikiMen && m != Method::kCharagramSup) {
    throw InvalidInput("nil_augment applies only to soft-gazetteer methods (wikimen, charagram-sup)");
  }

  MethodFeatures mf;
  switch (m) {
    case Method::kNoFeat: {
      mf.dim = 0;
      mf.sentences.resize(corpus.size());
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        mf.sentences[i] = WordFeatureMatrix(corpus[i].size(), 0);
      }
      return mf;
    }
    case Method::kBinaryGaz:
      return binary_features(corpus, gaz, fc.max_span_len, types, threads);
    case Method::kOracleGaz:
      return binary_features(corpus, augment_gazetteer(gaz, corpus), fc.max_span_len, types, threads);
    case Method::kWikiMen: {
      mf = soft_features(corpus, fc, threads, [&](std::size_t, const Sentence& s, int a, int n) {
        return retrieve_exact(span_surface(s, a, a + n), lex, kb, fc.k_retrieve);
      });
      break;
    }
    case Method::kCharagramSup: {
      NgramEmbeddingTable table =
          NgramEmbeddingTable::build(kb, lex, cfg.charagram.ngram_sizes, cfg.charagram.dim,
                                     named_seed(cfg.seed, "charagram-init"));
      CharagramTrainConfig tc = cfg.charagram.train;
      tc.seed = named_seed(cfg.seed, "charagram-train");
      train_charagram(lex, kb, table, tc);
      NgramIndex index(kb, table);
      mf = soft_features(corpus, fc, threads, [&](std::size_t, const Sentence& s, int a, int n) {
        return retrieve_charagram(span_surface(s, a, a + n), index, table, fc.k_retrieve);
      });
      break;
    }
    case Method::kOracleEl: {
      auto links = gold_link_map(corpus);
      mf = soft_features(corpus, fc, threads, [&](std::size_t si, const Sentence&, int a, int n) {
        auto it = links[si].find({a, a + n});
        if (it == links[si].end()) return CandidateList{};
        return retrieve_oracle_el(it->second, kb);
      });
      break;
    }
  }
  if (cfg.nil_augment) {
    MethodFeatures oracle_bits =
        binary_features(corpus, augment_gazetteer(gaz, corpus), fc.max_span_len, types, threads);
    return apply_nil_augment(corpus, std::move(mf), oracle_bits);
  }
  return mf;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

CvResult run_cv_method(Method m, const Corpus& corpus, const KnowledgeBase& kb, const Gazetteer& gaz,
                       const BilingualLexicon& lex, const RunConfig& cfg) {
  MethodFeatures feats = extract_method_features(m, corpus, kb, gaz, lex, cfg);
  EntityTypeSet types;
  FoldRunner runner = [&](const std::vector<std::size_t>& train_idx,
                          const std::vector<std::size_t>& test_idx, int /*fold*/, uint64_t fold_seed) {
    ModelConfig mc = cfg.model;
    mc.seed = fold_seed;
    NerModel model(mc, types, feats.dim);
    Corpus train;
    std::vector<WordFeatureMatrix> train_f;
    train.reserve(train_idx.size());
    train_f.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
      train.push_back(corpus[i]);
      train_f.push_back(feats.sentences[i]);
    }
    model.fit(train, train_f);
    std::vector<std::vector<std::string>> preds;
    preds.reserve(test_idx.size());
    for (std::size_t i : test_idx) preds.push_back(model.predict(corpus[i], feats.sentences[i]));
    return preds;
  };
  return cross_validate(corpus, runner, cfg.folds, cfg.seed, cfg.effective_threads());
}

// ---------------------------------------------------------------------------
// Reports and manifests
// ---------------------------------------------------------------------------

Json report_to_json(const EvalReport& rep) {
  Json j;
  j["p"] = rep.precision;
  j["r"] = rep.recall;
  j["f1"] = rep.f1;
  Json per_type = Json::object();
  for (const auto& [etype, prf] : rep.per_type) {
    per_type[etype] = {{"p", prf[0]}, {"r", prf[1]}, {"f1", prf[2]}};
  }
  j["per_type"] = per_type;
  j["non_nil_recall"] = rep.non_nil_recall ? Json(*rep.non_nil_recall) : Json();
  j["unseen_recall"] = rep.unseen_recall ? Json(*rep.unseen_recall) : Json();
  j["fold"] = rep.fold;
  j["counts"] = {{"gold", rep.n_gold}, {"pred", rep.n_pred}, {"correct", rep.n_correct}};
  return j;
}

Json cv_to_json(const CvResult& cv, const std::string& method) {
  Json j;
  j["method"] = method;
  j["aggregation"] = "mean-of-folds";
  Json folds = Json::array();
  for (const auto& rep : cv.folds) folds.push_back(report_to_json(rep));
  j["folds"] = folds;
  j["mean"] = report_to_json(cv.mean);
  j["pooled"] = report_to_json(cv.pooled);
  return j;
}

namespace {

std::string fnv_hex(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ensure_out_dir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) config_error("this command needs an output directory ('out')");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw InvalidInput("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs, Json extra = Json::object()) {
  Json m;
  m["command"] = command;
  m["config"] = cfg.raw;
  m["config_hash"] = fnv_hex(cfg.raw.dump());
  m["seed"] = cfg.seed;
  std::vector<std::string> sorted = outputs;
  std::sort(sorted.begin(), sorted.end());
  m["outputs"] = sorted;
  for (const auto& [key, val] : extra.items()) m[key] = val;
  write_file(cfg.out_dir + "/" + command + ".manifest.json", m.dump(2) + "\n");
}

std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_pct(*v) : std::string("-"); }

struct LoadedResources {
  KnowledgeBase kb;
  Gazetteer gaz;
  BilingualLexicon lex;
};

struct ResourceNeeds {
  bool kb = false, gaz = false, lex = false;
};

ResourceNeeds needs_of(Method m, bool nil_aug) {
  ResourceNeeds n;
  switch (m) {
    case Method::kNoFeat: break;
    case Method::kBinaryGaz:
    case Method::kOracleGaz: n.gaz = true; break;
    case Method::kWikiMen:
    case Method::kCharagramSup: n.kb = n.lex = true; break;
    case Method::kOracleEl: n.kb = true; break;
  }
  if (nil_aug) n.gaz = true;
  return n;
}

LoadedResources load_resources(const RunConfig& cfg, const ResourceNeeds& needs) {
  LoadedResources res;
  EntityTypeSet types;
  if (needs.kb) res.kb = load_kb(cfg.require_path("kb"), types);
  if (needs.gaz) res.gaz = load_gazetteer(cfg.require_path("gazetteer"), types);
  if (needs.lex) res.lex = load_lexicon(cfg.require_path("lexicon"), res.kb);
  return res;
}

double measured_nil_fraction(const Corpus& corpus) {
  std::size_t mentions = 0, nil = 0;
  for (const auto& s : corpus) {
    for (const auto& span : decode_bio(s.tags)) {
      auto link = mention_link(s, span.start);
      if (!link) continue;
      ++mentions;
      if (*link == kNilLink) ++nil;
    }
  }
  return mentions ? static_cast<double>(nil) / static_cast<double>(mentions) : 0.0;
}

std::vector<WordFeatureMatrix> zero_features(const Corpus& corpus) {
  std::vector<WordFeatureMatrix> out(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) out[i] = WordFeatureMatrix(corpus[i].size(), 0);
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  SynthData data = synth_generate(cfg.synth);
  write_corpus(data.corpus, cfg.path("corpus", "corpus.tsv"));
  write_file(cfg.path("kb", "kb.tsv"), format_kb(data.kb));
  write_file(cfg.path("gazetteer", "gazetteer.tsv"), format_gazetteer(data.gazetteer));
  write_file(cfg.path("lexicon", "lexicon.tsv"), format_lexicon(data.lexicon));
  out << "synth: " << data.corpus.size() << " sentences, kb " << data.kb.size() << ", gazetteer "
      << data.gazetteer.size() << ", lexicon " << data.lexicon.size() << ", nil fraction "
      << fmt_pct(100.0 * measured_nil_fraction(data.corpus)) << "%\n";
  write_manifest(cfg, "synth", {"corpus.tsv", "kb.tsv", "gazetteer.tsv", "lexicon.tsv"});
}

void cmd_kb_build(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  EntityTypeSet types;
  KnowledgeBase kb = load_kb(cfg.require_path("kb"), types);
  Json stats;
  stats["kb_entries"] = kb.size();
  std::size_t aliases = 0;
  for (const auto& e : kb.entries()) aliases += e.aliases.size();
  stats["kb_aliases"] = aliases;
  if (fs::exists(cfg.path("gazetteer", "gazetteer.tsv"))) {
    Gazetteer gaz = load_gazetteer(cfg.path("gazetteer", "gazetteer.tsv"), types);
    stats["gazetteer_entries"] = gaz.size();
  }
  if (fs::exists(cfg.path("lexicon", "lexicon.tsv"))) {
    BilingualLexicon lex = load_lexicon(cfg.path("lexicon", "lexicon.tsv"), kb);
    stats["lexicon_pairs"] = lex.size();
  }
  out << "kb-build: validated " << kb.size() << " entries";
  if (stats.contains("gazetteer_entries")) out << ", gazetteer " << stats["gazetteer_entries"];
  if (stats.contains("lexicon_pairs")) out << ", lexicon " << stats["lexicon_pairs"];
  out << "\n";
  write_manifest(cfg, "kb-build", {}, Json{{"stats", stats}});
}

void cmd_retrieve(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  Method m = parse_method(cfg.method);
  if (!method_uses_retrieval(m)) {
    throw InvalidInput("method '" + cfg.method + "' does not produce retrieval candidates");
  }
  Corpus corpus = read_corpus(cfg.require_path("corpus"));
  LoadedResources res = load_resources(cfg, needs_of(m, false));
  FeatureConfig fc = cfg.features;
  std::vector<std::string> outputs{"candidates.tsv"};

  CandidateCache cache;
  if (m == Method::kWikiMen) {
    cache = retrieve_corpus(
        corpus,
        [&](const Sentence& s, int a, int n) {
          return retrieve_exact(span_surface(s, a, a + n), res.lex, res.kb, fc.k_retrieve);
        },
        fc.max_span_len, fc.k_retrieve, cfg.effective_threads());
  } else if (m == Method::kCharagramSup) {
    NgramEmbeddingTable table =
        NgramEmbeddingTable::build(res.kb, res.lex, cfg.charagram.ngram_sizes, cfg.charagram.dim,
                                   named_seed(cfg.seed, "charagram-init"));
    CharagramTrainConfig tc = cfg.charagram.train;
    tc.seed = named_seed(cfg.seed, "charagram-train");
    double mean_cos = train_charagram(res.lex, res.kb, table, tc);
    out << "retrieve: charagram trained, mean pair cosine " << fmt_pct(mean_cos) << "\n";
    table.save_file(cfg.path("embeddings", "embeddings.tsv"));
    outputs.push_back("embeddings.tsv");
    NgramIndex index(res.kb, table);
    cache = retrieve_corpus(
        corpus,
        [&](const Sentence& s, int a, int n) {
          return retrieve_charagram(span_surface(s, a, a + n), index, table, fc.k_retrieve);
        },
        fc.max_span_len, fc.k_retrieve, cfg.effective_threads());
  } else {
    // The EL oracle works off gold links; spans are addressed by index.
    auto links = gold_link_map(corpus);
    cache.max_span_len = fc.max_span_len;
    for (std::size_t si = 0; si < corpus.size(); ++si) {
      for (const auto& [span, link] : links[si]) {
        if (span.second - span.first > fc.max_span_len) continue;
        CandidateList cands = retrieve_oracle_el(link, res.kb);
        if (!cands.empty()) {
          cache.spans.emplace(CandidateCache::key(si, span.first, span.second - span.first),
                              std::move(cands));
        }
      }
    }
  }

  save_candidate_cache(cache, cfg.path("candidates", "candidates.tsv"));
  out << "retrieve: " << cache.spans.size() << " spans with candidates (method " << cfg.method
      << ")\n";
  write_manifest(cfg, "retrieve", outputs);
}

void cmd_featurize(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  Method m = parse_method(cfg.method);
  if (m == Method::kNoFeat) {
    throw InvalidInput("nofeat produces no features; run train directly");
  }
  EntityTypeSet types;
  Corpus corpus = read_corpus(cfg.require_path("corpus"));
  FeatureConfig fc = cfg.features;

  MethodFeatures mf;
  FeatureSet fset;
  if (m == Method::kBinaryGaz || m == Method::kOracleGaz) {
    LoadedResources res = load_resources(cfg, needs_of(m, false));
    Gazetteer gaz = m == Method::kOracleGaz ? augment_gazetteer(res.gaz, corpus) : res.gaz;
    mf = binary_features(corpus, gaz, fc.max_span_len, types, cfg.effective_threads());
    fset.kind = method_name(m);
  } else {
    EntityTypeSet t2;
    KnowledgeBase kb = load_kb(cfg.require_path("kb"), t2);
    CandidateCache cache = load_candidate_cache(cfg.require_path("candidates"), kb, fc.max_span_len);
    mf = features_from_candidates(corpus, cache, fc);
    fset.kind = "soft";
    fset.blocks = blocks_to_string(fc.blocks);
    if (cfg.nil_augment) {
      Gazetteer gaz = load_gazetteer(cfg.require_path("gazetteer"), types);
      MethodFeatures bits = binary_features(corpus, augment_gazetteer(gaz, corpus), fc.max_span_len,
                                            types, cfg.effective_threads());
      mf = apply_nil_augment(corpus, std::move(mf), bits);
      fset.kind = "nilaug";
    }
  }
  fset.max_span_len = fc.max_span_len;
  fset.types = types.types();
  fset.dim = mf.dim;
  fset.sentences = std::move(mf.sentences);
  save_feature_set(fset, cfg.path("features", "features.tsv"));
  out << "featurize: " << fset.sentences.size() << " sentences, dim " << fset.dim << " (kind "
      << fset.kind << ")\n";
  write_manifest(cfg, "featurize", {"features.tsv"});
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  Corpus corpus = read_corpus(cfg.require_path("corpus"));
  std::vector<WordFeatureMatrix> feats;
  std::size_t dim = 0;
  bool has_features =
      cfg.paths.count("features") > 0 || fs::exists(cfg.path("features", "features.tsv"));
  if (has_features) {
    FeatureSet fset = load_feature_set(cfg.require_path("features"));
    fset.validate_against(corpus);
    dim = fset.dim;
    feats = std::move(fset.sentences);
  } else {
    feats = zero_features(corpus);
  }
  ModelConfig mc = cfg.model;
  mc.seed = named_seed(cfg.seed, "model");
  NerModel model(mc, EntityTypeSet(), dim);
  std::vector<double> trace = model.fit(corpus, feats);
  model.save_file(cfg.path("model", "model.json"));
  out << "train: " << corpus.size() << " sentences, " << mc.epochs << " epochs";
  if (!trace.empty()) out << ", final joint loss " << fmt_double(trace.back());
  out << "\n";
  write_manifest(cfg, "train", {"model.json"}, Json{{"loss_trace", trace}});
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  Corpus corpus = read_corpus(cfg.require_path("corpus"));
  NerModel model = NerModel::load_file(cfg.require_path("model"));
  std::vector<WordFeatureMatrix> feats;
  if (model.feature_dim() == 0) {
    feats = zero_features(corpus);
  } else {
    FeatureSet fset = load_feature_set(cfg.require_path("features"));
    fset.validate_against(corpus);
    if (fset.dim != model.feature_dim()) {
      throw InvalidInput("feature dim " + std::to_string(fset.dim) + " does not match the model (" +
                         std::to_string(model.feature_dim()) + ")");
    }
    feats = std::move(fset.sentences);
  }

  std::vector<std::vector<std::string>> pred_tags(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) pred_tags[i] = model.predict(corpus[i], feats[i]);
  EvalReport rep = span_f1(corpus_spans(corpus), decode_corpus(pred_tags));

  bool has_links = !corpus.empty();
  for (const auto& s : corpus) {
    for (const auto& g : decode_bio(s.tags)) {
      if (!mention_link(s, g.start)) has_links = false;
    }
  }
  if (has_links) {
    std::set<std::string> train_mentions;
    bool have_train = cfg.paths.count("train_corpus") > 0;
    if (have_train) {
      Corpus train = read_corpus(cfg.paths.at("train_corpus"));
      std::vector<std::size_t> all(train.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      train_mentions = gold_mention_surfaces(train, all);
    }
    RecallSubsets subsets = recall_subsets(corpus, decode_corpus(pred_tags), train_mentions);
    rep.non_nil_recall = subsets.non_nil;
    if (have_train) rep.unseen_recall = subsets.unseen;
  }

  write_file(cfg.path("report", "report.json"), report_to_json(rep).dump(2) + "\n");
  out << "evaluate: P " << fmt_pct(rep.precision) << "  R " << fmt_pct(rep.recall) << "  F1 "
      << fmt_pct(rep.f1);
  if (rep.non_nil_recall) out << "  non-NIL R " << fmt_pct(*rep.non_nil_recall);
  if (rep.unseen_recall) out << "  unseen R " << fmt_pct(*rep.unseen_recall);
  out << "\n";
  write_manifest(cfg, "evaluate", {"report.json"});
}

void print_cv_table(std::ostream& out,
                    const std::vector<std::pair<std::string, const CvResult*>>& rows,
                    bool with_recall) {
  out << "method               P       R      F1";
  if (with_recall) out << "  non-NIL-R  unseen-R";
  out << "\n";
  for (const auto& [name, cv] : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %7.2f %7.2f %7.2f", name.c_str(), cv->mean.precision,
                  cv->mean.recall, cv->mean.f1);
    out << line;
    if (with_recall) {
      char rc[80];
      std::snprintf(rc, sizeof(rc), "  %9s %9s", fmt_opt(cv->mean.non_nil_recall).c_str(),
                    fmt_opt(cv->mean.unseen_recall).c_str());
      out << rc;
    }
    out << "\n";
  }
}

void cmd_cv(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  std::vector<std::string> method_names =
      cfg.methods.empty() ? std::vector<std::string>{cfg.method} : cfg.methods;
  std::vector<Method> methods;
  ResourceNeeds needs;
  for (const auto& name : method_names) {
    Method m = parse_method(name);
    methods.push_back(m);
    ResourceNeeds n = needs_of(m, cfg.nil_augment);
    needs.kb = needs.kb || n.kb;
    needs.gaz = needs.gaz || n.gaz;
    needs.lex = needs.lex || n.lex;
  }
  Corpus corpus = read_corpus(cfg.require_path("corpus"));
  LoadedResources res = load_resources(cfg, needs);

  std::vector<CvResult> results;
  std::vector<std::string> outputs;
  results.reserve(methods.size());
  for (std::size_t i = 0; i < methods.size(); ++i) {
    results.push_back(run_cv_method(methods[i], corpus, res.kb, res.gaz, res.lex, cfg));
    std::string fname = "cv_" + method_names[i] + (cfg.nil_augment ? "_nilaug" : "") + ".json";
    write_file(cfg.out_dir + "/" + fname, cv_to_json(results.back(), method_names[i]).dump(2) + "\n");
    outputs.push_back(fname);
  }

  Json summary;
  summary["seed"] = cfg.seed;
  summary["folds"] = cfg.folds;
  summary["nil_augment"] = cfg.nil_augment;
  Json srows = Json::array();
  std::vector<std::pair<std::string, const CvResult*>> rows;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    rows.emplace_back(method_names[i], &results[i]);
    Json r;
    r["method"] = method_names[i];
    r["f1"] = results[i].mean.f1;
    r["p"] = results[i].mean.precision;
    r["r"] = results[i].mean.recall;
    r["non_nil_recall"] =
        results[i].mean.non_nil_recall ? Json(*results[i].mean.non_nil_recall) : Json();
    r["unseen_recall"] =
        results[i].mean.unseen_recall ? Json(*results[i].mean.unseen_recall) : Json();
    srows.push_back(r);
  }
  summary["rows"] = srows;
  write_file(cfg.out_dir + "/cv_summary.json", summary.dump(2) + "\n");
  outputs.push_back("cv_summary.json");
  print_cv_table(out, rows, cfg.report_recall);
  write_manifest(cfg, "cv", outputs);
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> inputs = cfg.report_inputs;
  if (inputs.empty() && !cfg.out_dir.empty()) {
    inputs.push_back(cfg.out_dir + "/cv_summary.json");
  }
  if (inputs.empty()) config_error("report needs report.inputs or an output directory");

  std::string text;
  for (const auto& path : inputs) {
    Json j;
    try {
      j = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
      throw InvalidInput(path + ": not a valid report file: " + e.what());
    }
    if (j.contains("rows")) {
      text += "cross-validation summary (seed " + std::to_string(j.value("seed", 0)) + ", " +
              std::to_string(j.value("folds", 0)) + " folds)\n";
      text += "method               P       R      F1";
      if (cfg.report_recall) text += "  non-NIL-R  unseen-R";
      text += "\n";
      for (const auto& r : j.at("rows")) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %7.2f %7.2f %7.2f",
                      r.value("method", std::string("?")).c_str(), r.value("p", 0.0),
                      r.value("r", 0.0), r.value("f1", 0.0));
        text += line;
        if (cfg.report_recall) {
          auto opt = [&](const char* key) {
            return r.contains(key) && !r.at(key).is_null() ? fmt_pct(r.at(key).get<double>())
                                                           : std::string("-");
          };
          char rc[80];
          std::snprintf(rc, sizeof(rc), "  %9s %9s", opt("non_nil_recall").c_str(),
                        opt("unseen_recall").c_str());
          text += rc;
        }
        text += "\n";
      }
    } else if (j.contains("mean")) {
      const Json& m = j.at("mean");
      text += "cv " + j.value("method", std::string("?")) + ": F1 " +
              fmt_pct(m.value("f1", 0.0)) + " (P " + fmt_pct(m.value("p", 0.0)) + ", R " +
              fmt_pct(m.value("r", 0.0)) + ")\n";
    } else {
      text += "report: F1 " + fmt_pct(j.value("f1", 0.0)) + " (P " + fmt_pct(j.value("p", 0.0)) +
              ", R " + fmt_pct(j.value("r", 0.0)) + ")";
      if (cfg.report_recall) {
        auto opt = [&](const char* key) {
          return j.contains(key) && !j.at(key).is_null() ? fmt_pct(j.at(key).get<double>())
                                                         : std::string("-");
        };
        text += "  non-NIL R " + opt("non_nil_recall") + "  unseen R " + opt("unseen_recall");
      }
      text += "\n";
    }
  }
  out << text;
  if (!cfg.out_dir.empty()) {
    ensure_out_dir(cfg);
    write_file(cfg.out_dir + "/report.txt", text);
    write_manifest(cfg, "report", {"report.txt"});
  }
}

}  // namespace

void run_command(const std::string& command, const Json& config, std::ostream& out) {
  RunConfig cfg = parse_run_config(config);
  if (command == "synth") {
    cmd_synth(cfg, out);
  } else if (command == "kb-build" || command == "kb build") {
    cmd_kb_build(cfg, out);
  } else if (command == "retrieve") {
    cmd_retrieve(cfg, out);
  } else if (command == "featurize") {
    cmd_featurize(cfg, out);
  } else if (command == "train") {
    cmd_train(cfg, out);
  } else if (command == "evaluate") {
    cmd_evaluate(cfg, out);
  } else if (command == "cv") {
    cmd_cv(cfg, out);
  } else if (command == "report") {
    cmd_report(cfg, out);
  } else {
    throw InvalidInput("unknown command '" + command + "'");
  }
}

}  // namespace softgaz
