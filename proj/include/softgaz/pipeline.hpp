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
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softgaz/corpus.hpp"
#include "softgaz/eval.hpp"
#include "softgaz/features.hpp"
#include "softgaz/kb.hpp"
#include "softgaz/model.hpp"
#include "softgaz/retrieval.hpp"

namespace softgaz {

enum class Method { kNoFeat, kBinaryGaz, kWikiMen, kCharagramSup, kOracleEl, kOracleGaz };

Method parse_method(const std::string& name);
std::string method_name(Method m);
bool method_uses_retrieval(Method m);

struct CharagramConfig {
  std::vector<int> ngram_sizes{2, 3, 4};
  std::size_t dim = 32;
  CharagramTrainConfig train;
};

// Everything a run needs, resolved from a JSON config (plus defaults).
struct RunConfig {
  nlohmann::json raw;
  uint64_t seed = 1;
  std::string out_dir;
  int threads = 0;  // 0: hardware concurrency
  std::string method = "nofeat";
  std::vector<std::string> methods;
  bool nil_augment = false;
  std::map<std::string, std::string> paths;
  FeatureConfig features;
  CharagramConfig charagram;
  ModelConfig model;
  int folds = 10;
  bool report_recall = false;
  std::vector<std::string> report_inputs;
  SynthParams synth;

  std::string path(const std::string& key, const std::string& default_name) const;
  std::string require_path(const std::string& key) const;
  int effective_threads() const;
};

RunConfig parse_run_config(const nlohmann::json& config);
ModelConfig model_config_from_json(const nlohmann::json& mj);

// Per-corpus feature matrices for one experimental method. Soft-gazetteer
// methods run candidate retrieval over all spans up to N.
struct MethodFeatures {
  std::size_t dim = 0;
  std::vector<WordFeatureMatrix> sentences;
};

MethodFeatures extract_method_features(Method m, const Corpus& corpus, const KnowledgeBase& kb,
                                       const Gazetteer& gaz, const BilingualLexicon& lex,
                                       const RunConfig& cfg);

MethodFeatures features_from_candidates(const Corpus& corpus, const CandidateCache& cache,
                                        const FeatureConfig& fc);

// 10-fold (configurable) cross-validation of one method; model seeds fan
// out per fold.
CvResult run_cv_method(Method m, const Corpus& corpus, const KnowledgeBase& kb,
                       const Gazetteer& gaz, const BilingualLexicon& lex, const RunConfig& cfg);

nlohmann::json report_to_json(const EvalReport& rep);
nlohmann::json cv_to_json(const CvResult& cv, const std::string& method);

// Commands: synth, kb-build, retrieve, featurize, train, evaluate, cv,
// report. Throws InvalidInput for user errors (exit 2) and InternalError
// for broken invariants (exit 3).
void run_command(const std::string& command, const nlohmann::json& config, std::ostream& out);

}  // namespace softgaz
