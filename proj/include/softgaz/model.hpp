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
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "softgaz/corpus.hpp"
#include "softgaz/features.hpp"
#include "softgaz/tensor.hpp"

namespace softgaz {

struct ModelConfig {
  int char_dim = 30;
  int char_filters = 30;
  int char_window = 3;
  int word_dim = 100;
  int hidden = 200;  // per direction
  int feat_proj = 100;
  double dropout = 0.5;
  double lr = 0.015;
  double momentum = 0.9;
  double lr_decay = 0.05;  // per-epoch: lr_e = lr / (1 + decay * epoch)
  double clip = 5.0;
  int epochs = 30;
  int batch_size = 10;
  double unk_prob = 0.5;  // singleton -> UNK replacement during training
  uint64_t seed = 1;

  void validate() const;
};

// BIO labels in type order: [O, B-t1, I-t1, B-t2, I-t2, ...].
class LabelSet {
 public:
  explicit LabelSet(const EntityTypeSet& types);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }
  int index_of(const std::string& label) const;  // throws on unknown

 private:
  std::vector<std::string> labels_;
};

// id 0 is reserved for the unknown token.
class Vocab {
 public:
  static constexpr int kUnk = 0;

  Vocab() : items_{"<unk>"} {}

  int add(const std::string& item);  // returns existing id if present
  int id_of(const std::string& item) const;
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }
  static Vocab from_items(std::vector<std::string> items);

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, int> index_{{"<unk>", 0}};
};

// Negative log-likelihood of `gold` under a linear-chain CRF, with the
// partition function computed by the forward algorithm in log space.
// `emissions` is [T,L]; transitions is [L,L] with separate start/stop
// score vectors.
ad::Graph::Ref crf_nll(ad::Graph& g, ad::Graph::Ref emissions, ad::Graph::Ref transitions,
                       ad::Graph::Ref start, ad::Graph::Ref stop, const std::vector<int>& gold);

// Highest-scoring label sequence; ties resolve to the lowest label index
// at the earliest differing position.
std::vector<int> viterbi(const ad::Tensor& emissions, const ad::Tensor& transitions,
                         const ad::Tensor& start, const ad::Tensor& stop);

// Mean-over-words summed elementwise sigmoid cross-entropy between the
// reconstruction of `hidden` and the raw [0,1] feature rows.
ad::Graph::Ref autoencoder_loss(ad::Graph& g, ad::Graph::Ref hidden, ad::Graph::Ref ae_w,
                                ad::Graph::Ref ae_b, const WordFeatureMatrix& raw_features);

// Char-CNN + word embedding + projected soft-gazetteer features into a
// BiLSTM; emissions feed a linear-chain CRF; an autoencoder reconstructs
// the raw features from the hidden states. feature_dim 0 disables the
// projection and the autoencoder and runs the same code path.
class NerModel {
 public:
  NerModel(ModelConfig config, EntityTypeSet types, std::size_t feature_dim);

  const ModelConfig& config() const { return config_; }
  const EntityTypeSet& types() const { return types_; }
  const LabelSet& label_set() const { return labels_; }
  std::size_t feature_dim() const { return feature_dim_; }
  ad::ParameterSet& params() { return params_; }

  // Mini-batch SGD on L_CRF + L_AE (equal weight); returns the per-epoch
  // mean joint loss. Builds vocabularies from the training corpus.
  std::vector<double> fit(const Corpus& train, const std::vector<WordFeatureMatrix>& features);

  std::vector<std::string> predict(const Sentence& sentence, const WordFeatureMatrix& features) const;

  // Deterministic joint loss (no dropout, no UNK noising). When
  // with_backward is set, gradients are left in the parameter set.
  double compute_loss(const Sentence& sentence, const WordFeatureMatrix& features, bool with_backward);

  std::string save() const;
  void save_file(const std::string& path) const;
  static NerModel parse(const std::string& text, const std::string& origin);
  static NerModel load_file(const std::string& path);

 private:
  struct Encoded {
    ad::Graph::Ref emissions;
    ad::Graph::Ref hidden;
  };

  void init_params();
  const ad::Parameter& param(const std::string& name) const;
  std::vector<int> word_ids(const Sentence& s, bool training, Rng* rng) const;
  std::vector<int> char_ids(const std::string& token) const;
  // with_grads=false never touches parameter gradients, so concurrent
  // prediction over frozen parameters is safe.
  Encoded encode(ad::Graph& g, const Sentence& s, const WordFeatureMatrix& f, bool with_grads,
                 bool stochastic, Rng* rng, const std::vector<int>& wids) const;
  ad::Graph::Ref build_joint(ad::Graph& g, const Sentence& s, const WordFeatureMatrix& f,
                             bool with_grads, bool stochastic, Rng* rng,
                             const std::vector<int>& wids) const;

  ModelConfig config_;
  EntityTypeSet types_;
  LabelSet labels_;
  std::size_t feature_dim_;
  Vocab words_;
  Vocab chars_;
  std::unordered_set<std::string> singletons_;
  ad::ParameterSet params_;
  bool fitted_ = false;
};

}  // namespace softgaz
