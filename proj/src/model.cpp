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

#include "softgaz/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "softgaz/error.hpp"
#include "softgaz/strutil.hpp"

namespace softgaz {

using ad::Graph;
using ad::Parameter;
using ad::Tensor;
using Json = nlohmann::json;

void ModelConfig::validate() const {
  if (char_dim < 1 || char_filters < 1 || word_dim < 1 || hidden < 1 || feat_proj < 1) {
    throw InvalidInput("model config: all dimensions must be positive");
  }
  if (char_window < 1 || char_window % 2 == 0) {
    throw InvalidInput("model config: char window must be odd and positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidInput("model config: dropout must lie in [0,1)");
  if (unk_prob < 0.0 || unk_prob > 1.0) throw InvalidInput("model config: unk_prob must lie in [0,1]");
  if (epochs < 0 || batch_size < 1) throw InvalidInput("model config: bad epochs or batch size");
  if (lr <= 0.0) throw InvalidInput("model config: learning rate must be positive");
}

LabelSet::LabelSet(const EntityTypeSet& types) {
  labels_.push_back("O");
  for (const auto& t : types.types()) {
    labels_.push_back("B-" + t);
    labels_.push_back("I-" + t);
  }
}

int LabelSet::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<int>(i);
  }
  throw InvalidInput("label outside the label set: '" + label + "'");
}

int Vocab::add(const std::string& item) {
  auto it = index_.find(item);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(items_.size());
  items_.push_back(item);
  index_.emplace(item, id);
  return id;
}

int Vocab::id_of(const std::string& item) const {
  auto it = index_.find(item);
  return it == index_.end() ? kUnk : it->second;
}

Vocab Vocab::from_items(std::vector<std::string> items) {
  if (items.empty() || items[0] != "<unk>") {
    throw InvalidInput("vocabulary must start with <unk>");
  }
  Vocab v;
  for (std::size_t i = 1; i < items.size(); ++i) v.add(items[i]);
  return v;
}

// ---------------------------------------------------------------------------
// CRF
// ---------------------------------------------------------------------------

Graph::Ref crf_nll(Graph& g, Graph::Ref emissions, Graph::Ref transitions, Graph::Ref start,
                   Graph::Ref stop, const std::vector<int>& gold) {
  const Tensor& em = g.value(emissions);
  if (em.rank() != 2 || em.rows() == 0) throw InvalidInput("crf_nll: emissions must be [T,L], T>=1");
  std::size_t T = em.rows(), L = em.cols();
  if (gold.size() != T) throw InvalidInput("crf_nll: gold length mismatch");
  for (int y : gold) {
    if (y < 0 || static_cast<std::size_t>(y) >= L) {
      throw InvalidInput("crf_nll: gold label outside the label set");
    }
  }

  Graph::Ref alpha = g.add(g.row(emissions, 0), start);
  for (std::size_t t = 1; t < T; ++t) {
    // scores[i][j] = alpha[i] + transitions[i][j]
    Graph::Ref scores = g.add_col_bias(transitions, alpha);
    alpha = g.add(g.logsumexp_axis(scores, 0), g.row(emissions, t));
  }
  Graph::Ref log_z = g.logsumexp(g.add(alpha, stop));

  std::vector<Graph::Ref> terms;
  terms.reserve(2 * T + 1);
  terms.push_back(g.at(start, static_cast<std::size_t>(gold[0])));
  for (std::size_t t = 0; t < T; ++t) {
    terms.push_back(g.at(emissions, t, static_cast<std::size_t>(gold[t])));
    if (t > 0) {
      terms.push_back(g.at(transitions, static_cast<std::size_t>(gold[t - 1]),
                           static_cast<std::size_t>(gold[t])));
    }
  }
  terms.push_back(g.at(stop, static_cast<std::size_t>(gold[T - 1])));
  return g.add(log_z, g.scale(g.add_n(terms), -1.0));
}

std::vector<int> viterbi(const Tensor& emissions, const Tensor& transitions, const Tensor& start,
                         const Tensor& stop) {
  if (emissions.rank() != 2) throw InvalidInput("viterbi: emissions must be [T,L]");
  std::size_t T = emissions.rows(), L = emissions.cols();
  if (T == 0) return {};
  if (transitions.rank() != 2 || transitions.rows() != L || transitions.cols() != L ||
      start.numel() != L || stop.numel() != L) {
    throw InvalidInput("viterbi: transition shape mismatch");
  }

  // delta[t][j]: best score of the suffix starting at t with label j.
  std::vector<double> delta(T * L);
  for (std::size_t j = 0; j < L; ++j) delta[(T - 1) * L + j] = emissions.at(T - 1, j) + stop.at(j);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t j = 0; j < L; ++j) {
      double best = transitions.at(j, 0) + delta[(t + 1) * L];
      for (std::size_t k = 1; k < L; ++k) {
        best = std::max(best, transitions.at(j, k) + delta[(t + 1) * L + k]);
      }
      delta[t * L + j] = emissions.at(t, j) + best;
    }
  }

  // Greedy reconstruction; strict > keeps the lowest label index on ties,
  // which yields the lexicographically smallest optimal sequence.
  std::vector<int> path(T);
  double best = start.at(0) + delta[0];
  std::size_t arg = 0;
  for (std::size_t j = 1; j < L; ++j) {
    double s = start.at(j) + delta[j];
    if (s > best) {
      best = s;
      arg = j;
    }
  }
  path[0] = static_cast<int>(arg);
  for (std::size_t t = 1; t < T; ++t) {
    std::size_t prev = static_cast<std::size_t>(path[t - 1]);
    double b = transitions.at(prev, 0) + delta[t * L];
    std::size_t a = 0;
    for (std::size_t k = 1; k < L; ++k) {
      double s = transitions.at(prev, k) + delta[t * L + k];
      if (s > b) {
        b = s;
        a = k;
      }
    }
    path[t] = static_cast<int>(a);
  }
  return path;
}

Graph::Ref autoencoder_loss(Graph& g, Graph::Ref hidden, Graph::Ref ae_w, Graph::Ref ae_b,
                            const WordFeatureMatrix& raw_features) {
  if (raw_features.rows == 0 || raw_features.cols == 0) {
    throw InvalidInput("autoencoder_loss: no features to reconstruct");
  }
  Graph::Ref logits = g.add_row_bias(g.matmul(hidden, ae_w), ae_b);
  Tensor targets({raw_features.rows, raw_features.cols});
  targets.data = raw_features.data;
  Graph::Ref total = g.binary_cross_entropy(logits, std::move(targets));
  return g.scale(total, 1.0 / static_cast<double>(raw_features.rows));
}

// ---------------------------------------------------------------------------
// NerModel
// ---------------------------------------------------------------------------

namespace {

Graph::Ref leaf(Graph& g, const Parameter& p, bool with_grads) {
  // Gradient-accumulating leaves are requested only from contexts that
  // own the model mutably (fit / compute_loss).
  return with_grads ? g.param(const_cast<Parameter&>(p)) : g.constant(p.value);
}

Graph::Ref lookup_rows(Graph& g, const Parameter& table, const std::vector<int>& ids,
                       bool with_grads) {
  if (with_grads) return g.embedding_lookup(const_cast<Parameter&>(table), ids);
  std::size_t d = table.value.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy(table.value.data.begin() + static_cast<long>(static_cast<std::size_t>(ids[i]) * d),
              table.value.data.begin() + static_cast<long>((static_cast<std::size_t>(ids[i]) + 1) * d),
              out.data.begin() + static_cast<long>(i * d));
  }
  return g.constant(std::move(out));
}

}  // namespace

const Parameter& NerModel::param(const std::string& name) const {
  const Parameter* p = params_.find(name);
  if (!p) throw InvalidInput("missing model parameter: " + name);
  return *p;
}

NerModel::NerModel(ModelConfig config, EntityTypeSet types, std::size_t feature_dim)
    : config_(config), types_(std::move(types)), labels_(types_), feature_dim_(feature_dim) {
  config_.validate();
}

void NerModel::init_params() {
  params_ = ad::ParameterSet();
  Rng rng(named_seed(config_.seed, "init"));
  auto sz = [](int v) { return static_cast<std::size_t>(v); };
  std::size_t in_dim = sz(config_.char_filters) + sz(config_.word_dim) +
                       (feature_dim_ > 0 ? sz(config_.feat_proj) : 0);
  std::size_t h = sz(config_.hidden);
  std::size_t L = labels_.size();

  params_.create("char_emb", ad::init_uniform({chars_.size(), sz(config_.char_dim)},
                                              std::sqrt(3.0 / config_.char_dim), rng));
  params_.create("char_conv_w",
                 ad::init_glorot(sz(config_.char_window) * sz(config_.char_dim), sz(config_.char_filters), rng));
  params_.create("char_conv_b", Tensor({sz(config_.char_filters)}));
  params_.create("word_emb", ad::init_uniform({words_.size(), sz(config_.word_dim)},
                                              std::sqrt(3.0 / config_.word_dim), rng));
  if (feature_dim_ > 0) {
    params_.create("feat_w", ad::init_glorot(feature_dim_, sz(config_.feat_proj), rng));
    params_.create("feat_b", Tensor({sz(config_.feat_proj)}));
  }
  for (const char* dir : {"fwd", "bwd"}) {
    Parameter& w = params_.create(std::string("lstm_") + dir + "_w", ad::init_glorot(in_dim + h, 4 * h, rng));
    (void)w;
    Tensor b({4 * h});
    // Forget-gate bias starts at 1.
    for (std::size_t i = h; i < 2 * h; ++i) b.data[i] = 1.0;
    params_.create(std::string("lstm_") + dir + "_b", std::move(b));
  }
  std::size_t emit_in = 2 * h + (feature_dim_ > 0 ? sz(config_.feat_proj) : 0);
  params_.create("emit_w", ad::init_glorot(emit_in, L, rng));
  params_.create("emit_b", Tensor({L}));
  params_.create("trans", Tensor({L, L}));
  params_.create("trans_start", Tensor({L}));
  params_.create("trans_stop", Tensor({L}));
  if (feature_dim_ > 0) {
    params_.create("ae_w", ad::init_glorot(2 * h, feature_dim_, rng));
    params_.create("ae_b", Tensor({feature_dim_}));
  }
}

std::vector<int> NerModel::word_ids(const Sentence& s, bool training, Rng* rng) const {
  std::vector<int> ids;
  ids.reserve(s.size());
  for (const auto& tok : s.tokens) {
    int id = words_.id_of(tok);
    if (training && id != Vocab::kUnk && singletons_.count(tok) && rng->bernoulli(config_.unk_prob)) {
      id = Vocab::kUnk;
    }
    ids.push_back(id);
  }
  return ids;
}

std::vector<int> NerModel::char_ids(const std::string& token) const {
  std::vector<int> ids;
  ids.reserve(token.size());
  for (char c : token) ids.push_back(chars_.id_of(std::string(1, c)));
  return ids;
}

NerModel::Encoded NerModel::encode(Graph& g, const Sentence& s, const WordFeatureMatrix& f,
                                   bool with_grads, bool stochastic, Rng* rng,
                                   const std::vector<int>& wids) const {
  std::size_t T = s.size();
  if (T == 0) throw InvalidInput("cannot encode an empty sentence");
  if (f.rows != T || f.cols != feature_dim_) {
    throw InvalidInput("feature matrix shape mismatch: got " + std::to_string(f.rows) + "x" +
                       std::to_string(f.cols) + ", want " + std::to_string(T) + "x" +
                       std::to_string(feature_dim_));
  }
  bool use_feat = feature_dim_ > 0;

  Graph::Ref conv_w = leaf(g, param("char_conv_w"), with_grads);
  Graph::Ref conv_b = leaf(g, param("char_conv_b"), with_grads);
  std::vector<Graph::Ref> char_vecs;
  char_vecs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Graph::Ref ce = lookup_rows(g, param("char_emb"), char_ids(s.tokens[t]), with_grads);
    Graph::Ref conv = g.tanh(g.conv1d_same(ce, conv_w, conv_b, config_.char_window));
    char_vecs.push_back(g.max_pool_over_time(conv));
  }
  Graph::Ref charmat = g.stack_rows(char_vecs);
  Graph::Ref wordmat = lookup_rows(g, param("word_emb"), wids, with_grads);

  Graph::Ref proj = -1;
  std::vector<Graph::Ref> rep_parts{charmat, wordmat};
  if (use_feat) {
    Tensor raw({T, feature_dim_});
    raw.data = f.data;
    Graph::Ref feat_in = g.constant(std::move(raw));
    proj = g.tanh(g.add_row_bias(g.matmul(feat_in, leaf(g, param("feat_w"), with_grads)),
                                 leaf(g, param("feat_b"), with_grads)));
    rep_parts.push_back(proj);
  }
  Graph::Ref rep = g.concat_cols(rep_parts);
  if (stochastic && config_.dropout > 0.0) rep = g.dropout(rep, config_.dropout, *rng);

  std::size_t h = static_cast<std::size_t>(config_.hidden);
  Tensor zero_h({h});
  std::vector<Graph::Ref> fwd(T), bwd(T);
  {
    Graph::Ref w = leaf(g, param("lstm_fwd_w"), with_grads);
    Graph::Ref b = leaf(g, param("lstm_fwd_b"), with_grads);
    Graph::Ref hh = g.constant(zero_h), cc = g.constant(zero_h);
    for (std::size_t t = 0; t < T; ++t) {
      auto [nh, nc] = g.lstm_step(w, b, g.row(rep, t), hh, cc);
      hh = nh;
      cc = nc;
      fwd[t] = hh;
    }
  }
  {
    Graph::Ref w = leaf(g, param("lstm_bwd_w"), with_grads);
    Graph::Ref b = leaf(g, param("lstm_bwd_b"), with_grads);
    Graph::Ref hh = g.constant(zero_h), cc = g.constant(zero_h);
    for (std::size_t t = T; t-- > 0;) {
      auto [nh, nc] = g.lstm_step(w, b, g.row(rep, t), hh, cc);
      hh = nh;
      cc = nc;
      bwd[t] = hh;
    }
  }
  Graph::Ref hidden = g.concat_cols({g.stack_rows(fwd), g.stack_rows(bwd)});
  if (stochastic && config_.dropout > 0.0) hidden = g.dropout(hidden, config_.dropout, *rng);

  std::vector<Graph::Ref> emit_parts{hidden};
  if (use_feat) emit_parts.push_back(proj);
  Graph::Ref emit_in = use_feat ? g.concat_cols(emit_parts) : hidden;
  Graph::Ref emissions = g.add_row_bias(g.matmul(emit_in, leaf(g, param("emit_w"), with_grads)),
                                        leaf(g, param("emit_b"), with_grads));
  return {emissions, hidden};
}

Graph::Ref NerModel::build_joint(Graph& g, const Sentence& s, const WordFeatureMatrix& f,
                                 bool with_grads, bool stochastic, Rng* rng,
                                 const std::vector<int>& wids) const {
  Encoded enc = encode(g, s, f, with_grads, stochastic, rng, wids);
  std::vector<int> gold(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) gold[t] = labels_.index_of(s.tags[t]);
  Graph::Ref nll = crf_nll(g, enc.emissions, leaf(g, param("trans"), with_grads),
                           leaf(g, param("trans_start"), with_grads),
                           leaf(g, param("trans_stop"), with_grads), gold);
  if (feature_dim_ == 0) return nll;
  Graph::Ref ae = autoencoder_loss(g, enc.hidden, leaf(g, param("ae_w"), with_grads),
                                   leaf(g, param("ae_b"), with_grads), f);
  // The two objectives carry equal weight.
  return g.add(nll, ae);
}

std::vector<double> NerModel::fit(const Corpus& train, const std::vector<WordFeatureMatrix>& features) {
  if (train.empty()) throw InvalidInput("training corpus is empty");
  if (features.size() != train.size()) {
    throw InvalidInput("feature set does not align with the training corpus");
  }

  words_ = Vocab();
  chars_ = Vocab();
  singletons_.clear();
  std::unordered_map<std::string, int> counts;
  for (const auto& s : train) {
    if (s.size() == 0) throw InvalidInput("training corpus contains an empty sentence");
    for (const auto& tok : s.tokens) {
      ++counts[tok];
      words_.add(tok);
      for (char c : tok) chars_.add(std::string(1, c));
    }
  }
  for (const auto& [w, c] : counts) {
    if (c == 1) singletons_.insert(w);
  }
  init_params();
  fitted_ = true;

  Rng rng(named_seed(config_.seed, "train"));
  std::vector<double> trace;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    double lr_e = config_.lr / (1.0 + config_.lr_decay * epoch);
    rng.shuffle(order);
    double total = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      std::size_t batch_end = std::min(order.size(), pos + static_cast<std::size_t>(config_.batch_size));
      double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
      for (std::size_t bi = pos; bi < batch_end; ++bi) {
        std::size_t si = order[bi];
        Graph g;
        std::vector<int> wids = word_ids(train[si], true, &rng);
        Graph::Ref joint = build_joint(g, train[si], features[si], true, true, &rng, wids);
        total += g.scalar_value(joint);
        g.backward(g.scale(joint, inv_batch));
      }
      ad::sgd_step(params_, lr_e, config_.momentum, config_.clip);
      pos = batch_end;
    }
    trace.push_back(total / static_cast<double>(train.size()));
  }
  return trace;
}

std::vector<std::string> NerModel::predict(const Sentence& sentence,
                                           const WordFeatureMatrix& features) const {
  if (!fitted_) throw InvalidInput("predict called on an untrained model");
  Graph g;
  std::vector<int> wids = word_ids(sentence, false, nullptr);
  Encoded enc = encode(g, sentence, features, false, false, nullptr, wids);
  std::vector<int> path = viterbi(g.value(enc.emissions), param("trans").value,
                                  param("trans_start").value, param("trans_stop").value);
  std::vector<std::string> tags;
  tags.reserve(path.size());
  for (int y : path) tags.push_back(labels_.label(static_cast<std::size_t>(y)));
  return tags;
}

double NerModel::compute_loss(const Sentence& sentence, const WordFeatureMatrix& features,
                              bool with_backward) {
  if (!fitted_) throw InvalidInput("compute_loss called before fit");
  Graph g;
  std::vector<int> wids = word_ids(sentence, false, nullptr);
  Graph::Ref joint = build_joint(g, sentence, features, with_backward, false, nullptr, wids);
  double v = g.scalar_value(joint);
  if (with_backward) g.backward(joint);
  return v;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

std::string NerModel::save() const {
  Json j;
  j["config"] = {{"char_dim", config_.char_dim},
                 {"char_filters", config_.char_filters},
                 {"char_window", config_.char_window},
                 {"word_dim", config_.word_dim},
                 {"hidden", config_.hidden},
                 {"feat_proj", config_.feat_proj},
                 {"dropout", config_.dropout},
                 {"lr", config_.lr},
                 {"momentum", config_.momentum},
                 {"lr_decay", config_.lr_decay},
                 {"clip", config_.clip},
                 {"epochs", config_.epochs},
                 {"batch_size", config_.batch_size},
                 {"unk_prob", config_.unk_prob},
                 {"seed", config_.seed}};
  j["types"] = types_.types();
  j["feature_dim"] = feature_dim_;
  j["fitted"] = fitted_;
  j["word_vocab"] = words_.items();
  j["char_vocab"] = chars_.items();
  Json params = Json::object();
  for (const Parameter* p : params_.all()) {
    params[p->name] = {{"shape", p->value.shape}, {"data", p->value.data}};
  }
  j["params"] = params;
  return j.dump(1);
}

void NerModel::save_file(const std::string& path) const { write_file(path, save()); }

NerModel NerModel::parse(const std::string& text, const std::string& origin) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw InvalidInput(origin + ": invalid model checkpoint: " + e.what());
  }
  try {
    const Json& c = j.at("config");
    ModelConfig cfg;
    cfg.char_dim = c.at("char_dim").get<int>();
    cfg.char_filters = c.at("char_filters").get<int>();
    cfg.char_window = c.at("char_window").get<int>();
    cfg.word_dim = c.at("word_dim").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.feat_proj = c.at("feat_proj").get<int>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.lr = c.at("lr").get<double>();
    cfg.momentum = c.at("momentum").get<double>();
    cfg.lr_decay = c.at("lr_decay").get<double>();
    cfg.clip = c.at("clip").get<double>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.unk_prob = c.at("unk_prob").get<double>();
    cfg.seed = c.at("seed").get<uint64_t>();

    NerModel model(cfg, EntityTypeSet(j.at("types").get<std::vector<std::string>>()),
                   j.at("feature_dim").get<std::size_t>());
    model.words_ = Vocab::from_items(j.at("word_vocab").get<std::vector<std::string>>());
    model.chars_ = Vocab::from_items(j.at("char_vocab").get<std::vector<std::string>>());
    model.fitted_ = j.at("fitted").get<bool>();
    for (const auto& [name, pj] : j.at("params").items()) {
      Tensor t(pj.at("shape").get<std::vector<std::size_t>>());
      auto data = pj.at("data").get<std::vector<double>>();
      if (data.size() != t.numel()) {
        throw InvalidInput(origin + ": parameter '" + name + "' has inconsistent shape/data");
      }
      t.data = std::move(data);
      model.params_.create(name, std::move(t));
    }
    return model;
  } catch (const Json::exception& e) {
    throw InvalidInput(origin + ": malformed model checkpoint: " + e.what());
  }
}

NerModel NerModel::load_file(const std::string& path) { return parse(read_file(path), path); }

}  // namespace softgaz
