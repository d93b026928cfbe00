#pragma once

// Pairwise training: preference pairs from graded judgments, mean hinge loss
// plus L2 per batch, Adam updates, and model selection on validation
// NDCG@10 with patience-based early stopping.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vitor/common.hpp"
#include "vitor/corpus_features.hpp"
#include "vitor/evaluation.hpp"
#include "vitor/letor_io.hpp"
#include "vitor/neuralnet.hpp"
#include "vitor/visual_store.hpp"
#include "vitor/vitor_model.hpp"

namespace vitor {

inline double default_learning_rate(HeadKind k) { return k == HeadKind::resnet_style ? 5e-5 : 1e-4; }

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 100;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double margin = 1.0;
  double l2_lambda = 1e-5;
  std::uint64_t seed = 0;
  bool exclude_junk = false;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw Error("learning rate must be >= 0");
    if (batch_size == 0 || max_epochs == 0 || patience == 0) throw Error("batch size, epochs and patience must be positive");
    if (patience > max_epochs) throw Error("patience must not exceed max_epochs");
    if (!(margin > 0.0)) throw Error("margin must be positive");
    if (!(l2_lambda >= 0.0)) throw Error("l2 lambda must be >= 0");
  }
};

struct PreferencePair {
  std::string query_id;
  std::string pos_doc_id;
  std::string neg_doc_id;

  bool operator==(const PreferencePair&) const = default;
};

// All ordered pairs of one query with grade(pos) > grade(neg); junk (-2)
// sits below non-relevant (0) unless excluded.
inline std::vector<PreferencePair> enumerate_pairs(const std::string& qid,
                                                   std::span<const std::pair<std::string, RelevanceGrade>> judged,
                                                   bool exclude_junk = false) {
  std::vector<PreferencePair> out;
  for (const auto& [pos, gp] : judged) {
    if (exclude_junk && gp.value() < 0) continue;
    for (const auto& [neg, gn] : judged) {
      if (exclude_junk && gn.value() < 0) continue;
      if (gp > gn) out.push_back({qid, pos, neg});
    }
  }
  return out;
}

struct JudgedDocument {
  std::string doc_id;
  RelevanceGrade grade;
  ContentFeatureVector features;
};

// Normalized feature rows grouped by query, in file order within a query.
struct RankingData {
  std::map<std::string, std::vector<JudgedDocument>> queries;

  static RankingData from_letor(std::span<const LetorRecord> records) {
    RankingData d;
    for (const auto& r : records) {
      if (r.features.size() != kNumContentFeatures)
        throw Error("expected " + std::to_string(kNumContentFeatures) + " features for " + r.doc_id + ", got " +
                    std::to_string(r.features.size()));
      JudgedDocument doc{r.doc_id, r.grade, {}};
      std::copy(r.features.begin(), r.features.end(), doc.features.values.begin());
      doc.features.stage = FeatureStage::normalized;
      d.queries[r.query_id].push_back(std::move(doc));
    }
    return d;
  }

  const std::vector<JudgedDocument>& query(const std::string& qid) const {
    auto it = queries.find(qid);
    if (it == queries.end()) throw Error("unknown query " + qid);
    return it->second;
  }

  std::vector<PreferencePair> pairs_for(std::span<const std::string> query_ids, bool exclude_junk = false) const {
    std::vector<PreferencePair> out;
    for (const auto& qid : query_ids) {
      auto it = queries.find(qid);
      if (it == queries.end()) continue;
      std::vector<std::pair<std::string, RelevanceGrade>> judged;
      for (const auto& d : it->second) judged.emplace_back(d.doc_id, d.grade);
      auto p = enumerate_pairs(qid, judged, exclude_junk);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
};

// Scores every document of the given queries in eval mode and ranks them.
inline Run score_queries(const Model& model, const RankingData& data, std::span<const std::string> query_ids,
                         const VectorStore* vectors) {
  Run run;
  for (const auto& qid : query_ids) {
    auto it = data.queries.find(qid);
    if (it == data.queries.end()) continue;
    auto& docs = run[qid];
    for (const auto& d : it->second) {
      const std::vector<float>* v = nullptr;
      if (model.spec().has_head()) {
        const auto* vv = vectors ? vectors->find(d.doc_id) : nullptr;
        if (!vv) throw Error("missing visual vector for " + d.doc_id);
        v = &vv->values;
      }
      docs.push_back({qid, d.doc_id, model.score(v, d.features)});
    }
    sort_by_score(docs);
  }
  return run;
}

inline double mean_ndcg_at_10(const Run& run, const RankingData& data) {
  if (run.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [qid, docs] : run) {
    std::map<std::string, int> grade;
    std::vector<int> judged;
    for (const auto& d : data.query(qid)) {
      grade[d.doc_id] = d.grade.value();
      judged.push_back(d.grade.value());
    }
    std::vector<int> ranking;
    for (const auto& d : docs) ranking.push_back(grade.at(d.doc_id));
    s += ndcg_at_k(ranking, 10, judged);
  }
  return s / static_cast<double>(run.size());
}

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // eval-mode objective over all training pairs
  double val_ndcg10 = 0.0;
};

// `epoch <TAB> mean_loss <TAB> val_ndcg@10`
inline std::string emit_train_log(std::span<const EpochLog> log) {
  std::string out;
  for (const auto& e : log)
    out += std::to_string(e.epoch) + '\t' + format_double(e.mean_loss) + '\t' + format_double(e.val_ndcg10) + '\n';
  return out;
}

struct TrainResult {
  Model best;
  std::size_t best_epoch = 0;
  double best_val_ndcg10 = 0.0;
  std::vector<EpochLog> log;
  std::vector<double> first_epoch_batch_losses;
  std::map<std::string, std::size_t> gradient_contributions;  // pairs processed per query
};

namespace detail {

struct DocInput {
  std::vector<double> visual;
  std::array<double, kNumContentFeatures> content{};
};

}  // namespace detail

inline TrainResult train(Model model, std::span<const PreferencePair> pairs, const RankingData& data,
                         const VectorStore* vectors, const TrainConfig& config,
                         std::span<const std::string> validation_queries) {
  config.validate();
  if (pairs.empty()) throw Error("no training signal: no preference pairs");
  const std::set<std::string> val_set(validation_queries.begin(), validation_queries.end());
  const bool needs_visual = model.spec().has_head();

  // Resolve every document once.
  std::map<std::string, std::map<std::string, detail::DocInput>> inputs;
  auto resolve = [&](const std::string& qid, const JudgedDocument& d) {
    detail::DocInput in;
    in.content = d.features.values;
    if (needs_visual) {
      const auto* v = vectors ? vectors->find(d.doc_id) : nullptr;
      if (!v) throw Error("missing visual vector for doc " + d.doc_id);
      in.visual.assign(v->values.begin(), v->values.end());
    }
    inputs[qid][d.doc_id] = std::move(in);
  };
  std::set<std::string> train_queries;
  for (const auto& p : pairs) {
    if (val_set.count(p.query_id)) throw Error("query " + p.query_id + " is in both training pairs and validation");
    train_queries.insert(p.query_id);
  }
  for (const auto& q : train_queries)
    for (const auto& d : data.query(q)) resolve(q, d);
  if (needs_visual)
    for (const auto& q : validation_queries)
      if (auto it = data.queries.find(q); it != data.queries.end())
        for (const auto& d : it->second)
          if (!vectors || !vectors->find(d.doc_id)) throw Error("missing visual vector for doc " + d.doc_id);

  struct PairRef {
    const detail::DocInput* pos;
    const detail::DocInput* neg;
    const std::string* qid;
  };
  std::vector<PairRef> refs;
  refs.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto& q = inputs.at(p.query_id);
    auto pit = q.find(p.pos_doc_id), nit = q.find(p.neg_doc_id);
    if (pit == q.end() || nit == q.end())
      throw Error("pair references unknown doc in query " + p.query_id);
    refs.push_back({&pit->second, &nit->second, &p.query_id});
  }

  auto objective = [&](const Model& m) {
    std::map<const detail::DocInput*, double> cache;
    auto s = [&](const detail::DocInput* in) {
      auto it = cache.find(in);
      if (it != cache.end()) return it->second;
      const double v = m.forward(in->visual, in->content, nn::Mode::eval);
      cache.emplace(in, v);
      return v;
    };
    double loss = 0.0;
    for (const auto& r : refs) loss += nn::pairwise_hinge_loss(s(r.pos), s(r.neg), config.margin);
    return loss / static_cast<double>(refs.size()) + config.l2_lambda * m.l2_penalty();
  };
  auto validate = [&](const Model& m) {
    return mean_ndcg_at_10(score_queries(m, data, validation_queries, vectors), data);
  };

  TrainResult result;
  result.best = model;
  result.best_epoch = 0;
  result.best_val_ndcg10 = validate(model);
  result.log.push_back({0, objective(model), result.best_val_ndcg10});

  Rng rng(config.seed);
  nn::AdamState adam;
  adam.lr = config.learning_rate;
  std::vector<std::size_t> order(refs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      auto head_g = model.head().zero_gradients();
      auto scoring_g = model.scoring().zero_gradients();
      double loss = 0.0;
      Model::Trace tp, tn;
      for (std::size_t i = start; i < end; ++i) {
        const auto& r = refs[order[i]];
        const double sp = model.forward(r.pos->visual, r.pos->content, nn::Mode::train, &rng, &tp);
        const double sn = model.forward(r.neg->visual, r.neg->content, nn::Mode::train, &rng, &tn);
        loss += nn::pairwise_hinge_loss(sp, sn, config.margin);
        ++result.gradient_contributions[*r.qid];
        const double g = nn::pairwise_hinge_grad(sp, sn, config.margin);
        if (g != 0.0) {
          model.backward(tp, g * inv_b, head_g, scoring_g);
          model.backward(tn, -g * inv_b, head_g, scoring_g);
        }
      }
      nn::add_l2_gradient(model.head(), head_g, config.l2_lambda);
      nn::add_l2_gradient(model.scoring(), scoring_g, config.l2_lambda);
      if (epoch == 1) result.first_epoch_batch_losses.push_back(loss * inv_b + config.l2_lambda * model.l2_penalty());
      std::vector<std::span<const double>> grads;
      nn::append_gradient_views(head_g, grads);
      nn::append_gradient_views(scoring_g, grads);
      const auto params = model.parameter_views();
      nn::adam_step(params, grads, adam);
    }
    const double val = validation_queries.empty() ? 0.0 : validate(model);
    result.log.push_back({epoch, objective(model), val});
    if (validation_queries.empty() || val > result.best_val_ndcg10) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_val_ndcg10 = val;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace vitor
