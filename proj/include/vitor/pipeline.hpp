#pragma once

// File-level pipeline steps shared by the command-line tool and the
// integration tests: features -> folds -> extract -> train -> score ->
// eval / compare. Every output is written atomically.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vitor/common.hpp"
#include "vitor/corpus_features.hpp"
#include "vitor/evaluation.hpp"
#include "vitor/letor_io.hpp"
#include "vitor/training.hpp"
#include "vitor/visual_store.hpp"
#include "vitor/vitor_model.hpp"

namespace vitor::pipeline {

namespace fs = std::filesystem;

// ---- features ------------------------------------------------------------------

struct FeaturesOptions {
  fs::path corpus;
  fs::path queries;
  fs::path qrels;
  std::optional<fs::path> pagerank;
  fs::path out_dir;
  Bm25Params bm25;
};

struct FeaturesResult {
  std::vector<LetorRecord> raw, logged, normalized;
  std::vector<std::string> warnings;
  fs::path raw_path, logged_path, normalized_path;
};

inline LetorRecord to_record(const std::string& qid, const std::string& doc_id, RelevanceGrade g,
                             const ContentFeatureVector& v) {
  return {g, qid, std::vector<double>(v.values.begin(), v.values.end()), doc_id};
}

// One row per judged (query, doc) pair. Judged documents missing from the
// corpus get all-zero raw features and a warning.
inline FeaturesResult build_features(const FeaturesOptions& opt) {
  const auto docs = read_corpus(opt.corpus);
  const auto stats = build_corpus_stats(docs);
  const auto queries = read_queries(opt.queries);
  const auto qrels = read_qrels(opt.qrels);
  std::map<std::string, double> pagerank;
  if (opt.pagerank) pagerank = read_pagerank(*opt.pagerank);

  std::map<std::string, const TokenizedDocument*> by_id;
  for (const auto& d : docs) by_id[d.doc_id] = &d;

  FeaturesResult res;
  res.warnings = qrels.warnings;
  std::vector<FeatureRow> logged_rows;
  std::vector<RelevanceGrade> grades;
  for (const auto& [key, grade] : qrels.judgments) {
    const auto& [qid, doc_id] = key;
    auto qit = queries.find(qid);
    if (qit == queries.end()) throw Error("query " + qid + " is judged but has no text in " + opt.queries.string());
    ContentFeatureVector raw;
    auto dit = by_id.find(doc_id);
    if (dit == by_id.end()) {
      res.warnings.push_back("doc " + doc_id + " judged for query " + qid + " is absent from the corpus; zero features");
    } else {
      double pr = 0.0;
      if (auto pit = pagerank.find(doc_id); pit != pagerank.end()) pr = pit->second;
      raw = extract_content_features(qit->second, *dit->second, stats, pr, opt.bm25);
    }
    const auto logged = log_transform(raw);
    res.raw.push_back(to_record(qid, doc_id, grade, raw));
    res.logged.push_back(to_record(qid, doc_id, grade, logged));
    logged_rows.push_back({qid, doc_id, logged});
    grades.push_back(grade);
  }
  const auto normalized = normalize_per_query(std::move(logged_rows));
  for (std::size_t i = 0; i < normalized.size(); ++i)
    res.normalized.push_back(to_record(normalized[i].query_id, normalized[i].doc_id, grades[i], normalized[i].features));

  res.raw_path = opt.out_dir / "raw.letor";
  res.logged_path = opt.out_dir / "logged.letor";
  res.normalized_path = opt.out_dir / "normalized.letor";
  write_file_atomic(res.raw_path, emit_letor_file(res.raw));
  write_file_atomic(res.logged_path, emit_letor_file(res.logged));
  write_file_atomic(res.normalized_path, emit_letor_file(res.normalized));
  return res;
}

// ---- folds ---------------------------------------------------------------------

inline FoldAssignment build_folds(const fs::path& letor_or_qrels, std::uint64_t seed, const fs::path& out) {
  std::vector<std::string> qids;
  const auto ext = letor_or_qrels.extension();
  if (ext == ".letor") {
    for (const auto& r : read_letor(letor_or_qrels)) qids.push_back(r.query_id);
  } else {
    qids = read_qrels(letor_or_qrels).query_ids();
  }
  auto fa = split_folds(qids, seed);
  write_file_atomic(out, emit_fold_manifest(fa));
  return fa;
}

// ---- extract -------------------------------------------------------------------

struct ExtractOptions {
  std::optional<fs::path> images_dir;
  std::optional<fs::path> manifest;
  fs::path qrels;
  std::size_t grid = 8;
  fs::path out;
};

struct ExtractResult {
  std::vector<VisualVector> vectors;
  std::vector<std::string> missing;  // "doc_id <TAB> reason"
  fs::path sidecar;
};

// One vector per judged document with a readable image; everything else is
// listed in `<out>.missing` and skipped.
inline ExtractResult extract_vectors(const ExtractOptions& opt) {
  if (!opt.images_dir && !opt.manifest) throw Error("extract needs an image directory or a manifest");
  const GridExtractor extractor(opt.grid);
  std::map<std::string, fs::path> manifest;
  if (opt.manifest) manifest = read_image_manifest(*opt.manifest);
  std::vector<std::string> doc_ids;
  for (const auto& [key, g] : read_qrels(opt.qrels).judgments) doc_ids.push_back(key.second);
  std::sort(doc_ids.begin(), doc_ids.end());
  doc_ids.erase(std::unique(doc_ids.begin(), doc_ids.end()), doc_ids.end());

  ExtractResult res;
  for (const auto& id : doc_ids) {
    std::optional<fs::path> path;
    if (opt.manifest) {
      if (auto it = manifest.find(id); it != manifest.end()) path = it->second;
    } else {
      path = find_image(*opt.images_dir, id);
    }
    if (!path) {
      res.missing.push_back(id + "\tno image");
      continue;
    }
    try {
      res.vectors.push_back(extractor.extract(id, read_image(*path)));
    } catch (const Error& e) {
      res.missing.push_back(id + "\tunreadable: " + e.what());
    }
  }
  save_vectors(res.vectors, opt.out, extractor.descriptor().output_dim);
  std::string sidecar;
  for (const auto& m : res.missing) sidecar += m + '\n';
  res.sidecar = opt.out;
  res.sidecar += ".missing";
  write_file_atomic(res.sidecar, sidecar);
  return res;
}

// ---- train / score ---------------------------------------------------------------

struct TrainOptions {
  fs::path letor;
  fs::path folds;
  int fold = 0;
  std::optional<fs::path> vectors;
  ArchitectureSpec arch;  // input_dim is taken from the vector cache
  TrainConfig config;
  std::uint64_t init_seed = 0;
  fs::path out_model;
  std::optional<fs::path> out_log;
};

inline void check_fold(int fold) {
  if (fold < 0 || fold >= kNumPartitions) throw Error("fold must be in 0..4");
}

inline TrainResult train_fold(const TrainOptions& opt) {
  check_fold(opt.fold);
  const auto data = RankingData::from_letor(read_letor(opt.letor));
  const auto folds = read_fold_manifest(opt.folds);
  std::optional<VectorStore> store;
  ArchitectureSpec arch = opt.arch;
  if (arch.has_head()) {
    if (!opt.vectors) throw Error("a visual head needs a vector cache");
    store.emplace(load_vectors(*opt.vectors));
    arch.input_dim = store->dim();
  }
  const auto train_q = folds.train_queries(opt.fold);
  const auto val_q = folds.validation_queries(opt.fold);
  const auto pairs = data.pairs_for(train_q, opt.config.exclude_junk);
  auto result = train(Model::build(arch, opt.init_seed), pairs, data, store ? &*store : nullptr, opt.config, val_q);
  save_checkpoint(result.best, opt.out_model);
  if (opt.out_log) write_file_atomic(*opt.out_log, emit_train_log(result.log));
  return result;
}

struct ScoreOptions {
  fs::path model;
  fs::path letor;
  fs::path folds;
  int fold = 0;
  std::optional<fs::path> vectors;
  fs::path out_run;
};

// Run file over the fold's test queries only.
inline Run score_fold(const ScoreOptions& opt) {
  check_fold(opt.fold);
  const auto model = load_checkpoint(opt.model);
  const auto data = RankingData::from_letor(read_letor(opt.letor));
  const auto folds = read_fold_manifest(opt.folds);
  std::optional<VectorStore> store;
  if (model.spec().has_head()) {
    if (!opt.vectors) throw Error("model has a visual head; a vector cache is required");
    store.emplace(load_vectors(*opt.vectors));
  }
  const auto run = score_queries(model, data, folds.test_queries(opt.fold), store ? &*store : nullptr);
  write_file_atomic(opt.out_run, emit_run(run));
  return run;
}

// ---- eval / compare ---------------------------------------------------------------

struct EvalResult {
  std::vector<QueryMetrics> per_query;
  std::map<std::string, double> aggregate;
};

inline EvalResult evaluate(const fs::path& run_path, const fs::path& qrels_path, const std::string& system_name,
                           const fs::path& out_report, const std::optional<fs::path>& out_per_query = {}) {
  EvalResult r;
  r.per_query = evaluate_run(read_run(run_path), read_qrels(qrels_path));
  r.aggregate = aggregate(r.per_query);
  write_file_atomic(out_report, emit_report({{system_name, r.aggregate, {}}}));
  if (out_per_query) write_file_atomic(*out_per_query, emit_per_query(r.per_query));
  return r;
}

// Paired t-tests (a - b) for every metric column plus a two-row report where
// significant improvements of a over b are starred.
inline Comparison compare(const fs::path& run_a, const fs::path& run_b, const fs::path& qrels_path,
                          const std::string& name_a, const std::string& name_b, const fs::path& out_tests,
                          const std::optional<fs::path>& out_report = {}) {
  auto c = compare_runs(read_run(run_a), read_run(run_b), read_qrels(qrels_path));
  write_file_atomic(out_tests, emit_ttests(c.tests));
  if (out_report) {
    SystemRow a{name_a, aggregate(c.a), {}};
    SystemRow b{name_b, aggregate(c.b), {}};
    for (const auto& [metric, t] : c.tests) a.significant[metric] = t.significant;
    write_file_atomic(*out_report, emit_report({b, a}));
  }
  return c;
}

}  // namespace vitor::pipeline
