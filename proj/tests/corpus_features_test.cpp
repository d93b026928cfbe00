#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vitor/corpus_features.hpp"

using namespace vitor;

namespace {

std::vector<TokenizedDocument> micro_corpus() {
  return {make_document("d1", "", "a b a"), make_document("d2", "", "b c"), make_document("d3", "", "a d d")};
}

std::vector<std::string> terms(std::initializer_list<const char*> t) { return {t.begin(), t.end()}; }

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnNonAlnum) {
  EXPECT_EQ(tokenize("Hello, World! x-ray 42"), terms({"hello", "world", "x", "ray", "42"}));
  EXPECT_TRUE(tokenize("  ,,, ").empty());
  EXPECT_EQ(tokenize("caf\xc3\xa9 bar"), terms({"caf\xc3\xa9", "bar"}));
}

TEST(CorpusStats, MicroCorpusCounts) {
  const auto docs = micro_corpus();
  const auto s = build_corpus_stats(docs);
  EXPECT_EQ(s.n_docs(), 3u);
  EXPECT_EQ(s.df("a", Field::content), 2u);
  EXPECT_EQ(s.df("b", Field::content), 2u);
  EXPECT_EQ(s.df("c", Field::content), 1u);
  EXPECT_EQ(s.df("d", Field::content), 1u);
  EXPECT_DOUBLE_EQ(s.avgdl(Field::content), 8.0 / 3.0);
}

TEST(CorpusStats, SingleDocument) {
  std::vector<TokenizedDocument> docs = {make_document("only", "", "x")};
  const auto s = build_corpus_stats(docs);
  EXPECT_EQ(s.df("x", Field::content), 1u);
  EXPECT_DOUBLE_EQ(s.avgdl(Field::content), 1.0);
}

TEST(CorpusStats, EmptyTitlesHaveNoStatistics) {
  const auto s = build_corpus_stats(micro_corpus());
  EXPECT_DOUBLE_EQ(s.avgdl(Field::title), 0.0);
  EXPECT_EQ(s.vocabulary_size(Field::title), 0u);
}

TEST(CorpusStats, Errors) {
  std::vector<TokenizedDocument> none;
  EXPECT_THROW(build_corpus_stats(none), Error);
  std::vector<TokenizedDocument> dup = {make_document("x", "", "a"), make_document("x", "", "b")};
  EXPECT_THROW(build_corpus_stats(dup), Error);
  std::vector<TokenizedDocument> empty_id = {make_document("", "", "a")};
  EXPECT_THROW(build_corpus_stats(empty_id), Error);
}

TEST(CorpusStats, DfIsMonotoneAsDocumentsArrive) {
  Rng rng(7);
  CorpusStats s;
  std::map<std::string, std::size_t> prev;
  for (int i = 0; i < 50; ++i) {
    std::string text;
    for (int k = 0; k < 6; ++k) text += "t" + std::to_string(rng.index(12)) + " ";
    s.add(make_document("d" + std::to_string(i), "", text));
    for (const auto& [tok, df] : s.df_table(Field::content)) {
      EXPECT_GE(df, prev[tok]);
      EXPECT_LE(df, s.n_docs());
      prev[tok] = df;
    }
  }
}

TEST(SumTf, Examples) {
  const auto field = terms({"a", "b", "a"});
  EXPECT_EQ(sum_tf(terms({"a"}), field), 2.0);
  EXPECT_EQ(sum_tf(terms({"a", "b"}), field), 3.0);
  EXPECT_EQ(sum_tf(terms({"z"}), field), 0.0);
  EXPECT_EQ(sum_tf(terms({"a", "a"}), field), 2.0);  // duplicates collapse
}

TEST(Idf, FormulaAndFloor) {
  EXPECT_NEAR(idf_from_counts(3, 1), 0.5108256237659907, 1e-12);
  EXPECT_EQ(idf_from_counts(3, 2), 0.0);
  EXPECT_NEAR(idf_from_counts(3, 0), 1.9459101490553132, 1e-12);
  const auto s = build_corpus_stats(micro_corpus());
  EXPECT_NEAR(idf("zzz", Field::content, s), 1.9459101490553132, 1e-12);
}

TEST(Bm25, MicroCorpusMatchesOracle) {
  const auto docs = micro_corpus();
  const auto s = build_corpus_stats(docs);
  std::vector<std::vector<std::string>> raw;
  for (const auto& d : docs) raw.push_back(d.content_tokens);

  EXPECT_NEAR(bm25(terms({"d"}), docs[2].content_tokens, Field::content, s), 0.7527956560761969, 1e-12);
  EXPECT_EQ(bm25(terms({"a"}), docs[0].content_tokens, Field::content, s), 0.0);
  EXPECT_EQ(bm25(terms({"z"}), docs[0].content_tokens, Field::content, s), 0.0);
  for (const auto& q : {terms({"d"}), terms({"a"}), terms({"c", "d"}), terms({"a", "b", "c", "d"})})
    for (std::size_t i = 0; i < docs.size(); ++i)
      EXPECT_NEAR(bm25(q, docs[i].content_tokens, Field::content, s), oracle::bm25(raw, q, raw[i]), 1e-12);
}

TEST(Bm25, QueryFrequencyFactorIsOneWhenK3IsZero) {
  const auto docs = micro_corpus();
  const auto s = build_corpus_stats(docs);
  const double once = bm25(terms({"d"}), docs[2].content_tokens, Field::content, s);
  const double thrice = bm25(terms({"d", "d", "d"}), docs[2].content_tokens, Field::content, s);
  EXPECT_EQ(once, thrice);
  Bm25Params p;
  p.k3 = 1.0;
  EXPECT_GT(bm25(terms({"d", "d", "d"}), docs[2].content_tokens, Field::content, s, p),
            bm25(terms({"d"}), docs[2].content_tokens, Field::content, s, p));
}

TEST(Bm25, DegenerateFieldAndParameterChecks) {
  const auto s = build_corpus_stats(micro_corpus());
  EXPECT_THROW(bm25(terms({"a"}), terms({"a"}), Field::title, s), Error);
  Bm25Params bad;
  bad.b = 1.5;
  EXPECT_THROW(bm25(terms({"a"}), terms({"a"}), Field::content, s, bad), Error);
}

TEST(Bm25, NonNegativeOnRandomCorpora) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TokenizedDocument> docs;
    for (int i = 0; i < 8; ++i) {
      std::string text;
      for (int k = 0; k < 1 + static_cast<int>(rng.index(10)); ++k) text += "t" + std::to_string(rng.index(5)) + " ";
      docs.push_back(make_document("d" + std::to_string(i), "", text));
    }
    const auto s = build_corpus_stats(docs);
    for (const auto& d : docs) EXPECT_GE(bm25(terms({"t0", "t1", "t4"}), d.content_tokens, Field::content, s), 0.0);
  }
}

TEST(ContentFeatures, LayoutAndScaling) {
  std::vector<TokenizedDocument> docs = {make_document("d1", "a title", "a b a"), make_document("d2", "", "b c"),
                                         make_document("d3", "another", "a d d")};
  const auto s = build_corpus_stats(docs);
  const auto v = extract_content_features(terms({"a", "d"}), docs[0], s, 2e-6);
  EXPECT_EQ(v.stage, FeatureStage::raw);
  EXPECT_NEAR(v.values[0], 0.2, 1e-15);
  EXPECT_EQ(v.values[1], 3.0);  // content length
  EXPECT_EQ(v.values[2], 2.0);  // content tf
  EXPECT_NEAR(v.values[3], idf("a", Field::content, s) + idf("d", Field::content, s), 1e-15);
  EXPECT_NEAR(v.values[4], 2.0 * idf("a", Field::content, s), 1e-15);
  EXPECT_EQ(v.values[5], bm25(terms({"a", "d"}), docs[0].content_tokens, Field::content, s));
  EXPECT_EQ(v.values[6], 2.0);  // title length
  EXPECT_EQ(v.values[7], 1.0);
}

TEST(ContentFeatures, EmptyQueryAndMissingTitle) {
  std::vector<TokenizedDocument> docs = {make_document("d1", "t", "a b a"), make_document("d2", "", "b c")};
  const auto s = build_corpus_stats(docs);
  const auto empty_q = extract_content_features({}, docs[0], s, 0.0);
  for (std::size_t i : {2u, 3u, 4u, 5u, 7u, 8u, 9u, 10u}) EXPECT_EQ(empty_q.values[i], 0.0);
  EXPECT_EQ(empty_q.values[1], 3.0);
  EXPECT_EQ(empty_q.values[6], 1.0);

  const auto no_title = extract_content_features(terms({"b", "t"}), docs[1], s, 0.0);
  for (std::size_t i : {6u, 7u, 9u, 10u}) EXPECT_EQ(no_title.values[i], 0.0);
  // idf depends on the query and corpus, not on this document's title
  EXPECT_EQ(no_title.values[8], idf("b", Field::title, s) + idf("t", Field::title, s));
}

TEST(ContentFeatures, PureFunction) {
  const auto docs = micro_corpus();
  const auto s = build_corpus_stats(docs);
  const auto a = extract_content_features(terms({"a", "d"}), docs[2], s, 1e-6);
  const auto b = extract_content_features(terms({"a", "d"}), docs[2], s, 1e-6);
  EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.values.size()), 0);
  EXPECT_THROW(extract_content_features(terms({"a"}), docs[0], s, -1.0), Error);
}

TEST(LogTransform, Examples) {
  ContentFeatureVector v;
  v.values[0] = 0.0;
  v.values[1] = std::exp(1.0) - 1.0;
  v.values[2] = -0.5;
  const auto l = log_transform(v);
  EXPECT_EQ(l.stage, FeatureStage::logged);
  EXPECT_EQ(l.values[0], 0.0);
  EXPECT_NEAR(l.values[1], 1.0, 1e-15);
  EXPECT_EQ(l.values[2], 0.0);
  EXPECT_THROW(log_transform(l), Error);
}

namespace {
FeatureRow row(const std::string& q, const std::string& d, double x) {
  FeatureRow r{q, d, {}};
  r.features.stage = FeatureStage::logged;
  r.features.values.fill(x);
  return r;
}
}  // namespace

TEST(NormalizePerQuery, Examples) {
  auto out = normalize_per_query({row("q1", "a", 1.0), row("q1", "b", 3.0), row("q2", "c", 5.0), row("q2", "d", 5.0),
                                  row("q3", "e", 1.0), row("q3", "f", 2.0), row("q3", "g", 3.0)});
  EXPECT_EQ(out[0].features.values[0], 0.0);
  EXPECT_EQ(out[1].features.values[0], 1.0);
  EXPECT_EQ(out[2].features.values[4], 0.0);
  EXPECT_EQ(out[3].features.values[4], 0.0);
  EXPECT_EQ(out[5].features.values[2], 0.5);
  EXPECT_EQ(out[6].features.values[10], 1.0);
  for (const auto& r : out) EXPECT_EQ(r.features.stage, FeatureStage::normalized);
  FeatureRow raw{"q", "d", {}};
  EXPECT_THROW(normalize_per_query({raw}), Error);
}

TEST(NormalizePerQuery, PreservesOrderAndRange) {
  Rng rng(11);
  std::vector<FeatureRow> rows;
  for (int q = 0; q < 10; ++q)
    for (int d = 0; d < 12; ++d) {
      FeatureRow r{"q" + std::to_string(q), "d" + std::to_string(d), {}};
      r.features.stage = FeatureStage::logged;
      for (auto& x : r.features.values) x = std::floor(rng.uniform(0.0, 5.0) * 4.0) / 4.0;  // ties included
      rows.push_back(r);
    }
  const auto out = normalize_per_query(rows);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[i].query_id != rows[j].query_id) continue;
      for (std::size_t f = 0; f < kNumContentFeatures; ++f) {
        const double a = rows[i].features.values[f], b = rows[j].features.values[f];
        const double na = out[i].features.values[f], nb = out[j].features.values[f];
        EXPECT_EQ(a < b, na < nb);
        EXPECT_EQ(a == b, na == nb);
      }
    }
  for (const auto& r : out)
    for (double x : r.features.values) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
}
