#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "vitor/synth.hpp"
#include "vitor/visual_store.hpp"

using namespace vitor;
namespace fs = std::filesystem;

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

SyntheticSpec thousand_docs(double visual) {
  SyntheticSpec s;
  s.n_queries = 25;
  s.docs_per_query = 40;
  s.visual_strength = visual;
  s.seed = 5;
  return s;
}

}  // namespace

TEST(Synth, ShapeAndIds) {
  SyntheticSpec s;
  s.n_queries = 3;
  s.docs_per_query = 4;
  const auto fx = generate_synthetic(s);
  EXPECT_EQ(fx.queries.size(), 3u);
  ASSERT_EQ(fx.docs.size(), 12u);
  std::set<std::string> ids;
  for (const auto& d : fx.docs) {
    ids.insert(d.doc_id);
    EXPECT_TRUE(RelevanceGrade::is_valid(d.grade));
    EXPECT_EQ(d.image.width, 32u);
    EXPECT_GT(d.pagerank, 0.0);
  }
  EXPECT_EQ(ids.size(), 12u);
  EXPECT_EQ(fx.docs[5].doc_id, "syn-q002-d002");
  EXPECT_EQ(fx.docs[5].query_id, "2");
}

TEST(Synth, NoVisualSignalMeansNoCorrelation) {
  const auto fx = generate_synthetic(thousand_docs(0.0));
  ASSERT_EQ(fx.docs.size(), 1000u);
  std::vector<double> grades, mean;
  std::vector<std::vector<double>> cells(16);
  for (const auto& d : fx.docs) {
    const auto v = grid_extract(d.image, 4);
    grades.push_back(d.grade);
    double m = 0;
    for (std::size_t c = 0; c < 16; ++c) {
      cells[c].push_back(v.values[c]);
      m += v.values[c] / 16.0;
    }
    mean.push_back(m);
  }
  EXPECT_LT(std::fabs(pearson(mean, grades)), 0.1);
  for (const auto& c : cells) EXPECT_LT(std::fabs(pearson(c, grades)), 0.1);
}

TEST(Synth, FullVisualSignalIsMonotoneInGrade) {
  auto spec = thousand_docs(1.0);
  spec.grade_weights = {1, 1, 1, 1, 1, 1};
  const auto fx = generate_synthetic(spec);
  std::map<int, std::pair<double, double>> by_grade;  // sum, count
  for (const auto& d : fx.docs) {
    const auto v = grid_extract(d.image, 4);
    double m = 0;
    for (float x : v.values) m += x / 16.0;
    by_grade[d.grade].first += m;
    by_grade[d.grade].second += 1;
  }
  ASSERT_EQ(by_grade.size(), 6u);
  double prev = -1;
  for (const auto& [g, sc] : by_grade) {
    const double m = sc.first / sc.second;
    EXPECT_GT(m, prev) << "grade " << g;
    prev = m;
  }
}

TEST(Synth, ContentSignalShowsUpInTermCounts) {
  auto spec = thousand_docs(0.0);
  spec.content_strength = 1.0;
  const auto fx = generate_synthetic(spec);
  std::vector<double> grades, tf;
  for (const auto& d : fx.docs) {
    const std::string t = "qt" + d.query_id + "a";
    double n = 0;
    for (std::size_t pos = d.content.find(t); pos != std::string::npos; pos = d.content.find(t, pos + 1)) ++n;
    grades.push_back(grade_level(d.grade));
    tf.push_back(n);
  }
  EXPECT_GT(pearson(tf, grades), 0.9);
}

TEST(Synth, SameSeedSameBytes) {
  SyntheticSpec s;
  s.n_queries = 4;
  s.docs_per_query = 5;
  s.seed = 3;
  const auto a = fs::temp_directory_path() / "vitor_synth_a", b = fs::temp_directory_path() / "vitor_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  write_synthetic(generate_synthetic(s), a);
  write_synthetic(generate_synthetic(s), b);
  for (const auto& name : {"corpus.tsv", "queries.tsv", "qrels.txt", "pagerank.tsv", "images/syn-q003-d004.png"})
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  const auto first = generate_synthetic(s);
  s.seed = 4;
  EXPECT_NE(generate_synthetic(s).docs[0].content, first.docs[0].content);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Synth, Validation) {
  SyntheticSpec s;
  s.visual_strength = 1.5;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.n_queries = 0;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.grade_weights = {0, 0, 0, 0, 0, 0};
  EXPECT_THROW(generate_synthetic(s), Error);
}
