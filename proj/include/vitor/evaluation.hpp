#pragma once

// Ranking metrics (P@k, NDCG@k, AP), the two-tailed paired t-test, run
// files and report tables.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vitor/common.hpp"
#include "vitor/letor_io.hpp"
#include "vitor/vitor_model.hpp"

namespace vitor {

// Fraction of the top k positions holding a relevant (grade >= 1) document.
// Positions beyond the end of the ranking count as non-relevant.
inline double precision_at_k(std::span<const int> ranking, std::size_t k) {
  if (k < 1) throw Error("k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    if (ranking[i] >= 1) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline double gain(int grade) { return std::exp2(static_cast<double>(std::max(grade, 0))) - 1.0; }

inline double dcg_at_k(std::span<const int> ranking, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    dcg += gain(ranking[i]) / std::log2(static_cast<double>(i) + 2.0);
  return dcg;
}

// IDCG comes from the descending sort of the judged grades (the ranking
// itself when no judged set is given). Zero when the ideal DCG is zero.
inline double ndcg_at_k(std::span<const int> ranking, std::size_t k, std::span<const int> judged = {}) {
  if (k < 1) throw Error("k must be >= 1");
  std::vector<int> ideal(judged.empty() ? ranking.begin() : judged.begin(), judged.empty() ? ranking.end() : judged.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg_at_k(ideal, k);
  if (idcg <= 0.0) return 0.0;
  return dcg_at_k(ranking, k) / idcg;
}

// Mean precision at each relevant rank, divided by the number of relevant
// judged documents (retrieved or not).
inline double average_precision(std::span<const int> ranking, std::span<const int> judged = {}) {
  const auto& pool = judged.empty() ? ranking : judged;
  const auto n_rel = static_cast<std::size_t>(std::count_if(pool.begin(), pool.end(), [](int g) { return g >= 1; }));
  if (n_rel == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i] >= 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(n_rel);
}

inline constexpr std::array<std::size_t, 2> kDefaultCutoffs = {1, 10};

struct QueryMetrics {
  std::string query_id;
  std::map<std::size_t, double> p_at;
  std::map<std::size_t, double> ndcg_at;
  double ap = 0.0;
};

inline QueryMetrics evaluate_query(const std::string& qid, std::span<const int> ranking, std::span<const int> judged,
                                   std::span<const std::size_t> cutoffs = kDefaultCutoffs) {
  QueryMetrics m;
  m.query_id = qid;
  for (std::size_t k : cutoffs) {
    m.p_at[k] = precision_at_k(ranking, k);
    m.ndcg_at[k] = ndcg_at_k(ranking, k, judged);
  }
  m.ap = average_precision(ranking, judged);
  return m;
}

// Descending score; ties broken by ascending doc_id.
inline void sort_by_score(std::vector<ScoredDocument>& docs) {
  std::sort(docs.begin(), docs.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
}

// ---- paired t-test ----------------------------------------------------------------

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error("incomplete beta: parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// P(|T| >= |t|) for Student's t with df degrees of freedom.
inline double student_t_two_tailed_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double t_statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
  bool significant = false;
};

inline constexpr double kSignificanceLevel = 0.05;

// Differences are a - b.
inline TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("paired t-test needs aligned samples");
  const std::size_t n = a.size();
  if (n < 2) throw Error("paired t-test needs at least 2 pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.n = n;
  r.mean_diff = mean;
  r.degrees_of_freedom = n - 1;
  if (sd == 0.0) {
    if (mean != 0.0) throw Error("degenerate: identical variance (all differences equal and nonzero)");
    r.t_statistic = 0.0;
    r.p_value = 1.0;
  } else {
    r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_tailed_p(r.t_statistic, static_cast<double>(n - 1));
  }
  r.significant = r.p_value <= kSignificanceLevel;
  return r;
}

// ---- run files ----------------------------------------------------------------------

// `query_id <TAB> doc_id <TAB> rank <TAB> score`, ranks 1-based.
using Run = std::map<std::string, std::vector<ScoredDocument>>;

inline std::string emit_run(const Run& run) {
  std::string out;
  for (const auto& [qid, docs] : run) {
    for (std::size_t i = 0; i < docs.size(); ++i)
      out += qid + '\t' + docs[i].doc_id + '\t' + std::to_string(i + 1) + '\t' + format_double(docs[i].score) + '\n';
  }
  return out;
}

inline Run read_run(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::pair<std::size_t, ScoredDocument>>> tmp;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cols = split(lines[i], '\t');
    std::size_t rank = 0;
    double score = 0.0;
    if (cols.size() != 4 || !parse_int(cols[2], rank) || !parse_double(cols[3], score))
      throw ParseError(path.string(), i + 1, "expected query_id<TAB>doc_id<TAB>rank<TAB>score");
    tmp[std::string(cols[0])].push_back({rank, {std::string(cols[0]), std::string(cols[1]), score}});
  }
  Run run;
  for (auto& [qid, v] : tmp) {
    std::stable_sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto& [rank, doc] : v) run[qid].push_back(std::move(doc));
  }
  return run;
}

inline std::vector<QueryMetrics> evaluate_run(const Run& run, const Qrels& qrels,
                                              std::span<const std::size_t> cutoffs = kDefaultCutoffs) {
  std::vector<QueryMetrics> out;
  for (const auto& [qid, docs] : run) {
    std::vector<int> ranking;
    for (const auto& d : docs) {
      auto it = qrels.judgments.find({qid, d.doc_id});
      ranking.push_back(it == qrels.judgments.end() ? 0 : it->second.value());
    }
    std::vector<int> judged;
    for (const auto& [doc, g] : qrels.for_query(qid)) judged.push_back(g.value());
    out.push_back(evaluate_query(qid, ranking, judged, cutoffs));
  }
  return out;
}

// Report columns, in the order used by the result tables.
inline constexpr std::array<std::string_view, 5> kReportColumns = {"p@1", "p@10", "ndcg@1", "ndcg@10", "map"};

inline double metric_value(const QueryMetrics& m, std::string_view column) {
  if (column == "p@1") return m.p_at.at(1);
  if (column == "p@10") return m.p_at.at(10);
  if (column == "ndcg@1") return m.ndcg_at.at(1);
  if (column == "ndcg@10") return m.ndcg_at.at(10);
  if (column == "map") return m.ap;
  throw Error("unknown metric " + std::string(column));
}

inline std::map<std::string, double> aggregate(const std::vector<QueryMetrics>& per_query) {
  std::map<std::string, double> out;
  for (auto col : kReportColumns) {
    double s = 0.0;
    for (const auto& m : per_query) s += metric_value(m, col);
    out[std::string(col)] = per_query.empty() ? 0.0 : s / static_cast<double>(per_query.size());
  }
  return out;
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// One row per query, metric columns in report order.
inline std::string emit_per_query(const std::vector<QueryMetrics>& per_query) {
  std::string out = "query_id";
  for (auto c : kReportColumns) out += '\t' + std::string(c);
  out += '\n';
  for (const auto& m : per_query) {
    out += m.query_id;
    for (auto c : kReportColumns) out += '\t' + format_double(metric_value(m, c));
    out += '\n';
  }
  return out;
}

struct SystemRow {
  std::string name;
  std::map<std::string, double> values;
  std::map<std::string, bool> significant;  // vs. the comparison baseline
};

// Rows = systems, columns = p@1 p@10 ndcg@1 ndcg@10 map; a trailing '*'
// marks a significant difference against the baseline.
inline std::string emit_report(const std::vector<SystemRow>& rows) {
  std::string out = "system";
  for (auto c : kReportColumns) out += '\t' + std::string(c);
  out += '\n';
  for (const auto& r : rows) {
    out += r.name;
    for (auto c : kReportColumns) {
      const std::string key(c);
      out += '\t' + fixed4(r.values.at(key));
      auto it = r.significant.find(key);
      if (it != r.significant.end() && it->second) out += '*';
    }
    out += '\n';
  }
  return out;
}

struct Comparison {
  std::map<std::string, TTestResult> tests;  // per metric column, a - b
  std::vector<QueryMetrics> a;
  std::vector<QueryMetrics> b;
};

inline Comparison compare_runs(const Run& run_a, const Run& run_b, const Qrels& qrels) {
  std::vector<std::string> qa, qb;
  for (const auto& [q, d] : run_a) qa.push_back(q);
  for (const auto& [q, d] : run_b) qb.push_back(q);
  if (qa != qb) throw Error("fold mismatch: run files cover different query sets");
  Comparison c;
  c.a = evaluate_run(run_a, qrels);
  c.b = evaluate_run(run_b, qrels);
  for (auto col : kReportColumns) {
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < c.a.size(); ++i) {
      va.push_back(metric_value(c.a[i], col));
      vb.push_back(metric_value(c.b[i], col));
    }
    c.tests[std::string(col)] = paired_ttest(va, vb);
  }
  return c;
}

inline std::string emit_ttests(const std::map<std::string, TTestResult>& tests) {
  std::string out = "metric\tn\tmean_diff\tt\tdf\tp_value\tsignificant\n";
  for (auto col : kReportColumns) {
    const auto& t = tests.at(std::string(col));
    out += std::string(col) + '\t' + std::to_string(t.n) + '\t' + format_double(t.mean_diff) + '\t' +
           format_double(t.t_statistic) + '\t' + std::to_string(t.degrees_of_freedom) + '\t' +
           format_double(t.p_value) + '\t' + (t.significant ? "yes" : "no") + '\n';
  }
  return out;
}

}  // namespace vitor
