#pragma once

// Tokenization, collection statistics and the eleven non-visual ranking
// features (PageRank, length, TF, IDF, TF-IDF and BM25 over the title and
// content fields), plus the log and per-query min-max transforms.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vitor/common.hpp"

namespace vitor {

enum class Field { title = 0, content = 1 };
inline constexpr std::size_t kNumFields = 2;

// Lowercases ASCII and splits on every ASCII character that is not a letter
// or digit. Bytes >= 0x80 stay inside tokens so UTF-8 words are kept whole.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

struct TokenizedDocument {
  std::string doc_id;
  std::vector<std::string> title_tokens;
  std::vector<std::string> content_tokens;

  const std::vector<std::string>& field(Field f) const {
    return f == Field::title ? title_tokens : content_tokens;
  }
};

inline TokenizedDocument make_document(std::string doc_id, std::string_view title,
                                       std::string_view content) {
  return {std::move(doc_id), tokenize(title), tokenize(content)};
}

class CorpusStats {
 public:
  CorpusStats() = default;

  // Adds one document; a token is counted at most once per document per field.
  void add(const TokenizedDocument& doc) {
    if (doc.doc_id.empty()) throw Error("document with empty doc_id");
    if (!ids_.insert(doc.doc_id).second) throw Error("duplicate doc_id " + doc.doc_id);
    ++n_docs_;
    for (std::size_t f = 0; f < kNumFields; ++f) {
      const auto& tokens = doc.field(static_cast<Field>(f));
      total_len_[f] += tokens.size();
      std::unordered_set<std::string_view> seen;
      for (const auto& t : tokens) {
        if (seen.insert(t).second) ++df_[f][t];
      }
    }
  }

  std::size_t n_docs() const { return n_docs_; }

  std::size_t df(std::string_view token, Field f) const {
    const auto& m = df_[static_cast<std::size_t>(f)];
    auto it = m.find(std::string(token));
    return it == m.end() ? 0 : it->second;
  }

  std::size_t total_len(Field f) const { return total_len_[static_cast<std::size_t>(f)]; }

  double avgdl(Field f) const {
    if (n_docs_ == 0) throw Error("empty corpus");
    return static_cast<double>(total_len(f)) / static_cast<double>(n_docs_);
  }

  std::size_t vocabulary_size(Field f) const { return df_[static_cast<std::size_t>(f)].size(); }

  const std::unordered_map<std::string, std::size_t>& df_table(Field f) const {
    return df_[static_cast<std::size_t>(f)];
  }

 private:
  std::size_t n_docs_ = 0;
  std::array<std::unordered_map<std::string, std::size_t>, kNumFields> df_{};
  std::array<std::size_t, kNumFields> total_len_{};
  std::unordered_set<std::string> ids_;
};

inline CorpusStats build_corpus_stats(std::span<const TokenizedDocument> docs) {
  if (docs.empty()) throw Error("empty corpus");
  CorpusStats stats;
  for (const auto& d : docs) stats.add(d);
  return stats;
}

struct Bm25Params {
  double k1 = 2.5;
  double k3 = 0.0;
  double b = 0.8;

  void validate() const {
    if (!(k1 >= 0.0) || !(k3 >= 0.0) || !(b >= 0.0 && b <= 1.0))
      throw Error("invalid BM25 parameters");
  }
};

// Unique query terms in first-occurrence order, with their query frequency.
inline std::vector<std::pair<std::string, std::size_t>> query_term_counts(
    std::span<const std::string> query_terms) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& t : query_terms) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == t; });
    if (it == out.end())
      out.emplace_back(t, 1);
    else
      ++it->second;
  }
  return out;
}

inline std::size_t term_frequency(std::string_view term, std::span<const std::string> tokens) {
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(), [&](const std::string& t) { return t == term; }));
}

// Sum of in-field frequencies of the distinct query terms.
inline double sum_tf(std::span<const std::string> query_terms, std::span<const std::string> field_tokens) {
  double total = 0.0;
  for (const auto& [term, qtf] : query_term_counts(query_terms))
    total += static_cast<double>(term_frequency(term, field_tokens));
  return total;
}

// Robertson-Sparck-Jones IDF with 0.5 smoothing, floored at zero.
inline double idf_from_counts(std::size_t n_docs, std::size_t df) {
  const double n = static_cast<double>(n_docs);
  const double d = static_cast<double>(df);
  return std::max(0.0, std::log((n - d + 0.5) / (d + 0.5)));
}

inline double idf(std::string_view token, Field field, const CorpusStats& stats) {
  return idf_from_counts(stats.n_docs(), stats.df(token, field));
}

inline double bm25(std::span<const std::string> query_terms, std::span<const std::string> field_tokens,
                   Field field, const CorpusStats& stats, const Bm25Params& params = {}) {
  params.validate();
  const double avgdl = stats.avgdl(field);
  if (avgdl == 0.0) throw Error("degenerate field: average field length is 0");
  const double dl = static_cast<double>(field_tokens.size());
  const double norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
  double score = 0.0;
  for (const auto& [term, qtf_count] : query_term_counts(query_terms)) {
    const double tf = static_cast<double>(term_frequency(term, field_tokens));
    if (tf == 0.0) continue;
    const double qtf = static_cast<double>(qtf_count);
    const double tf_part = tf * (params.k1 + 1.0) / (tf + norm);
    const double qtf_part = (params.k3 + 1.0) * qtf / (params.k3 + qtf);
    score += idf(term, field, stats) * tf_part * qtf_part;
  }
  return score;
}

enum class FeatureStage { raw, logged, normalized };

inline constexpr std::size_t kNumContentFeatures = 11;

// Feature order: 1 PageRank, 2 content length, 3 content TF, 4 content IDF,
// 5 content TF-IDF, 6 content BM25, 7 title length, 8 title TF, 9 title IDF,
// 10 title TF-IDF, 11 title BM25.
inline constexpr std::array<std::string_view, kNumContentFeatures> kContentFeatureNames = {
    "pagerank",      "content_length", "content_tf", "content_idf",  "content_tfidf", "content_bm25",
    "title_length",  "title_tf",       "title_idf",  "title_tfidf", "title_bm25"};

struct ContentFeatureVector {
  std::array<double, kNumContentFeatures> values{};
  FeatureStage stage = FeatureStage::raw;

  bool operator==(const ContentFeatureVector&) const = default;
};

inline constexpr double kPageRankScale = 1e5;

inline ContentFeatureVector extract_content_features(std::span<const std::string> query_terms,
                                                     const TokenizedDocument& doc, const CorpusStats& stats,
                                                     double pagerank, const Bm25Params& params = {}) {
  if (!(pagerank >= 0.0)) throw Error("negative pagerank for " + doc.doc_id);
  const auto terms = query_term_counts(query_terms);
  ContentFeatureVector v;
  v.stage = FeatureStage::raw;
  v.values[0] = pagerank * kPageRankScale;

  auto fill = [&](Field field, std::size_t offset) {
    const auto& tokens = doc.field(field);
    double tf_sum = 0.0;
    double idf_sum = 0.0;
    double tfidf_sum = 0.0;
    for (const auto& [term, qtf] : terms) {
      const double tf = static_cast<double>(term_frequency(term, tokens));
      const double w = idf(term, field, stats);
      tf_sum += tf;
      idf_sum += w;
      tfidf_sum += tf * w;
    }
    v.values[offset] = static_cast<double>(tokens.size());
    v.values[offset + 1] = tf_sum;
    v.values[offset + 2] = idf_sum;
    v.values[offset + 3] = tfidf_sum;
    // An empty field has tf = 0 for every term, so its BM25 is 0 whatever avgdl is.
    v.values[offset + 4] = tokens.empty() ? 0.0 : bm25(query_terms, tokens, field, stats, params);
  };
  fill(Field::content, 1);
  fill(Field::title, 6);
  return v;
}

inline ContentFeatureVector log_transform(const ContentFeatureVector& v) {
  if (v.stage != FeatureStage::raw) throw Error("log_transform expects raw features");
  ContentFeatureVector out;
  out.stage = FeatureStage::logged;
  for (std::size_t i = 0; i < kNumContentFeatures; ++i) out.values[i] = std::log1p(std::max(0.0, v.values[i]));
  return out;
}

struct FeatureRow {
  std::string query_id;
  std::string doc_id;
  ContentFeatureVector features;
};

// Min-max scaling of every feature within each query; constant columns map to 0.
inline std::vector<FeatureRow> normalize_per_query(std::vector<FeatureRow> rows) {
  std::map<std::string, std::vector<std::size_t>> by_query;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].features.stage != FeatureStage::logged)
      throw Error("normalize_per_query expects logged features");
    by_query[rows[i].query_id].push_back(i);
  }
  for (const auto& [qid, idx] : by_query) {
    for (std::size_t f = 0; f < kNumContentFeatures; ++f) {
      double lo = rows[idx.front()].features.values[f];
      double hi = lo;
      for (std::size_t i : idx) {
        lo = std::min(lo, rows[i].features.values[f]);
        hi = std::max(hi, rows[i].features.values[f]);
      }
      const double range = hi - lo;
      for (std::size_t i : idx) {
        double& x = rows[i].features.values[f];
        x = range > 0.0 ? std::clamp((x - lo) / range, 0.0, 1.0) : 0.0;
      }
    }
  }
  for (auto& r : rows) r.features.stage = FeatureStage::normalized;
  return rows;
}

// ---- file readers -------------------------------------------------------

// `doc_id <TAB> title <TAB> content`, one document per line.
inline std::vector<TokenizedDocument> read_corpus(const std::filesystem::path& path) {
  std::vector<TokenizedDocument> docs;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cols = split(lines[i], '\t');
    if (cols.size() != 3) throw ParseError(path.string(), i + 1, "expected doc_id<TAB>title<TAB>content");
    if (cols[0].empty()) throw ParseError(path.string(), i + 1, "empty doc_id");
    docs.push_back(make_document(std::string(cols[0]), cols[1], cols[2]));
  }
  return docs;
}

// `doc_id <TAB> score`.
inline std::map<std::string, double> read_pagerank(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto cols = split(lines[i], '\t');
    double v = 0.0;
    if (cols.size() != 2 || !parse_double(trim(cols[1]), v) || v < 0.0)
      throw ParseError(path.string(), i + 1, "expected doc_id<TAB>non-negative score");
    out[std::string(trim(cols[0]))] = v;
  }
  return out;
}

// `query_id <TAB> query text`; returns tokenized query terms per query.
inline std::map<std::string, std::vector<std::string>> read_queries(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto cols = split(lines[i], '\t');
    if (cols.size() != 2 || trim(cols[0]).empty())
      throw ParseError(path.string(), i + 1, "expected query_id<TAB>query text");
    out[std::string(trim(cols[0]))] = tokenize(cols[1]);
  }
  return out;
}

}  // namespace vitor
