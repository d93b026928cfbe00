#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vitor/common.hpp"

namespace vitor {

// TREC Web Track grades: Junk(-2), Non(0), Rel(1), Hrel(2), Key(3), Nav(4).
class RelevanceGrade {
 public:
  static constexpr std::array<int, 6> kValid = {-2, 0, 1, 2, 3, 4};

  static bool is_valid(int v) { return std::find(kValid.begin(), kValid.end(), v) != kValid.end(); }

  static RelevanceGrade from_int(int v) {
    if (!is_valid(v)) throw Error("invalid grade " + std::to_string(v));
    return RelevanceGrade(v);
  }

  RelevanceGrade() = default;
  int value() const { return value_; }
  bool relevant() const { return value_ >= 1; }

  auto operator<=>(const RelevanceGrade&) const = default;

 private:
  explicit RelevanceGrade(int v) : value_(v) {}
  int value_ = 0;
};

struct LetorRecord {
  RelevanceGrade grade;
  std::string query_id;
  std::vector<double> features;  // features[i] is feature id i+1
  std::string doc_id;

  bool operator==(const LetorRecord&) const = default;
};

// `<grade> qid:<qid> 1:<v> 2:<v> ... #docid = <docid>`
inline LetorRecord parse_letor(std::string_view line, std::size_t line_no = 0, const std::string& where = {}) {
  auto fail = [&](const std::string& msg) -> ParseError { return ParseError(where, line_no, msg); };

  const std::size_t hash = line.find('#');
  if (hash == std::string_view::npos) throw fail("malformed field: missing '#docid = <id>' comment");
  const auto body = split_whitespace(line.substr(0, hash));
  std::string_view comment = trim(line.substr(hash + 1));

  if (body.size() < 2) throw fail("malformed field: expected grade and qid");
  int grade = 0;
  if (!parse_int(body[0], grade)) throw fail("malformed field: grade '" + std::string(body[0]) + "'");
  if (!RelevanceGrade::is_valid(grade)) throw fail("invalid grade " + std::to_string(grade));
  if (body[1].substr(0, 4) != "qid:" || body[1].size() == 4)
    throw fail("malformed field: expected qid:<id>, got '" + std::string(body[1]) + "'");

  LetorRecord rec;
  rec.grade = RelevanceGrade::from_int(grade);
  rec.query_id = std::string(body[1].substr(4));
  for (std::size_t i = 2; i < body.size(); ++i) {
    const auto tok = body[i];
    const auto colon = tok.find(':');
    std::size_t fid = 0;
    double value = 0.0;
    if (colon == std::string_view::npos || !parse_int(tok.substr(0, colon), fid) ||
        !parse_double(tok.substr(colon + 1), value))
      throw fail("malformed field: '" + std::string(tok) + "'");
    if (fid != rec.features.size() + 1) throw fail("non-dense feature ids");
    rec.features.push_back(value);
  }
  if (rec.features.empty()) throw fail("malformed field: no features");

  if (comment.substr(0, 5) != "docid") throw fail("malformed field: expected '#docid = <id>'");
  comment = trim(comment.substr(5));
  if (comment.empty() || comment.front() != '=') throw fail("malformed field: expected '#docid = <id>'");
  comment = trim(comment.substr(1));
  if (comment.empty() || split_whitespace(comment).size() != 1) throw fail("malformed field: doc id");
  rec.doc_id = std::string(comment);
  return rec;
}

inline std::string emit_letor(const LetorRecord& rec) {
  if (rec.features.empty()) throw Error("invalid LETOR record: no features");
  if (rec.doc_id.empty() || rec.query_id.empty()) throw Error("invalid LETOR record: empty id");
  std::string out = std::to_string(rec.grade.value());
  out += " qid:";
  out += rec.query_id;
  for (std::size_t i = 0; i < rec.features.size(); ++i) {
    out += ' ';
    out += std::to_string(i + 1);
    out += ':';
    out += format_double(rec.features[i]);
  }
  out += " #docid = ";
  out += rec.doc_id;
  return out;
}

inline std::vector<LetorRecord> read_letor(const std::filesystem::path& path) {
  std::vector<LetorRecord> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    out.push_back(parse_letor(lines[i], i + 1, path.string()));
  }
  return out;
}

inline std::string emit_letor_file(const std::vector<LetorRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += emit_letor(r);
    out += '\n';
  }
  return out;
}

// ---- qrels ----------------------------------------------------------------

using QrelKey = std::pair<std::string, std::string>;  // (query_id, doc_id)

struct Qrels {
  std::map<QrelKey, RelevanceGrade> judgments;
  std::vector<std::string> warnings;

  // Judged (doc_id, grade) for one query, in doc_id order.
  std::vector<std::pair<std::string, RelevanceGrade>> for_query(const std::string& qid) const {
    std::vector<std::pair<std::string, RelevanceGrade>> out;
    for (auto it = judgments.lower_bound({qid, std::string()}); it != judgments.end() && it->first.first == qid; ++it)
      out.emplace_back(it->first.second, it->second);
    return out;
  }

  std::vector<std::string> query_ids() const {
    std::vector<std::string> out;
    for (const auto& [key, g] : judgments)
      if (out.empty() || out.back() != key.first) out.push_back(key.first);
    return out;
  }
};

// TREC format `<topic> 0 <docid> <grade>`. Later duplicates win, with a warning.
inline Qrels parse_qrels(const std::vector<std::string>& lines, const std::string& where = {}) {
  Qrels q;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cols = split_whitespace(lines[i]);
    if (cols.empty()) continue;
    int grade = 0;
    if (cols.size() != 4 || !parse_int(cols[3], grade))
      throw ParseError(where, i + 1, "malformed qrels line, expected '<topic> 0 <docid> <grade>'");
    if (!RelevanceGrade::is_valid(grade)) throw ParseError(where, i + 1, "invalid grade " + std::to_string(grade));
    QrelKey key{std::string(cols[0]), std::string(cols[2])};
    const auto g = RelevanceGrade::from_int(grade);
    auto [it, inserted] = q.judgments.emplace(key, g);
    if (!inserted) {
      if (it->second != g) {
        q.warnings.push_back((where.empty() ? "" : where + ":") + std::to_string(i + 1) + ": duplicate judgment for (" +
                             key.first + ", " + key.second + "), grade " + std::to_string(it->second.value()) +
                             " replaced by " + std::to_string(grade));
      }
      it->second = g;
    }
  }
  return q;
}

inline Qrels read_qrels(const std::filesystem::path& path) { return parse_qrels(read_lines(path), path.string()); }

// ---- folds ----------------------------------------------------------------

inline constexpr int kNumPartitions = 5;

struct Fold {
  std::array<int, 3> train;
  int validation;
  int test;
};

struct FoldAssignment {
  std::map<std::string, int> partitions;
  std::array<Fold, kNumPartitions> folds;
  std::uint64_t seed = 0;

  std::vector<std::string> queries_in(int partition) const {
    std::vector<std::string> out;
    for (const auto& [q, p] : partitions)
      if (p == partition) out.push_back(q);
    return out;
  }

  std::vector<std::string> train_queries(int fold) const {
    std::vector<std::string> out;
    for (const auto& [q, p] : partitions)
      if (std::find(folds.at(fold).train.begin(), folds.at(fold).train.end(), p) != folds.at(fold).train.end())
        out.push_back(q);
    return out;
  }
  std::vector<std::string> validation_queries(int fold) const { return queries_in(folds.at(fold).validation); }
  std::vector<std::string> test_queries(int fold) const { return queries_in(folds.at(fold).test); }
};

// Partition p is the test set of fold p and the validation set of fold p-1;
// the remaining three partitions train.
inline std::array<Fold, kNumPartitions> rotate_folds() {
  std::array<Fold, kNumPartitions> folds{};
  for (int f = 0; f < kNumPartitions; ++f) {
    folds[f].test = f;
    folds[f].validation = (f + 1) % kNumPartitions;
    for (int k = 0; k < 3; ++k) folds[f].train[k] = (f + 2 + k) % kNumPartitions;
  }
  return folds;
}

inline FoldAssignment split_folds(std::vector<std::string> query_ids, std::uint64_t seed) {
  std::sort(query_ids.begin(), query_ids.end());
  query_ids.erase(std::unique(query_ids.begin(), query_ids.end()), query_ids.end());
  if (query_ids.size() < static_cast<std::size_t>(kNumPartitions))
    throw Error("fold split needs at least 5 queries, got " + std::to_string(query_ids.size()));
  Rng rng(seed);
  rng.shuffle(query_ids);
  FoldAssignment fa;
  fa.seed = seed;
  for (std::size_t i = 0; i < query_ids.size(); ++i)
    fa.partitions[query_ids[i]] = static_cast<int>(i % kNumPartitions);
  fa.folds = rotate_folds();
  return fa;
}

inline std::string emit_fold_manifest(const FoldAssignment& fa) {
  std::string out = "# prng = " + std::string(kPrngName) + " seed = " + std::to_string(fa.seed) + '\n';
  for (const auto& [q, p] : fa.partitions) out += q + '\t' + std::to_string(p) + '\n';
  return out;
}

inline FoldAssignment read_fold_manifest(const std::filesystem::path& path) {
  FoldAssignment fa;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto toks = split_whitespace(line);
      for (std::size_t k = 0; k + 2 < toks.size(); ++k)
        if (toks[k] == "seed" && toks[k + 1] == "=") parse_int(toks[k + 2], fa.seed);
      continue;
    }
    const auto cols = split(line, '\t');
    int p = -1;
    if (cols.size() != 2 || !parse_int(trim(cols[1]), p) || p < 0 || p >= kNumPartitions)
      throw ParseError(path.string(), i + 1, "expected query_id<TAB>partition(0..4)");
    if (!fa.partitions.emplace(std::string(trim(cols[0])), p).second)
      throw ParseError(path.string(), i + 1, "query listed twice");
  }
  fa.folds = rotate_folds();
  return fa;
}

}  // namespace vitor
