#pragma once

// Seeded synthetic fixtures: queries, a two-field corpus, graded qrels,
// PageRank scores and one snapshot per document. Content features and image
// brightness each correlate with the grade at a configurable strength.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vitor/common.hpp"
#include "vitor/image_io.hpp"
#include "vitor/letor_io.hpp"

namespace vitor {

struct SyntheticSpec {
  std::size_t n_queries = 60;
  std::size_t docs_per_query = 40;
  // Probabilities of grades -2, 0, 1, 2, 3, 4 (normalized on use).
  std::array<double, 6> grade_weights = {0.05, 0.40, 0.25, 0.15, 0.10, 0.05};
  double visual_strength = 0.8;
  double content_strength = 0.4;
  std::uint64_t seed = 0;
  std::size_t image_side = 32;
  std::size_t image_blocks = 4;  // image is a blocks x blocks mosaic
  std::size_t vocabulary = 500;

  void validate() const {
    if (n_queries == 0 || docs_per_query == 0) throw Error("synthetic counts must be positive");
    if (!(visual_strength >= 0.0 && visual_strength <= 1.0) || !(content_strength >= 0.0 && content_strength <= 1.0))
      throw Error("signal strengths must be in [0,1]");
    double total = 0.0;
    for (double w : grade_weights) {
      if (!(w >= 0.0)) throw Error("grade weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw Error("grade weights must not all be zero");
    if (image_blocks == 0 || image_side < image_blocks) throw Error("image side must be >= image blocks");
    if (vocabulary == 0) throw Error("vocabulary must be positive");
  }
};

struct SyntheticDocument {
  std::string query_id;
  std::string doc_id;
  int grade = 0;
  std::string title;
  std::string content;
  double pagerank = 0.0;
  RasterImage image;
};

struct SyntheticFixture {
  std::map<std::string, std::string> queries;  // query_id -> text
  std::vector<SyntheticDocument> docs;
};

// Position of a grade on [0,1]: junk 0, non 0.2, ..., nav 1.
inline double grade_level(int grade) {
  const auto& v = RelevanceGrade::kValid;
  const auto idx = static_cast<double>(std::find(v.begin(), v.end(), grade) - v.begin());
  return idx / static_cast<double>(v.size() - 1);
}

inline std::string synthetic_query_id(std::size_t q) { return std::to_string(q + 1); }

inline std::string synthetic_doc_id(std::size_t q, std::size_t d) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "syn-q%03zu-d%03zu", q + 1, d + 1);
  return buf;
}

inline SyntheticFixture generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  double total = 0.0;
  for (double w : spec.grade_weights) total += w;

  auto draw_grade = [&]() {
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < spec.grade_weights.size(); ++i) {
      if (u < spec.grade_weights[i]) return RelevanceGrade::kValid[i];
      u -= spec.grade_weights[i];
    }
    for (std::size_t i = spec.grade_weights.size(); i-- > 0;)
      if (spec.grade_weights[i] > 0.0) return RelevanceGrade::kValid[i];
    return 0;
  };
  auto filler = [&]() { return "w" + std::to_string(rng.index(spec.vocabulary)); };

  SyntheticFixture fx;
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    const std::string qid = synthetic_query_id(q);
    const std::array<std::string, 2> terms = {"qt" + std::to_string(q + 1) + "a", "qt" + std::to_string(q + 1) + "b"};
    fx.queries[qid] = terms[0] + ' ' + terms[1];
    for (std::size_t d = 0; d < spec.docs_per_query; ++d) {
      SyntheticDocument doc;
      doc.query_id = qid;
      doc.doc_id = synthetic_doc_id(q, d);
      doc.grade = draw_grade();
      const double level = grade_level(doc.grade);
      const double cs = spec.content_strength;

      std::vector<std::string> content;
      const std::size_t length = 40 + rng.index(81);
      for (std::size_t i = 0; i < length; ++i) content.push_back(filler());
      for (const auto& t : terms) {
        const double x = cs * level + (1.0 - cs) * rng.uniform();
        const auto tf = static_cast<std::size_t>(std::lround(6.0 * x));
        for (std::size_t i = 0; i < tf; ++i) content.push_back(t);
      }
      rng.shuffle(content);

      std::vector<std::string> title;
      if (rng.uniform() >= 0.03) {
        const std::size_t tl = 2 + rng.index(5);
        for (std::size_t i = 0; i < tl; ++i) title.push_back(filler());
        if (rng.uniform() < cs * level + (1.0 - cs) * rng.uniform()) title.push_back(terms[0]);
      }
      for (std::size_t i = 0; i < title.size(); ++i) doc.title += (i ? " " : "") + title[i];
      for (std::size_t i = 0; i < content.size(); ++i) doc.content += (i ? " " : "") + content[i];
      doc.pagerank = rng.uniform(1e-7, 1e-5);

      // Mosaic of blocks; each block's gray level mixes the grade level with
      // independent noise at the visual strength.
      const double vs = spec.visual_strength;
      const std::size_t side = spec.image_side, nb = spec.image_blocks;
      std::vector<double> block(nb * nb);
      for (auto& b : block) b = vs * level + (1.0 - vs) * rng.uniform();
      doc.image.width = doc.image.height = side;
      doc.image.channels = 3;
      doc.image.data.resize(side * side * 3);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double v = block[(y * nb / side) * nb + (x * nb / side)];
          const auto px = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
          for (std::size_t c = 0; c < 3; ++c) doc.image.data[(y * side + x) * 3 + c] = px;
        }
      fx.docs.push_back(std::move(doc));
    }
  }
  return fx;
}

struct SyntheticPaths {
  std::filesystem::path corpus, queries, qrels, pagerank, images;
};

inline SyntheticPaths synthetic_paths(const std::filesystem::path& dir) {
  return {dir / "corpus.tsv", dir / "queries.tsv", dir / "qrels.txt", dir / "pagerank.tsv", dir / "images"};
}

inline SyntheticPaths write_synthetic(const SyntheticFixture& fx, const std::filesystem::path& dir) {
  const auto paths = synthetic_paths(dir);
  std::filesystem::create_directories(paths.images);
  std::string corpus, queries, qrels, pagerank;
  for (const auto& [qid, text] : fx.queries) queries += qid + '\t' + text + '\n';
  for (const auto& d : fx.docs) {
    corpus += d.doc_id + '\t' + d.title + '\t' + d.content + '\n';
    qrels += d.query_id + " 0 " + d.doc_id + ' ' + std::to_string(d.grade) + '\n';
    pagerank += d.doc_id + '\t' + format_double(d.pagerank) + '\n';
    write_png(paths.images / (d.doc_id + ".png"), d.image);
  }
  write_file_atomic(paths.corpus, corpus);
  write_file_atomic(paths.queries, queries);
  write_file_atomic(paths.qrels, qrels);
  write_file_atomic(paths.pagerank, pagerank);
  return paths;
}

}  // namespace vitor
