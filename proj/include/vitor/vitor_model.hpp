#pragma once

// The ranking model: an optional trainable visual transformation head maps
// the frozen extractor output to a short visual vector, which is
// concatenated with the content features and scored by a small MLP.
//
//   visual (input_dim) -> head -> visual_out_dim --+
//                                                   +-> concat -> scoring -> score
//   content (content_dim) --------------------------+

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vitor/common.hpp"
#include "vitor/corpus_features.hpp"
#include "vitor/neuralnet.hpp"

namespace vitor {

enum class HeadKind { none, vgg_style, resnet_style };

inline std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::none:
      return "none";
    case HeadKind::vgg_style:
      return "vgg_style";
    case HeadKind::resnet_style:
      return "resnet_style";
  }
  return "none";
}

inline HeadKind parse_head_kind(std::string_view s) {
  if (s == "none") return HeadKind::none;
  if (s == "vgg_style" || s == "vgg") return HeadKind::vgg_style;
  if (s == "resnet_style" || s == "resnet") return HeadKind::resnet_style;
  throw Error("unknown head kind '" + std::string(s) + "'");
}

struct ArchitectureSpec {
  HeadKind head_kind = HeadKind::none;
  std::size_t input_dim = 0;  // frozen extractor output size
  std::size_t visual_out_dim = 30;
  std::size_t content_dim = kNumContentFeatures;
  std::size_t scoring_hidden = 10;
  double dropout_scoring = 0.1;
  double dropout_head = 0.5;    // vgg_style only
  std::size_t head_hidden = 4096;

  bool has_head() const { return head_kind != HeadKind::none; }

  std::size_t head_hidden_layers() const {
    return head_kind == HeadKind::vgg_style ? 2 : head_kind == HeadKind::resnet_style ? 3 : 0;
  }

  std::size_t concat_width() const { return has_head() ? visual_out_dim + content_dim : content_dim; }

  void validate() const {
    if (content_dim == 0 || scoring_hidden == 0) throw Error("invalid spec dims: content and scoring widths must be positive");
    if (has_head() && (input_dim == 0 || visual_out_dim == 0 || head_hidden == 0))
      throw Error("invalid spec dims: head widths must be positive");
    if (!(dropout_scoring >= 0.0 && dropout_scoring < 1.0) || !(dropout_head >= 0.0 && dropout_head < 1.0))
      throw Error("dropout rates must be in [0,1)");
  }

  std::vector<nn::ParamRow> head_rows() const {
    std::vector<nn::ParamRow> rows;
    if (!has_head()) return rows;
    std::size_t in = input_dim;
    for (std::size_t k = 0; k < head_hidden_layers(); ++k) {
      rows.push_back({nn::LayerKind::dense, 1, in, head_hidden, true});
      in = head_hidden;
    }
    rows.push_back({nn::LayerKind::dense, 1, in, visual_out_dim, true});
    return rows;
  }

  std::vector<nn::ParamRow> scoring_rows() const {
    return {{nn::LayerKind::dense, 1, concat_width(), scoring_hidden, true},
            {nn::LayerKind::dense, 1, scoring_hidden, 1, true}};
  }

  std::size_t trainable_parameters() const {
    return nn::count_parameters(head_rows()) + nn::count_parameters(scoring_rows());
  }

  // Flat `key = value` block.
  std::string to_text() const {
    std::string out;
    out += "head_kind = " + to_string(head_kind) + '\n';
    out += "input_dim = " + std::to_string(input_dim) + '\n';
    out += "visual_out_dim = " + std::to_string(visual_out_dim) + '\n';
    out += "content_dim = " + std::to_string(content_dim) + '\n';
    out += "scoring_hidden = " + std::to_string(scoring_hidden) + '\n';
    out += "dropout_scoring = " + format_double(dropout_scoring) + '\n';
    out += "dropout_head = " + format_double(dropout_head) + '\n';
    out += "head_hidden = " + std::to_string(head_hidden) + '\n';
    return out;
  }

  static ArchitectureSpec from_text(std::string_view text) {
    ArchitectureSpec s;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
      ++line_no;
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("architecture spec", line_no, "expected key = value");
      const auto key = trim(line.substr(0, eq));
      const auto val = trim(line.substr(eq + 1));
      bool ok = true;
      if (key == "head_kind")
        s.head_kind = parse_head_kind(val);
      else if (key == "input_dim")
        ok = parse_int(val, s.input_dim);
      else if (key == "visual_out_dim")
        ok = parse_int(val, s.visual_out_dim);
      else if (key == "content_dim")
        ok = parse_int(val, s.content_dim);
      else if (key == "scoring_hidden")
        ok = parse_int(val, s.scoring_hidden);
      else if (key == "dropout_scoring")
        ok = parse_double(val, s.dropout_scoring);
      else if (key == "dropout_head")
        ok = parse_double(val, s.dropout_head);
      else if (key == "head_hidden")
        ok = parse_int(val, s.head_hidden);
      else
        throw ParseError("architecture spec", line_no, "unknown key '" + std::string(key) + "'");
      if (!ok) throw ParseError("architecture spec", line_no, "bad value for '" + std::string(key) + "'");
    }
    s.validate();
    return s;
  }

  bool operator==(const ArchitectureSpec&) const = default;
};

struct ScoredDocument {
  std::string query_id;
  std::string doc_id;
  double score = 0.0;
};

class Model {
 public:
  // Forward record for one document, consumed by backward().
  struct Trace {
    nn::Tape head;
    nn::Tape scoring;
  };

  Model() = default;

  // Head: ReLU after every hidden layer, linear output of visual_out_dim;
  // vgg_style inserts dropout after each of its two hidden layers. Scoring:
  // dense(concat -> hidden) + ReLU + dropout, then dense(hidden -> 1).
  static Model build(const ArchitectureSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model m;
    m.spec_ = spec;
    Rng rng(seed);
    if (spec.has_head()) {
      const double p = spec.head_kind == HeadKind::vgg_style ? spec.dropout_head : 0.0;
      std::size_t in = spec.input_dim;
      for (std::size_t k = 0; k < spec.head_hidden_layers(); ++k) {
        m.head_.add(nn::DenseLayer(in, spec.head_hidden), nn::Activation::relu, p);
        in = spec.head_hidden;
      }
      m.head_.add(nn::DenseLayer(in, spec.visual_out_dim), nn::Activation::identity);
      m.head_.glorot_init(rng);
    }
    m.scoring_.add(nn::DenseLayer(spec.concat_width(), spec.scoring_hidden), nn::Activation::relu,
                   spec.dropout_scoring);
    m.scoring_.add(nn::DenseLayer(spec.scoring_hidden, 1), nn::Activation::identity);
    m.scoring_.glorot_init(rng);
    return m;
  }

  const ArchitectureSpec& spec() const { return spec_; }
  const nn::Network& head() const { return head_; }
  const nn::Network& scoring() const { return scoring_; }
  nn::Network& head() { return head_; }
  nn::Network& scoring() { return scoring_; }

  std::size_t parameter_count() const { return head_.parameter_count() + scoring_.parameter_count(); }

  double forward(std::span<const double> visual, std::span<const double> content, nn::Mode mode, Rng* rng = nullptr,
                 Trace* trace = nullptr) const {
    if (content.size() != spec_.content_dim)
      throw Error("dimension mismatch: expected " + std::to_string(spec_.content_dim) + " content features, got " +
                  std::to_string(content.size()));
    std::vector<double> concat;
    concat.reserve(spec_.concat_width());
    if (spec_.has_head()) {
      if (visual.empty()) throw Error("missing visual vector: model has a visual head");
      if (visual.size() != spec_.input_dim)
        throw Error("dimension mismatch: expected visual vector of " + std::to_string(spec_.input_dim) + ", got " +
                    std::to_string(visual.size()));
      concat = head_.forward(visual, mode, rng, trace ? &trace->head : nullptr);
    }
    concat.insert(concat.end(), content.begin(), content.end());
    return scoring_.forward(concat, mode, rng, trace ? &trace->scoring : nullptr).front();
  }

  double score(const std::vector<float>* visual, const ContentFeatureVector& content, nn::Mode mode = nn::Mode::eval,
               Rng* rng = nullptr) const {
    if (content.stage != FeatureStage::normalized) throw Error("score expects normalized content features");
    std::vector<double> v;
    if (visual) v.assign(visual->begin(), visual->end());
    return forward(v, content.values, mode, rng);
  }

  void backward(const Trace& trace, double grad_score, nn::Gradients& head_grads, nn::Gradients& scoring_grads) const {
    const double g = grad_score;
    std::vector<double> g_concat;
    scoring_.backward(trace.scoring, std::span<const double>(&g, 1), scoring_grads,
                      spec_.has_head() ? &g_concat : nullptr);
    if (spec_.has_head()) {
      head_.backward(trace.head, std::span<const double>(g_concat.data(), spec_.visual_out_dim), head_grads);
    }
  }

  std::vector<std::span<double>> parameter_views() {
    std::vector<std::span<double>> out;
    nn::append_parameter_views(head_, out);
    nn::append_parameter_views(scoring_, out);
    return out;
  }

  double l2_penalty() const { return nn::l2_penalty(head_) + nn::l2_penalty(scoring_); }

  bool operator==(const Model&) const = default;

 private:
  ArchitectureSpec spec_;
  nn::Network head_;
  nn::Network scoring_;
};

// ---- VTM1 checkpoint ---------------------------------------------------------
//
// "VTM1" | u32 spec_len | spec text (key = value) | u32 n_arrays |
// n_arrays x (u64 len | len x f64), arrays in declaration order.

inline constexpr std::string_view kCheckpointMagic = "VTM1";

inline std::string encode_checkpoint(const Model& model) {
  std::string out(kCheckpointMagic);
  const std::string spec = model.spec().to_text();
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.size()));
  out += spec;
  std::vector<const std::vector<double>*> arrays;
  for (const auto* net : {&model.head(), &model.scoring()})
    for (const auto& l : net->layers()) {
      arrays.push_back(&l.dense.weights);
      arrays.push_back(&l.dense.biases);
    }
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto* a : arrays) {
    le::put<std::uint64_t>(out, a->size());
    for (double x : *a) le::put<double>(out, x);
  }
  return out;
}

inline Model decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kCheckpointMagic) throw Error("not a model checkpoint (bad magic)");
  le::Reader r(bytes.substr(4));
  std::uint32_t spec_len = 0;
  std::string_view spec_text;
  if (!r.get(spec_len) || !r.get_bytes(spec_len, spec_text)) throw Error("truncated checkpoint: spec block");
  Model m = Model::build(ArchitectureSpec::from_text(spec_text), 0);
  auto views = m.parameter_views();
  std::uint32_t n = 0;
  if (!r.get(n) || n != views.size()) throw Error("checkpoint parameter layout does not match its spec");
  for (auto& v : views) {
    std::uint64_t len = 0;
    if (!r.get(len) || len != v.size()) throw Error("checkpoint parameter layout does not match its spec");
    for (auto& x : v)
      if (!r.get(x)) throw Error("truncated checkpoint: parameters");
  }
  if (!r.done()) throw Error("trailing bytes in checkpoint");
  return m;
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(model));
}

inline Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace vitor
