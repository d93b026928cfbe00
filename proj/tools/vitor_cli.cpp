// vitor: command-line driver for the ranking pipeline.
//
//   vitor synth    --out DIR
//   vitor features --corpus C --queries Q --qrels R [--pagerank P] --out DIR
//   vitor folds    --input normalized.letor --out folds.tsv
//   vitor extract  --images DIR | --manifest M  --qrels R --out cache.vvf
//   vitor train    --letor L --folds F --fold K [--vectors V] --out model.vtm
//   vitor score    --model M --letor L --folds F --fold K [--vectors V] --out run.tsv
//   vitor eval     --run RUN --qrels R --out report.tsv
//   vitor compare  --run-a A --run-b B --qrels R --out ttests.tsv
//
// Every subcommand accepts --config FILE with `key = value` lines naming its
// long options; flags on the command line win. VITOR_SEED sets the default
// seed.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vitor/pipeline.hpp"
#include "vitor/synth.hpp"

namespace fs = std::filesystem;
using namespace vitor;

namespace {

// Config files hold bare `key = value` lines; they are read by the top-level
// app, so unqualified keys are attributed to the subcommand being run.
class SubcommandConfig : public CLI::ConfigBase {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigBase::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    for (auto& item : items)
      if (item.parents.empty() && item.name != "++" && item.name != "--") item.parents = {subs.front()->get_name()};
    return items;
  }

 private:
  const CLI::App* app_;
};

CLI::Option* add_seed(CLI::App* cmd, std::uint64_t& seed) {
  return cmd->add_option("--seed", seed, "random seed")->envname("VITOR_SEED")->capture_default_str();
}

template <typename T>
std::optional<T> opt_if(const CLI::Option* o, const T& v) {
  return o->count() ? std::optional<T>(v) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-and-content learning-to-rank toolkit"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.set_config("--config", "", "key = value file of long option names; flags on the command line win");
  app.fallthrough();

  // synth
  SyntheticSpec synth;
  fs::path synth_out;
  auto* c_synth = app.add_subcommand("synth", "generate a seeded synthetic fixture");
  c_synth->add_option("--out", synth_out, "output directory")->required();
  c_synth->add_option("--queries", synth.n_queries)->capture_default_str();
  c_synth->add_option("--docs", synth.docs_per_query, "documents per query")->capture_default_str();
  c_synth->add_option("--content-strength", synth.content_strength)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--visual-strength", synth.visual_strength)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--image-side", synth.image_side)->capture_default_str();
  add_seed(c_synth, synth.seed);

  // features
  pipeline::FeaturesOptions feat;
  fs::path feat_pagerank;
  auto* c_feat = app.add_subcommand("features", "compute raw, logged and normalized LETOR files");
  c_feat->add_option("--corpus", feat.corpus, "doc_id<TAB>title<TAB>content")->required()->check(CLI::ExistingFile);
  c_feat->add_option("--queries", feat.queries, "query_id<TAB>text")->required()->check(CLI::ExistingFile);
  c_feat->add_option("--qrels", feat.qrels)->required()->check(CLI::ExistingFile);
  auto* o_pr = c_feat->add_option("--pagerank", feat_pagerank, "doc_id<TAB>score")->check(CLI::ExistingFile);
  c_feat->add_option("--out", feat.out_dir, "output directory")->required();
  c_feat->add_option("--k1", feat.bm25.k1)->capture_default_str();
  c_feat->add_option("--k3", feat.bm25.k3)->capture_default_str();
  c_feat->add_option("--b", feat.bm25.b)->capture_default_str();

  // folds
  fs::path folds_in, folds_out;
  std::uint64_t folds_seed = 0;
  auto* c_folds = app.add_subcommand("folds", "split queries into five partitions");
  c_folds->add_option("--input", folds_in, "LETOR (.letor) or qrels file")->required()->check(CLI::ExistingFile);
  c_folds->add_option("--out", folds_out, "fold manifest")->required();
  add_seed(c_folds, folds_seed);

  // extract
  pipeline::ExtractOptions ext;
  fs::path ext_images, ext_manifest;
  auto* c_ext = app.add_subcommand("extract", "extract and cache visual vectors");
  auto* o_images = c_ext->add_option("--images", ext_images, "directory of <doc_id>.<ext> rasters")->check(CLI::ExistingDirectory);
  auto* o_manifest = c_ext->add_option("--manifest", ext_manifest, "doc_id<TAB>path")->check(CLI::ExistingFile);
  o_images->excludes(o_manifest);
  c_ext->add_option("--qrels", ext.qrels)->required()->check(CLI::ExistingFile);
  c_ext->add_option("--grid", ext.grid, "grid side; vector dim = grid^2")->capture_default_str()->check(CLI::Range(1, 224));
  c_ext->add_option("--out", ext.out, "VVF1 cache")->required();

  // train
  pipeline::TrainOptions tr;
  fs::path tr_vectors, tr_log;
  std::string tr_head = "none";
  std::optional<double> tr_lr;
  auto* c_train = app.add_subcommand("train", "train a model on one fold");
  c_train->add_option("--letor", tr.letor, "normalized LETOR file")->required()->check(CLI::ExistingFile);
  c_train->add_option("--folds", tr.folds)->required()->check(CLI::ExistingFile);
  c_train->add_option("--fold", tr.fold)->required()->check(CLI::Range(0, 4));
  auto* o_tr_vec = c_train->add_option("--vectors", tr_vectors, "VVF1 cache")->check(CLI::ExistingFile);
  c_train->add_option("--head", tr_head, "none | vgg_style | resnet_style")->capture_default_str();
  c_train->add_option("--visual-out", tr.arch.visual_out_dim)->capture_default_str();
  c_train->add_option("--head-hidden", tr.arch.head_hidden)->capture_default_str();
  c_train->add_option("--scoring-hidden", tr.arch.scoring_hidden)->capture_default_str();
  c_train->add_option("--dropout-scoring", tr.arch.dropout_scoring)->capture_default_str();
  c_train->add_option("--dropout-head", tr.arch.dropout_head)->capture_default_str();
  c_train->add_option("--lr", tr_lr, "learning rate (default depends on head)");
  c_train->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
  c_train->add_option("--max-epochs", tr.config.max_epochs)->capture_default_str();
  c_train->add_option("--patience", tr.config.patience)->capture_default_str();
  c_train->add_option("--margin", tr.config.margin)->capture_default_str();
  c_train->add_option("--l2", tr.config.l2_lambda)->capture_default_str();
  c_train->add_flag("--exclude-junk", tr.config.exclude_junk, "drop grade -2 from pairs");
  add_seed(c_train, tr.config.seed);
  c_train->add_option("--out", tr.out_model, "VTM1 checkpoint")->required();
  auto* o_tr_log = c_train->add_option("--log", tr_log, "training log");

  // score
  pipeline::ScoreOptions sc;
  fs::path sc_vectors;
  auto* c_score = app.add_subcommand("score", "rank a fold's test queries");
  c_score->add_option("--model", sc.model)->required()->check(CLI::ExistingFile);
  c_score->add_option("--letor", sc.letor)->required()->check(CLI::ExistingFile);
  c_score->add_option("--folds", sc.folds)->required()->check(CLI::ExistingFile);
  c_score->add_option("--fold", sc.fold)->required()->check(CLI::Range(0, 4));
  auto* o_sc_vec = c_score->add_option("--vectors", sc_vectors)->check(CLI::ExistingFile);
  c_score->add_option("--out", sc.out_run, "run file")->required();

  // eval
  fs::path ev_run, ev_qrels, ev_out, ev_per_query;
  std::string ev_name = "system";
  auto* c_eval = app.add_subcommand("eval", "P@k, NDCG@k and MAP for a run");
  c_eval->add_option("--run", ev_run)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--qrels", ev_qrels)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--name", ev_name)->capture_default_str();
  c_eval->add_option("--out", ev_out, "report TSV")->required();
  auto* o_ev_pq = c_eval->add_option("--per-query", ev_per_query, "per-query metrics TSV");

  // compare
  fs::path cmp_a, cmp_b, cmp_qrels, cmp_out, cmp_report;
  std::string cmp_name_a = "a", cmp_name_b = "b";
  auto* c_cmp = app.add_subcommand("compare", "paired t-tests between two runs");
  c_cmp->add_option("--run-a", cmp_a)->required()->check(CLI::ExistingFile);
  c_cmp->add_option("--run-b", cmp_b)->required()->check(CLI::ExistingFile);
  c_cmp->add_option("--qrels", cmp_qrels)->required()->check(CLI::ExistingFile);
  c_cmp->add_option("--name-a", cmp_name_a)->capture_default_str();
  c_cmp->add_option("--name-b", cmp_name_b)->capture_default_str();
  c_cmp->add_option("--out", cmp_out, "t-test TSV")->required();
  auto* o_cmp_report = c_cmp->add_option("--report", cmp_report, "two-row report TSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_synth) {
      const auto paths = write_synthetic(generate_synthetic(synth), synth_out);
      std::cout << "wrote " << paths.corpus.parent_path().string() << '\n';
    } else if (*c_feat) {
      feat.pagerank = opt_if(o_pr, feat_pagerank);
      const auto res = pipeline::build_features(feat);
      for (const auto& w : res.warnings) warn(w);
      std::cout << res.normalized.size() << " rows -> " << feat.out_dir.string() << '\n';
    } else if (*c_folds) {
      const auto fa = pipeline::build_folds(folds_in, folds_seed, folds_out);
      std::cout << fa.partitions.size() << " queries in 5 partitions\n";
    } else if (*c_ext) {
      if (o_images->count()) ext.images_dir = ext_images;
      if (o_manifest->count()) ext.manifest = ext_manifest;
      const auto res = pipeline::extract_vectors(ext);
      std::cout << res.vectors.size() << " vectors, " << res.missing.size() << " missing (see "
                << res.sidecar.string() << ")\n";
    } else if (*c_train) {
      tr.arch.head_kind = parse_head_kind(tr_head);
      tr.config.learning_rate = tr_lr.value_or(default_learning_rate(tr.arch.head_kind));
      tr.init_seed = tr.config.seed;
      tr.vectors = opt_if(o_tr_vec, tr_vectors);
      tr.out_log = opt_if(o_tr_log, tr_log);
      const auto res = pipeline::train_fold(tr);
      std::cout << "best epoch " << res.best_epoch << ", val ndcg@10 " << res.best_val_ndcg10 << '\n';
    } else if (*c_score) {
      sc.vectors = opt_if(o_sc_vec, sc_vectors);
      const auto run = pipeline::score_fold(sc);
      std::cout << run.size() << " queries scored\n";
    } else if (*c_eval) {
      const auto res = pipeline::evaluate(ev_run, ev_qrels, ev_name, ev_out, opt_if(o_ev_pq, ev_per_query));
      std::cout << emit_report({{ev_name, res.aggregate, {}}});
    } else if (*c_cmp) {
      const auto c = pipeline::compare(cmp_a, cmp_b, cmp_qrels, cmp_name_a, cmp_name_b, cmp_out,
                                       opt_if(o_cmp_report, cmp_report));
      std::cout << emit_ttests(c.tests);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
