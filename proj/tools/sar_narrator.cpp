#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sarnarrator/config.hpp"
#include "sarnarrator/corpus.hpp"
#include "sarnarrator/demo.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/eval.hpp"
#include "sarnarrator/pipeline.hpp"
#include "sarnarrator/util.hpp"
#include "sarnarrator/version.hpp"

namespace {

using namespace sarnarrator;

// Exit codes: 0 ok, 2 config, 3 ingest, 4 caption, 5 rewrite, 6 dedup,
// 7 assemble, 8 stats, 9 split, 10 eval, 1 anything else.
int stage_exit_code(const std::string& stage) {
  static const std::unordered_map<std::string, int> codes = {
      {"config", 2},  {"ingest", 3}, {"caption", 4}, {"rewrite", 5},
      {"dedup", 6},   {"assemble", 7}, {"stats", 8},  {"split", 9},
      {"eval", 10},
  };
  const auto it = codes.find(stage);
  return it == codes.end() ? 1 : it->second;
}

int report_error(const std::string& stage, const std::exception& e) {
  std::cerr << "error (" << stage << "): " << e.what() << "\n";
  return stage_exit_code(stage);
}

struct CommonOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
};

void add_common_options(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "pipeline config JSON")
      ->required();
  cmd->add_option("--seed", options.seed, "override the configured seed");
  cmd->add_option("--mode", options.mode, "rewrite mode: live or replay")
      ->check(CLI::IsMember({"live", "replay"}));
  cmd->add_option("--out", options.out, "override the output directory");
}

PipelineConfig load_effective_config(const CommonOptions& options) {
  PipelineConfig config = load_pipeline_config(options.config_path);
  apply_overrides(config, options.mode, options.seed, options.out);
  check_live_credentials(config);
  return config;
}

int run_stage(const std::string& stage, const PipelineConfig& config) {
  const pipeline::ArtifactPaths paths(config.output_dir);
  if (stage == "ingest") {
    const auto kept = pipeline::run_ingest(config);
    std::cout << "ingest: kept " << kept.size() << " samples -> "
              << paths.samples << "\n";
  } else if (stage == "caption") {
    const auto records = pipeline::run_caption(config);
    std::cout << "caption: wrote " << records.size() << " records -> "
              << paths.captions_raw << "\n";
  } else if (stage == "rewrite") {
    const auto records = pipeline::run_rewrite(config);
    size_t fallbacks = 0;
    for (const auto& record : records) fallbacks += record.fallback_used ? 1 : 0;
    std::cout << "rewrite: wrote " << records.size() << " records ("
              << fallbacks << " fallbacks) -> " << paths.captions << "\n";
  } else if (stage == "dedup") {
    const auto kept = pipeline::run_dedup(config);
    std::cout << "dedup: kept " << kept.size() << " records -> "
              << paths.captions_dedup << " (ledger: " << paths.dedup_ledger
              << ")\n";
  } else if (stage == "assemble") {
    const auto manifest = pipeline::run_assemble(config);
    std::cout << "assemble: " << manifest.header.total << " records -> "
              << paths.manifest_records << "\n";
  } else if (stage == "stats") {
    pipeline::run_stats(config);
    std::cout << "stats: wrote " << paths.stats << "\n";
  } else if (stage == "split") {
    const auto result = pipeline::run_split(config);
    std::cout << "split: train " << result.train.header.total << ", test "
              << result.test.header.total << " -> " << paths.train_records
              << "\n";
  }
  return 0;
}

int run_pipeline_command(const std::string& stage,
                         const CommonOptions& options) {
  PipelineConfig config;
  try {
    config = load_effective_config(options);
  } catch (const Error& e) {
    return report_error("config", e);
  }
  try {
    return run_stage(stage, config);
  } catch (const Error& e) {
    return report_error(stage, e);
  } catch (const std::exception& e) {
    return report_error(stage, e);
  }
}

int run_all_command(const CommonOptions& options) {
  PipelineConfig config;
  try {
    config = load_effective_config(options);
  } catch (const Error& e) {
    return report_error("config", e);
  }
  for (const char* stage : {"ingest", "caption", "rewrite", "dedup",
                            "assemble", "stats", "split"}) {
    try {
      run_stage(stage, config);
    } catch (const Error& e) {
      return report_error(stage, e);
    } catch (const std::exception& e) {
      return report_error(stage, e);
    }
  }
  return 0;
}

std::vector<CaptionEvalItem> join_pred_refs(const std::string& pred_path,
                                            const std::string& refs_path) {
  std::unordered_map<std::string, std::vector<std::string>> references;
  for (const std::string& line : read_lines(refs_path)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    references[j.at("id").get<std::string>()] =
        j.at("references").get<std::vector<std::string>>();
  }
  std::vector<CaptionEvalItem> items;
  for (const std::string& line : read_lines(pred_path)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CaptionEvalItem item;
    item.id = j.at("id").get<std::string>();
    item.candidate = j.at("candidate").get<std::string>();
    const auto it = references.find(item.id);
    if (it == references.end())
      raise(errc::alignment_mismatch, "no references for id '" + item.id + "'");
    item.references = it->second;
    items.push_back(std::move(item));
  }
  return items;
}

int eval_captions_command(const std::string& pred_path,
                          const std::string& refs_path, bool smooth,
                          const std::string& out_path) {
  try {
    const std::vector<CaptionEvalItem> items =
        refs_path.empty() ? read_caption_eval_items(pred_path)
                          : join_pred_refs(pred_path, refs_path);
    const CaptionEvalReport report = evaluate_captions(items, smooth);
    const std::string json = caption_report_json(report);
    std::cout << json << "\n";
    if (!out_path.empty()) write_file(out_path, json + "\n");
    return 0;
  } catch (const Error& e) {
    return report_error("eval", e);
  } catch (const std::exception& e) {
    return report_error("eval", e);
  }
}

int eval_retrieval_command(const std::string& matrix_path,
                           const std::string& image_embeddings,
                           const std::string& text_embeddings,
                           const std::string& out_path) {
  try {
    SimilarityMatrix matrix;
    if (!matrix_path.empty()) {
      matrix = read_similarity_matrix(matrix_path);
    } else {
      matrix = similarity_from_embeddings(image_embeddings, text_embeddings);
    }
    const RetrievalReport report = evaluate_retrieval(matrix);
    const std::string json = retrieval_report_json(report);
    std::cout << json << "\n";
    if (!out_path.empty()) write_file(out_path, json + "\n");
    return 0;
  } catch (const Error& e) {
    return report_error("eval", e);
  } catch (const std::exception& e) {
    return report_error("eval", e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAR-Narrator: annotation-to-caption corpus builder"};
  app.set_version_flag("--version", std::string(kPipelineVersion));
  app.require_subcommand(1);

  CommonOptions options;
  const std::vector<std::string> stages = {"ingest",   "caption", "rewrite",
                                           "dedup",    "assemble", "stats",
                                           "split"};
  for (const std::string& stage : stages) {
    CLI::App* cmd =
        app.add_subcommand(stage, "run the " + stage + " stage");
    add_common_options(cmd, options);
    cmd->callback([]() {});
  }
  CLI::App* run_all = app.add_subcommand("run-all", "run every stage in order");
  add_common_options(run_all, options);

  std::string pred_path, refs_path, eval_out;
  bool smooth = false;
  CLI::App* eval_captions = app.add_subcommand(
      "eval-captions", "BLEU-1..4, METEOR, ROUGE-L and CIDEr over a JSONL file");
  eval_captions
      ->add_option("--pred", pred_path,
                   "JSONL {id, candidate[, references]} predictions")
      ->required();
  eval_captions->add_option(
      "--refs", refs_path, "JSONL {id, references} when not embedded in --pred");
  eval_captions->add_flag("--smooth", smooth, "BLEU add-0.1 smoothing");
  eval_captions->add_option("--out", eval_out, "also write the report here");

  std::string matrix_path, image_embeddings, text_embeddings, retrieval_out;
  CLI::App* eval_retrieval = app.add_subcommand(
      "eval-retrieval", "Recall@{1,5,10} and mean recall for i2t and t2i");
  auto* matrix_opt = eval_retrieval->add_option(
      "--matrix", matrix_path, "similarity matrix (\"rows cols\" header)");
  auto* image_opt = eval_retrieval->add_option(
      "--image-embeddings", image_embeddings, "image embedding file");
  auto* text_opt = eval_retrieval->add_option(
      "--text-embeddings", text_embeddings, "text embedding file");
  image_opt->needs(text_opt)->excludes(matrix_opt);
  text_opt->needs(image_opt)->excludes(matrix_opt);
  eval_retrieval->add_option("--out", retrieval_out,
                             "also write the report here");

  std::string demo_dir = "demo";
  CLI::App* make_demo = app.add_subcommand(
      "make-demo", "write a runnable miniature dataset with replay cassette");
  make_demo->add_option("--dir", demo_dir, "target directory");

  CLI11_PARSE(app, argc, argv);

  for (const std::string& stage : stages)
    if (app.got_subcommand(stage)) return run_pipeline_command(stage, options);
  if (app.got_subcommand("run-all")) return run_all_command(options);
  if (app.got_subcommand("eval-captions"))
    return eval_captions_command(pred_path, refs_path, smooth, eval_out);
  if (app.got_subcommand("eval-retrieval")) {
    if (matrix_path.empty() && (image_embeddings.empty() || text_embeddings.empty())) {
      std::cerr << "error (eval): provide --matrix or both embedding files\n";
      return stage_exit_code("eval");
    }
    return eval_retrieval_command(matrix_path, image_embeddings,
                                  text_embeddings, retrieval_out);
  }
  if (app.got_subcommand("make-demo")) {
    try {
      const auto dataset = demo::write_demo_dataset(demo_dir);
      std::cout << "make-demo: wrote " << dataset.root << " (config: "
                << dataset.config_path << ")\n";
      return 0;
    } catch (const std::exception& e) {
      return report_error("config", e);
    }
  }
  return 1;
}
