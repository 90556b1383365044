// Copyright 2026 The tagrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver for the tag-graph recommender pipeline.
//
// Subcommands: ingest, graph, communities, recommend, evaluate, pipeline,
// compare.  Options can also come from a key=value config file via
// --config; command-line flags override file values.
//
// Exit codes: 0 success, 1 usage error, 2 ingest error, 3 comparison or
// contract error, 4 pipeline stage error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tagrec/evaluation.hpp"
#include "tagrec/pipeline.hpp"

namespace {

// Exit codes promised by the interface contract.
constexpr int kExitIngest = 2;
constexpr int kExitContract = 3;
constexpr int kExitStage = 4;

struct CliOptions {
  tagrec::PipelineConfig cfg;
  std::string data_dir;
  std::string work_dir = "tagrec-work";
  bool no_stratify = false;
  std::vector<std::string> compare_reports;
};

void finalize(CliOptions& opt) {
  opt.cfg.data_dir = opt.data_dir;
  opt.cfg.work_dir = opt.work_dir;
  if (opt.no_stratify) opt.cfg.split.per_user_stratified = false;
}

void print_ingest_summary(const tagrec::IngestOutcome& ing,
                          std::ostream& os) {
  if (!ing.cache_hit) {
    const auto rows_of = [&](const std::string& name) -> std::size_t {
      const auto it = ing.parse.files.find(name);
      return it == ing.parse.files.end() ? 0 : it->second.rows;
    };
    os << "parsed: " << rows_of(ing.parse.assignment_file)
       << " assignment rows (" << ing.parse.duplicate_assignments
       << " duplicates), " << rows_of(ing.parse.tag_file) << " tag rows\n";
    os << "cleaned: " << ing.clean_stats.tags_dropped << " tags dropped, "
       << ing.clean_stats.tags_merged << " tags merged, "
       << ing.clean_stats.assignments_dropped << " assignments dropped\n";
  }
  os << "train: " << ing.train.users.size() << " users, "
     << ing.train.tags.size() << " tags, " << ing.train.resources.size()
     << " resources, " << ing.train.assignments.size() << " assignments\n";
  os << "test:  " << ing.test.users.size() << " users, "
     << ing.test.tags.size() << " tags, " << ing.test.resources.size()
     << " resources, " << ing.test.assignments.size() << " assignments\n";
  os << "hashes: source=" << tagrec::to_hex16(ing.source_hash)
     << " config=" << tagrec::to_hex16(ing.config_hash)
     << " train=" << tagrec::to_hex16(ing.train_hash)
     << " test=" << tagrec::to_hex16(ing.test_hash) << "\n";
}

int dispatch(const std::string& command, CliOptions& opt) {
  finalize(opt);
  tagrec::PipelineConfig& cfg = opt.cfg;
  std::ostream& log = std::cout;

  if (command == "compare") {
    std::vector<std::filesystem::path> paths(opt.compare_reports.begin(),
                                             opt.compare_reports.end());
    const std::string text =
        tagrec::run_compare(paths, cfg.work_dir, log);
    std::cout << text;
    return 0;
  }

  cfg.validate();

  if (command == "ingest") {
    const tagrec::IngestOutcome ing = tagrec::detail::run_stage(
        "ingest", [&] { return tagrec::stage_ingest(cfg, log); });
    print_ingest_summary(ing, std::cout);
    return 0;
  }

  const tagrec::VariantSpec variant =
      tagrec::VariantSpec::from_name(cfg.variant);

  if (command == "graph" || command == "communities" ||
      command == "recommend") {
    const tagrec::IngestOutcome ing = tagrec::detail::run_stage(
        "ingest", [&] { return tagrec::stage_ingest(cfg, log); });
    const tagrec::FolkIndex train_ix = tagrec::detail::run_stage(
        "graph", [&] { return tagrec::FolkIndex::build(ing.train); });
    const tagrec::GraphOutcome g = tagrec::detail::run_stage("graph", [&] {
      return tagrec::stage_graph(cfg, variant, ing.train_hash, train_ix,
                                 log);
    });
    if (command == "graph") return 0;
    const tagrec::CommunitiesOutcome comm =
        tagrec::detail::run_stage("communities", [&] {
          return tagrec::stage_communities(cfg, variant, g.graph,
                                           g.file_hash, log);
        });
    if (command == "communities") return 0;
    tagrec::detail::run_stage("recommend", [&] {
      return tagrec::stage_recommend(cfg, variant, comm.partition, train_ix,
                                     ing.train_hash, comm.file_hash, log);
    });
    return 0;
  }

  if (command == "evaluate" || command == "pipeline") {
    const tagrec::PipelineRun run = tagrec::run_pipeline(cfg, log);
    std::cout << tagrec::report_to_tsv(run.evaluate.report);
    if (command == "pipeline") {
      std::cout << "report: " << run.evaluate.tsv_file.string() << "\n";
      std::cout << "report: " << run.evaluate.json_file.string() << "\n";
    }
    return 0;
  }

  std::cerr << "unknown command: " << command << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tag-graph community recommender pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "",
                 "Read options from a key=value config file; command-line "
                 "flags override file values");

  CliOptions opt;
  tagrec::PipelineConfig& cfg = opt.cfg;

  app.add_option("--data-dir", opt.data_dir,
                 "Directory with the raw tab-separated dataset files");
  app.add_option("--work-dir", opt.work_dir,
                 "Directory for caches, artifacts, and reports")
      ->capture_default_str();
  app.add_option("--tau-ms", cfg.sim.tau_ms,
                 "Temporal closeness window in milliseconds")
      ->capture_default_str();
  app.add_option("--lambda", cfg.sim.lambda,
                 "Mixing weight between similarity and temporal closeness")
      ->capture_default_str();
  app.add_option("--alpha-co", cfg.sim.alpha_co,
                 "Name-similarity threshold for co-occurring tag pairs")
      ->capture_default_str();
  app.add_option("--alpha-nonco", cfg.sim.alpha_nonco,
                 "Name-similarity threshold for non-co-occurring tag pairs")
      ->capture_default_str();
  app.add_option("--prune-threshold", cfg.prune_threshold,
                 "Drop membership probabilities below this value")
      ->capture_default_str();
  app.add_option("--split-seed", cfg.split.seed,
                 "Seed for the train/test split")
      ->capture_default_str();
  app.add_option("--train-fraction", cfg.split.train_fraction,
                 "Fraction of each user's assignments placed in training")
      ->capture_default_str();
  app.add_flag("--no-stratify", opt.no_stratify,
               "Split globally instead of per user");
  app.add_option("--max-tag-len", cfg.cleaning.max_tag_length,
                 "Drop tags longer than this many characters")
      ->capture_default_str();
  app.add_option("--louvain-seed", cfg.louvain_seed,
                 "Seed for community detection node ordering")
      ->capture_default_str();
  app.add_option("--variant", cfg.variant,
                 "Model variant: SEM_CDR, LEXSEM_CDR, or CDR_TIME")
      ->capture_default_str();
  app.add_option("--k", cfg.k_values,
                 "Cutoffs for precision/recall (repeat or comma-separate)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--threads", cfg.threads,
                 "Worker threads (never affects output bytes)")
      ->capture_default_str();
  app.add_flag("--swap-pr-denominators", cfg.swap_pr_denominators,
               "Swap the precision/recall denominators (precision over the "
               "test-set size, recall over the returned-list length)");

  app.add_subcommand("ingest", "Parse, clean, and split the dataset");
  app.add_subcommand("graph", "Build (or load) the weighted tag graph");
  app.add_subcommand("communities", "Detect (or load) tag communities");
  app.add_subcommand("recommend",
                     "Write top-k recommendation lists for all users");
  app.add_subcommand("evaluate",
                     "Score recommendations against the test split");
  app.add_subcommand("pipeline", "Run every stage end to end");
  CLI::App* cmp = app.add_subcommand(
      "compare", "Tabulate two or more evaluation reports");
  cmp->add_option("reports", opt.compare_reports,
                  "Paths to report_<variant>.json files")
      ->expected(-2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors exit 1; --help and --version stay 0.
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, opt);
  } catch (const tagrec::IngestError& e) {
    std::cerr << "ingest error: " << e.what() << "\n";
    return kExitIngest;
  } catch (const tagrec::CompareError& e) {
    std::cerr << "compare error: " << e.what() << "\n";
    return kExitContract;
  } catch (const tagrec::PipelineError& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
}
