#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcssl/config.hpp"
#include "tcssl/pipeline.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::string> overrides;

  std::string finetune_from, evaluate_from;
  bool finetune_scratch = false, evaluate_scratch = false;
  std::int64_t folds = 0;

  tcssl::RetrieveOptions retrieve;
  std::vector<std::string> frame_args;

  std::vector<std::string> report_in;
  std::string report_out;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-contrastive pretraining and evaluation on synthetic frame sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  Cli cli;
  app.add_option("--config", cli.config_path, "JSON run config file");
  app.add_option("--set", cli.overrides, "override a config field, key.path=value")
      ->type_name("KEY=VALUE");

  CLI::App* generate = app.add_subcommand("generate", "write both synthetic corpora");
  CLI::App* pretrain = app.add_subcommand("pretrain", "train encoder+head with windowed triplets");
  CLI::App* finetune = app.add_subcommand("finetune", "train classifier on the labeled corpus");
  auto* ft_from = finetune->add_option("--from-checkpoint", cli.finetune_from,
                                       "initialize the encoder from this checkpoint");
  auto* ft_scratch = finetune->add_flag("--scratch", cli.finetune_scratch,
                                        "fresh initialization (baseline)");
  ft_from->excludes(ft_scratch);

  CLI::App* evaluate = app.add_subcommand("evaluate", "grouped k-fold finetune + metrics");
  auto* ev_from = evaluate->add_option("--from-checkpoint", cli.evaluate_from,
                                       "initialize each fold's encoder from this checkpoint");
  auto* ev_scratch = evaluate->add_flag("--scratch", cli.evaluate_scratch,
                                        "fresh initialization per fold (baseline)");
  ev_from->excludes(ev_scratch);
  evaluate->add_option("--folds", cli.folds, "override the fold count")->check(CLI::PositiveNumber);

  CLI::App* retrieve = app.add_subcommand("retrieve", "rank nearest embedding neighbors");
  retrieve->add_option("--checkpoint", cli.retrieve.checkpoint, "encoder checkpoint")->required();
  retrieve->add_option("--frame", cli.frame_args, "query frame as video:frame (repeatable)")
      ->required();
  retrieve->add_option("--top", cli.retrieve.top_k, "rows per query (default 8)");
  retrieve->add_option("--corpus", cli.retrieve.corpus, "'pretrain' (default) or 'labeled'");

  CLI::App* report = app.add_subcommand("report", "compare evaluate runs side by side");
  report->add_option("--in", cli.report_in, "report.json path (repeatable)")->required();
  report->add_option("--out", cli.report_out, "comparison csv path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (report->parsed()) {
      tcssl::run_report(cli.report_in, cli.report_out);
      return 0;
    }
    if (cli.folds > 0) cli.overrides.push_back("folds=" + std::to_string(cli.folds));
    const tcssl::RunConfig cfg = tcssl::load_run_config(cli.config_path, cli.overrides);

    if (generate->parsed()) {
      tcssl::run_generate(cfg);
    } else if (pretrain->parsed()) {
      tcssl::run_pretrain(cfg);
    } else if (finetune->parsed()) {
      if (!cli.finetune_scratch && cli.finetune_from.empty()) {
        throw tcssl::ConfigError("finetune: pass --from-checkpoint <path> or --scratch");
      }
      tcssl::run_finetune(cfg, cli.finetune_from);
    } else if (evaluate->parsed()) {
      if (!cli.evaluate_scratch && cli.evaluate_from.empty()) {
        throw tcssl::ConfigError("evaluate: pass --from-checkpoint <path> or --scratch");
      }
      tcssl::run_evaluate(cfg, cli.evaluate_from);
    } else if (retrieve->parsed()) {
      for (const std::string& f : cli.frame_args) {
        cli.retrieve.queries.push_back(tcssl::parse_frame_ref(f));
      }
      tcssl::run_retrieve(cfg, cli.retrieve);
    }
    return 0;
  } catch (const tcssl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tcssl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const tcssl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
