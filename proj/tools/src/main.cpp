#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "smoa/common.hpp"
#include "smoa_tools/commands.hpp"

using smoa::tools::CliOptions;

int main(int argc, char** argv) {
  CLI::App app{"desk-scale laboratory for dense and soft mixtures of adapters "
               "on a frozen spectrogram encoder"};
  app.require_subcommand(1);

  CliOptions opt;
  int rc = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
    sub->add_option("--seed", opt.seed, "seed override")
        ->each([&](const std::string&) { opt.has_seed = true; });
    return sub;
  };

  add_common(app.add_subcommand("train", "train on the configured datasets; "
                                         "writes logs, checkpoint, summary"))
      ->callback([&] { rc = smoa::tools::cmd_train(opt); });

  CLI::App* bench = add_common(app.add_subcommand(
      "benchmark", "time full training steps for each adapter variant"));
  bench->add_option("--steps", opt.steps, "timed steps per variant (>= 20)");
  bench->add_option("--warmup", opt.warmup, "untimed steps before timing (>= 5)");
  bench->callback([&] { rc = smoa::tools::cmd_benchmark(opt); });

  add_common(app.add_subcommand(
                 "gradcheck", "compare reverse-mode gradients against central "
                              "finite differences on a tiny model"))
      ->callback([&] { rc = smoa::tools::cmd_gradcheck(opt); });

  CLI::App* sweep = add_common(app.add_subcommand(
      "sweep", "train a grid of adapter settings on identical data"));
  sweep->add_option("--mode", opt.mode, "budget, adapters, or slots")
      ->check(CLI::IsMember({"budget", "adapters", "slots"}));
  sweep->callback([&] { rc = smoa::tools::cmd_sweep(opt); });

  CLI::App* analyze = add_common(app.add_subcommand(
      "analyze", "export per-expert contribution tables for a soft mixture model"));
  analyze->add_option("--layers", opt.layers, "'all' or comma list of layer indices");
  analyze->callback([&] { rc = smoa::tools::cmd_analyze(opt); });

  add_common(app.add_subcommand("paramcount", "parameter budget by role"))
      ->callback([&] { rc = smoa::tools::cmd_paramcount(opt); });

  add_common(app.add_subcommand("gen-data",
                                "write the configured synthetic task as "
                                "<out>.train.smds / <out>.test.smds"))
      ->callback([&] { rc = smoa::tools::cmd_gen_data(opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const smoa::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
