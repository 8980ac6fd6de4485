// pens: corpus preparation, training, evaluation and experiment grids for
// section-ensemble patent classification.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pens/commands.hpp"
#include "pens/config.hpp"
#include "pens/error.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  std::vector<std::string> overrides;
};

using Command = int (*)(const pens::Config&, std::ostream&);

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help,
                      CommonFlags& flags) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", flags.config_path, "key = value settings file");
  sub->add_option("--seed", flags.seed, "root seed (overrides the config)");
  sub->add_option("--out", flags.out, "output directory (overrides the config)");
  sub->add_option("--threads", flags.threads, "worker threads for grid points");
  sub->add_option("--set", flags.overrides, "extra key=value override, repeatable");
  return sub;
}

pens::Config merged_config(const CommonFlags& flags) {
  pens::Config config = flags.config_path.empty() ? pens::Config{} : pens::Config::load(flags.config_path);
  for (const auto& o : flags.overrides) config.apply_override(o);
  if (flags.seed) config.set("seed", std::to_string(*flags.seed));
  if (flags.threads) config.set("threads", std::to_string(*flags.threads));
  if (!flags.out.empty()) config.set("out", flags.out);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Section-ensemble patent classification"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::string corpus;
  auto* prep = add_command(app, "prep", "parse, filter, pool, split and describe a corpus", flags);
  prep->add_option("corpus", corpus, "corpus file (XML or JSONL)");

  const std::vector<std::pair<CLI::App*, Command>> commands = {
      {prep, pens::cmd_prep},
      {add_command(app, "synth", "generate a synthetic corpus", flags), pens::cmd_synth},
      {add_command(app, "train-embeddings", "train skip-gram vectors on the training split", flags),
       pens::cmd_train_embeddings},
      {add_command(app, "train", "train one classifier", flags), pens::cmd_train},
      {add_command(app, "eval", "evaluate a checkpoint", flags), pens::cmd_eval},
      {add_command(app, "ensemble-eval", "evaluate a three-member ensemble", flags),
       pens::cmd_ensemble_eval},
      {add_command(app, "experiment", "run an experiment grid", flags), pens::cmd_experiment},
  };

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [sub, run] : commands) {
      if (!sub->parsed()) continue;
      pens::Config config = merged_config(flags);
      if (sub == prep && !corpus.empty()) config.set("corpus", corpus);
      return run(config, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "pens: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
