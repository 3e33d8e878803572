#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "syncsel/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"selective prediction toolkit: train, evaluate and verify "
               "reject-option classifiers"};
  app.require_subcommand(1);

  syncsel::TrainOptions train_opt;
  std::string train_out, train_seed;
  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", train_opt.config_path, "run config file")
      ->required();
  train->add_option("--out", train_out, "output directory (overrides out_dir)");
  train->add_option("--seed", train_seed, "seed override");
  train->add_flag("--trace", train_opt.dump_trace,
                  "also write per-step trace.csv");

  syncsel::EvalOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a CSV");
  eval->add_option("--checkpoint", eval_opt.checkpoint_path, "model checkpoint")
      ->required();
  eval->add_option("--data", eval_opt.data_path, "evaluation CSV")->required();
  eval->add_option("--mechanism", eval_opt.mechanism,
                   "head | sr | smp:<gamma> | negent");
  eval->add_option("--grid", eval_opt.grid, "coverage grid, e.g. 0.1,0.5,1.0");
  eval->add_option("--out", eval_opt.out_dir, "output directory");

  syncsel::VerifyOptions verify_opt;
  auto* verify =
      app.add_subcommand("verify", "run the numerical bound verification suite");
  verify->add_option("--seed", verify_opt.seed, "suite seed");
  verify
      ->add_option("--modulus-scale", verify_opt.modulus_scale,
                   "test hook: scale the Lipschitz modulus")
      ->capture_default_str();

  syncsel::SweepOptions sweep_opt;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "train/evaluate over gamma values");
  sweep->add_option("--config", sweep_opt.config_path, "run config file")
      ->required();
  sweep->add_option("--gamma", sweep_opt.gammas, "gamma list, e.g. 0.5,1,2.5")
      ->required();
  sweep->add_option("--out", sweep_out, "output directory (overrides out_dir)");

  syncsel::GenOptions gen_opt;
  auto* gen = app.add_subcommand("gen", "generate a dataset CSV");
  gen->add_option("--config", gen_opt.config_path, "run config file")
      ->required();
  gen->add_option("--out", gen_opt.out_csv, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    if (!train_out.empty()) train_opt.out_dir = train_out;
    if (!train_seed.empty()) {
      try {
        train_opt.seed = std::stoull(train_seed);
      } catch (const std::exception&) {
        std::cerr << "error: bad --seed value\n";
        return 1;
      }
    }
    return syncsel::cmd_train(train_opt, std::cout);
  }
  if (eval->parsed()) return syncsel::cmd_eval(eval_opt, std::cout);
  if (verify->parsed())
    return syncsel::cmd_verify(verify_opt, std::cout, std::cerr);
  if (sweep->parsed()) {
    if (!sweep_out.empty()) sweep_opt.out_dir = sweep_out;
    return syncsel::cmd_sweep(sweep_opt, std::cout);
  }
  if (gen->parsed()) return syncsel::cmd_gen(gen_opt, std::cout);
  return 1;
}
