#include "syncsel/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "syncsel/config.hpp"
#include "syncsel/eval.hpp"
#include "syncsel/theory.hpp"

namespace syncsel {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path);
}

struct EvalArtifacts {
  RiskCoverageCurve curve;
  std::vector<double> coverages;
  std::vector<ConfusionTable> confusions;
  std::vector<std::vector<RegionRate>> regions;
};

EvalArtifacts evaluate_records(const std::vector<EvalRecord>& records,
                               const std::vector<double>& grid) {
  EvalArtifacts art;
  art.curve = rc_curve(records, grid);
  for (const auto& pt : art.curve.points) {
    art.coverages.push_back(pt.coverage);
    art.confusions.push_back(confusion_table(records, pt.threshold));
    art.regions.push_back(region_rejection_rates(records, pt.threshold));
  }
  return art;
}

void write_eval_outputs(const EvalArtifacts& art, const fs::path& dir) {
  write_rc_curve_csv(art.curve, (dir / "rc_curve.csv").string());
  write_confusion_csv(art.coverages, art.confusions,
                      (dir / "confusion.csv").string());
  write_regions_csv(art.coverages, art.regions,
                    (dir / "regions.csv").string());
}

int run_one_training(const RunConfig& cfg, const fs::path& out_dir,
                     bool dump_trace, std::ostream& log) {
  fs::create_directories(out_dir);

  const Dataset full = build_dataset(cfg);
  SplitSpec spec{cfg.train_frac, cfg.cal_frac, cfg.test_frac, cfg.seed};
  const SplitResult parts = split(full, spec);

  SelectiveModel model = init_model(full.dim, cfg.hidden, full.num_classes,
                                    cfg.g_hidden, cfg.seed, net_mode(cfg));
  const TrainConfig tc = to_train_config(cfg);

  TrainResult result;
  try {
    result = train(model, parts.train, tc);
  } catch (const TrainAbort& e) {
    log << "training aborted: " << e.what() << "\n";
    return 2;
  }

  save_checkpoint(model, (out_dir / "checkpoint.bin").string());
  write_metrics_csv(result.epochs, (out_dir / "metrics.csv").string());
  write_text((out_dir / "config.resolved").string(), serialize_config(cfg));
  if (dump_trace)
    write_trace_csv(result.step_losses, (out_dir / "trace.csv").string());

  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    log << "trained " << result.epochs.size() << " epochs; final loss "
        << last.mean_total_loss << ", coverage " << last.empirical_coverage
        << ", accuracy " << last.train_accuracy << "\n";
  }
  return 0;
}

}  // namespace

int cmd_train(const TrainOptions& opt, std::ostream& log) {
  try {
    RunConfig cfg = parse_config_file(opt.config_path);
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (opt.seed) cfg.seed = *opt.seed;
    if (cfg.out_dir.empty()) {
      log << "error: out_dir is required (config key or --out)\n";
      return 1;
    }
    return run_one_training(cfg, cfg.out_dir, opt.dump_trace, log);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const EvalOptions& opt, std::ostream& log) {
  try {
    const SelectiveModel model = load_checkpoint(opt.checkpoint_path);
    const Dataset ds = load_csv(opt.data_path);
    const Mechanism mechanism = Mechanism::parse(opt.mechanism);
    if (mechanism.kind == MechanismKind::Head && model.mode == NetMode::DG)
      log << "note: head mechanism on an abstention-class checkpoint scores "
             "by the negated abstain probability\n";

    const std::vector<double> grid =
        opt.grid.empty() ? RunConfig{}.grid : parse_grid(opt.grid);
    const auto records = collect(model, ds, mechanism);
    const auto artifacts = evaluate_records(records, grid);

    fs::path dir = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
    fs::create_directories(dir);
    write_eval_outputs(artifacts, dir);
    log << "evaluated " << records.size() << " samples under '"
        << mechanism.name() << "' at " << grid.size() << " coverages\n";
    return 0;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  std::vector<TheoryReport> reports;
  try {
    reports = run_verify_suite(opt.seed, opt.modulus_scale);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  std::vector<std::string> failed;
  for (const auto& rep : reports) {
    nlohmann::ordered_json j;
    j["name"] = rep.check_name;
    j["trials"] = rep.n_trials;
    j["bound"] = rep.bound_value;
    j["max_violation"] = rep.max_violation;
    j["passed"] = rep.passed;
    j["seed"] = rep.seed;
    out << j.dump() << "\n";
    if (!rep.passed) failed.push_back(rep.check_name);
  }
  if (!failed.empty()) {
    err << "failed checks:";
    for (const auto& name : failed) err << " " << name;
    err << "\n";
    return 3;
  }
  return 0;
}

int cmd_sweep(const SweepOptions& opt, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = parse_config_file(opt.config_path);
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (cfg.out_dir.empty()) {
      log << "error: out_dir is required (config key or --out)\n";
      return 1;
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }

  std::vector<double> gammas;
  {
    std::stringstream ss(opt.gammas);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t pos = 0;
        const double g = std::stod(item, &pos);
        while (pos < item.size() && std::isspace(item[pos])) ++pos;
        if (pos != item.size() || !(g > 0.0))
          throw std::runtime_error("gamma must be > 0");
        gammas.push_back(g);
      } catch (const std::exception&) {
        log << "error: bad gamma value '" << item << "'\n";
        return 1;
      }
    }
  }
  if (gammas.empty()) {
    log << "error: sweep needs at least one gamma\n";
    return 1;
  }
  std::vector<double> unique_gammas;
  for (double g : gammas) {
    if (std::find(unique_gammas.begin(), unique_gammas.end(), g) !=
        unique_gammas.end()) {
      log << "warning: duplicate gamma " << g << " dropped\n";
      continue;
    }
    unique_gammas.push_back(g);
  }

  const fs::path root(cfg.out_dir);
  fs::create_directories(root);
  std::ostringstream sweep_rows;
  sweep_rows << "gamma,mechanism,coverage,accuracy\n";
  bool any_failed = false;

  for (double gamma : unique_gammas) {
    char cell_name[48];
    std::snprintf(cell_name, sizeof(cell_name), "gamma_%g", gamma);
    const fs::path cell_dir = root / cell_name;
    try {
      RunConfig cell_cfg = cfg;
      cell_cfg.loss = "sync";
      cell_cfg.score = "smp";
      cell_cfg.gamma = gamma;
      cell_cfg.out_dir = cell_dir.string();

      const int rc = run_one_training(cell_cfg, cell_dir, false, log);
      if (rc != 0) {
        any_failed = true;
        log << "sweep cell gamma=" << gamma << " failed (exit " << rc << ")\n";
        continue;
      }

      const SelectiveModel model =
          load_checkpoint((cell_dir / "checkpoint.bin").string());
      const Dataset full = build_dataset(cell_cfg);
      SplitSpec spec{cell_cfg.train_frac, cell_cfg.cal_frac,
                     cell_cfg.test_frac, cell_cfg.seed};
      const SplitResult parts = split(full, spec);

      for (const char* mech_name : {"head", "sr"}) {
        const auto records =
            collect(model, parts.test, Mechanism::parse(mech_name));
        const auto curve = rc_curve(records, cell_cfg.grid);
        for (const auto& pt : curve.points) {
          char row[128];
          std::snprintf(row, sizeof(row), "%g,%s,%.6f,%.6f\n", gamma,
                        mech_name, pt.coverage, pt.accuracy);
          sweep_rows << row;
        }
      }
    } catch (const std::exception& e) {
      any_failed = true;
      log << "sweep cell gamma=" << gamma << " failed: " << e.what() << "\n";
    }
  }

  write_text((root / "sweep.csv").string(), sweep_rows.str());
  log << "sweep finished over " << unique_gammas.size() << " gamma values\n";
  return any_failed ? 1 : 0;
}

int cmd_gen(const GenOptions& opt, std::ostream& log) {
  try {
    const RunConfig cfg = parse_config_file(opt.config_path);
    const Dataset ds = build_dataset(cfg);
    save_csv(ds, opt.out_csv);
    log << "wrote " << ds.n << " samples (" << ds.num_classes << " classes) to "
        << opt.out_csv << "\n";
    return 0;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace syncsel
