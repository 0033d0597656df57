// Command-line front end: train, run, validate-crlb, compare-baselines,
// report. Exit codes: 0 success, 2 invalid configuration, 3 safety violation
// detected during a run, 4 numeric divergence.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "formsim/formsim.hpp"

namespace fs = std::filesystem;
using namespace formsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSafety = 3;
constexpr int kExitDivergence = 4;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

ScenarioConfig load_with_seed(const std::string& config_path, std::uint64_t seed,
                              bool seed_set) {
  ScenarioConfig cfg = load_scenario(config_path);
  if (seed_set) cfg.seed = seed;
  return cfg;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, bool seed_set,
              const std::string& out_dir) {
  ScenarioConfig cfg = load_with_seed(config_path, seed, seed_set);
  if (!cfg.train) throw ConfigError("train: the scenario config has no policy.train block");
  fs::create_directories(out_dir);
  TrainOutput out = train_policy(*cfg.train, cfg.seed);
  const fs::path dir(out_dir);
  out.agent.save((dir / "checkpoint.json").string());

  CsvWriter curve({"episode", "mean_reward"});
  for (size_t i = 0; i < out.result.episode_mean_reward.size(); ++i)
    curve.add_row({double(i), out.result.episode_mean_reward[i]});
  curve.write((dir / "reward_curve.csv").string());

  nlohmann::json summary{{"episodes", out.result.episode_mean_reward.size()},
                         {"mode", to_string(cfg.train->mode)},
                         {"seed", cfg.seed},
                         {"eval_mean_error_m", out.result.eval_mean_error},
                         {"eval_following_error_m", out.result.eval_following_error},
                         {"convergence_episode", out.result.convergence_episode}};
  write_text(dir / "train_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, std::uint64_t seed, bool seed_set,
            const std::string& out_dir, const std::string& checkpoint_flag) {
  ScenarioConfig cfg = load_with_seed(config_path, seed, seed_set);
  std::string checkpoint = !checkpoint_flag.empty() ? checkpoint_flag : cfg.checkpoint_path;
  if (checkpoint.empty())
    throw ConfigError("run: no policy checkpoint (config policy.checkpoint or --checkpoint)");
  DdpgAgent policy = DdpgAgent::load(checkpoint);
  fs::create_directories(out_dir);
  RunResult result = run_scenario(cfg, policy);
  const fs::path dir(out_dir);
  records_to_csv(result, cfg.formation.count).write((dir / "records.csv").string());
  nlohmann::json summary = summary_to_json(result.summary);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return result.summary.safety_violations > 0 ? kExitSafety : 0;
}

int cmd_validate_crlb(const std::string& config_path, std::uint64_t seed, bool seed_set,
                      const std::string& out_dir, int trials, const std::string& model_name) {
  ScenarioConfig cfg = load_with_seed(config_path, seed, seed_set);
  McModel model;
  if (model_name == "crlb_gauss")
    model = McModel::crlb_gauss;
  else if (model_name == "isac_pipeline")
    model = McModel::isac_pipeline;
  else
    throw ConfigError("validate-crlb: unknown model '" + model_name + "'");
  McReport rep = monte_carlo_crlb(cfg, trials, model);
  nlohmann::json j = mc_report_to_json(rep);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "crlb_report.json", j.dump(2) + "\n");
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::string& config_path, std::uint64_t seed, bool seed_set,
                const std::string& out_dir, const std::string& modes_csv, int num_seeds) {
  ScenarioConfig cfg = load_with_seed(config_path, seed, seed_set);
  if (!cfg.train) throw ConfigError("compare-baselines: config has no policy.train block");

  std::vector<RewardMode> modes;
  std::stringstream ss(modes_csv);
  std::string item;
  while (std::getline(ss, item, ',')) modes.push_back(reward_mode_from_string(item));
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < num_seeds; ++i) seeds.push_back(cfg.seed + i);

  BaselineReport rep = compare_baselines(*cfg.train, modes, seeds);
  fs::create_directories(out_dir);

  std::string csv =
      "mode,seed,eval_mean_error,eval_following_error,convergence_episode,final_mean_reward\n";
  for (const auto& r : rep.rows) {
    csv += r.mode + "," + std::to_string(r.seed) + "," + format_double(r.eval_mean_error) +
           "," + format_double(r.eval_following_error) + "," +
           std::to_string(r.convergence_episode) + "," + format_double(r.final_mean_reward) +
           "\n";
  }
  write_text(fs::path(out_dir) / "baselines.csv", csv);

  nlohmann::json summary = nlohmann::json::object();
  for (RewardMode m : modes) {
    const std::string name = to_string(m);
    summary[name] = {{"median_eval_mean_error",
                      rep.median_metric(name, &BaselineRow::eval_mean_error)},
                     {"median_convergence_episode", rep.median_convergence(name)}};
  }
  write_text(fs::path(out_dir) / "baselines_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& records_path, const std::string& fig,
               const std::string& out_path) {
  CsvTable table = read_csv(records_path);
  FigureDataset d = extract(table, fig);
  d.to_csv().write(out_path);
  std::cout << "wrote " << out_path << " (" << d.rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative UAV formation path-following / sensing / avoidance simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", checkpoint, records_path, fig, out_path;
  std::string modes = "awpf,fwpf_dv_fixed,fwpf_d_only";
  std::string mc_model = "crlb_gauss";
  std::uint64_t seed = 0;
  int trials = 2000;
  int num_seeds = 3;

  CLI::App* train = app.add_subcommand("train", "train a policy checkpoint");
  train->add_option("--config", config_path, "scenario JSON")->required();
  CLI::Option* train_seed = train->add_option("--seed", seed, "seed override");
  train->add_option("--out", out_dir, "output directory");

  CLI::App* run = app.add_subcommand("run", "run a scenario with a trained checkpoint");
  run->add_option("--config", config_path, "scenario JSON")->required();
  CLI::Option* run_seed = run->add_option("--seed", seed, "seed override");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--checkpoint", checkpoint, "checkpoint path override");

  CLI::App* validate = app.add_subcommand("validate-crlb", "Monte Carlo RMSE vs CRLB report");
  validate->add_option("--config", config_path, "scenario JSON")->required();
  CLI::Option* val_seed = validate->add_option("--seed", seed, "seed override");
  validate->add_option("--trials", trials, "number of trials");
  validate->add_option("--out", out_dir, "output directory (optional)");
  validate->add_option("--model", mc_model, "crlb_gauss | isac_pipeline");

  CLI::App* compare = app.add_subcommand("compare-baselines", "train and compare reward modes");
  compare->add_option("--config", config_path, "scenario JSON")->required();
  CLI::Option* cmp_seed = compare->add_option("--seed", seed, "base seed override");
  compare->add_option("--out", out_dir, "output directory");
  compare->add_option("--modes", modes, "comma-separated reward modes");
  compare->add_option("--num-seeds", num_seeds, "seeds per mode (base, base+1, ...)");

  CLI::App* report = app.add_subcommand("report", "extract a figure dataset from records");
  report->add_option("--records", records_path, "records CSV")->required();
  report->add_option("--fig", fig, "figure id")->required();
  report->add_option("--out", out_path, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, seed, !train_seed->empty(), out_dir);
    if (run->parsed())
      return cmd_run(config_path, seed, !run_seed->empty(), out_dir, checkpoint);
    if (validate->parsed())
      return cmd_validate_crlb(config_path, seed, !val_seed->empty(),
                               validate->count("--out") ? out_dir : "", trials, mc_model);
    if (compare->parsed())
      return cmd_compare(config_path, seed, !cmp_seed->empty(), out_dir, modes, num_seeds);
    if (report->parsed()) return cmd_report(records_path, fig, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
