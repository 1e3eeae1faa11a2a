#include "hmiway/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmiway/checkpoint.hpp"
#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway::cli {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig RunConfig::from_kv(KeyValueFile& kv) {
  RunConfig c;
  c.scenario = ScenarioConfig::from_kv(kv, "scenario.");
  c.hmi_obs = HmiObsConfig::from_kv(kv, "hmi_obs.");
  c.ppo = PpoConfig::from_kv(kv, "ppo.");
  c.traits_budget_explicit = kv.has("traits.budget");
  c.traits = TraitConfig::from_kv(kv, "traits.");
  c.traits_mode = kv.get_string("traits.mode", c.traits_mode);
  supervision_mode_from_string(c.traits_mode);  // validate early

  c.data_steps_per_type = kv.get_int("data.steps_per_type", c.data_steps_per_type);
  c.data_labeled_fraction = kv.get_double("data.labeled_fraction", c.data_labeled_fraction);
  c.data_format = kv.get_string("data.format", c.data_format);
  if (c.data_format != "jsonl" && c.data_format != "bin")
    kv.fail("data.format", "expected jsonl|bin");
  c.data_behavior = kv.get_string("data.behavior", c.data_behavior);
  if (c.data_behavior != "scripted" && c.data_behavior != "checkpoints")
    kv.fail("data.behavior", "expected scripted|checkpoints");
  if (c.data_labeled_fraction < 0 || c.data_labeled_fraction > 1)
    kv.fail("data.labeled_fraction", "must be in [0,1]");

  c.driver_budget = kv.get_int("train.driver_budget", c.driver_budget);
  c.hmi_budget = kv.get_int("train.hmi_budget", c.hmi_budget);
  c.train_profile = kv.get_string("train.profile", c.train_profile);

  c.eval_episodes = static_cast<int>(kv.get_int("eval.episodes", c.eval_episodes));
  if (c.eval_episodes < 1) kv.fail("eval.episodes", "must be >= 1");
  c.eval_threads = static_cast<int>(kv.get_int("eval.threads", c.eval_threads));
  c.eval_full_matrix = kv.get_bool("eval.full_matrix", c.eval_full_matrix);
  c.eval_pools = static_cast<int>(kv.get_int("eval.pools", c.eval_pools));
  if (c.eval_pools < 2) kv.fail("eval.pools", "must be >= 2");

  c.report_kind = kv.get_string("report.kind", c.report_kind);
  if (c.report_kind != "metrics" && c.report_kind != "latent")
    kv.fail("report.kind", "expected metrics|latent");
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("report.driver.", 0) == 0)
      c.report_driver[key.substr(14)] = kv.get_string(key, "");
    else if (key.rfind("report.hmi.", 0) == 0)
      c.report_hmi[key.substr(11)] = kv.get_string(key, "");
    else if (key.rfind("data.driver_ckpt.", 0) == 0)
      c.data_driver_ckpts[key.substr(17)] = kv.get_string(key, "");
  }
  c.report_avg_hmi = kv.get_string("report.avg_hmi", c.report_avg_hmi);

  c.out_dir = kv.get_string("io.out_dir", c.out_dir);
  c.dataset_path = kv.get_string("io.dataset", c.dataset_path);
  c.encoder_ckpt = kv.get_string("io.encoder_ckpt", c.encoder_ckpt);
  c.driver_ckpt = kv.get_string("io.driver_ckpt", c.driver_ckpt);
  c.hmi_ckpt = kv.get_string("io.hmi_ckpt", c.hmi_ckpt);
  c.resume_ckpt = kv.get_string("io.resume", c.resume_ckpt);
  c.no_hmi = kv.get_bool("io.no_hmi", c.no_hmi);
  c.seed = kv.get_u64("seed", c.seed);
  return c;
}

std::string resolve_artifact(const std::string& path) {
  if (path.size() > 7 && path.compare(path.size() - 7, 7, ".latest") == 0) {
    std::string target = read_file(path);
    while (!target.empty() && (target.back() == '\n' || target.back() == '\r')) target.pop_back();
    fs::path p(path);
    return (p.parent_path() / target).string();
  }
  return path;
}

namespace {

// Collects artifacts and writes the manifest; a run that throws leaves a
// FAILED marker next to whatever partial outputs exist.
class RunContext {
 public:
  RunContext(std::string command, std::string out_dir, const KeyValueFile& kv, std::uint64_t seed)
      : command_(std::move(command)), out_dir_(std::move(out_dir)) {
    fs::create_directories(out_dir_);
    manifest_["tool"] = "hmiway";
    manifest_["version"] = kVersionString;
    manifest_["command"] = command_;
    json cfg = json::object();
    for (const auto& [k, v] : kv.entries()) cfg[k] = v;
    manifest_["config"] = cfg;
    manifest_["seed"] = seed;
    manifest_["artifacts"] = json::array();
    manifest_["stats"] = json::object();
  }

  const std::string& out_dir() const { return out_dir_; }

  std::string path(const std::string& name) const { return out_dir_ + "/" + name; }

  // Renames `tmp` to a content-hashed artifact name and records it; also
  // refreshes the `<base>.latest` pointer.
  std::string publish(const std::string& tmp, const std::string& base, const std::string& ext) {
    std::uint64_t h = fnv1a64_file(tmp);
    std::string name = base + "-" + hex16(h) + ext;
    std::string final_path = path(name);
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec) throw IoError("cannot rename artifact: " + ec.message());
    write_file_atomic(path(base + ".latest"), name + "\n");
    record(name, final_path);
    return final_path;
  }

  void record(const std::string& name, const std::string& file_path) {
    manifest_["artifacts"].push_back(
        {{"name", name}, {"path", file_path}, {"fnv64", hex16(fnv1a64_file(file_path))}});
  }

  void stat(const std::string& key, const json& value) { manifest_["stats"][key] = value; }

  void finish_ok() {
    manifest_["status"] = "ok";
    write_file_atomic(path("manifest-" + command_ + ".json"), manifest_.dump(2) + "\n");
    std::error_code ec;
    fs::remove(path("FAILED"), ec);
  }

  void finish_failed(const std::string& message) {
    manifest_["status"] = "failed";
    manifest_["error"] = message;
    try {
      write_file_atomic(path("manifest-" + command_ + ".json"), manifest_.dump(2) + "\n");
      write_file_atomic(path("FAILED"), message + "\n");
    } catch (...) {
      // Reporting the original failure matters more than the marker.
    }
  }

 private:
  std::string command_;
  std::string out_dir_;
  json manifest_;
};

std::vector<DriverProfile> dataset_profiles() {
  std::vector<DriverProfile> out;
  for (const auto& p : archetype_registry())
    if (p.name != "Avg") out.push_back(p);
  return out;
}

BehaviorPolicy behavior_from_config(const RunConfig& cfg,
                                    std::vector<LoadedPolicy>& storage) {
  if (cfg.data_behavior == "scripted") return scripted_behavior();
  std::map<int, const PolicyNet*> by_id;
  for (const auto& [name, path] : cfg.data_driver_ckpts) {
    DriverProfile p = archetype_profile(name);
    storage.push_back(load_policy(resolve_artifact(path)));
    by_id[p.id] = &storage.back().policy;
  }
  // storage must not reallocate after pointers are taken
  return [by_id](const HmiwayEnv& env, std::span<const double> obs, Rng& rng) {
    auto it = by_id.find(env.profile().id);
    if (it == by_id.end())
      throw ContractError("gen-data: no behavior checkpoint for driver '" + env.profile().name +
                          "'");
    return static_cast<HumanAction>(it->second->sample(obs, rng).action);
  };
}

int cmd_gen_data(const RunConfig& cfg, RunContext& ctx) {
  std::vector<LoadedPolicy> storage;
  storage.reserve(8);
  BehaviorPolicy behavior = behavior_from_config(cfg, storage);
  GenerateOptions opts;
  opts.labeled_fraction = cfg.data_labeled_fraction;
  Dataset ds = generate_dataset(dataset_profiles(), cfg.data_steps_per_type, behavior,
                                cfg.scenario, cfg.seed, opts);
  std::string ext = cfg.data_format == "bin" ? ".bin" : ".jsonl";
  std::string tmp = ctx.path("dataset-tmp" + ext);
  save_dataset(ds, tmp);
  std::string final_path = ctx.publish(tmp, "dataset", ext);

  json steps = json::object();
  for (const auto& [driver, n] : ds.steps_per_driver()) steps[std::to_string(driver)] = n;
  ctx.stat("steps_per_driver", steps);
  ctx.stat("trajectories", ds.trajectories.size());
  ctx.stat("transitions", ds.total_transitions());
  std::cout << "dataset: " << final_path << "\n";
  return 0;
}

int cmd_train_driver(const RunConfig& cfg, RunContext& ctx) {
  DriverProfile profile = archetype_profile(cfg.train_profile);
  TrainPolicyResult result =
      train_driver_policy(profile, cfg.scenario, cfg.ppo, cfg.driver_budget, cfg.seed);
  std::string tmp = ctx.path("driver-" + profile.name + ".ckpt.tmp");
  save_policy(result.policy, result.value, "driver", tmp);
  std::string final_path = ctx.publish(tmp, "driver-" + profile.name, ".ckpt");
  write_curve_csv(result.curve, ctx.path("curve-driver-" + profile.name + ".csv"));
  ctx.record("curve-driver-" + profile.name + ".csv", ctx.path("curve-driver-" + profile.name + ".csv"));
  ctx.stat("env_steps", result.env_steps);
  std::cout << "driver policy: " << final_path << "\n";
  return 0;
}

int cmd_train_hmi(const RunConfig& cfg, RunContext& ctx) {
  DriverProfile profile = archetype_profile(cfg.train_profile);
  std::string driver_path = cfg.driver_ckpt;
  if (driver_path.empty())
    driver_path = ctx.path("driver-" + profile.name + ".latest");
  LoadedPolicy driver = load_policy(resolve_artifact(driver_path));
  TrainPolicyResult result = train_hmi_policy(driver.policy, profile, cfg.scenario, cfg.hmi_obs,
                                              cfg.ppo, cfg.hmi_budget, cfg.seed);
  std::string tmp = ctx.path("hmi-" + profile.name + ".ckpt.tmp");
  save_policy(result.policy, result.value, "hmi", tmp);
  std::string final_path = ctx.publish(tmp, "hmi-" + profile.name, ".ckpt");
  write_curve_csv(result.curve, ctx.path("curve-hmi-" + profile.name + ".csv"));
  ctx.record("curve-hmi-" + profile.name + ".csv", ctx.path("curve-hmi-" + profile.name + ".csv"));
  ctx.stat("env_steps", result.env_steps);
  std::cout << "hmi policy: " << final_path << "\n";
  return 0;
}

int cmd_train_traits(const RunConfig& cfg, RunContext& ctx) {
  if (cfg.dataset_path.empty())
    throw ConfigError("train-traits", 0, "io.dataset (or --dataset) is required");
  Dataset ds = load_dataset(resolve_artifact(cfg.dataset_path));
  std::unique_ptr<TraitLearner> learner;
  if (!cfg.resume_ckpt.empty()) {
    std::optional<std::int64_t> budget;
    if (cfg.traits_budget_explicit) budget = cfg.traits.budget;
    learner = TraitLearner::resume(ds, cfg.scenario, resolve_artifact(cfg.resume_ckpt), budget);
  } else {
    learner = std::make_unique<TraitLearner>(ds, cfg.scenario, cfg.traits,
                                             supervision_mode_from_string(cfg.traits_mode),
                                             cfg.seed);
  }
  TraitTrainResult result = learner->train(ctx.out_dir());

  std::string tmp = ctx.path("encoder.ckpt.tmp");
  learner->encoder().save(tmp);
  std::string enc_path = ctx.publish(tmp, "encoder-" + cfg.traits_mode, ".ckpt");

  std::string ptmp = ctx.path("gen-policy.ckpt.tmp");
  save_policy(learner->policy(), learner->value(), "trait-generator", ptmp);
  ctx.publish(ptmp, "gen-policy-" + cfg.traits_mode, ".ckpt");

  std::ostringstream losses;
  losses << "step,l1,l2,l3,l4,total,labeled_pairs\n";
  for (std::size_t k = 0; k < result.losses.size(); ++k) {
    const LossReport& r = result.losses[k];
    losses << k << ',' << repr(r.l1) << ',' << repr(r.l2) << ',' << repr(r.l3) << ','
           << repr(r.l4) << ',' << repr(r.total(learner->config().weights)) << ','
           << r.labeled_pairs << '\n';
  }
  write_file_atomic(ctx.path("losses-" + cfg.traits_mode + ".csv"), losses.str());
  ctx.record("losses-" + cfg.traits_mode + ".csv", ctx.path("losses-" + cfg.traits_mode + ".csv"));
  ctx.stat("rounds", result.rounds);
  ctx.stat("env_steps", result.env_steps);
  std::cout << "encoder: " << enc_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, RunContext& ctx) {
  if (cfg.driver_ckpt.empty())
    throw ConfigError("eval", 0, "io.driver_ckpt (or --driver-ckpt) is required");
  DriverProfile profile = archetype_profile(cfg.train_profile);
  LoadedPolicy driver = load_policy(resolve_artifact(cfg.driver_ckpt));
  PolicyDriverController driver_ctrl(&driver.policy);

  std::unique_ptr<HmiController> hmi;
  std::string model_name;
  LoadedPolicy hmi_policy;
  if (cfg.no_hmi) {
    hmi = std::make_unique<ConstantHmiController>(AIAction::kNoAlert);
    model_name = "NoHMI";
  } else {
    if (cfg.hmi_ckpt.empty())
      throw ConfigError("eval", 0, "io.hmi_ckpt (or --hmi-ckpt / --no-hmi) is required");
    hmi_policy = load_policy(resolve_artifact(cfg.hmi_ckpt));
    hmi = std::make_unique<PolicyHmiController>(&hmi_policy.policy);
    model_name = "hmi";
  }

  EvalCell cell = evaluate(driver_ctrl, *hmi, profile, cfg.scenario, cfg.hmi_obs,
                           cfg.eval_episodes, cfg.seed, cfg.eval_threads);
  std::string episodes_name = "eval-" + profile.name + "-" + model_name + "-episodes.csv";
  write_episode_csv(cell, ctx.path(episodes_name));
  ctx.record(episodes_name, ctx.path(episodes_name));

  std::ostringstream os;
  os << "metric,value\n";
  os << "episodes," << cell.episodes << '\n';
  os << "return_mean," << repr(cell.return_mean) << '\n';
  os << "return_std," << repr(cell.return_std) << '\n';
  os << "distraction_mean," << repr(cell.distraction_mean) << '\n';
  os << "distraction_std," << repr(cell.distraction_std) << '\n';
  os << "crash_rate," << repr(cell.crash_rate) << '\n';
  os << "alert_rate," << repr(cell.alert_rate) << '\n';
  std::string summary_name = "eval-" + profile.name + "-" + model_name + "-summary.csv";
  write_file_atomic(ctx.path(summary_name), os.str());
  ctx.record(summary_name, ctx.path(summary_name));

  std::cout << "eval " << profile.name << " vs " << model_name << ": return "
            << repr(cell.return_mean) << ", distraction " << repr(cell.distraction_mean) << "\n";
  return 0;
}

int cmd_embed(const RunConfig& cfg, RunContext& ctx) {
  if (cfg.encoder_ckpt.empty())
    throw ConfigError("embed", 0, "io.encoder_ckpt (or --encoder-ckpt) is required");
  if (cfg.dataset_path.empty())
    throw ConfigError("embed", 0, "io.dataset (or --dataset) is required");
  ContextEncoder encoder = ContextEncoder::load(resolve_artifact(cfg.encoder_ckpt));
  Dataset ds = load_dataset(resolve_artifact(cfg.dataset_path));
  int window = static_cast<int>(std::llround(
      cfg.traits.window_seconds / (ds.env_spec.tick_dt * ds.env_spec.ticks_per_action)));
  LatentReport report =
      latent_report(encoder, ds, cfg.eval_pools, cfg.traits.pool_size, window, cfg.seed);
  write_embeddings_csv(report, ctx.path("embeddings.csv"));
  ctx.record("embeddings.csv", ctx.path("embeddings.csv"));
  write_latent_summary_csv(report, ctx.path("latent-summary.csv"));
  ctx.record("latent-summary.csv", ctx.path("latent-summary.csv"));
  ctx.stat("averaged_pairwise_kl", report.cluster_kl.average);
  std::cout << "averaged pairwise KL: " << repr(report.cluster_kl.average) << "\n";
  return 0;
}

int cmd_report(const RunConfig& cfg, RunContext& ctx) {
  if (cfg.report_kind == "latent") return cmd_embed(cfg, ctx);

  EvalModels models;
  for (const auto& [name, path] : cfg.report_driver)
    models.driver_policies[archetype_profile(name).id] = load_policy(resolve_artifact(path));
  for (const auto& [name, path] : cfg.report_hmi)
    models.personalized_hmi[archetype_profile(name).id] = load_policy(resolve_artifact(path));
  if (!cfg.report_avg_hmi.empty())
    models.avg_hmi = load_policy(resolve_artifact(cfg.report_avg_hmi));

  EvalReport report = metrics_table(models, cfg.scenario, cfg.hmi_obs, cfg.eval_episodes,
                                    cfg.seed, cfg.eval_full_matrix, cfg.eval_threads);
  write_metrics_csv(report, ctx.path("metrics.csv"));
  ctx.record("metrics.csv", ctx.path("metrics.csv"));
  std::string text = format_metrics_text(report);
  write_file_atomic(ctx.path("metrics.txt"), text);
  ctx.record("metrics.txt", ctx.path("metrics.txt"));

  // Raw per-episode logs behind every populated cell.
  for (const auto& row : report.rows) {
    for (std::size_t col = 0; col < report.driver_ids.size(); ++col) {
      if (!row.cells[col]) continue;
      std::string name = "episodes-" + row.name + "-" + report.driver_names[col] + ".csv";
      write_episode_csv(*row.cells[col], ctx.path(name));
      ctx.record(name, ctx.path(name));
    }
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << text;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"HMIway-env: distracted-driving simulation, trait learning and"
               " intervention-policy training"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file (key = value lines)");
    sub->add_option_function<std::vector<std::string>>(
        "--set",
        [&overrides](const std::vector<std::string>& kvs) {
          for (const auto& kv : kvs) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
              throw CLI::ValidationError("--set expects key=value");
            overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
          }
        },
        "override a config key (key=value, repeatable)");
    sub->add_option_function<std::string>(
        "--out", [&overrides](const std::string& v) { overrides.emplace_back("io.out_dir", v); },
        "output directory");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&overrides](const std::uint64_t& v) { overrides.emplace_back("seed", std::to_string(v)); },
        "base seed");
  };

  auto opt = [&overrides](const std::string& key) {
    return [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); };
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a demonstration dataset");
  add_common(gen);
  gen->add_option_function<std::string>("--steps", opt("data.steps_per_type"),
                                        "recorded steps per driver type");
  gen->add_option_function<std::string>("--format", opt("data.format"), "jsonl|bin");

  CLI::App* traits = app.add_subcommand("train-traits", "latent trait learning (meta-adversarial IRL)");
  add_common(traits);
  traits->add_option_function<std::string>("--dataset", opt("io.dataset"), "dataset file");
  traits->add_option_function<std::string>("--mode", opt("traits.mode"),
                                           "unsupervised|driver_id|preference");
  traits->add_option_function<std::string>("--budget", opt("traits.budget"),
                                           "generator environment-step budget");
  traits->add_option_function<std::string>("--resume", opt("io.resume"),
                                           "trainer checkpoint to resume from");

  CLI::App* tdrv = app.add_subcommand("train-driver", "stage-1 driver policy (PPO)");
  add_common(tdrv);
  tdrv->add_option_function<std::string>("--profile", opt("train.profile"), "driver archetype");
  tdrv->add_option_function<std::string>("--budget", opt("train.driver_budget"), "env steps");

  CLI::App* thmi = app.add_subcommand("train-hmi", "stage-2 HMI alert policy (PPO)");
  add_common(thmi);
  thmi->add_option_function<std::string>("--profile", opt("train.profile"), "driver archetype");
  thmi->add_option_function<std::string>("--budget", opt("train.hmi_budget"), "env steps");
  thmi->add_option_function<std::string>("--driver-ckpt", opt("io.driver_ckpt"),
                                         "frozen stage-1 policy");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a driver/HMI pairing");
  add_common(ev);
  ev->add_option_function<std::string>("--profile", opt("train.profile"), "driver archetype");
  ev->add_option_function<std::string>("--driver-ckpt", opt("io.driver_ckpt"), "stage-1 policy");
  ev->add_option_function<std::string>("--hmi-ckpt", opt("io.hmi_ckpt"), "stage-2 policy");
  ev->add_flag_function(
      "--no-hmi", [&overrides](std::int64_t) { overrides.emplace_back("io.no_hmi", "true"); },
      "evaluate the constant no-alert baseline");
  ev->add_option_function<std::string>("--episodes", opt("eval.episodes"), "episode count");
  ev->add_option_function<std::string>("--threads", opt("eval.threads"), "evaluation threads");

  CLI::App* embed = app.add_subcommand("embed", "export latent embeddings for a dataset");
  add_common(embed);
  embed->add_option_function<std::string>("--encoder-ckpt", opt("io.encoder_ckpt"), "encoder");
  embed->add_option_function<std::string>("--dataset", opt("io.dataset"), "dataset file");
  embed->add_option_function<std::string>("--pools", opt("eval.pools"), "pools per driver");

  CLI::App* report = app.add_subcommand("report", "metrics table or latent separation report");
  add_common(report);
  report->add_option_function<std::string>("--kind", opt("report.kind"), "metrics|latent");
  report->add_option_function<std::string>("--episodes", opt("eval.episodes"), "episode count");
  report->add_option_function<std::string>("--encoder-ckpt", opt("io.encoder_ckpt"), "encoder");
  report->add_option_function<std::string>("--dataset", opt("io.dataset"), "dataset file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string command;
  for (CLI::App* sub : app.get_subcommands()) command = sub->get_name();

  try {
    KeyValueFile kv = config_path.empty()
                          ? KeyValueFile::parse_string("", "<defaults>")
                          : KeyValueFile::parse_file(config_path);
    for (const auto& [k, v] : overrides) kv.set(k, v);
    RunConfig cfg = RunConfig::from_kv(kv);
    kv.reject_unused();

    RunContext ctx(command, cfg.out_dir, kv, cfg.seed);
    try {
      int rc = 1;
      if (command == "gen-data") rc = cmd_gen_data(cfg, ctx);
      else if (command == "train-traits") rc = cmd_train_traits(cfg, ctx);
      else if (command == "train-driver") rc = cmd_train_driver(cfg, ctx);
      else if (command == "train-hmi") rc = cmd_train_hmi(cfg, ctx);
      else if (command == "eval") rc = cmd_eval(cfg, ctx);
      else if (command == "embed") rc = cmd_embed(cfg, ctx);
      else if (command == "report") rc = cmd_report(cfg, ctx);
      if (rc == 0) ctx.finish_ok();
      return rc;
    } catch (const std::exception& e) {
      ctx.finish_failed(e.what());
      throw;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args);
}

}  // namespace hmiway::cli
