#include "hmiway/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

namespace {

EpisodeRow run_episode(DriverController& driver, HmiController& hmi, const DriverProfile& profile,
                       const ScenarioConfig& scenario, const HmiObsConfig& hmi_obs, int index,
                       std::uint64_t seed) {
  HmiwayEnv env(scenario, profile, hmi_obs);
  Rng driver_rng(derive_seed(seed, "eval-driver"));
  Rng hmi_rng(derive_seed(seed, "eval-hmi"));

  EpisodeRow row;
  row.episode = index;
  row.seed = seed;

  StepOutputs out = env.reset(seed);
  int alerts = 0;
  int attentive_steps = 0;
  int alerts_while_attentive = 0;
  while (!out.done) {
    int d_prev = env.state().cog.d;
    HumanAction a_h = driver.act(env, out.driver_obs, driver_rng);
    std::vector<double> hmi_view = env.hmi_observation(a_h);
    AIAction a_a = hmi.act(hmi_view, hmi_rng);
    out = env.step(a_h, a_a);

    row.high_speed_return += out.rewards.speed;
    row.distraction_total += out.rewards.distraction;
    row.total_reward += out.rewards.total();
    row.steps += 1;
    if (a_a == AIAction::kAlert) ++alerts;
    if (d_prev == 0) {
      ++attentive_steps;
      if (a_a == AIAction::kAlert) ++alerts_while_attentive;
    }
    row.crashed = row.crashed || out.info.crashed;
  }
  row.alert_fraction = row.steps > 0 ? static_cast<double>(alerts) / row.steps : 0.0;
  row.alert_while_attentive =
      attentive_steps > 0 ? static_cast<double>(alerts_while_attentive) / attentive_steps : 0.0;
  return row;
}

}  // namespace

EvalCell summarize_rows(std::vector<EpisodeRow> rows) {
  EvalCell cell;
  cell.episodes = static_cast<int>(rows.size());
  std::vector<double> returns, distractions;
  double crashes = 0.0, alerts = 0.0;
  for (const auto& r : rows) {
    returns.push_back(r.high_speed_return);
    distractions.push_back(r.distraction_total);
    crashes += r.crashed ? 1.0 : 0.0;
    alerts += r.alert_fraction;
  }
  if (!rows.empty()) {
    cell.return_mean = mean(returns);
    cell.return_std = sample_std(returns);
    cell.distraction_mean = mean(distractions);
    cell.distraction_std = sample_std(distractions);
    cell.crash_rate = crashes / static_cast<double>(rows.size());
    cell.alert_rate = alerts / static_cast<double>(rows.size());
  }
  cell.rows = std::move(rows);
  return cell;
}

EvalCell evaluate(DriverController& driver, HmiController& hmi, const DriverProfile& profile,
                  const ScenarioConfig& scenario, const HmiObsConfig& hmi_obs, int n_episodes,
                  std::uint64_t seed, int threads) {
  if (n_episodes < 1) throw ContractError("evaluate: n_episodes must be >= 1");
  if (threads <= 0)
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, n_episodes);

  std::vector<EpisodeRow> rows(static_cast<std::size_t>(n_episodes));
  if (threads == 1) {
    for (int e = 0; e < n_episodes; ++e)
      rows[static_cast<std::size_t>(e)] = run_episode(driver, hmi, profile, scenario, hmi_obs, e,
                                                      derive_seed(seed, static_cast<std::uint64_t>(e)));
  } else {
    // Controllers are shared read-only; each episode builds its own env and
    // rng streams, and rows land at their episode index.
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w]() {
        for (int e = w; e < n_episodes; e += threads)
          rows[static_cast<std::size_t>(e)] = run_episode(
              driver, hmi, profile, scenario, hmi_obs, e,
              derive_seed(seed, static_cast<std::uint64_t>(e)));
      });
    }
    for (auto& t : pool) t.join();
  }
  return summarize_rows(std::move(rows));
}

void write_episode_csv(const EvalCell& cell, const std::string& path) {
  std::ostringstream os;
  os << "episode,seed,high_speed_return,distraction_total,total_reward,steps,crashed,"
        "alert_fraction,alert_while_attentive\n";
  for (const auto& r : cell.rows) {
    os << r.episode << ',' << r.seed << ',' << repr(r.high_speed_return) << ','
       << repr(r.distraction_total) << ',' << repr(r.total_reward) << ',' << r.steps << ','
       << (r.crashed ? 1 : 0) << ',' << repr(r.alert_fraction) << ','
       << repr(r.alert_while_attentive) << '\n';
  }
  write_file_atomic(path, os.str());
}

EvalReport metrics_table(const EvalModels& models, const ScenarioConfig& scenario,
                         const HmiObsConfig& hmi_obs, int n_episodes, std::uint64_t seed,
                         bool full_matrix, int threads) {
  EvalReport report;
  for (const auto& p : archetype_registry()) {
    if (p.name == "Avg") continue;
    report.driver_ids.push_back(p.id);
    report.driver_names.push_back(p.name);
  }
  const std::size_t n_drivers = report.driver_ids.size();

  auto driver_controller = [&](int driver_id) -> const PolicyNet* {
    auto it = models.driver_policies.find(driver_id);
    return it == models.driver_policies.end() ? nullptr : &it->second.policy;
  };

  auto eval_cell = [&](int driver_id, HmiController& hmi, std::uint64_t cell_seed)
      -> std::optional<EvalCell> {
    const PolicyNet* drv = driver_controller(driver_id);
    if (!drv) return std::nullopt;
    PolicyDriverController dc(drv);
    DriverProfile profile = archetype_profile(driver_id);
    return evaluate(dc, hmi, profile, scenario, hmi_obs, n_episodes, cell_seed, threads);
  };

  // Rows 1..4: driver-specific HMI models, diagonal cells only by default.
  for (std::size_t col = 0; col < n_drivers; ++col) {
    int row_driver = report.driver_ids[col];
    EvalReportRow row;
    row.name = report.driver_names[col];
    row.cells.assign(n_drivers, std::nullopt);
    auto it = models.personalized_hmi.find(row_driver);
    if (it == models.personalized_hmi.end()) {
      report.warnings.push_back("missing personalized HMI model for " + row.name +
                                "; row omitted");
      continue;
    }
    PolicyHmiController hmi(&it->second.policy);
    for (std::size_t target = 0; target < n_drivers; ++target) {
      if (!full_matrix && target != col) continue;
      row.cells[target] = eval_cell(report.driver_ids[target], hmi,
                                    derive_seed(seed, fnv1a64(row.name) + target));
      if (!row.cells[target])
        report.warnings.push_back("missing stage-1 driver policy for column " +
                                  report.driver_names[target]);
    }
    report.rows.push_back(std::move(row));
  }

  // Row 5: AvgHMI on every driver.
  {
    EvalReportRow row;
    row.name = "AvgHMI";
    row.cells.assign(n_drivers, std::nullopt);
    if (models.avg_hmi) {
      PolicyHmiController hmi(&models.avg_hmi->policy);
      for (std::size_t target = 0; target < n_drivers; ++target)
        row.cells[target] = eval_cell(report.driver_ids[target], hmi,
                                      derive_seed(seed, fnv1a64("AvgHMI") + target));
      report.rows.push_back(std::move(row));
    } else {
      report.warnings.push_back("missing AvgHMI model; row omitted");
    }
  }

  // Row 6: NoHMI (constant no-alert) on every driver.
  {
    EvalReportRow row;
    row.name = "NoHMI";
    row.cells.assign(n_drivers, std::nullopt);
    ConstantHmiController hmi(AIAction::kNoAlert);
    for (std::size_t target = 0; target < n_drivers; ++target)
      row.cells[target] = eval_cell(report.driver_ids[target], hmi,
                                    derive_seed(seed, fnv1a64("NoHMI") + target));
    report.rows.push_back(std::move(row));
  }

  // Summary averages over the four per-driver cells of each model family.
  auto summarize = [&](const std::string& row_name, bool diagonal, double* ret, double* dis) {
    double r = 0.0, d = 0.0;
    int n = 0;
    for (std::size_t col = 0; col < n_drivers; ++col) {
      const EvalReportRow* row = nullptr;
      for (const auto& candidate : report.rows) {
        if (diagonal ? candidate.name == report.driver_names[col] : candidate.name == row_name)
          row = &candidate;
      }
      if (!row || !row->cells[col]) continue;
      r += row->cells[col]->return_mean;
      d += row->cells[col]->distraction_mean;
      ++n;
    }
    if (n > 0) {
      *ret = r / n;
      *dis = d / n;
    }
  };
  summarize("", true, &report.personalized_return_avg, &report.personalized_distraction_avg);
  summarize("AvgHMI", false, &report.avg_hmi_return_avg, &report.avg_hmi_distraction_avg);
  summarize("NoHMI", false, &report.nohmi_return_avg, &report.nohmi_distraction_avg);
  return report;
}

void write_metrics_csv(const EvalReport& report, const std::string& path) {
  std::ostringstream os;
  os << "row,driver,metric,mean,std,episodes,crash_rate,alert_rate\n";
  for (const auto& row : report.rows) {
    for (std::size_t col = 0; col < report.driver_ids.size(); ++col) {
      if (!row.cells[col]) continue;
      const EvalCell& c = *row.cells[col];
      os << row.name << ',' << report.driver_names[col] << ",high_speed_return,"
         << repr(c.return_mean) << ',' << repr(c.return_std) << ',' << c.episodes << ','
         << repr(c.crash_rate) << ',' << repr(c.alert_rate) << '\n';
      os << row.name << ',' << report.driver_names[col] << ",distraction_reward,"
         << repr(c.distraction_mean) << ',' << repr(c.distraction_std) << ',' << c.episodes << ','
         << repr(c.crash_rate) << ',' << repr(c.alert_rate) << '\n';
    }
  }
  os << "summary,personalized,high_speed_return," << repr(report.personalized_return_avg)
     << ",,,,\n";
  os << "summary,personalized,distraction_reward," << repr(report.personalized_distraction_avg)
     << ",,,,\n";
  os << "summary,AvgHMI,high_speed_return," << repr(report.avg_hmi_return_avg) << ",,,,\n";
  os << "summary,AvgHMI,distraction_reward," << repr(report.avg_hmi_distraction_avg) << ",,,,\n";
  os << "summary,NoHMI,high_speed_return," << repr(report.nohmi_return_avg) << ",,,,\n";
  os << "summary,NoHMI,distraction_reward," << repr(report.nohmi_distraction_avg) << ",,,,\n";
  write_file_atomic(path, os.str());
}

std::string format_metrics_text(const EvalReport& report) {
  std::ostringstream os;
  auto table = [&](const char* title, auto value) {
    os << title << "\n";
    os << "          ";
    for (const auto& name : report.driver_names) os << ' ' << name;
    os << '\n';
    for (const auto& row : report.rows) {
      os << row.name;
      for (std::size_t k = row.name.size(); k < 10; ++k) os << ' ';
      for (std::size_t col = 0; col < report.driver_ids.size(); ++col) {
        char buf[24];
        if (row.cells[col])
          std::snprintf(buf, sizeof(buf), " %8.1f", value(*row.cells[col]));
        else
          std::snprintf(buf, sizeof(buf), " %8s", "*");
        os << buf;
      }
      os << '\n';
    }
  };
  table("High-speed return", [](const EvalCell& c) { return c.return_mean; });
  os << '\n';
  table("Distraction reward", [](const EvalCell& c) { return c.distraction_mean; });
  os << '\n';
  os << "Summary (mean over drivers)\n";
  os << "  personalized: return " << repr(report.personalized_return_avg) << ", distraction "
     << repr(report.personalized_distraction_avg) << '\n';
  os << "  AvgHMI:       return " << repr(report.avg_hmi_return_avg) << ", distraction "
     << repr(report.avg_hmi_distraction_avg) << '\n';
  os << "  NoHMI:        return " << repr(report.nohmi_return_avg) << ", distraction "
     << repr(report.nohmi_distraction_avg) << '\n';
  for (const auto& w : report.warnings) os << "warning: " << w << '\n';
  return os.str();
}

double linear_probe_accuracy(const std::vector<std::vector<double>>& features,
                             const std::vector<int>& labels, std::uint64_t seed,
                             double train_fraction) {
  if (features.size() != labels.size() || features.empty())
    throw ContractError("linear_probe_accuracy: feature/label size mismatch");
  const std::size_t dim = features.front().size();

  std::vector<int> idx(features.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k);
  Rng rng(derive_seed(seed, "probe-split"));
  rng.shuffle(idx);
  std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size()))));
  n_train = std::min(n_train, idx.size() - 1);

  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  const double lr = 0.5;
  const int iters = 2000;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    for (std::size_t k = 0; k < n_train; ++k) {
      const auto& x = features[static_cast<std::size_t>(idx[k])];
      double y = labels[static_cast<std::size_t>(idx[k])] ? 1.0 : 0.0;
      double s = b;
      for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
      double p = 1.0 / (1.0 + std::exp(-s));
      double err = (p - y) / static_cast<double>(n_train);
      for (std::size_t d = 0; d < dim; ++d) gw[d] += err * x[d];
      gb += err;
    }
    for (std::size_t d = 0; d < dim; ++d) w[d] -= lr * gw[d];
    b -= lr * gb;
  }

  int correct = 0;
  int total = 0;
  for (std::size_t k = n_train; k < idx.size(); ++k) {
    const auto& x = features[static_cast<std::size_t>(idx[k])];
    double s = b;
    for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
    int pred = s >= 0 ? 1 : 0;
    if (pred == labels[static_cast<std::size_t>(idx[k])]) ++correct;
    ++total;
  }
  return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

LatentReport latent_report(const ContextEncoder& encoder, const Dataset& dataset, int n_pools,
                           int pool_size, int window_steps, std::uint64_t seed) {
  if (n_pools < 2) throw ContractError("latent_report: need at least 2 pools per driver");
  PoolSampler sampler(dataset, pool_size, window_steps);
  Rng rng(derive_seed(seed, "latent-report"));

  LatentReport report;
  std::map<int, std::vector<std::vector<double>>> mus;
  std::vector<std::vector<double>> features;
  std::vector<int> distract_labels, pref_labels;

  for (int driver : sampler.eligible_drivers(false)) {
    const DriverProfile& profile = dataset.profile_for(driver);
    for (int k = 0; k < n_pools; ++k) {
      PooledBatch batch = sampler.sample_pool(driver, rng);
      auto seqs = sequences_from_batch(dataset, batch);
      LatentTrait trait = encoder.encode_pool(seqs, &rng);
      LatentReportRow row;
      row.driver_id = driver;
      row.mu = trait.mu;
      row.log_var = trait.log_var;
      row.z = trait.z;
      mus[driver].push_back(trait.mu);
      features.push_back(trait.mu);
      distract_labels.push_back(profile.distract_label == Distractibility::kHigh ? 1 : 0);
      pref_labels.push_back(profile.pref_label == Preference::kHigh ? 1 : 0);
      report.embeddings.push_back(std::move(row));
    }
  }
  for (int skipped : sampler.skipped_drivers(false))
    report.warnings.push_back("driver " + std::to_string(skipped) +
                              " skipped: insufficient segments for pooling");
  if (mus.size() < 2)
    throw ContractError("latent_report: fewer than two drivers have enough pools");

  report.cluster_kl = pairwise_cluster_kl(mus);
  if (report.cluster_kl.variance_floored)
    report.warnings.push_back("degenerate embedding covariance floored at 1e-8");
  report.probe_distraction_accuracy =
      linear_probe_accuracy(features, distract_labels, derive_seed(seed, "probe-distraction"));
  report.probe_preference_accuracy =
      linear_probe_accuracy(features, pref_labels, derive_seed(seed, "probe-preference"));
  return report;
}

void write_embeddings_csv(const LatentReport& report, const std::string& path) {
  std::ostringstream os;
  os << "driver";
  if (!report.embeddings.empty()) {
    for (std::size_t d = 0; d < report.embeddings.front().mu.size(); ++d) os << ",mu" << d;
    for (std::size_t d = 0; d < report.embeddings.front().log_var.size(); ++d)
      os << ",log_var" << d;
    for (std::size_t d = 0; d < report.embeddings.front().z.size(); ++d) os << ",z" << d;
  }
  os << '\n';
  for (const auto& row : report.embeddings) {
    os << row.driver_id;
    for (double x : row.mu) os << ',' << repr(x);
    for (double x : row.log_var) os << ',' << repr(x);
    for (double x : row.z) os << ',' << repr(x);
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

void write_latent_summary_csv(const LatentReport& report, const std::string& path) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "averaged_pairwise_kl," << repr(report.cluster_kl.average) << '\n';
  os << "probe_distraction_accuracy," << repr(report.probe_distraction_accuracy) << '\n';
  os << "probe_preference_accuracy," << repr(report.probe_preference_accuracy) << '\n';
  for (std::size_t i = 0; i < report.cluster_kl.drivers.size(); ++i)
    for (std::size_t j = i + 1; j < report.cluster_kl.drivers.size(); ++j)
      os << "kl_" << report.cluster_kl.drivers[i] << '_' << report.cluster_kl.drivers[j] << ','
         << repr(report.cluster_kl.kl[i][j]) << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace hmiway
