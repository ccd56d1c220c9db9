// Command-line driver: run single scenarios, sweep seed batches, and print
// regressor rank diagnostics.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "orbit_inertia/io.hpp"

namespace oi = orbit_inertia;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitRuntime = 3;

struct RunResult {
  std::string scenario;
  std::uint64_t seed = 0;
  oi::ExperimentLog log;
  bool ok = false;
};

RunResult run_one(oi::Scenario scenario, std::uint64_t seed,
                  const std::filesystem::path& out_dir) {
  RunResult result;
  result.scenario = scenario.name;
  result.seed = seed;
  scenario.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  result.log = oi::run_experiment(scenario);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string stem = scenario.name + "_seed" + std::to_string(seed);
  std::filesystem::create_directories(out_dir);
  oi::write_trace_csv(out_dir / (stem + ".csv"), result.log);
  oi::write_summary_json(out_dir / (stem + ".json"), scenario, seed, result.log, wall);
  result.ok = result.log.completed;
  return result;
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed, const std::string& out_dir) {
  oi::Scenario scenario;
  try {
    scenario = oi::load_scenario(scenario_path);
  } catch (const oi::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  const RunResult result = run_one(scenario, seed, out_dir);
  std::cout << "scenario=" << result.scenario << " seed=" << seed
            << " final_D_phi=" << result.log.final_d_phi
            << " final_RMS=" << result.log.final_rms << "\n";
  if (!result.ok) {
    std::cerr << "error: run failed: " << result.log.error << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double idx = p * (v.size() - 1);
  const size_t lo = static_cast<size_t>(idx);
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - lo) * (v[hi] - v[lo]);
}

int cmd_sweep(const std::string& manifest_path) {
  nlohmann::json manifest;
  std::vector<oi::Scenario> scenarios;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  int parallelism = 1;
  try {
    std::ifstream in(manifest_path);
    if (!in) throw oi::ParseError("manifest file not found: " + manifest_path);
    in >> manifest;
    const auto base = std::filesystem::path(manifest_path).parent_path();
    for (const auto& p : manifest.at("scenarios")) {
      scenarios.push_back(oi::load_scenario(base / p.get<std::string>()));
    }
    for (const auto& s : manifest.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
    out_dir = manifest.value("out_dir", std::string("out"));
    parallelism = manifest.value("parallelism", 1);
    if (scenarios.empty() || seeds.empty()) {
      throw oi::ParseError("manifest: scenarios and seeds must be non-empty");
    }
    std::sort(seeds.begin(), seeds.end());
    if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) {
      throw oi::ParseError("manifest.seeds: duplicate seed");
    }
  } catch (const oi::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: manifest: " << e.what() << "\n";
    return kExitParse;
  }
  if (const char* env = std::getenv("ORBIT_INERTIA_THREADS")) {
    parallelism = std::min(parallelism, std::max(1, std::atoi(env)));
  }

  std::vector<RunResult> results(scenarios.size() * seeds.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> any_failed{false};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= results.size()) return;
      const size_t si = i / seeds.size();
      const size_t ki = i % seeds.size();
      results[i] = run_one(scenarios[si], seeds[ki], out_dir);
      if (!results[i].ok) any_failed = true;
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < parallelism; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream agg(out_dir / "aggregate.csv");
  agg << "scenario,n,median_final_D_phi,q25_final_D_phi,q75_final_D_phi,median_final_RMS\n";
  for (size_t si = 0; si < scenarios.size(); ++si) {
    std::vector<double> dphi, rms;
    for (size_t ki = 0; ki < seeds.size(); ++ki) {
      const auto& r = results[si * seeds.size() + ki];
      if (r.ok) {
        dphi.push_back(r.log.final_d_phi);
        rms.push_back(r.log.final_rms);
      }
    }
    if (dphi.empty()) continue;
    agg << scenarios[si].name << ',' << dphi.size() << ',' << oi::fmt_g17(quantile(dphi, 0.5))
        << ',' << oi::fmt_g17(quantile(dphi, 0.25)) << ',' << oi::fmt_g17(quantile(dphi, 0.75))
        << ',' << oi::fmt_g17(quantile(rms, 0.5)) << "\n";
  }
  return any_failed ? kExitRuntime : kExitOk;
}

int cmd_rank(const std::string& model_path, int n_samples, std::uint64_t seed) {
  oi::MultibodyModel model;
  try {
    model = oi::load_model(model_path);
    if (n_samples <= 0) throw oi::ParseError("rank: --samples must be positive");
  } catch (const oi::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  oi::Rng rng(oi::derive_stream(seed, 0));
  const auto labels = oi::parameter_labels(model);
  const int nj = model.num_revolute();

  auto random_state = [&] {
    oi::RobotState s = oi::RobotState::Rest(model);
    if (model.floating()) {
      const oi::Vec3 axis = rng.unit_vector();
      Eigen::Quaterniond q(Eigen::AngleAxisd(rng.uniform(-3.0, 3.0), axis));
      s.q[0] = q.w();
      s.q.segment<3>(1) = q.vec();
      s.q.segment<3>(4) = rng.uniform_vec3();
    }
    for (int i = 0; i < nj; ++i) s.q[model.q_joint_offset() + i] = rng.uniform(-3.0, 3.0);
    for (Eigen::Index i = 0; i < s.nu.size(); ++i) s.nu[i] = rng.uniform();
    return s;
  };

  auto report = [&](const char* what, const std::vector<oi::RegressorSample>& samples) {
    const auto [rank, sel] = oi::base_parameter_analysis(samples, 1e-8, labels);
    std::cout << what << " regressor rank: " << rank << " of " << 10 * model.num_links() << "\n";
    std::cout << "pivot columns:";
    for (const auto& l : sel.labels) std::cout << ' ' << l;
    std::cout << "\n";
    int hit = 0;
    const int ee0 = 10 * model.end_effector;
    for (int idx : sel.indices) {
      if (idx >= ee0 && idx < ee0 + 10) ++hit;
    }
    std::cout << "target (end-effector) parameters independent: " << hit << "/10\n";
  };

  std::vector<oi::RegressorSample> force_samples;
  std::vector<oi::RegressorSample> momentum_samples;
  for (int k = 0; k < n_samples; ++k) {
    const oi::RobotState s = random_state();
    const oi::VecX nudot = [&] {
      oi::VecX a(model.dof());
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform();
      return a;
    }();
    oi::RegressorSample fs;
    fs.matrix = oi::force_regressor(model, s.q, s.nu, nudot);
    fs.measurement = oi::VecX::Zero(model.dof());
    fs.weight = oi::MatX::Identity(model.dof(), model.dof());
    fs.time = k;
    force_samples.push_back(std::move(fs));
    if (model.floating()) {
      oi::RegressorSample ms;
      ms.kind = oi::RegressorKind::Momentum;
      ms.matrix = oi::momentum_regressor(model, s.q, s.nu);
      ms.measurement = oi::VecX::Zero(6);
      ms.weight = oi::MatX::Identity(6, 6);
      ms.time = k;
      momentum_samples.push_back(std::move(ms));
    }
  }
  report("force", force_samples);
  if (model.floating()) {
    report("momentum", momentum_samples);
  } else {
    std::cout << "momentum regressor skipped: model has a fixed base\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inertial parameter identification experiments"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", manifest_path, model_path;
  std::uint64_t seed = 0;
  int n_samples = 100;

  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--seed", seed, "random seed");
  run->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run a (scenario x seed) batch");
  sweep->add_option("--manifest", manifest_path, "manifest JSON file")->required();

  auto* rank = app.add_subcommand("rank", "base-parameter rank diagnostics");
  rank->add_option("--model", model_path, "model JSON file")->required();
  rank->add_option("--samples", n_samples, "number of random states");
  rank->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (run->parsed()) return cmd_run(scenario_path, seed, out_dir);
    if (sweep->parsed()) return cmd_sweep(manifest_path);
    if (rank->parsed()) return cmd_rank(model_path, n_samples, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitParse;
}
