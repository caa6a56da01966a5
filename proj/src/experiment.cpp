#include "fedcost/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace fedcost {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

// Reads typed fields from one JSON object, recording every problem instead
// of stopping at the first.
class Fields {
 public:
  Fields(const json& obj, std::string path, std::vector<std::string>& problems,
         std::initializer_list<const char*> allowed)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) {
      problems_.push_back(where("") + " must be an object");
      return;
    }
    for (const auto& [key, _] : obj_.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) problems_.push_back("unknown key " + where(key));
    }
  }

  bool has(const char* key) const { return obj_.is_object() && obj_.contains(key); }

  template <class T>
  void read(const char* key, T& out) {
    if (!has(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back(where(key) + " has the wrong type");
    }
  }

  template <class T>
  void read(const char* key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    read(key, v);
    out = v;
  }

  void require(const char* key) {
    if (!has(key)) problems_.push_back("missing " + where(key));
  }

  void check(bool ok, const char* key, const std::string& what) {
    if (!ok) problems_.push_back(where(key) + " " + what);
  }

  const json& at(const char* key) const { return obj_.at(key); }
  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
};

void parse_dataset(const json& j, DatasetConfig& out, std::vector<std::string>& problems) {
  Fields f(j, "dataset", problems,
           {"kind", "alpha", "beta", "n_clients", "size_mean", "size_std", "num_features",
            "num_classes", "images", "labels", "labels_per_client", "samples_per_client"});
  std::string kind = "synthetic";
  f.read("kind", kind);
  if (kind == "synthetic") {
    out.kind = DatasetConfig::Kind::kSynthetic;
    auto& s = out.synthetic;
    f.read("alpha", s.alpha);
    f.read("beta", s.beta);
    f.read("n_clients", s.n_clients);
    f.read("size_mean", s.size_mean);
    f.read("size_std", s.size_std);
    f.read("num_features", s.num_features);
    f.read("num_classes", s.num_classes);
    f.check(s.alpha >= 0.0 && std::isfinite(s.alpha), "alpha", "must be finite and >= 0");
    f.check(s.beta >= 0.0 && std::isfinite(s.beta), "beta", "must be finite and >= 0");
    f.check(s.n_clients >= 1, "n_clients", "must be >= 1");
    f.check(s.size_mean > 0.0, "size_mean", "must be > 0");
    f.check(s.size_std >= 0.0, "size_std", "must be >= 0");
    f.check(s.num_features >= 1, "num_features", "must be >= 1");
    f.check(s.num_classes >= 2, "num_classes", "must be >= 2");
  } else if (kind == "idx") {
    out.kind = DatasetConfig::Kind::kIdx;
    std::string images, labels;
    f.require("images");
    f.require("labels");
    f.read("images", images);
    f.read("labels", labels);
    out.images = images;
    out.labels = labels;
    auto& p = out.partition;
    f.read("n_clients", p.n_clients);
    f.read("labels_per_client", p.labels_per_client);
    f.read("samples_per_client", p.samples_per_client);
    f.check(p.n_clients >= 1, "n_clients", "must be >= 1");
    f.check(p.labels_per_client >= 1, "labels_per_client", "must be >= 1");
    f.check(p.samples_per_client >= p.labels_per_client, "samples_per_client",
            "must be >= labels_per_client");
  } else {
    f.check(false, "kind", "must be \"synthetic\" or \"idx\"");
  }
}

void parse_system(const json& j, ExperimentConfig& out, std::vector<std::string>& problems) {
  Fields f(j, "system", problems,
           {"profile_file", "t_p_mean", "t_p_std", "e_p_mean", "e_p_std", "t_m_mean", "e_m_mean",
            "comm_spread", "jitter"});
  if (f.has("profile_file")) {
    std::string path;
    f.read("profile_file", path);
    out.profile_file = path;
    return;
  }
  ProfileSpec s;
  f.read("t_p_mean", s.t_p_mean);
  f.read("t_p_std", s.t_p_std);
  f.read("e_p_mean", s.e_p_mean);
  f.read("e_p_std", s.e_p_std);
  f.read("t_m_mean", s.t_m_mean);
  f.read("e_m_mean", s.e_m_mean);
  f.read("comm_spread", s.comm_spread);
  f.read("jitter", s.jitter);
  f.check(s.t_p_mean > 0.0, "t_p_mean", "must be > 0");
  f.check(s.e_p_mean > 0.0, "e_p_mean", "must be > 0");
  f.check(s.t_m_mean > 0.0, "t_m_mean", "must be > 0");
  f.check(s.e_m_mean > 0.0, "e_m_mean", "must be > 0");
  f.check(s.t_p_std >= 0.0, "t_p_std", "must be >= 0");
  f.check(s.comm_spread >= 0.0, "comm_spread", "must be >= 0");
  f.check(s.jitter >= 0.0, "jitter", "must be >= 0");
  out.profile_spec = s;
}

void parse_training(const json& j, TrainConfig& t, std::vector<std::string>& problems) {
  Fields f(j, "training", problems,
           {"batch_size", "eta0", "max_rounds", "target_loss", "scheduler", "threads"});
  f.read("batch_size", t.batch_size);
  f.read("eta0", t.eta0);
  f.read("max_rounds", t.max_rounds);
  f.read("target_loss", t.target_loss);
  f.read("threads", t.threads);
  std::string sched = std::string(to_string(t.strategy));
  f.read("scheduler", sched);
  if (auto s = parse_strategy(sched)) {
    t.strategy = *s;
  } else {
    f.check(false, "scheduler", "must be optimal_ts, wait_all_ts or static_fs");
  }
  f.check(t.batch_size >= 1, "batch_size", "must be >= 1");
  f.check(t.eta0 >= 0.0 && std::isfinite(t.eta0), "eta0", "must be finite and >= 0");
  f.check(t.max_rounds >= 1, "max_rounds", "must be >= 1");
  f.check(t.threads >= 1, "threads", "must be >= 1");
}

int client_count(const ExperimentConfig& c) {
  return c.dataset.kind == DatasetConfig::Kind::kSynthetic ? c.dataset.synthetic.n_clients
                                                            : c.dataset.partition.n_clients;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config:\n" + join_lines(problems)), problems_(std::move(problems)) {}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  std::vector<std::string> problems;
  ExperimentConfig cfg;
  Fields f(root, "", problems,
           {"seed", "output_dir", "gamma", "mode", "dataset", "system", "training", "control", "rho",
            "estimation", "acs", "grid", "sweeps", "properties"});
  if (!root.is_object()) throw ConfigError(problems);

  f.read("seed", cfg.seed);
  std::string out_dir = cfg.output_dir.string();
  f.read("output_dir", out_dir);
  cfg.output_dir = out_dir;
  f.read("gamma", cfg.gamma);
  f.check(cfg.gamma >= 0.0 && cfg.gamma <= 1.0, "gamma", "must lie in [0,1]");

  std::string mode = "fixed";
  f.read("mode", mode);
  if (mode == "fixed") {
    cfg.mode = ControlMode::kFixed;
  } else if (mode == "optimize") {
    cfg.mode = ControlMode::kOptimize;
  } else if (mode == "grid") {
    cfg.mode = ControlMode::kGrid;
  } else {
    f.check(false, "mode", "must be exactly one of fixed, optimize, grid");
  }

  if (f.has("dataset")) parse_dataset(f.at("dataset"), cfg.dataset, problems);
  if (f.has("system")) {
    parse_system(f.at("system"), cfg, problems);
  } else {
    cfg.profile_spec = ProfileSpec{};
  }
  if (f.has("training")) parse_training(f.at("training"), cfg.training, problems);

  const int n = client_count(cfg);
  if (f.has("control")) {
    Fields c(f.at("control"), "control", problems, {"K", "E"});
    c.read("K", cfg.fixed_k);
    c.read("E", cfg.fixed_e);
    c.check(cfg.fixed_k >= 1 && cfg.fixed_k <= n, "K", "must lie in [1, n_clients]");
    c.check(cfg.fixed_e >= 1, "E", "must be >= 1");
  } else if (cfg.mode == ControlMode::kFixed) {
    f.check(false, "control", "is required in fixed mode");
  }

  f.read("rho", cfg.rho);
  if (cfg.rho) f.check(*cfg.rho > 0.0 && std::isfinite(*cfg.rho), "rho", "must be finite and > 0");
  if (f.has("estimation")) {
    Fields e(f.at("estimation"), "estimation", problems, {"pilots", "loss_a", "loss_b", "max_rounds"});
    EstimationPlan plan;
    e.require("pilots");
    e.require("loss_a");
    e.require("loss_b");
    e.read("pilots", plan.pilots);
    e.read("loss_a", plan.loss_a);
    e.read("loss_b", plan.loss_b);
    e.read("max_rounds", plan.max_rounds);
    e.check(plan.pilots.size() >= 2, "pilots", "needs at least two (K, E) pairs");
    for (const auto& [k, ee] : plan.pilots)
      e.check(k >= 1 && k <= n && ee >= 1, "pilots", "entries must satisfy 1 <= K <= n_clients, E >= 1");
    e.check(plan.loss_b < plan.loss_a, "loss_b", "must be below loss_a");
    e.check(plan.max_rounds >= 1, "max_rounds", "must be >= 1");
    cfg.estimation = plan;
  }
  if (cfg.rho && cfg.estimation)
    f.check(false, "rho", "and estimation are mutually exclusive");

  if (f.has("acs")) {
    Fields a(f.at("acs"), "acs", problems, {"k0", "e0", "tolerance", "max_sweeps", "e_max"});
    a.read("k0", cfg.acs.k0);
    a.read("e0", cfg.acs.e0);
    a.read("tolerance", cfg.acs.tolerance);
    a.read("max_sweeps", cfg.acs.max_sweeps);
    a.read("e_max", cfg.acs.e_max);
    a.check(cfg.acs.k0 >= 1 && cfg.acs.k0 <= n, "k0", "must lie in [1, n_clients]");
    a.check(cfg.acs.e0 >= 1 && cfg.acs.e0 <= cfg.acs.e_max, "e0", "must lie in [1, e_max]");
    a.check(cfg.acs.tolerance > 0.0, "tolerance", "must be > 0");
    a.check(cfg.acs.max_sweeps >= 1, "max_sweeps", "must be >= 1");
  }

  if (f.has("grid")) {
    Fields g(f.at("grid"), "grid", problems, {"K", "E"});
    g.require("K");
    g.require("E");
    g.read("K", cfg.grid_k);
    g.read("E", cfg.grid_e);
    for (int k : cfg.grid_k) g.check(k >= 1 && k <= n, "K", "entries must lie in [1, n_clients]");
    for (int e : cfg.grid_e) g.check(e >= 1, "E", "entries must be >= 1");
  } else if (cfg.mode == ControlMode::kGrid) {
    f.check(false, "grid", "is required in grid mode");
  }

  if (f.has("sweeps")) {
    const auto& arr = f.at("sweeps");
    if (!arr.is_array()) {
      f.check(false, "sweeps", "must be an array");
    } else {
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Fields s(arr[i], "sweeps[" + std::to_string(i) + "]", problems, {"vary", "values", "K", "E"});
        SchedulerSweep sw;
        std::string vary;
        s.require("vary");
        s.require("values");
        s.read("vary", vary);
        s.read("values", sw.values);
        if (vary == "E") {
          sw.axis = SchedulerSweep::Axis::kE;
          s.require("K");
          s.read("K", sw.fixed);
          s.check(sw.fixed >= 1 && sw.fixed <= n, "K", "must lie in [1, n_clients]");
          for (int v : sw.values) s.check(v >= 1, "values", "entries must be >= 1");
        } else if (vary == "K") {
          sw.axis = SchedulerSweep::Axis::kK;
          s.require("E");
          s.read("E", sw.fixed);
          s.check(sw.fixed >= 1, "E", "must be >= 1");
          for (int v : sw.values) s.check(v >= 1 && v <= n, "values", "entries must lie in [1, n_clients]");
        } else {
          s.check(false, "vary", "must be \"E\" or \"K\"");
        }
        s.check(!sw.values.empty(), "values", "must not be empty");
        cfg.sweeps.push_back(sw);
      }
    }
  }

  if (f.has("properties")) {
    Fields p(f.at("properties"), "properties", problems,
             {"gammas", "multipliers", "fixed_e", "fixed_k", "mid_gamma", "k_values", "e_max"});
    auto& g = cfg.properties;
    p.read("gammas", g.gammas);
    p.read("multipliers", g.multipliers);
    p.read("fixed_e", g.fixed_e);
    p.read("fixed_k", g.fixed_k);
    p.read("mid_gamma", g.mid_gamma);
    p.read("k_values", g.k_values);
    p.read("e_max", g.e_max);
    p.check(g.fixed_e >= 1.0, "fixed_e", "must be >= 1");
    p.check(g.fixed_k >= 1.0 && g.fixed_k <= n, "fixed_k", "must lie in [1, n_clients]");
    p.check(g.mid_gamma > 0.0 && g.mid_gamma < 1.0, "mid_gamma", "must lie in (0,1)");
    p.check(g.e_max >= 2, "e_max", "must be >= 2");
  }

  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

Environment build_environment(const ExperimentConfig& config) {
  Environment env;
  const std::uint64_t data_seed = stream_seed(config.seed, "dataset");
  if (config.dataset.kind == DatasetConfig::Kind::kSynthetic) {
    SyntheticSpec spec = config.dataset.synthetic;
    spec.seed = data_seed;
    env.dataset = gen_synthetic(spec);
  } else {
    const auto pool = load_idx(config.dataset.images, config.dataset.labels);
    LabelPartitionSpec spec = config.dataset.partition;
    spec.seed = data_seed;
    env.dataset = partition_by_label(pool, spec);
  }
  if (config.profile_file) {
    std::ifstream in(*config.profile_file);
    if (!in) throw std::runtime_error("cannot open profile file " + config.profile_file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    env.profile = profile_from_json(buf.str());
  } else {
    ProfileSpec spec = config.profile_spec.value_or(ProfileSpec{});
    spec.n_clients = env.dataset.num_clients();
    spec.seed = stream_seed(config.seed, "profile");
    env.profile = sample_profile(spec);
  }
  if (env.profile.num_clients() != env.dataset.num_clients())
    throw std::invalid_argument("system profile has " + std::to_string(env.profile.num_clients()) +
                                " clients but the dataset has " +
                                std::to_string(env.dataset.num_clients()));
  return env;
}

TrainConfig training_for(const ExperimentConfig& config, int k, int e, std::string_view tag) {
  TrainConfig t = config.training;
  t.clients_per_round = k;
  t.local_steps = e;
  t.seed = stream_seed(config.seed, tag);
  return t;
}

OptimizeOutcome optimize(const ExperimentConfig& config, const Environment& env) {
  OptimizeOutcome out;
  if (config.rho) {
    out.rho = *config.rho;
  } else if (config.estimation) {
    const auto est = estimate_rho(*config.estimation, env.dataset, env.profile,
                                  training_for(config, 1, 1, "estimation"));
    out.rho = est.estimate.rho;
    out.pilots = est.pilots;
  } else {
    throw ConfigError({"optimize needs either rho or an estimation plan"});
  }
  const auto costs = averaged_costs(env.profile, config.gamma);
  out.solution = acs_optimize(costs, ConvergenceCoeffs{out.rho}, config.acs);
  if (!out.pilots.empty()) out.overhead_ratio = estimation_overhead(out.pilots, out.solution);
  return out;
}

std::vector<GridRun> grid_runs(const ExperimentConfig& config, const Environment& env) {
  std::vector<GridRun> out;
  for (int k : config.grid_k) {
    for (int e : config.grid_e) {
      const auto run = run_fedavg(env.dataset, env.profile, training_for(config, k, e, "train"));
      GridRun g{k, e, static_cast<int>(run.traces.size()), run.total_time(), run.total_energy(),
                run.total_cost(config.gamma), run.stop == StopReason::kTargetReached};
      out.push_back(g);
    }
  }
  return out;
}

std::vector<SchedulerRow> compare_schedulers(const ExperimentConfig& config, const Environment& env) {
  std::vector<SchedulerRow> rows;
  for (const auto& sweep : config.sweeps) {
    for (int v : sweep.values) {
      const bool vary_e = sweep.axis == SchedulerSweep::Axis::kE;
      const int k = vary_e ? sweep.fixed : v;
      const int e = vary_e ? v : sweep.fixed;
      const auto run = run_fedavg(env.dataset, env.profile, training_for(config, k, e, "train"));
      for (Strategy s : kAllStrategies) {
        rows.push_back({vary_e ? 'E' : 'K', v, s, static_cast<int>(run.traces.size()),
                        run.total_time(s), run.stop == StopReason::kTargetReached});
      }
    }
  }
  return rows;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::string traces_csv(const FedAvgResult& run) {
  std::ostringstream s;
  write_traces_csv(s, run.traces);
  return s.str();
}

std::string cost_surface_csv(const ExperimentConfig& config, const Environment& env, double rho) {
  std::vector<int> ks = config.grid_k;
  std::vector<int> es = config.grid_e;
  if (ks.empty()) {
    for (int k = 1; k <= env.dataset.num_clients(); ++k) ks.push_back(k);
  }
  if (es.empty()) {
    for (int e = 1; e <= 100; ++e) es.push_back(e);
  }
  std::ostringstream s;
  write_cost_surface_csv(s, averaged_costs(env.profile, config.gamma), ConvergenceCoeffs{rho}, ks, es);
  return s.str();
}

std::string solution_csv(const OptimizeOutcome& o) {
  std::ostringstream s;
  write_solution_csv(s, o.solution, o.overhead_ratio);
  return s.str();
}

std::string estimation_csv(const std::vector<PilotRecord>& pilots) {
  std::ostringstream s;
  write_estimation_csv(s, pilots);
  return s.str();
}

std::string rho_csv(const RhoEstimate& est) {
  std::ostringstream s;
  s << "rho,pairs_used,pairs_discarded\n"
    << std::setprecision(17) << est.rho << ',' << est.pair_estimates.size() << ','
    << est.discarded_pairs << '\n';
  return s.str();
}

double rho_for(const ExperimentConfig& config, const Environment& env) {
  if (config.rho) return *config.rho;
  if (config.estimation)
    return estimate_rho(*config.estimation, env.dataset, env.profile,
                        training_for(config, 1, 1, "estimation"))
        .estimate.rho;
  throw ConfigError({"this command needs either rho or an estimation plan"});
}

}  // namespace

std::vector<std::filesystem::path> run_subcommand(const std::string& command,
                                                  const ExperimentConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, const std::string& content) {
    const auto path = config.output_dir / name;
    write_file_atomic(path, content);
    written.push_back(path);
  };

  if (command == "validate-properties") {
    // Needs only the averaged costs, not a dataset.
    ProfileSpec spec = config.profile_spec.value_or(ProfileSpec{});
    SystemProfile profile;
    if (config.profile_file) {
      std::ifstream in(*config.profile_file);
      std::stringstream buf;
      buf << in.rdbuf();
      profile = profile_from_json(buf.str());
    } else {
      spec.n_clients = client_count(config);
      spec.seed = stream_seed(config.seed, "profile");
      profile = sample_profile(spec);
    }
    if (!config.rho) throw ConfigError({"validate-properties needs rho"});
    const auto report = verify_properties(averaged_costs(profile, config.gamma),
                                          ConvergenceCoeffs{*config.rho}, config.properties);
    std::ostringstream s;
    write_properties_csv(s, report);
    emit("properties.csv", s.str());
    return written;
  }

  const Environment env = build_environment(config);
  if (command == "run") {
    switch (config.mode) {
      case ControlMode::kFixed: {
        const auto run = run_fedavg(env.dataset, env.profile,
                                    training_for(config, config.fixed_k, config.fixed_e, "train"));
        emit("traces.csv", traces_csv(run));
        break;
      }
      case ControlMode::kOptimize: {
        const auto o = optimize(config, env);
        if (!o.pilots.empty()) emit("estimation.csv", estimation_csv(o.pilots));
        emit("solution.csv", solution_csv(o));
        const auto run = run_fedavg(env.dataset, env.profile,
                                    training_for(config, o.solution.k, o.solution.e, "train"));
        emit("traces.csv", traces_csv(run));
        break;
      }
      case ControlMode::kGrid: {
        const auto runs = grid_runs(config, env);
        std::ostringstream s;
        s << "K,E,rounds,total_time_s,total_energy_J,total_cost,reached_target\n"
          << std::setprecision(17);
        for (const auto& g : runs)
          s << g.k << ',' << g.e << ',' << g.rounds << ',' << g.total_time << ',' << g.total_energy
            << ',' << g.total_cost << ',' << (g.reached ? 1 : 0) << '\n';
        emit("grid_runs.csv", s.str());
        if (config.rho || config.estimation)
          emit("cost_surface.csv", cost_surface_csv(config, env, rho_for(config, env)));
        break;
      }
    }
  } else if (command == "optimize") {
    const auto o = optimize(config, env);
    if (!o.pilots.empty()) emit("estimation.csv", estimation_csv(o.pilots));
    emit("solution.csv", solution_csv(o));
  } else if (command == "estimate") {
    if (!config.estimation) throw ConfigError({"estimate needs an estimation plan"});
    const auto est = estimate_rho(*config.estimation, env.dataset, env.profile,
                                  training_for(config, 1, 1, "estimation"));
    emit("estimation.csv", estimation_csv(est.pilots));
    emit("rho.csv", rho_csv(est.estimate));
  } else if (command == "compare-schedulers") {
    if (config.sweeps.empty()) throw ConfigError({"compare-schedulers needs sweeps"});
    const auto rows = compare_schedulers(config, env);
    std::ostringstream s;
    s << "sweep,value,strategy,rounds,total_time_s,reached_target\n" << std::setprecision(17);
    for (const auto& r : rows)
      s << r.axis << ',' << r.value << ',' << to_string(r.strategy) << ',' << r.rounds << ','
        << r.total_time << ',' << (r.reached ? 1 : 0) << '\n';
    emit("scheduler_comparison.csv", s.str());
  } else if (command == "cost-surface") {
    emit("cost_surface.csv", cost_surface_csv(config, env, rho_for(config, env)));
  } else {
    throw std::invalid_argument("unknown command '" + command + "'");
  }
  return written;
}

}  // namespace fedcost
