#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fedcost/learner.hpp"
#include "fedcost/rng.hpp"
#include "support.hpp"

using namespace fedcost;

namespace {

FederatedDataset small_synthetic(int n_clients, std::uint64_t seed, double size_mean = 40.0) {
  SyntheticSpec spec;
  spec.n_clients = n_clients;
  spec.num_features = 6;
  spec.num_classes = 4;
  spec.size_mean = size_mean;
  spec.size_std = size_mean / 2.0;
  spec.seed = seed;
  return gen_synthetic(spec);
}

SystemProfile flat_profile(int n) {
  SystemProfile p;
  p.t_comp.assign(static_cast<std::size_t>(n), 0.1);
  p.e_comp.assign(static_cast<std::size_t>(n), 0.01);
  p.comm_time_mean.assign(static_cast<std::size_t>(n), 0.2);
  p.comm_energy_mean.assign(static_cast<std::size_t>(n), 0.02);
  p.jitter = 0.1;
  return p;
}

ModelParams random_model(int c, int d, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  auto m = ModelParams::zeros(c, d);
  for (auto& w : m.weights) w = g(rng);
  for (auto& b : m.bias) b = g(rng);
  return m;
}

ModelParams scalar_model(double v) {
  auto m = ModelParams::zeros(2, 1);
  m.weights = {v, v};
  m.bias = {v, v};
  return m;
}

ClientShard shard_of(int id, int count, int label) {
  ClientShard s;
  s.client_id = id;
  for (int i = 0; i < count; ++i) s.samples.push_back({{static_cast<double>(i)}, label});
  return s;
}

}  // namespace

TEST(Loss, ZeroModelIsLogC) {
  const auto ds = small_synthetic(5, 1);
  EXPECT_NEAR(global_loss(ModelParams::zeros(4, 6), ds), std::log(4.0), 1e-12);
}

TEST(Loss, SingleClientEqualsShardLoss) {
  const auto ds = small_synthetic(1, 2);
  std::mt19937_64 rng(1);
  const auto m = random_model(4, 6, rng);
  EXPECT_DOUBLE_EQ(global_loss(m, ds), shard_loss(m, ds.shards[0]));
}

TEST(Loss, EqualClientsAverage) {
  auto base = small_synthetic(2, 3, 30.0);
  auto a = base.shards[0];
  auto b = base.shards[1];
  const std::size_t n = std::min(a.size(), b.size());
  a.samples.resize(n);
  b.samples.resize(n);
  b.client_id = 1;
  const auto ds = make_dataset({a, b}, 6, 4);
  std::mt19937_64 rng(4);
  const auto m = random_model(4, 6, rng);
  EXPECT_NEAR(global_loss(m, ds), 0.5 * (shard_loss(m, a) + shard_loss(m, b)), 1e-12);
}

TEST(Loss, StableForLargeLogits) {
  auto m = ModelParams::zeros(2, 1);
  m.w(0, 0) = 1000.0;
  const DataSample s{{1.0}, 1};
  EXPECT_NEAR(sample_loss(m, s), 1000.0, 1e-9);
}

TEST(Gradient, MatchesCentralDifferences) {
  const auto ds = small_synthetic(3, 5);
  std::vector<const DataSample*> batch;
  for (const auto& sh : ds.shards)
    for (const auto& s : sh.samples) batch.push_back(&s);
  std::mt19937_64 rng(6);
  const auto m = random_model(4, 6, rng);
  const auto g = loss_gradient(m, batch);
  auto mean_loss = [&](const ModelParams& p) {
    double t = 0.0;
    for (auto* s : batch) t += sample_loss(p, *s);
    return t / batch.size();
  };
  const double h = 1e-5;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    auto up = m, dn = m;
    up.weights[i] += h;
    dn.weights[i] -= h;
    EXPECT_NEAR(g.weights[i], (mean_loss(up) - mean_loss(dn)) / (2 * h), 1e-7);
  }
  for (std::size_t i = 0; i < m.bias.size(); ++i) {
    auto up = m, dn = m;
    up.bias[i] += h;
    dn.bias[i] -= h;
    EXPECT_NEAR(g.bias[i], (mean_loss(up) - mean_loss(dn)) / (2 * h), 1e-7);
  }
}

TEST(LocalSgd, ZeroLearningRateIsIdentity) {
  const auto ds = small_synthetic(2, 7);
  std::mt19937_64 mr(1);
  const auto m = random_model(4, 6, mr);
  Rng rng(3);
  EXPECT_EQ(local_sgd(m, ds.shards[0], 5, 0.0, 8, rng), m);
}

TEST(LocalSgd, HandGradientAtZeroModel) {
  ClientShard shard;
  shard.client_id = 0;
  shard.samples.push_back({{1.0, 0.0}, 0});
  Rng rng(1);
  const auto out = local_sgd(ModelParams::zeros(2, 2), shard, 1, 0.1, 64, rng);
  EXPECT_NEAR(out.w(0, 0), 0.05, 1e-15);
  EXPECT_NEAR(out.w(1, 0), -0.05, 1e-15);
  EXPECT_EQ(out.w(0, 1), 0.0);
  EXPECT_EQ(out.w(1, 1), 0.0);
  EXPECT_NEAR(out.bias[0], 0.05, 1e-15);
  EXPECT_NEAR(out.bias[1], -0.05, 1e-15);
}

TEST(LocalSgd, StepsCompose) {
  const auto ds = small_synthetic(1, 8, 200.0);
  const auto m0 = ModelParams::zeros(4, 6);
  Rng a(42), b(42);
  const auto twice = local_sgd(local_sgd(m0, ds.shards[0], 1, 0.05, 16, a), ds.shards[0], 1, 0.05, 16, a);
  const auto once = local_sgd(m0, ds.shards[0], 2, 0.05, 16, b);
  EXPECT_EQ(once, twice);
}

TEST(LocalSgd, DecreasesShardLossWithSmallSteps) {
  const auto ds = small_synthetic(1, 9, 300.0);
  Rng rng(5);
  const auto m = local_sgd(ModelParams::zeros(4, 6), ds.shards[0], 50, 0.05, 300, rng);
  EXPECT_LT(shard_loss(m, ds.shards[0]), std::log(4.0));
}

TEST(Aggregate, SingleUpdateUnchanged) {
  const auto ds = make_dataset({shard_of(0, 3, 0), shard_of(1, 5, 1)}, 1, 2);
  const auto m = scalar_model(1.7);
  EXPECT_EQ(aggregate({{1, m}}, ds), m);
}

TEST(Aggregate, OppositeModelsCancel) {
  const auto ds = make_dataset({shard_of(0, 4, 0), shard_of(1, 4, 1)}, 1, 2);
  const auto out = aggregate({{0, scalar_model(2.5)}, {1, scalar_model(-2.5)}}, ds);
  EXPECT_EQ(out.weights, (std::vector<double>{0.0, 0.0}));
}

TEST(Aggregate, WeightedBySampleCounts) {
  const auto ds = make_dataset({shard_of(0, 1, 0), shard_of(1, 1, 1), shard_of(2, 2, 0)}, 1, 2);
  const auto out = aggregate({{0, scalar_model(1)}, {1, scalar_model(1)}, {2, scalar_model(4)}}, ds);
  EXPECT_NEAR(out.weights[0], 2.5, 1e-15);
}

TEST(Aggregate, RenormalisesOverParticipants) {
  const auto ds = make_dataset({shard_of(0, 1, 0), shard_of(1, 3, 1), shard_of(2, 6, 0)}, 1, 2);
  const auto out = aggregate({{2, scalar_model(3)}, {0, scalar_model(10)}}, ds);
  EXPECT_NEAR(out.weights[0], (6.0 * 3 + 1.0 * 10) / 7.0, 1e-14);
}

TEST(Aggregate, Errors) {
  const auto ds = make_dataset({shard_of(0, 1, 0), shard_of(1, 1, 1)}, 1, 2);
  EXPECT_THROW(aggregate({}, ds), std::invalid_argument);
  EXPECT_THROW(aggregate({{5, scalar_model(1)}}, ds), std::out_of_range);
  EXPECT_THROW(aggregate({{0, scalar_model(1)}, {0, scalar_model(1)}}, ds), std::invalid_argument);
  EXPECT_THROW(aggregate({{0, scalar_model(1)}, {1, ModelParams::zeros(3, 1)}}, ds), std::invalid_argument);
}

TEST(FedAvg, ZeroLearningRateKeepsLogC) {
  const auto ds = small_synthetic(6, 10);
  TrainConfig cfg;
  cfg.clients_per_round = 3;
  cfg.local_steps = 4;
  cfg.eta0 = 0.0;
  cfg.max_rounds = 5;
  const auto run = run_fedavg(ds, flat_profile(6), cfg);
  ASSERT_EQ(run.traces.size(), 5u);
  for (const auto& t : run.traces) EXPECT_NEAR(t.loss, std::log(4.0), 1e-12);
}

TEST(FedAvg, FullParticipationSamplesEveryone) {
  const auto ds = small_synthetic(5, 11);
  TrainConfig cfg;
  cfg.clients_per_round = 5;
  cfg.local_steps = 2;
  cfg.max_rounds = 4;
  const auto run = run_fedavg(ds, flat_profile(5), cfg);
  for (const auto& t : run.traces) EXPECT_EQ(t.sampled, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(FedAvg, SamplingIsUniformWithoutReplacement) {
  const auto ds = small_synthetic(8, 12, 10.0);
  TrainConfig cfg;
  cfg.clients_per_round = 3;
  cfg.local_steps = 1;
  cfg.eta0 = 0.0;
  cfg.max_rounds = 4000;
  const auto run = run_fedavg(ds, flat_profile(8), cfg);
  std::vector<int> hits(8, 0);
  for (const auto& t : run.traces) {
    std::set<int> uniq(t.sampled.begin(), t.sampled.end());
    ASSERT_EQ(uniq.size(), 3u);
    for (int id : t.sampled) ++hits[id];
  }
  const double p = 3.0 / 8.0;
  const double sd = std::sqrt(4000 * p * (1 - p));
  for (int h : hits) EXPECT_NEAR(h, 4000 * p, 4 * sd);
}

TEST(FedAvg, FullBatchFullParticipationIsGradientDescent) {
  const auto ds = small_synthetic(4, 13, 30.0);
  TrainConfig cfg;
  cfg.clients_per_round = 4;
  cfg.local_steps = 1;
  cfg.batch_size = 100000;
  cfg.eta0 = 0.3;
  cfg.max_rounds = 6;
  const auto run = run_fedavg(ds, flat_profile(4), cfg);

  std::vector<const DataSample*> all;
  for (const auto& sh : ds.shards)
    for (const auto& s : sh.samples) all.push_back(&s);
  auto w = ModelParams::zeros(4, 6);
  for (int r = 0; r < 6; ++r) {
    const auto g = loss_gradient(w, all);
    const double lr = 0.3 / (1.0 + r);
    for (std::size_t i = 0; i < w.weights.size(); ++i) w.weights[i] -= lr * g.weights[i];
    for (std::size_t i = 0; i < w.bias.size(); ++i) w.bias[i] -= lr * g.bias[i];
    EXPECT_NEAR(run.traces[r].loss, global_loss(w, ds), 1e-10);
  }
}

TEST(FedAvg, SmoothedLossDecreases) {
  SyntheticSpec spec;
  spec.n_clients = 20;
  spec.seed = 14;
  const auto ds = gen_synthetic(spec);
  ProfileSpec ps;
  ps.n_clients = 20;
  TrainConfig cfg;
  cfg.clients_per_round = 10;
  cfg.local_steps = 20;
  cfg.max_rounds = 60;
  cfg.seed = 3;
  const auto run = run_fedavg(ds, sample_profile(ps), cfg);
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 5 <= run.traces.size(); i += 5) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 5; ++j) s += run.traces[j].loss;
    smooth.push_back(s / 5.0);
  }
  ASSERT_GE(smooth.size(), 10u);
  EXPECT_LT(smooth.front(), run.initial_loss);
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_LT(smooth[i], smooth[i - 1]) << "block " << i;
}

TEST(FedAvg, StopsAtTargetAndBooksCosts) {
  const auto ds = small_synthetic(6, 15, 80.0);
  TrainConfig cfg;
  cfg.clients_per_round = 3;
  cfg.local_steps = 5;
  cfg.max_rounds = 500;
  cfg.target_loss = 1.2;
  const auto profile = flat_profile(6);
  const auto run = run_fedavg(ds, profile, cfg);
  ASSERT_EQ(run.stop, StopReason::kTargetReached);
  EXPECT_LE(run.traces.back().loss, 1.2);
  for (std::size_t i = 0; i + 1 < run.traces.size(); ++i) EXPECT_GT(run.traces[i].loss, 1.2);
  for (const auto& t : run.traces) {
    EXPECT_LE(t.strategy_times[0], t.strategy_times[1] + 1e-12);
    EXPECT_LE(t.strategy_times[0], t.strategy_times[2] + 1e-12);
    EXPECT_GT(t.round_energy, 3 * 5 * 0.01);
  }
  EXPECT_NEAR(run.total_cost(0.25), 0.25 * run.total_energy() + 0.75 * run.total_time(), 1e-12);
}

TEST(FedAvg, DeterministicAcrossThreadCounts) {
  const auto ds = small_synthetic(10, 16);
  TrainConfig cfg;
  cfg.clients_per_round = 6;
  cfg.local_steps = 3;
  cfg.max_rounds = 8;
  cfg.seed = 77;
  const auto one = run_fedavg(ds, flat_profile(10), cfg);
  cfg.threads = 4;
  const auto four = run_fedavg(ds, flat_profile(10), cfg);
  EXPECT_EQ(one.model, four.model);
  std::ostringstream a, b;
  write_traces_csv(a, one.traces);
  write_traces_csv(b, four.traces);
  EXPECT_EQ(a.str(), b.str());
}

TEST(FedAvg, DivergenceIsReported) {
  const auto ds = small_synthetic(3, 17);
  TrainConfig cfg;
  cfg.clients_per_round = 3;
  cfg.local_steps = 50;
  cfg.eta0 = 1e307;
  cfg.max_rounds = 10;
  const auto run = run_fedavg(ds, flat_profile(3), cfg);
  EXPECT_EQ(run.stop, StopReason::kDiverged);
}

TEST(FedAvg, RejectsBadConfig) {
  const auto ds = small_synthetic(3, 18);
  TrainConfig cfg;
  cfg.clients_per_round = 4;
  EXPECT_THROW(run_fedavg(ds, flat_profile(3), cfg), std::invalid_argument);
  cfg.clients_per_round = 2;
  EXPECT_THROW(run_fedavg(ds, flat_profile(4), cfg), std::invalid_argument);
}
