#include "fedcost/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

#include "fedcost/rng.hpp"

namespace fedcost {

FederatedDataset make_dataset(std::vector<ClientShard> shards, int num_features, int num_classes) {
  if (shards.empty()) throw std::invalid_argument("dataset needs at least one client");
  if (num_features < 1 || num_classes < 2)
    throw std::invalid_argument("dataset needs num_features >= 1 and num_classes >= 2");
  FederatedDataset ds;
  ds.num_features = num_features;
  ds.num_classes = num_classes;
  for (const auto& shard : shards) {
    if (shard.samples.empty())
      throw std::invalid_argument("client " + std::to_string(shard.client_id) + " has no samples");
    for (const auto& s : shard.samples) {
      if (static_cast<int>(s.features.size()) != num_features)
        throw std::invalid_argument("sample dimension does not match num_features");
      if (s.label < 0 || s.label >= num_classes)
        throw std::invalid_argument("sample label out of range");
    }
    ds.total_samples += shard.samples.size();
  }
  ds.weights.reserve(shards.size());
  for (const auto& shard : shards)
    ds.weights.push_back(static_cast<double>(shard.samples.size()) /
                         static_cast<double>(ds.total_samples));
  ds.shards = std::move(shards);
  return ds;
}

std::vector<std::size_t> lognormal_sizes(int n, double mean, double stddev, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("need at least one client");
  if (!(mean > 0.0) || !std::isfinite(mean) || !(stddev >= 0.0) || !std::isfinite(stddev))
    throw std::invalid_argument("shard size mean must be positive and std non-negative");

  // Moment-matched log-normal: E = mean, Var = stddev^2.
  const double sigma2 = std::log1p((stddev * stddev) / (mean * mean));
  const double sigma = std::sqrt(sigma2);
  const double mu = std::log(mean) - 0.5 * sigma2;

  Rng rng = make_stream(seed, "synthetic/sizes");
  std::vector<int> strata(static_cast<std::size_t>(n));
  std::iota(strata.begin(), strata.end(), 0);
  std::shuffle(strata.begin(), strata.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::size_t> sizes;
  sizes.reserve(strata.size());
  for (int stratum : strata) {
    double u = (stratum + unit(rng)) / n;
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    const double z = std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
    const double v = std::round(std::exp(mu + sigma * z));
    sizes.push_back(static_cast<std::size_t>(std::max(1.0, v)));
  }
  return sizes;
}

namespace {

void check_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite");
}

}  // namespace

FederatedDataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
  check_finite(spec.alpha, "alpha");
  check_finite(spec.beta, "beta");
  check_finite(spec.size_mean, "size_mean");
  check_finite(spec.size_std, "size_std");
  if (spec.alpha < 0.0 || spec.beta < 0.0)
    throw std::invalid_argument("alpha and beta must be non-negative");
  if (spec.num_features < 1 || spec.num_classes < 2)
    throw std::invalid_argument("need num_features >= 1 and num_classes >= 2");

  const int d = spec.num_features;
  const int c = spec.num_classes;
  const auto sizes = lognormal_sizes(spec.n_clients, spec.size_mean, spec.size_std, spec.seed);

  // Shared labelling model; clients deviate from it with variance alpha.
  std::vector<double> base_w(static_cast<std::size_t>(c * d));
  std::vector<double> base_b(static_cast<std::size_t>(c));
  {
    Rng rng = make_stream(spec.seed, "synthetic/base");
    std::normal_distribution<double> std_normal(0.0, 1.0);
    for (auto& w : base_w) w = std_normal(rng);
    for (auto& b : base_b) b = std_normal(rng);
  }

  std::vector<double> input_std(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) input_std[j] = std::sqrt(std::pow(j + 1.0, -1.2));

  const double model_dev = std::sqrt(spec.alpha);
  const double shift_dev = std::sqrt(spec.beta);

  std::vector<ClientShard> shards(static_cast<std::size_t>(spec.n_clients));
  for (int k = 0; k < spec.n_clients; ++k) {
    Rng rng = make_stream(spec.seed, "synthetic/client", static_cast<std::uint64_t>(k));
    std::normal_distribution<double> std_normal(0.0, 1.0);

    std::vector<double> w(base_w);
    std::vector<double> b(base_b);
    for (auto& x : w) x += model_dev * std_normal(rng);
    for (auto& x : b) x += model_dev * std_normal(rng);

    const double shift = shift_dev * std_normal(rng);
    std::vector<double> input_mean(static_cast<std::size_t>(d));
    for (auto& m : input_mean) m = shift + std_normal(rng);

    ClientShard& shard = shards[k];
    shard.client_id = k;
    shard.samples.resize(sizes[k]);
    for (auto& sample : shard.samples) {
      sample.features.resize(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) sample.features[j] = input_mean[j] + input_std[j] * std_normal(rng);
      int best = 0;
      double best_logit = -std::numeric_limits<double>::infinity();
      for (int cls = 0; cls < c; ++cls) {
        double z = b[cls];
        const double* row = &w[static_cast<std::size_t>(cls * d)];
        for (int j = 0; j < d; ++j) z += row[j] * sample.features[j];
        if (z > best_logit) {
          best_logit = z;
          best = cls;
        }
      }
      sample.label = best;
    }
  }
  return make_dataset(std::move(shards), d, c);
}

FederatedDataset partition_by_label(const std::vector<DataSample>& pool,
                                    const LabelPartitionSpec& spec) {
  const int n = spec.n_clients;
  const int per_client_labels = spec.labels_per_client;
  const int per_client = spec.samples_per_client;
  if (n < 1) throw std::invalid_argument("n_clients must be >= 1");
  if (per_client_labels < 1) throw std::invalid_argument("labels_per_client must be >= 1");
  if (per_client < per_client_labels)
    throw std::invalid_argument("samples_per_client must be >= labels_per_client");
  if (pool.empty()) throw std::invalid_argument("sample pool is empty");

  int max_label = 0;
  for (const auto& s : pool) {
    if (s.label < 0) throw std::invalid_argument("negative label in pool");
    max_label = std::max(max_label, s.label);
  }
  const int num_labels = std::max(max_label + 1, per_client_labels);
  const auto num_features = static_cast<int>(pool.front().features.size());

  std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(num_labels));
  for (std::size_t i = 0; i < pool.size(); ++i) by_label[pool[i].label].push_back(i);

  // Round-robin over a shuffled label order spreads label demand evenly and
  // keeps each client's labels distinct.
  std::vector<int> order(static_cast<std::size_t>(num_labels));
  std::iota(order.begin(), order.end(), 0);
  Rng label_rng = make_stream(spec.seed, "partition/labels");
  std::shuffle(order.begin(), order.end(), label_rng);

  std::vector<std::vector<int>> client_labels(static_cast<std::size_t>(n));
  std::vector<int> holders(static_cast<std::size_t>(num_labels), 0);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < per_client_labels; ++j) {
      const int label = order[static_cast<std::size_t>((k * per_client_labels + j) % num_labels)];
      client_labels[k].push_back(label);
      ++holders[label];
    }
  }
  for (int label = 0; label < num_labels; ++label) {
    if (holders[label] > 0 && by_label[label].empty())
      throw std::invalid_argument("insufficient pool: label " + std::to_string(label) +
                                  " has no samples");
  }

  // Each client splits its budget across its labels in proportion to the
  // per-holder availability of that label (equal split for balanced pools).
  std::vector<std::vector<std::size_t>> quotas(static_cast<std::size_t>(n));
  std::vector<std::size_t> demand(static_cast<std::size_t>(num_labels), 0);
  for (int k = 0; k < n; ++k) {
    const auto& labels = client_labels[k];
    std::vector<double> share(labels.size());
    double total_share = 0.0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      share[j] = static_cast<double>(by_label[labels[j]].size()) / holders[labels[j]];
      total_share += share[j];
    }
    std::vector<std::size_t> q(labels.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const double exact = per_client * share[j] / total_share;
      q[j] = static_cast<std::size_t>(std::floor(exact));
      assigned += q[j];
      remainders.emplace_back(exact - std::floor(exact), j);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < static_cast<std::size_t>(per_client); ++i, ++assigned)
      ++q[remainders[i % remainders.size()].second];
    // Every held label contributes at least one sample.
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (q[j] == 0) {
        auto donor = std::max_element(q.begin(), q.end());
        --*donor;
        q[j] = 1;
      }
    }
    for (std::size_t j = 0; j < labels.size(); ++j) demand[labels[j]] += q[j];
    quotas[k] = std::move(q);
  }
  for (int label = 0; label < num_labels; ++label) {
    if (demand[label] > by_label[label].size())
      throw std::invalid_argument("insufficient pool: label " + std::to_string(label) + " needs " +
                                  std::to_string(demand[label]) + " samples but only " +
                                  std::to_string(by_label[label].size()) + " are available");
  }

  for (int label = 0; label < num_labels; ++label) {
    Rng rng = make_stream(spec.seed, "partition/shuffle", static_cast<std::uint64_t>(label));
    std::shuffle(by_label[label].begin(), by_label[label].end(), rng);
  }
  std::vector<std::size_t> cursor(static_cast<std::size_t>(num_labels), 0);
  std::vector<ClientShard> shards(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    shards[k].client_id = k;
    shards[k].samples.reserve(static_cast<std::size_t>(per_client));
    for (std::size_t j = 0; j < client_labels[k].size(); ++j) {
      const int label = client_labels[k][j];
      for (std::size_t i = 0; i < quotas[k][j]; ++i)
        shards[k].samples.push_back(pool[by_label[label][cursor[label]++]]);
    }
  }
  return make_dataset(std::move(shards), num_features, num_labels);
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorCode::kOpenFailed, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4)
    throw IdxError(IdxErrorCode::kTruncated, path.string() + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

std::vector<DataSample> load_idx(const std::filesystem::path& images_path,
                                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  const auto image_magic = read_be32(images, 0, images_path);
  if (image_magic != kIdxImagesMagic) {
    std::ostringstream msg;
    msg << images_path.string() << ": expected image magic 0x00000803, got 0x" << std::hex
        << std::setw(8) << std::setfill('0') << image_magic;
    throw IdxError(IdxErrorCode::kMagicMismatch, msg.str());
  }
  const auto label_magic = read_be32(labels, 0, labels_path);
  if (label_magic != kIdxLabelsMagic) {
    std::ostringstream msg;
    msg << labels_path.string() << ": expected label magic 0x00000801, got 0x" << std::hex
        << std::setw(8) << std::setfill('0') << label_magic;
    throw IdxError(IdxErrorCode::kMagicMismatch, msg.str());
  }

  const std::size_t count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  if (count != label_count)
    throw IdxError(IdxErrorCode::kCountMismatch,
                   "image count " + std::to_string(count) + " != label count " +
                       std::to_string(label_count));

  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels)
    throw IdxError(IdxErrorCode::kTruncated, images_path.string() + ": truncated pixel data");
  if (labels.size() < 8 + count)
    throw IdxError(IdxErrorCode::kTruncated, labels_path.string() + ": truncated label data");

  std::vector<DataSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].features.resize(pixels);
    const unsigned char* px = &images[16 + i * pixels];
    for (std::size_t j = 0; j < pixels; ++j) out[i].features[j] = px[j] / 255.0;
    out[i].label = labels[8 + i];
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const FederatedDataset& dataset) {
  out << "client_id,label";
  for (int j = 0; j < dataset.num_features; ++j) out << ",x" << j;
  out << '\n';
  out << std::setprecision(17);
  for (const auto& shard : dataset.shards) {
    for (const auto& s : shard.samples) {
      out << shard.client_id << ',' << s.label;
      for (double v : s.features) out << ',' << v;
      out << '\n';
    }
  }
}

}  // namespace fedcost
