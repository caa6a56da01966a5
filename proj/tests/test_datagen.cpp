#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fedcost/datagen.hpp"
#include "support.hpp"

using namespace fedcost;
using testing_support::TempDir;

namespace {

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::string idx_images(std::uint32_t magic, std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                       std::size_t payload) {
  std::string s;
  put_be32(s, magic);
  put_be32(s, count);
  put_be32(s, rows);
  put_be32(s, cols);
  for (std::size_t i = 0; i < payload; ++i) s.push_back(static_cast<char>(i * 37 % 256));
  return s;
}

std::string idx_labels(std::uint32_t magic, std::uint32_t count, std::size_t payload) {
  std::string s;
  put_be32(s, magic);
  put_be32(s, count);
  for (std::size_t i = 0; i < payload; ++i) s.push_back(static_cast<char>(i % 10));
  return s;
}

std::vector<DataSample> labelled_pool(const std::vector<int>& counts, int dim = 3) {
  std::vector<DataSample> pool;
  int serial = 0;
  for (int label = 0; label < static_cast<int>(counts.size()); ++label) {
    for (int i = 0; i < counts[label]; ++i) {
      DataSample s;
      s.label = label;
      s.features.assign(static_cast<std::size_t>(dim), 0.0);
      s.features[0] = serial++;  // unique tag
      pool.push_back(s);
    }
  }
  return pool;
}

bool datasets_equal(const FederatedDataset& a, const FederatedDataset& b) {
  if (a.num_clients() != b.num_clients() || a.weights != b.weights) return false;
  for (int k = 0; k < a.num_clients(); ++k) {
    const auto& sa = a.shards[k].samples;
    const auto& sb = b.shards[k].samples;
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i)
      if (sa[i].label != sb[i].label || sa[i].features != sb[i].features) return false;
  }
  return true;
}

// Multiclass perceptron; returns training errors in the final epoch.
int perceptron_errors(const std::vector<DataSample>& data, int d, int c, int epochs) {
  std::vector<double> w(static_cast<std::size_t>(c * (d + 1)), 0.0);
  int errors = 0;
  for (int ep = 0; ep < epochs; ++ep) {
    errors = 0;
    for (const auto& s : data) {
      int best = 0;
      double best_score = -1e300;
      for (int k = 0; k < c; ++k) {
        double z = w[static_cast<std::size_t>(k * (d + 1) + d)];
        for (int j = 0; j < d; ++j) z += w[static_cast<std::size_t>(k * (d + 1) + j)] * s.features[j];
        if (z > best_score) {
          best_score = z;
          best = k;
        }
      }
      if (best != s.label) {
        ++errors;
        for (int j = 0; j < d; ++j) {
          w[static_cast<std::size_t>(s.label * (d + 1) + j)] += s.features[j];
          w[static_cast<std::size_t>(best * (d + 1) + j)] -= s.features[j];
        }
        w[static_cast<std::size_t>(s.label * (d + 1) + d)] += 1.0;
        w[static_cast<std::size_t>(best * (d + 1) + d)] -= 1.0;
      }
    }
    if (errors == 0) break;
  }
  return errors;
}

}  // namespace

TEST(Synthetic, ShardSizeMeanNearTarget) {
  SyntheticSpec spec;
  spec.seed = 7;
  const auto ds = gen_synthetic(spec);
  ASSERT_EQ(ds.num_clients(), 100);
  const double mean = static_cast<double>(ds.total_samples) / 100.0;
  EXPECT_NEAR(mean, 245.0, 0.2 * 245.0);
}

TEST(Synthetic, LognormalSizesMatchMomentsOverManyClients) {
  const auto sizes = lognormal_sizes(20000, 245.0, 362.0, 11);
  double sum = 0.0, sq = 0.0;
  for (auto s : sizes) {
    EXPECT_GE(s, 1u);
    sum += static_cast<double>(s);
    sq += static_cast<double>(s) * static_cast<double>(s);
  }
  const double mean = sum / sizes.size();
  const double sd = std::sqrt(sq / sizes.size() - mean * mean);
  EXPECT_NEAR(mean, 245.0, 0.02 * 245.0);
  EXPECT_NEAR(sd, 362.0, 0.15 * 362.0);
}

TEST(Synthetic, DeterministicForSameSeed) {
  SyntheticSpec spec;
  spec.n_clients = 10;
  spec.seed = 99;
  EXPECT_TRUE(datasets_equal(gen_synthetic(spec), gen_synthetic(spec)));
  SyntheticSpec other = spec;
  other.seed = 100;
  EXPECT_FALSE(datasets_equal(gen_synthetic(spec), gen_synthetic(other)));
}

TEST(Synthetic, ShapesLabelsAndWeights) {
  SyntheticSpec spec;
  spec.n_clients = 12;
  spec.num_features = 8;
  spec.num_classes = 4;
  spec.seed = 5;
  const auto ds = gen_synthetic(spec);
  EXPECT_EQ(ds.num_features, 8);
  EXPECT_EQ(ds.num_classes, 4);
  double wsum = 0.0;
  std::size_t total = 0;
  for (int k = 0; k < ds.num_clients(); ++k) {
    EXPECT_EQ(ds.shards[k].client_id, k);
    EXPECT_DOUBLE_EQ(ds.weights[k], static_cast<double>(ds.shards[k].size()) / ds.total_samples);
    wsum += ds.weights[k];
    total += ds.shards[k].size();
    for (const auto& s : ds.shards[k].samples) {
      ASSERT_EQ(s.features.size(), 8u);
      ASSERT_GE(s.label, 0);
      ASSERT_LT(s.label, 4);
    }
  }
  EXPECT_EQ(total, ds.total_samples);
  EXPECT_NEAR(wsum, 1.0, 1e-12);
}

TEST(Synthetic, ZeroHeterogeneitySharesOneLabellingModel) {
  SyntheticSpec spec;
  spec.alpha = 0.0;
  spec.beta = 0.0;
  spec.n_clients = 2;
  spec.num_features = 4;
  spec.num_classes = 3;
  spec.size_mean = 150;
  spec.size_std = 0;
  spec.seed = 21;
  const auto ds = gen_synthetic(spec);
  std::vector<DataSample> all;
  for (const auto& sh : ds.shards) all.insert(all.end(), sh.samples.begin(), sh.samples.end());
  // One linear classifier labels the union of both clients perfectly.
  EXPECT_EQ(perceptron_errors(all, 4, 3, 20000), 0);
}

TEST(Synthetic, RejectsBadSpec) {
  SyntheticSpec spec;
  spec.n_clients = 0;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
  spec = SyntheticSpec{};
  spec.alpha = -1;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
  spec = SyntheticSpec{};
  spec.num_classes = 1;
  EXPECT_THROW(gen_synthetic(spec), std::invalid_argument);
}

TEST(Partition, ThirtyClientsTwoLabelsEach) {
  const auto pool = labelled_pool(std::vector<int>(10, 900));
  LabelPartitionSpec spec;
  spec.seed = 3;
  const auto ds = partition_by_label(pool, spec);
  ASSERT_EQ(ds.num_clients(), 30);
  std::set<double> seen;
  for (const auto& sh : ds.shards) {
    EXPECT_EQ(sh.size(), 300u);
    std::set<int> labels;
    for (const auto& s : sh.samples) {
      labels.insert(s.label);
      EXPECT_TRUE(seen.insert(s.features[0]).second) << "sample reused";
    }
    EXPECT_EQ(labels.size(), 2u);
  }
  EXPECT_EQ(seen.size(), 9000u);
}

TEST(Partition, SingleLabelPoolIsInfeasible) {
  const auto pool = labelled_pool({500});
  LabelPartitionSpec spec;
  spec.n_clients = 5;
  spec.samples_per_client = 50;
  EXPECT_THROW(partition_by_label(pool, spec), std::invalid_argument);
}

TEST(Partition, InsufficientPoolNamesLabel) {
  const auto pool = labelled_pool({500, 3});
  LabelPartitionSpec spec;
  spec.n_clients = 4;
  spec.samples_per_client = 100;
  try {
    partition_by_label(pool, spec);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(Partition, SingleClientIdentity) {
  const auto pool = labelled_pool({4, 5, 6});
  LabelPartitionSpec spec;
  spec.n_clients = 1;
  spec.labels_per_client = 3;
  spec.samples_per_client = 15;
  const auto ds = partition_by_label(pool, spec);
  ASSERT_EQ(ds.num_clients(), 1);
  std::vector<double> got, want;
  for (const auto& s : ds.shards[0].samples) got.push_back(s.features[0]);
  for (const auto& s : pool) want.push_back(s.features[0]);
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, want);
}

TEST(Partition, Deterministic) {
  const auto pool = labelled_pool(std::vector<int>(10, 100));
  LabelPartitionSpec spec;
  spec.n_clients = 10;
  spec.samples_per_client = 50;
  spec.seed = 8;
  EXPECT_TRUE(datasets_equal(partition_by_label(pool, spec), partition_by_label(pool, spec)));
}

TEST(Idx, ReadsWellFormedPair) {
  TempDir dir;
  testing_support::write_text(dir.path() / "img", idx_images(kIdxImagesMagic, 10, 2, 3, 60));
  testing_support::write_text(dir.path() / "lab", idx_labels(kIdxLabelsMagic, 10, 10));
  const auto samples = load_idx(dir.path() / "img", dir.path() / "lab");
  ASSERT_EQ(samples.size(), 10u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ASSERT_EQ(samples[i].features.size(), 6u);
    EXPECT_EQ(samples[i].label, static_cast<int>(i % 10));
    for (double x : samples[i].features) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_DOUBLE_EQ(samples[0].features[1], 37.0 / 255.0);
}

TEST(Idx, ErrorKinds) {
  TempDir dir;
  auto code_of = [&](const std::string& img, const std::string& lab) {
    testing_support::write_text(dir.path() / "img", img);
    testing_support::write_text(dir.path() / "lab", lab);
    try {
      load_idx(dir.path() / "img", dir.path() / "lab");
    } catch (const IdxError& e) {
      return static_cast<int>(e.code());
    }
    return -1;
  };
  const auto good_labels = idx_labels(kIdxLabelsMagic, 10, 10);
  EXPECT_EQ(code_of(idx_images(kIdxLabelsMagic, 10, 2, 3, 60), good_labels),
            static_cast<int>(IdxErrorCode::kMagicMismatch));
  EXPECT_EQ(code_of(idx_images(kIdxImagesMagic, 10, 2, 3, 60), idx_labels(kIdxLabelsMagic, 9, 9)),
            static_cast<int>(IdxErrorCode::kCountMismatch));
  EXPECT_EQ(code_of(idx_images(kIdxImagesMagic, 10, 2, 3, 59), good_labels),
            static_cast<int>(IdxErrorCode::kTruncated));
  EXPECT_THROW(load_idx(dir.path() / "missing", dir.path() / "lab"), IdxError);
}

TEST(DatasetCsv, HeaderAndArity) {
  SyntheticSpec spec;
  spec.n_clients = 3;
  spec.num_features = 5;
  spec.seed = 1;
  const auto ds = gen_synthetic(spec);
  std::ostringstream out;
  write_dataset_csv(out, ds);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "client_id,label,x0,x1,x2,x3,x4");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
    ++rows;
  }
  EXPECT_EQ(rows, ds.total_samples);
}
