#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedcost {

struct DataSample {
  std::vector<double> features;
  int label = 0;
};

struct ClientShard {
  int client_id = 0;
  std::vector<DataSample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Shards for N clients plus the aggregation weights p_k = n_k / n.
struct FederatedDataset {
  std::vector<ClientShard> shards;
  std::vector<double> weights;
  std::size_t total_samples = 0;
  int num_features = 0;
  int num_classes = 0;

  int num_clients() const { return static_cast<int>(shards.size()); }
};

/// Builds a dataset from shards, filling weights and totals. Throws if any
/// shard is empty or a sample has the wrong dimension or label.
FederatedDataset make_dataset(std::vector<ClientShard> shards, int num_features, int num_classes);

struct SyntheticSpec {
  double alpha = 1.0;  // model heterogeneity across clients
  double beta = 1.0;   // input-distribution heterogeneity across clients
  int n_clients = 100;
  double size_mean = 245.0;
  double size_std = 362.0;
  int num_features = 60;
  int num_classes = 10;
  std::uint64_t seed = 0;
};

/// Synthetic(alpha, beta): per-client softmax labelling models and per-client
/// input means, shard sizes log-normal with the requested mean and std.
FederatedDataset gen_synthetic(const SyntheticSpec& spec);

/// Log-normal shard sizes (stratified over quantiles), each at least 1.
std::vector<std::size_t> lognormal_sizes(int n, double mean, double stddev, std::uint64_t seed);

struct LabelPartitionSpec {
  int n_clients = 30;
  int labels_per_client = 2;
  int samples_per_client = 300;
  std::uint64_t seed = 0;
};

/// Pathological non-i.i.d. split: each client receives samples of exactly
/// `labels_per_client` distinct labels. Samples are never reused.
FederatedDataset partition_by_label(const std::vector<DataSample>& pool,
                                    const LabelPartitionSpec& spec);

enum class IdxErrorCode { kOpenFailed, kMagicMismatch, kTruncated, kCountMismatch };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  IdxErrorCode code() const { return code_; }

 private:
  IdxErrorCode code_;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image/label pair (MNIST layout). Pixels are scaled to [0,1].
std::vector<DataSample> load_idx(const std::filesystem::path& images_path,
                                 const std::filesystem::path& labels_path);

/// One row per sample: client_id,label,x0,...,x{d-1}
void write_dataset_csv(std::ostream& out, const FederatedDataset& dataset);

}  // namespace fedcost
