#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "disdca/errors.hpp"
#include "disdca/types.hpp"

namespace disdca {

struct Dataset {
  std::vector<SparseVector> x;
  std::vector<double> y;
  std::uint32_t dim = 0;

  std::size_t count() const { return x.size(); }
};

enum class PartitionScheme { block, random };

const char* scheme_name(PartitionScheme s);
PartitionScheme scheme_from_name(std::string_view name);

// Assignment of examples to K workers; shard sizes differ by at most one.
struct Partition {
  int K = 1;
  PartitionScheme scheme = PartitionScheme::block;
  std::vector<std::vector<std::uint32_t>> shards;  // worker -> example indices
  std::vector<std::uint32_t> owner;                // example -> worker
};

// libsvm text: `label idx:val idx:val ...`, 1-based strictly increasing
// indices. dim is the largest index seen. Parse failures carry line numbers.
Dataset load_libsvm(const std::filesystem::path& path);
// Values are written with 17 significant digits so a reload is exact.
void save_libsvm(const Dataset& ds, const std::filesystem::path& path);

struct SyntheticSpec {
  int groups = 10;
  int group_dim = 5;
  int points_per_group = 200;
  std::uint64_t seed = 1;
  double u_value = 1.0;  // the constant response vector u, per coordinate
};

// Group-blocked regression data: each example's support is exactly one of
// `groups` disjoint feature blocks, features i.i.d. standard normal, and
// y = u.x + sum_j (x_j/2)^3 computed on the raw features. Examples of a group
// are contiguous, so a block partition with K dividing `groups` keeps workers
// exactly orthogonal. Examples are scaled into the unit ball afterwards
// (labels keep the raw-feature values).
Dataset generate_synthetic(const SyntheticSpec& spec);

// block: contiguous runs, the first n%K shards one longer; random: a seeded
// uniform shuffle, then contiguous runs of the permutation.
Partition make_partition(const Dataset& ds, int K, PartitionScheme scheme,
                         std::uint64_t seed);

// max |x_i . x_j| over cross-worker pairs. Exact up to max_pairs candidate
// pairs; above that a fixed-seed subsample of max_pairs pairs is scanned.
double orthogonality_residual(const Dataset& ds, const Partition& p,
                              std::uint64_t max_pairs = 1000000);

void normalize_unit_ball_inplace(Dataset& ds);
Dataset normalize_unit_ball(Dataset ds);

// y <- sign(y - median(y)) in {-1, +1}; used for classification experiments
// on the synthetic regression data.
void sign_labels_inplace(Dataset& ds);

}  // namespace disdca
