#include "disdca/data.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "disdca/rng.hpp"
#include "doctest.h"

using namespace disdca;

namespace {

std::filesystem::path temp_file(const char* tag) {
  return std::filesystem::temp_directory_path() /
         (std::string("disdca_test_") + tag + "_" + std::to_string(::getpid()));
}

Dataset random_dataset(int n, int dim, std::uint64_t seed) {
  Dataset ds;
  ds.dim = dim;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    SparseVector x;
    for (int j = 0; j < dim; ++j) {
      if (rng.uniform() < 0.4) {
        x.idx.push_back(j);
        x.val.push_back(rng.normal());
      }
    }
    ds.x.push_back(std::move(x));
    ds.y.push_back(rng.normal());
  }
  return ds;
}

}  // namespace

TEST_CASE("libsvm line parses to 0-based sparse entries") {
  const auto path = temp_file("parse");
  std::ofstream(path) << "1 1:0.5 3:1.0\n";
  const Dataset ds = load_libsvm(path);
  REQUIRE(ds.count() == 1);
  CHECK(ds.y[0] == 1.0);
  CHECK(ds.x[0].idx == std::vector<std::uint32_t>{0, 2});
  CHECK(ds.x[0].val == std::vector<double>{0.5, 1.0});
  CHECK(ds.dim >= 3);
  std::filesystem::remove(path);
}

TEST_CASE("empty libsvm file errors with no examples") {
  const auto path = temp_file("empty");
  std::ofstream(path) << "";
  CHECK_THROWS_WITH_AS(load_libsvm(path), doctest::Contains("no examples"),
                       IoError);
  std::filesystem::remove(path);
}

TEST_CASE("libsvm parse errors carry line numbers") {
  const auto path = temp_file("badline");
  std::ofstream(path) << "1 1:0.5\nnot-a-line x\n";
  CHECK_THROWS_WITH_AS(load_libsvm(path), doctest::Contains(":2:"), IoError);

  std::ofstream(path) << "1 3:0.5 2:1.0\n";
  CHECK_THROWS_WITH_AS(load_libsvm(path),
                       doctest::Contains("strictly increasing"), IoError);

  std::ofstream(path) << "1 0:0.5\n";
  CHECK_THROWS_AS(load_libsvm(path), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("missing file raises io error") {
  CHECK_THROWS_AS(load_libsvm("/nonexistent/disdca.libsvm"), IoError);
}

TEST_CASE("save/load round trip is exact") {
  const Dataset ds = random_dataset(100, 30, 5);
  const auto path = temp_file("roundtrip");
  save_libsvm(ds, path);
  const Dataset back = load_libsvm(path);
  REQUIRE(back.count() == ds.count());
  for (std::size_t i = 0; i < ds.count(); ++i) {
    CHECK(back.y[i] == ds.y[i]);
    CHECK(back.x[i].idx == ds.x[i].idx);
    CHECK(back.x[i].val == ds.x[i].val);
  }
  std::filesystem::remove(path);
}

TEST_CASE("synthetic generator shapes and grouping") {
  SyntheticSpec spec;
  spec.groups = 3;
  spec.group_dim = 4;
  spec.points_per_group = 10;
  spec.seed = 9;
  const Dataset ds = generate_synthetic(spec);
  CHECK(ds.count() == 30);
  CHECK(ds.dim == 12);
  for (int g = 0; g < 3; ++g) {
    for (int p = 0; p < 10; ++p) {
      const SparseVector& x = ds.x[g * 10 + p];
      REQUIRE(x.nnz() == 4);
      CHECK(x.idx.front() == static_cast<std::uint32_t>(g * 4));
      CHECK(x.idx.back() == static_cast<std::uint32_t>(g * 4 + 3));
      CHECK(x.norm_sq() <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("synthetic generation is bitwise reproducible") {
  SyntheticSpec spec;
  spec.groups = 4;
  spec.group_dim = 5;
  spec.points_per_group = 20;
  spec.seed = 123;
  const Dataset a = generate_synthetic(spec);
  const Dataset b = generate_synthetic(spec);
  REQUIRE(a.count() == b.count());
  for (std::size_t i = 0; i < a.count(); ++i) {
    CHECK(a.y[i] == b.y[i]);
    CHECK(a.x[i].val == b.x[i].val);
  }
  spec.seed = 124;
  const Dataset c = generate_synthetic(spec);
  CHECK(a.y != c.y);
}

TEST_CASE("synthetic labels come from the raw features") {
  // single-feature groups: examples that needed no rescaling must satisfy
  // y = u x + (x/2)^3 exactly; rescaled ones must not (generically)
  SyntheticSpec spec;
  spec.groups = 1;
  spec.group_dim = 1;
  spec.points_per_group = 500;
  spec.seed = 77;
  const Dataset ds = generate_synthetic(spec);
  int checked = 0, rescaled = 0;
  for (std::size_t i = 0; i < ds.count(); ++i) {
    const double x = ds.x[i].val[0];
    const double label_of = [](double v) { return v + (v / 2) * (v / 2) * (v / 2); }(x);
    if (std::abs(x) < 1.0 - 1e-9) {
      CHECK(ds.y[i] == label_of);
      ++checked;
    } else if (std::abs(ds.y[i] - label_of) > 1e-12) {
      ++rescaled;
    }
  }
  CHECK(checked > 100);
  CHECK(rescaled > 50);
}

TEST_CASE("block partition splits contiguously") {
  const Dataset ds = random_dataset(10, 5, 1);
  const Partition p = make_partition(ds, 5, PartitionScheme::block, 0);
  REQUIRE(p.shards.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(p.shards[k] == std::vector<std::uint32_t>{
                             static_cast<std::uint32_t>(2 * k),
                             static_cast<std::uint32_t>(2 * k + 1)});
  }
}

TEST_CASE("partition balances the remainder") {
  const Dataset ds = random_dataset(7, 5, 2);
  const Partition p = make_partition(ds, 3, PartitionScheme::block, 0);
  CHECK(p.shards[0].size() == 3);
  CHECK(p.shards[1].size() == 2);
  CHECK(p.shards[2].size() == 2);
}

TEST_CASE("K=1 owns everything under both schemes") {
  const Dataset ds = random_dataset(12, 5, 3);
  for (PartitionScheme scheme : {PartitionScheme::block, PartitionScheme::random}) {
    const Partition p = make_partition(ds, 1, scheme, 42);
    CHECK(p.shards[0].size() == 12);
    for (std::uint32_t owner : p.owner) CHECK(owner == 0);
  }
}

TEST_CASE("partition is a balanced bijection for random n and K") {
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(200));
    const int K = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const Dataset ds = random_dataset(n, 4, trial);
    const PartitionScheme scheme =
        trial % 2 == 0 ? PartitionScheme::block : PartitionScheme::random;
    const Partition p = make_partition(ds, K, scheme, trial);

    std::vector<int> seen(n, 0);
    std::size_t min_size = n, max_size = 0;
    for (int k = 0; k < K; ++k) {
      min_size = std::min(min_size, p.shards[k].size());
      max_size = std::max(max_size, p.shards[k].size());
      for (std::uint32_t i : p.shards[k]) {
        ++seen[i];
        CHECK(p.owner[i] == static_cast<std::uint32_t>(k));
      }
    }
    for (int c : seen) CHECK(c == 1);
    CHECK(max_size - min_size <= 1);
  }
}

TEST_CASE("random partition is deterministic per seed") {
  const Dataset ds = random_dataset(50, 5, 4);
  const Partition a = make_partition(ds, 4, PartitionScheme::random, 9);
  const Partition b = make_partition(ds, 4, PartitionScheme::random, 9);
  const Partition c = make_partition(ds, 4, PartitionScheme::random, 10);
  CHECK(a.shards == b.shards);
  CHECK(a.shards != c.shards);
}

TEST_CASE("K larger than n is a config error") {
  const Dataset ds = random_dataset(3, 5, 6);
  CHECK_THROWS_AS(make_partition(ds, 4, PartitionScheme::block, 0), ConfigError);
}

TEST_CASE("orthogonality residual on the synthetic instance") {
  SyntheticSpec spec;
  spec.groups = 3;
  spec.group_dim = 4;
  spec.points_per_group = 10;
  spec.seed = 31;
  const Dataset ds = generate_synthetic(spec);

  const Partition block = make_partition(ds, 3, PartitionScheme::block, 0);
  CHECK(orthogonality_residual(ds, block) == 0.0);

  const Partition random = make_partition(ds, 5, PartitionScheme::random, 3);
  CHECK(orthogonality_residual(ds, random) > 0.0);

  const Partition single = make_partition(ds, 1, PartitionScheme::block, 0);
  CHECK(orthogonality_residual(ds, single) == 0.0);
}

TEST_CASE("subsampled residual still sees cross-group overlap") {
  SyntheticSpec spec;
  spec.groups = 2;
  spec.group_dim = 3;
  spec.points_per_group = 60;
  spec.seed = 13;
  const Dataset ds = generate_synthetic(spec);
  const Partition p = make_partition(ds, 4, PartitionScheme::random, 8);
  const double exact = orthogonality_residual(ds, p);
  const double sampled = orthogonality_residual(ds, p, 500);
  CHECK(exact > 0.0);
  CHECK(sampled > 0.0);
  CHECK(sampled <= exact);
}

TEST_CASE("normalization scales only vectors outside the ball") {
  Dataset ds;
  ds.dim = 2;
  ds.x.push_back({{0, 1}, {2.0, 0.0}});
  ds.x.push_back({{0, 1}, {0.3, 0.4}});
  ds.x.push_back({{}, {}});
  ds.y = {1, 2, 3};
  const Dataset out = normalize_unit_ball(ds);
  CHECK(out.x[0].val[0] == doctest::Approx(1.0));
  CHECK(std::sqrt(out.x[0].norm_sq()) == doctest::Approx(1.0));
  CHECK(out.x[1].val == std::vector<double>{0.3, 0.4});
  CHECK(out.x[2].nnz() == 0);
  CHECK(out.y == ds.y);
}

TEST_CASE("sign labels split at the median") {
  Dataset ds;
  ds.dim = 1;
  for (double v : {5.0, 1.0, 2.0, 4.0, 3.0}) {
    ds.x.push_back({{0}, {v}});
    ds.y.push_back(v);
  }
  sign_labels_inplace(ds);
  CHECK(ds.y == std::vector<double>{1, -1, -1, 1, -1});
}
