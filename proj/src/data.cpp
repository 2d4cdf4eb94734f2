#include "disdca/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "disdca/rng.hpp"

namespace disdca {

const char* scheme_name(PartitionScheme s) {
  return s == PartitionScheme::block ? "block" : "random";
}

PartitionScheme scheme_from_name(std::string_view name) {
  if (name == "block") return PartitionScheme::block;
  if (name == "random") return PartitionScheme::random;
  throw ConfigError("unknown partition scheme: " + std::string(name));
}

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& msg) {
    throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const char* s = line.c_str();
    while (*s == ' ' || *s == '\t') ++s;
    if (*s == '\0' || *s == '#') continue;

    char* end = nullptr;
    const double label = std::strtod(s, &end);
    if (end == s) fail("malformed label");
    s = end;

    SparseVector x;
    std::int64_t prev = 0;
    for (;;) {
      while (*s == ' ' || *s == '\t') ++s;
      if (*s == '\0' || *s == '\r') break;
      const long long index = std::strtoll(s, &end, 10);
      if (end == s || *end != ':') fail("malformed feature token");
      if (index < 1) fail("feature index must be >= 1");
      if (index <= prev) fail("feature indices must be strictly increasing");
      prev = index;
      s = end + 1;
      const double value = std::strtod(s, &end);
      if (end == s) fail("malformed feature value");
      s = end;
      x.idx.push_back(static_cast<std::uint32_t>(index - 1));
      x.val.push_back(value);
      ds.dim = std::max<std::uint32_t>(ds.dim, static_cast<std::uint32_t>(index));
    }
    ds.x.push_back(std::move(x));
    ds.y.push_back(label);
  }
  if (ds.x.empty()) throw IoError(path.string() + ": no examples");
  return ds;
}

void save_libsvm(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[64];
  for (std::size_t i = 0; i < ds.count(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y[i]);
    out << buf;
    const SparseVector& x = ds.x[i];
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", x.val[k]);
      out << ' ' << (x.idx[k] + 1) << ':' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.groups < 1 || spec.group_dim < 1 || spec.points_per_group < 1)
    throw ConfigError("synthetic spec fields must be >= 1");

  Dataset ds;
  ds.dim = static_cast<std::uint32_t>(spec.groups * spec.group_dim);
  ds.x.reserve(static_cast<std::size_t>(spec.groups) * spec.points_per_group);
  Rng rng(spec.seed);

  for (int g = 0; g < spec.groups; ++g) {
    const std::uint32_t base = static_cast<std::uint32_t>(g * spec.group_dim);
    for (int p = 0; p < spec.points_per_group; ++p) {
      SparseVector x;
      x.idx.resize(spec.group_dim);
      x.val.resize(spec.group_dim);
      double label = 0;
      for (int j = 0; j < spec.group_dim; ++j) {
        const double v = rng.normal();
        x.idx[j] = base + static_cast<std::uint32_t>(j);
        x.val[j] = v;
        const double h = v / 2.0;
        label += spec.u_value * v + h * h * h;
      }
      ds.x.push_back(std::move(x));
      ds.y.push_back(label);
    }
  }
  normalize_unit_ball_inplace(ds);
  return ds;
}

Partition make_partition(const Dataset& ds, int K, PartitionScheme scheme,
                         std::uint64_t seed) {
  const std::size_t n = ds.count();
  if (K < 1) throw ConfigError("K must be >= 1");
  if (static_cast<std::size_t>(K) > n)
    throw ConfigError("K=" + std::to_string(K) + " exceeds n=" + std::to_string(n));

  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  if (scheme == PartitionScheme::random) {
    Rng rng(seed);
    rng.shuffle(order);
  }

  Partition p;
  p.K = K;
  p.scheme = scheme;
  p.shards.resize(K);
  p.owner.resize(n);
  const std::size_t base = n / K;
  const std::size_t rem = n % K;
  std::size_t pos = 0;
  for (int k = 0; k < K; ++k) {
    const std::size_t size = base + (static_cast<std::size_t>(k) < rem ? 1 : 0);
    p.shards[k].assign(order.begin() + pos, order.begin() + pos + size);
    for (std::size_t i = pos; i < pos + size; ++i) p.owner[order[i]] = k;
    pos += size;
  }
  return p;
}

double orthogonality_residual(const Dataset& ds, const Partition& p,
                              std::uint64_t max_pairs) {
  const std::uint64_t n = ds.count();
  std::uint64_t same = 0;
  for (const auto& shard : p.shards) {
    const std::uint64_t s = shard.size();
    same += s * s;
  }
  const std::uint64_t cross = (n * n - same) / 2;
  double worst = 0;

  if (cross <= max_pairs) {
    for (int a = 0; a < p.K; ++a)
      for (int b = a + 1; b < p.K; ++b)
        for (std::uint32_t i : p.shards[a])
          for (std::uint32_t j : p.shards[b])
            worst = std::max(worst, std::abs(sparse_dot(ds.x[i], ds.x[j])));
    return worst;
  }

  // too many pairs for an exact scan; sample with a fixed seed
  Rng rng(0xD15DCAu);
  std::uint64_t seen = 0;
  while (seen < max_pairs) {
    const auto i = static_cast<std::uint32_t>(rng.below(n));
    const auto j = static_cast<std::uint32_t>(rng.below(n));
    if (p.owner[i] == p.owner[j]) continue;
    worst = std::max(worst, std::abs(sparse_dot(ds.x[i], ds.x[j])));
    ++seen;
  }
  return worst;
}

void normalize_unit_ball_inplace(Dataset& ds) {
  for (SparseVector& x : ds.x) {
    const double norm = std::sqrt(x.norm_sq());
    if (norm > 1.0) x.scale(1.0 / norm);
  }
}

Dataset normalize_unit_ball(Dataset ds) {
  normalize_unit_ball_inplace(ds);
  return ds;
}

void sign_labels_inplace(Dataset& ds) {
  std::vector<double> sorted(ds.y);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (double& v : ds.y) v = v > median ? 1.0 : -1.0;
}

}  // namespace disdca
