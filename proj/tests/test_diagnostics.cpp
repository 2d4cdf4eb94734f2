#include "disdca/diagnostics.hpp"

#include <cmath>
#include <sstream>

#include "disdca/rng.hpp"
#include "disdca/solver.hpp"
#include "doctest.h"

using namespace disdca;

namespace {

Dataset dense_random(int n, int dim, std::uint64_t seed) {
  Dataset ds;
  ds.dim = dim;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    SparseVector x;
    for (int j = 0; j < dim; ++j) {
      x.idx.push_back(j);
      x.val.push_back(rng.normal());
    }
    ds.x.push_back(std::move(x));
    ds.y.push_back(rng.uniform() < 0.5 ? 1.0 : -1.0);
  }
  normalize_unit_ball_inplace(ds);
  return ds;
}

}  // namespace

TEST_CASE("primal objective pinned values") {
  const LossModel ls = make_loss(LossKind::least_squares);
  Dataset ds;
  ds.dim = 1;
  ds.x = {{{0}, {1.0}}};
  ds.y = {1.0};
  // n=1, x=e1, y=1, w=e1, lambda=2: loss 0, reg 1
  CHECK(primal_objective(ds, std::vector<double>{1.0}, ls, Regularizer{2.0}) ==
        1.0);

  Dataset many = dense_random(10, 3, 2);
  many.y = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double expect = 0;
  for (double y : many.y) expect += 0.5 * y * y;
  expect /= 10.0;
  CHECK(primal_objective(many, std::vector<double>(3, 0.0), ls,
                         Regularizer{1.0}) == doctest::Approx(expect));
}

TEST_CASE("primal objective matches an independent re-summation") {
  Rng rng(3);
  for (const LossKind kind :
       {LossKind::squared_hinge, LossKind::logistic, LossKind::least_squares}) {
    const LossModel loss = make_loss(kind);
    const Dataset ds = dense_random(40, 6, 17);
    std::vector<double> w(6);
    for (double& v : w) v = rng.normal();
    const Regularizer reg{0.05};

    double sum = 0;
    for (std::size_t i = 0; i < ds.count(); ++i) {
      double z = 0;
      for (std::size_t k = 0; k < ds.x[i].idx.size(); ++k)
        z += ds.x[i].val[k] * w[ds.x[i].idx[k]];
      sum += loss_value(loss, z, ds.y[i]);
    }
    double wnorm = 0;
    for (double v : w) wnorm += v * v;
    const double expect = sum / 40.0 + 0.5 * reg.lambda * wnorm;
    CHECK(primal_objective(ds, w, loss, reg) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("dual objective at zero and weak duality sweep") {
  const Dataset ds = dense_random(30, 5, 23);
  for (const LossKind kind : {LossKind::logistic, LossKind::least_squares}) {
    const LossModel loss = make_loss(kind);
    const Regularizer reg{0.1};
    CHECK(dual_objective(ds, std::vector<double>(30, 0.0), loss, reg) == 0.0);

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> alpha(30);
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double b = rng.uniform();
        alpha[i] = kind == LossKind::logistic ? b * ds.y[i] : 2.0 * b - 1.0;
      }
      // w(alpha) = 1/(lambda n) sum alpha_i x_i
      std::vector<double> w(ds.dim, 0.0);
      for (std::size_t i = 0; i < alpha.size(); ++i)
        ds.x[i].axpy(alpha[i] / (reg.lambda * 30.0), w);
      CHECK(dual_objective(ds, alpha, loss, reg) <=
            primal_objective(ds, w, loss, reg) + 1e-12);
    }
  }
}

TEST_CASE("dual objective reports the offending index on domain violations") {
  const Dataset ds = dense_random(5, 3, 29);
  std::vector<double> alpha(5, 0.0);
  alpha[3] = 2.0 * ds.y[3];  // outside [0,1] after multiplying by y
  CHECK_THROWS_WITH_AS(
      dual_objective(ds, alpha, make_loss(LossKind::logistic), Regularizer{1.0}),
      doctest::Contains("3"), DomainError);
}

TEST_CASE("theorem bound plug-in values") {
  BoundParams p;
  p.epsilon0 = 0.8;

  SUBCASE("t=0 gives epsilon0 for both variants") {
    p.variant = Variant::naive;
    CHECK(theorem_bound(p, 0).dual_bound == 0.8);
    p.variant = Variant::orthogonal;
    CHECK(theorem_bound(p, 0).dual_bound == 0.8);
  }

  SUBCASE("orthogonal with c+n = 2K halves per inner step") {
    // L=2, lambda=1 -> c=2; n=4 -> c+n=6; K=3
    p.L = 2;
    p.lambda = 1;
    p.n = 4;
    p.K = 3;
    p.m = 1;
    p.variant = Variant::orthogonal;
    CHECK(theorem_bound(p, 1).dual_bound == doctest::Approx(0.4));
    CHECK(theorem_bound(p, 1).gap_bound == doctest::Approx(0.4 * 2.0));
  }

  SUBCASE("no bound for the practical variant") {
    p.variant = Variant::practical;
    CHECK_THROWS_AS(theorem_bound(p, 1), ConfigError);
  }
}

TEST_CASE("theorem bound monotonicity") {
  BoundParams p;
  p.L = 2;
  p.lambda = 1e-2;
  p.n = 500;
  p.epsilon0 = 1.0;

  p.variant = Variant::naive;
  p.m = 10;
  p.K = 4;
  double prev = theorem_bound(p, 0).dual_bound;
  for (int t = 1; t <= 20; ++t) {
    const double cur = theorem_bound(p, t).dual_bound;
    CHECK(cur < prev);
    prev = cur;
  }

  p.variant = Variant::orthogonal;
  double prev_m = 2.0;
  for (int m : {1, 2, 5, 10}) {
    p.m = m;
    const double cur = theorem_bound(p, 3).dual_bound;
    CHECK(cur < prev_m);
    prev_m = cur;
  }
  double prev_k = 2.0;
  for (int K : {1, 2, 4, 8}) {  // regime K < c+n holds throughout
    p.K = K;
    p.m = 5;
    const double cur = theorem_bound(p, 3).dual_bound;
    CHECK(cur < prev_k);
    prev_k = cur;
  }
}

TEST_CASE("S accumulation") {
  CHECK(accumulate_S(std::vector<double>{0, 0, 0}, 0.5) == 0.0);
  CHECK(accumulate_S(std::vector<double>{0.7}, 0.3) == 0.7);
  CHECK(accumulate_S(std::vector<double>{1, 1, 1}, 0.5) == doctest::Approx(1.75));
}

TEST_CASE("residual R vanishes when local and global primals agree") {
  std::vector<InnerStepTerm> terms(4);
  Rng rng(31);
  for (InnerStepTerm& t : terms) {
    t.omega = rng.normal();
    t.alpha = rng.normal();
    t.delta_alpha = rng.normal();
    t.x_dot_u = rng.normal();
    t.x_dot_w = t.x_dot_u;  // u == w at the first inner step
  }
  CHECK(residual_R(terms, 0.5, 100) == 0.0);

  terms[2].x_dot_w = terms[2].x_dot_u + 0.25;
  CHECK(residual_R(terms, 0.5, 100) ==
        doctest::Approx((0.5 * (terms[2].omega - terms[2].alpha) -
                         terms[2].delta_alpha) *
                        -0.25 / 100.0));
}

TEST_CASE("trace csv layout") {
  std::vector<TraceRecord> trace(2);
  trace[0].t = 0;
  trace[0].dual_obj = 0;
  trace[0].primal_obj = 0.5;
  trace[0].gap = 0.5;
  trace[1].t = 1;
  trace[1].j = 2;
  trace[1].dual_obj = 0.25;
  trace[1].primal_obj = 0.5;
  trace[1].gap = 0.25;
  trace[1].epsilon = 0.125;
  trace[1].R = 0.01;
  trace[1].S = 0.02;
  trace[1].dist_to_opt = 0.375;

  std::ostringstream out;
  const std::vector<std::pair<std::string, std::string>> cfg = {{"K", "5"}};
  write_trace_csv(out, trace, cfg);
  const std::string text = out.str();
  CHECK(text.find("# K=5\n") == 0);
  CHECK(text.find("t,j,dual_obj,primal_obj,gap,epsilon,R,S,dist_to_opt\n") !=
        std::string::npos);
  CHECK(text.find("0,-1,0,0.5,0.5,,,,\n") != std::string::npos);
  CHECK(text.find("1,2,0.25,0.5,0.25,0.125,0.01,0.02,0.375\n") !=
        std::string::npos);

  std::ostringstream again;
  write_trace_csv(again, trace, cfg);
  CHECK(again.str() == text);
}

TEST_CASE("epsilon fit reports decay ratios below one on a converging run") {
  SyntheticSpec spec;
  spec.groups = 4;
  spec.group_dim = 4;
  spec.points_per_group = 50;
  spec.seed = 3;
  Dataset ds = generate_synthetic(spec);
  sign_labels_inplace(ds);
  const Partition part = make_partition(ds, 4, PartitionScheme::block, 1);

  SolverConfig cfg;
  cfg.variant = Variant::practical;
  cfg.K = 4;
  cfg.m = 40;
  cfg.T = 12;
  cfg.lambda = 0.05;
  cfg.loss = make_loss(LossKind::squared_hinge);
  cfg.seed = 5;

  const Reference ref = run_sdca_reference(ds, cfg.lambda, cfg.loss, 1e-12);
  RunHooks hooks;
  hooks.reference = &ref;
  const SolverResult result = run_disdca(cfg, ds, part, hooks);
  const EpsilonFit fit = epsilon_fit(result.trace);
  REQUIRE(fit.rounds.size() >= 10);
  for (std::size_t i = 1; i < fit.rounds.size(); ++i)
    CHECK(fit.decay_ratio[i] < 1.0);
}

TEST_CASE("R vanishes for K=1 and at the first inner step, shrinks near the optimum") {
  SyntheticSpec spec;
  spec.groups = 4;
  spec.group_dim = 3;
  spec.points_per_group = 30;
  spec.seed = 21;
  Dataset ds = generate_synthetic(spec);
  sign_labels_inplace(ds);

  SolverConfig cfg;
  cfg.variant = Variant::practical;
  cfg.K = 1;
  cfg.m = 30;
  cfg.T = 4;
  cfg.lambda = 0.05;
  cfg.loss = make_loss(LossKind::squared_hinge);
  cfg.seed = 2;
  RunHooks hooks;
  hooks.inner_records = true;

  // K=1: u tracks the virtual global primal exactly
  const Partition single = make_partition(ds, 1, PartitionScheme::block, 0);
  for (const TraceRecord& rec : run_disdca(cfg, ds, single, hooks).trace)
    if (rec.j > 0) CHECK(*rec.R == 0.0);

  // K>1: the first step of every round still has u_k = w^{t,0}
  cfg.K = 4;
  cfg.T = 60;
  const Partition part = make_partition(ds, 4, PartitionScheme::random, 1);
  const SolverResult longrun = run_disdca(cfg, ds, part, hooks);
  CHECK(longrun.trace.back().gap <= 1e-9);
  double tail_worst_r = 0;
  for (const TraceRecord& rec : longrun.trace) {
    if (rec.j == 1) CHECK(*rec.R == 0.0);
    if (rec.j > 0 && rec.t == cfg.T)
      tail_worst_r = std::max(tail_worst_r, std::abs(*rec.R));
  }
  CHECK(tail_worst_r <= 1e-6);
}

TEST_CASE("epsilon stays above -1e-10 against the reference") {
  SyntheticSpec spec;
  spec.groups = 3;
  spec.group_dim = 3;
  spec.points_per_group = 30;
  spec.seed = 6;
  const Dataset ds = generate_synthetic(spec);
  SolverConfig cfg;
  cfg.variant = Variant::practical;
  cfg.K = 3;
  cfg.m = 30;
  cfg.T = 80;
  cfg.lambda = 0.05;
  cfg.loss = make_loss(LossKind::least_squares);
  cfg.seed = 4;
  const Reference ref = run_sdca_reference(ds, cfg.lambda, cfg.loss, 1e-10);
  RunHooks hooks;
  hooks.reference = &ref;
  const Partition part = make_partition(ds, 3, PartitionScheme::block, 0);
  const SolverResult result = run_disdca(cfg, ds, part, hooks);
  CHECK(result.trace.back().gap <= 1e-8);  // converged enough to stress it
  for (const TraceRecord& rec : result.trace)
    CHECK(*rec.epsilon >= -1e-10);
}

TEST_CASE("epsilon plateau is zero for a converged K=1 run") {
  SyntheticSpec spec;
  spec.groups = 2;
  spec.group_dim = 3;
  spec.points_per_group = 40;
  spec.seed = 8;
  const Dataset ds = generate_synthetic(spec);
  const Partition part = make_partition(ds, 1, PartitionScheme::block, 0);

  SolverConfig cfg;
  cfg.variant = Variant::practical;
  cfg.K = 1;
  cfg.m = 80;
  cfg.T = 60;
  cfg.lambda = 0.05;
  cfg.loss = make_loss(LossKind::least_squares);
  cfg.seed = 2;

  const Reference ref = run_sdca_reference(ds, cfg.lambda, cfg.loss, 1e-12);
  RunHooks hooks;
  hooks.reference = &ref;
  const SolverResult result = run_disdca(cfg, ds, part, hooks);
  CHECK(*result.trace.back().epsilon <= 1e-6);
}
