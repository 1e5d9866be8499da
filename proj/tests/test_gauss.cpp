#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fsner/error.hpp"
#include "fsner/gauss.hpp"
#include "fsner/rng.hpp"
#include "test_util.hpp"

using namespace fsner;

namespace {

ProjectionHeads random_heads(std::size_t lp, std::size_t l,
                             std::uint64_t seed) {
  Rng rng(seed);
  return make_heads(lp, l, rng);
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// KL for arbitrary covariance matrices (l <= 3), evaluated with explicit
// inverse, trace and determinant. Independent of the diagonal shortcut.
double full_matrix_kl(const std::vector<double>& mu_q,
                      const std::vector<std::vector<double>>& cov_q,
                      const std::vector<double>& mu_p,
                      const std::vector<std::vector<double>>& cov_p) {
  std::size_t l = mu_q.size();
  auto det = [l](const std::vector<std::vector<double>>& m) {
    if (l == 1) return m[0][0];
    if (l == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  auto inverse = [l, det](const std::vector<std::vector<double>>& m) {
    std::vector<std::vector<double>> inv(l, std::vector<double>(l, 0.0));
    double d = det(m);
    if (l == 1) {
      inv[0][0] = 1.0 / m[0][0];
    } else if (l == 2) {
      inv[0][0] = m[1][1] / d;
      inv[0][1] = -m[0][1] / d;
      inv[1][0] = -m[1][0] / d;
      inv[1][1] = m[0][0] / d;
    } else {
      inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
      inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
      inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
      inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
      inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
      inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
      inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
      inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
      inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
    }
    return inv;
  };
  auto pinv = inverse(cov_p);
  double trace = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t k = 0; k < l; ++k) trace += pinv[i][k] * cov_q[k][i];
  }
  double maha = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      maha += (mu_p[i] - mu_q[i]) * pinv[i][j] * (mu_p[j] - mu_q[j]);
    }
  }
  return 0.5 * (trace + maha - static_cast<double>(l) +
                std::log(det(cov_p) / det(cov_q)));
}

}  // namespace

TEST_CASE("project: zero sigma-head output gives sigma = 1 + eps") {
  auto heads = random_heads(3, 2, 10);
  heads.w_sigma.value.fill(0.0);
  heads.b_sigma.value.fill(0.0);
  std::vector<double> h = {0.5, -0.3, 1.0};
  auto g = project_values(heads, h);
  for (double s : g.sigma) {
    CHECK(s == doctest::Approx(1.0 + heads.sigma_eps).epsilon(1e-15));
  }
}

TEST_CASE("project: sigma stays positive even for very negative head output") {
  auto heads = random_heads(2, 2, 11);
  heads.w_sigma.value.fill(0.0);
  heads.b_sigma.value.fill(-200.0);  // elu -> -1 in the limit
  std::vector<double> h = {1.0, 1.0};
  auto g = project_values(heads, h);
  for (double s : g.sigma) {
    CHECK(s > 0.0);
    CHECK(s == doctest::Approx(heads.sigma_eps).epsilon(1e-3));
  }
}

TEST_CASE("project: mu matches a hand-rolled layer evaluation, l = 4") {
  auto heads = random_heads(5, 4, 12);
  Rng rng(13);
  auto h = random_vec(5, rng, -1.5, 1.5);
  auto g = project_values(heads, h);
  for (std::size_t j = 0; j < 4; ++j) {
    double mu = heads.b_mu.value[j];
    for (std::size_t i = 0; i < 5; ++i) {
      double r = h[i] > 0.0 ? h[i] : 0.0;  // ReLU before the linear layer
      mu += r * heads.w_mu.value.at(i, j);
    }
    CHECK(g.mu[j] == doctest::Approx(mu).epsilon(1e-12));
    CHECK(g.sigma[j] > 0.0);
  }
}

TEST_CASE("project: tape route equals the plain-value route") {
  auto heads = random_heads(4, 3, 14);
  Rng rng(15);
  auto h = random_vec(4, rng, -2.0, 2.0);
  auto plain = project_values(heads, h);
  Tape tape;
  NodeId hn = tape.leaf(Tensor::vector(h));
  auto nodes = project(tape, heads, hn);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(tape.value(nodes.mu)[j] == doctest::Approx(plain.mu[j]).epsilon(1e-14));
    CHECK(tape.value(nodes.sigma)[j] ==
          doctest::Approx(plain.sigma[j]).epsilon(1e-14));
  }
  auto point = project_point_values(heads, h);
  Tape tape2;
  NodeId hn2 = tape2.leaf(Tensor::vector(h));
  auto pnodes = project(tape2, heads, hn2, DistanceMode::kPointEuclidean);
  REQUIRE(tape2.value(pnodes.mu).size() == 6);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(tape2.value(pnodes.mu)[j] == doctest::Approx(point[j]).epsilon(1e-14));
  }
}

TEST_CASE("kl_divergence: identical distributions give zero") {
  Rng rng(16);
  auto g = testutil::random_gaussian(4, rng);
  CHECK(kl_divergence(g, g) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kl_divergence: 1-D hand-computed value 0.5") {
  GaussianParams q{{1.0}, {1.0}};
  GaussianParams p{{0.0}, {1.0}};
  CHECK(kl_divergence(q, p) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kl_divergence: l=2 matches a 200k-sample Monte-Carlo estimate") {
  Rng rng(17);
  auto q = testutil::random_gaussian(2, rng);
  auto p = testutil::random_gaussian(2, rng);
  double closed = kl_divergence(q, p);
  Rng mc_rng(18);
  double mc = testutil::monte_carlo_kl(q, p, 200000, mc_rng);
  CHECK(std::fabs(closed - mc) / std::max(std::fabs(closed), 0.05) < 0.02);
}

TEST_CASE("kl_divergence: asymmetric when sigmas differ, both directions "
          "match Monte-Carlo") {
  GaussianParams q{{0.0, 1.0}, {0.4, 2.5}};
  GaussianParams p{{0.5, 0.0}, {1.5, 0.3}};
  double qp = kl_divergence(q, p);
  double pq = kl_divergence(p, q);
  CHECK(std::fabs(qp - pq) > 1e-3);
  Rng r1(19), r2(20);
  double mc_qp = testutil::monte_carlo_kl(q, p, 200000, r1);
  double mc_pq = testutil::monte_carlo_kl(p, q, 200000, r2);
  CHECK(std::fabs(qp - mc_qp) / std::fabs(qp) < 0.02);
  CHECK(std::fabs(pq - mc_pq) / std::fabs(pq) < 0.02);
}

TEST_CASE("property: kl_divergence is nonnegative") {
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    Rng rng = Rng::child(21, "klpos", trial);
    std::size_t l = 1 + rng.uniform_index(5);
    auto q = testutil::random_gaussian(l, rng);
    auto p = testutil::random_gaussian(l, rng);
    CHECK(kl_divergence(q, p) >= -1e-12);
  }
}

TEST_CASE("kl_divergence: diagonal equals explicit full-matrix Eq for l<=3") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng = Rng::child(22, "klmat", trial);
    std::size_t l = 1 + rng.uniform_index(3);
    auto q = testutil::random_gaussian(l, rng);
    auto p = testutil::random_gaussian(l, rng);
    std::vector<std::vector<double>> cq(l, std::vector<double>(l, 0.0));
    std::vector<std::vector<double>> cp(l, std::vector<double>(l, 0.0));
    for (std::size_t i = 0; i < l; ++i) {
      cq[i][i] = q.sigma[i];
      cp[i][i] = p.sigma[i];
    }
    double expect = full_matrix_kl(q.mu, cq, p.mu, cp);
    CHECK(kl_divergence(q, p) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("kl_divergence: non-positive sigma is a domain error") {
  GaussianParams q{{0.0}, {0.0}};
  GaussianParams p{{0.0}, {1.0}};
  CHECK_THROWS_AS(kl_divergence(q, p), DomainError);
}

TEST_CASE("distance: a == b gives zero in every mode") {
  Rng rng(23);
  auto g = testutil::random_gaussian(3, rng);
  CHECK(distance(g, g, DistanceMode::kKlSymmetric) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(distance(g, g, DistanceMode::kEuclideanMean) == 0.0);
  GaussianParams pt{{0.3, -0.8, 2.0}, {}};
  CHECK(distance(pt, pt, DistanceMode::kPointEuclidean) == 0.0);
  CHECK(distance(pt, pt, DistanceMode::kPointCosine) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("distance: symmetric KL on the 1-D fixture is 0.5") {
  GaussianParams q{{1.0}, {1.0}};
  GaussianParams p{{0.0}, {1.0}};
  CHECK(distance(q, p, DistanceMode::kKlSymmetric) ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("distance: squared Euclidean of means, 3-4-5 triangle") {
  GaussianParams a{{0.0, 0.0}, {1.0, 1.0}};
  GaussianParams b{{3.0, 4.0}, {1.0, 1.0}};
  CHECK(distance(a, b, DistanceMode::kEuclideanMean) == 25.0);
}

TEST_CASE("property: distance is symmetric and nonnegative in every mode") {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng = Rng::child(24, "dist", trial);
    auto a = testutil::random_gaussian(3, rng);
    auto b = testutil::random_gaussian(3, rng);
    for (auto mode : {DistanceMode::kKlSymmetric, DistanceMode::kEuclideanMean,
                      DistanceMode::kPointEuclidean,
                      DistanceMode::kPointCosine}) {
      double ab = distance(a, b, mode);
      double ba = distance(b, a, mode);
      CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
      CHECK(ab >= -1e-12);
    }
  }
}

TEST_CASE("distance: zero-norm mu under cosine is a domain error") {
  GaussianParams a{{0.0, 0.0}, {}};
  GaussianParams b{{1.0, 0.0}, {}};
  CHECK_THROWS_AS(distance(a, b, DistanceMode::kPointCosine), DomainError);
}

TEST_CASE("distance_node: tape route equals the scalar route per mode") {
  for (std::uint64_t trial = 0; trial < 25; ++trial) {
    Rng rng = Rng::child(25, "dnode", trial);
    auto a = testutil::random_gaussian(4, rng);
    auto b = testutil::random_gaussian(4, rng);
    for (auto mode : {DistanceMode::kKlSymmetric, DistanceMode::kEuclideanMean,
                      DistanceMode::kPointEuclidean,
                      DistanceMode::kPointCosine}) {
      Tape tape;
      TokenNodes ta, tb;
      ta.mu = tape.leaf(Tensor::vector(a.mu));
      tb.mu = tape.leaf(Tensor::vector(b.mu));
      if (mode == DistanceMode::kKlSymmetric) {
        ta.sigma = tape.leaf(Tensor::vector(a.sigma));
        tb.sigma = tape.leaf(Tensor::vector(b.sigma));
      }
      TokenAux aux_a = make_token_aux(tape, ta, mode);
      TokenAux aux_b = make_token_aux(tape, tb, mode);
      NodeId d = distance_node(tape, ta, tb, aux_a, aux_b, mode);
      CHECK(tape.value(d).item() ==
            doctest::Approx(distance(a, b, mode)).epsilon(1e-11));
    }
  }
}
