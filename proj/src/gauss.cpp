#include "fsner/gauss.hpp"

#include <cmath>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

std::string distance_mode_name(DistanceMode mode) {
  switch (mode) {
    case DistanceMode::kKlSymmetric: return "kl";
    case DistanceMode::kEuclideanMean: return "euclid_mean";
    case DistanceMode::kPointEuclidean: return "point_euclid";
    case DistanceMode::kPointCosine: return "point_cos";
  }
  return "kl";
}

DistanceMode distance_mode_from_name(const std::string& name) {
  if (name == "kl") return DistanceMode::kKlSymmetric;
  if (name == "euclid_mean") return DistanceMode::kEuclideanMean;
  if (name == "point_euclid") return DistanceMode::kPointEuclidean;
  if (name == "point_cos") return DistanceMode::kPointCosine;
  throw ParseError("unknown distance mode '" + name +
                   "' (expected kl, euclid_mean, point_euclid or point_cos)");
}

std::vector<Parameter*> ProjectionHeads::parameters() {
  return {&w_mu, &b_mu, &w_sigma, &b_sigma};
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (double& x : t.values()) x = rng.uniform(-limit, limit);
  return t;
}

Tensor bias_init(std::size_t n, Rng& rng) {
  Tensor t({n});
  for (double& x : t.values()) x = rng.uniform(-0.05, 0.05);
  return t;
}

}  // namespace

ProjectionHeads make_heads(std::size_t l_prime, std::size_t l, Rng& rng,
                           double sigma_eps) {
  if (!(sigma_eps > 0.0)) {
    throw DomainError("make_heads: sigma_eps must be positive");
  }
  ProjectionHeads heads;
  heads.w_mu = {"heads.w_mu", glorot(l_prime, l, rng)};
  heads.b_mu = {"heads.b_mu", bias_init(l, rng)};
  heads.w_sigma = {"heads.w_sigma", glorot(l_prime, l, rng)};
  heads.b_sigma = {"heads.b_sigma", bias_init(l, rng)};
  heads.sigma_eps = sigma_eps;
  return heads;
}

TokenNodes project(Tape& tape, ProjectionHeads& heads, NodeId h,
                   DistanceMode mode) {
  NodeId rh = tape.relu(h);
  NodeId mu_raw =
      tape.add(tape.matmul(rh, tape.use(heads.w_mu)), tape.use(heads.b_mu));
  NodeId sig_raw = tape.add(tape.matmul(rh, tape.use(heads.w_sigma)),
                            tape.use(heads.b_sigma));
  TokenNodes out;
  if (mode == DistanceMode::kPointEuclidean ||
      mode == DistanceMode::kPointCosine) {
    // 2l-dimensional point embedding: both head outputs, no ELU.
    out.mu = tape.concat({mu_raw, sig_raw});
    out.sigma = -1;
  } else {
    out.mu = mu_raw;
    out.sigma = tape.add_const(tape.elu(sig_raw), 1.0 + heads.sigma_eps);
  }
  return out;
}

TokenAux make_token_aux(Tape& tape, const TokenNodes& t, DistanceMode mode) {
  TokenAux aux;
  if (mode == DistanceMode::kKlSymmetric) {
    Tensor ones({tape.value(t.sigma).size()});
    ones.fill(1.0);
    aux.inv_sigma = tape.div(tape.leaf(std::move(ones)), t.sigma);
    aux.log_sigma_sum = tape.sum(tape.log(t.sigma));
  }
  return aux;
}

namespace {

// KL(q || p) for diagonal Gaussians on the tape, Eq(uivalent) to the scalar
// route: 0.5 * (sum(sig_q/sig_p) + sum((mu_p-mu_q)^2/sig_p) - l
//               + sum(log sig_p) - sum(log sig_q)).
NodeId kl_node(Tape& tape, const TokenNodes& q, const TokenNodes& p,
               const TokenAux& aux_q, const TokenAux& aux_p, NodeId diff_sq) {
  std::size_t l = tape.value(q.mu).size();
  NodeId trace = tape.sum(tape.mul(q.sigma, aux_p.inv_sigma));
  NodeId maha = tape.sum(tape.mul(diff_sq, aux_p.inv_sigma));
  NodeId logdet = tape.sub(aux_p.log_sigma_sum, aux_q.log_sigma_sum);
  NodeId total = tape.add(tape.add(trace, maha), logdet);
  return tape.mul_const(tape.add_const(total, -static_cast<double>(l)), 0.5);
}

}  // namespace

NodeId distance_node(Tape& tape, const TokenNodes& a, const TokenNodes& b,
                     const TokenAux& aux_a, const TokenAux& aux_b,
                     DistanceMode mode) {
  NodeId diff = tape.sub(a.mu, b.mu);
  switch (mode) {
    case DistanceMode::kKlSymmetric: {
      NodeId diff_sq = tape.mul(diff, diff);
      NodeId kl_ab = kl_node(tape, a, b, aux_a, aux_b, diff_sq);
      NodeId kl_ba = kl_node(tape, b, a, aux_b, aux_a, diff_sq);
      return tape.mul_const(tape.add(kl_ab, kl_ba), 0.5);
    }
    case DistanceMode::kEuclideanMean:
    case DistanceMode::kPointEuclidean:
      return tape.sum(tape.mul(diff, diff));
    case DistanceMode::kPointCosine: {
      NodeId dot = tape.sum(tape.mul(a.mu, b.mu));
      NodeId na = tape.sqrt(tape.sum(tape.mul(a.mu, a.mu)));
      NodeId nb = tape.sqrt(tape.sum(tape.mul(b.mu, b.mu)));
      if (tape.value(na).item() == 0.0 || tape.value(nb).item() == 0.0) {
        throw DomainError("cosine distance: zero-norm embedding");
      }
      NodeId cos = tape.div(dot, tape.mul(na, nb));
      return tape.add_const(tape.neg(cos), 1.0);
    }
  }
  throw DomainError("distance_node: bad mode");
}

GaussianParams project_values(const ProjectionHeads& heads,
                              std::span<const double> h) {
  std::size_t lp = heads.in_dim();
  std::size_t l = heads.out_dim();
  if (h.size() != lp) {
    throw DimensionError("project: input size " + std::to_string(h.size()) +
                         " does not match heads input " + std::to_string(lp));
  }
  GaussianParams out;
  out.mu.assign(l, 0.0);
  out.sigma.assign(l, 0.0);
  std::vector<double> rh(lp);
  for (std::size_t i = 0; i < lp; ++i) rh[i] = h[i] > 0.0 ? h[i] : 0.0;
  for (std::size_t j = 0; j < l; ++j) {
    double mu = heads.b_mu.value[j];
    double sg = heads.b_sigma.value[j];
    for (std::size_t i = 0; i < lp; ++i) {
      mu += rh[i] * heads.w_mu.value.at(i, j);
      sg += rh[i] * heads.w_sigma.value.at(i, j);
    }
    out.mu[j] = mu;
    out.sigma[j] = (sg > 0.0 ? sg : std::expm1(sg)) + 1.0 + heads.sigma_eps;
  }
  return out;
}

std::vector<double> project_point_values(const ProjectionHeads& heads,
                                         std::span<const double> h) {
  std::size_t lp = heads.in_dim();
  std::size_t l = heads.out_dim();
  if (h.size() != lp) {
    throw DimensionError("project: input size " + std::to_string(h.size()) +
                         " does not match heads input " + std::to_string(lp));
  }
  std::vector<double> rh(lp);
  for (std::size_t i = 0; i < lp; ++i) rh[i] = h[i] > 0.0 ? h[i] : 0.0;
  std::vector<double> out(2 * l, 0.0);
  for (std::size_t j = 0; j < l; ++j) {
    double mu = heads.b_mu.value[j];
    double sg = heads.b_sigma.value[j];
    for (std::size_t i = 0; i < lp; ++i) {
      mu += rh[i] * heads.w_mu.value.at(i, j);
      sg += rh[i] * heads.w_sigma.value.at(i, j);
    }
    out[j] = mu;
    out[l + j] = sg;
  }
  return out;
}

double kl_divergence(const GaussianParams& q, const GaussianParams& p) {
  std::size_t l = q.mu.size();
  if (p.mu.size() != l || q.sigma.size() != l || p.sigma.size() != l) {
    throw DimensionError("kl_divergence: dimension mismatch");
  }
  double trace = 0.0, maha = 0.0, logdet = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    if (!(q.sigma[i] > 0.0) || !(p.sigma[i] > 0.0)) {
      throw DomainError("kl_divergence: non-positive sigma");
    }
    trace += q.sigma[i] / p.sigma[i];
    double d = p.mu[i] - q.mu[i];
    maha += d * d / p.sigma[i];
    logdet += std::log(p.sigma[i]) - std::log(q.sigma[i]);
  }
  return 0.5 * (trace + maha - static_cast<double>(l) + logdet);
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("squared_euclidean: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double distance(const GaussianParams& a, const GaussianParams& b,
                DistanceMode mode) {
  switch (mode) {
    case DistanceMode::kKlSymmetric:
      return 0.5 * (kl_divergence(a, b) + kl_divergence(b, a));
    case DistanceMode::kEuclideanMean:
    case DistanceMode::kPointEuclidean:
      return squared_euclidean(a.mu, b.mu);
    case DistanceMode::kPointCosine: {
      if (a.mu.size() != b.mu.size()) {
        throw DimensionError("distance: dimension mismatch");
      }
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < a.mu.size(); ++i) {
        dot += a.mu[i] * b.mu[i];
        na += a.mu[i] * a.mu[i];
        nb += b.mu[i] * b.mu[i];
      }
      if (na == 0.0 || nb == 0.0) {
        throw DomainError("cosine distance: zero-norm embedding");
      }
      return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    }
  }
  throw DomainError("distance: bad mode");
}

}  // namespace fsner
