#pragma once

#include <span>
#include <string>
#include <vector>

#include "fsner/graph.hpp"

namespace fsner {

inline constexpr double kDefaultSigmaEps = 1e-14;

// Distance used between token embeddings. The point modes are the ablation
// family: they use a single 2l-dimensional point embedding (the two head
// outputs concatenated, no ELU) and ignore sigma entirely.
enum class DistanceMode {
  kKlSymmetric,
  kEuclideanMean,
  kPointEuclidean,
  kPointCosine,
};

std::string distance_mode_name(DistanceMode mode);
DistanceMode distance_mode_from_name(const std::string& name);

// Two heads, each a ReLU followed by one linear layer l' -> l. mu comes from
// the first head; sigma is elu(second head) + 1 + eps, so every element
// stays above eps > 0.
struct ProjectionHeads {
  Parameter w_mu;     // [l' x l]
  Parameter b_mu;     // [l]
  Parameter w_sigma;  // [l' x l]
  Parameter b_sigma;  // [l]
  double sigma_eps = kDefaultSigmaEps;

  std::size_t in_dim() const { return w_mu.value.rows(); }
  std::size_t out_dim() const { return w_mu.value.cols(); }
  std::vector<Parameter*> parameters();
};

ProjectionHeads make_heads(std::size_t l_prime, std::size_t l, class Rng& rng,
                           double sigma_eps = kDefaultSigmaEps);

// Per-token Gaussian: mean and the diagonal of the covariance, one variance
// per dimension. For point modes mu holds the 2l point embedding and sigma
// is empty.
struct GaussianParams {
  std::vector<double> mu;
  std::vector<double> sigma;
};

// --- differentiable route (training) ---

// Tape-side token embedding; sigma is -1 under point modes.
struct TokenNodes {
  NodeId mu = -1;
  NodeId sigma = -1;
};

TokenNodes project(Tape& tape, ProjectionHeads& heads, NodeId h,
                   DistanceMode mode = DistanceMode::kKlSymmetric);

// d(p, q) as a tape node. aux_* are per-token caches (reciprocal of sigma,
// sum of log sigma) shared across the pairs of one batch; pass empty
// TokenAux for one-off use.
struct TokenAux {
  NodeId inv_sigma = -1;
  NodeId log_sigma_sum = -1;
};

TokenAux make_token_aux(Tape& tape, const TokenNodes& t, DistanceMode mode);

NodeId distance_node(Tape& tape, const TokenNodes& a, const TokenNodes& b,
                     const TokenAux& aux_a, const TokenAux& aux_b,
                     DistanceMode mode);

// --- plain-value route (inference, oracles) ---

GaussianParams project_values(const ProjectionHeads& heads,
                              std::span<const double> h);
std::vector<double> project_point_values(const ProjectionHeads& heads,
                                         std::span<const double> h);

// Diagonal-Gaussian KL(q || p); throws DomainError on non-positive sigma.
double kl_divergence(const GaussianParams& q, const GaussianParams& p);

// Symmetric distance for the given mode. Point modes operate on mu only;
// a zero-norm mu under cosine raises DomainError.
double distance(const GaussianParams& a, const GaussianParams& b,
                DistanceMode mode);

double squared_euclidean(std::span<const double> a, std::span<const double> b);

}  // namespace fsner
