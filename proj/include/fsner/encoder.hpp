#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/graph.hpp"
#include "fsner/tensor.hpp"

namespace fsner {

// Frozen static token embeddings. Lookups of unseen tokens return the
// fallback vector (mean of all rows). Never receives gradients.
struct EmbeddingTable {
  std::unordered_map<std::string, std::size_t> vocab;
  Tensor vectors;  // [V x d_emb]
  std::vector<double> fallback;

  std::size_t dim() const { return vectors.cols(); }
  std::size_t size() const { return vectors.rows(); }
  std::span<const double> row(const std::string& token) const;
};

// word2vec text format: first line "V d", then one "token v1 ... vd" line
// per entry. Throws ParseError with a line number on dimension mismatch or
// duplicate token.
EmbeddingTable parse_embeddings(const std::string& text);
EmbeddingTable load_embeddings(const std::string& path);
std::string write_embeddings(const EmbeddingTable& table,
                             const std::vector<std::string>& order);

// Trainable windowed two-layer MLP mapping each token (with w context
// tokens each side, zero-padded at sentence bounds) to a contextual vector
// of dimension l'.
struct EncoderParams {
  int window = 2;
  Parameter w1;  // [(2w+1)*d_emb x l']
  Parameter b1;  // [l']
  Parameter w2;  // [l' x l']
  Parameter b2;  // [l']

  std::size_t input_dim() const { return w1.value.rows(); }
  std::size_t out_dim() const { return b2.value.size(); }
  std::vector<Parameter*> parameters();
};

// Glorot-uniform weights, zero biases, drawn from rng.
EncoderParams make_encoder(std::size_t d_emb, int window, std::size_t l_prime,
                           class Rng& rng);

// The concatenated embedding window feeding token i of the sentence.
std::vector<double> window_input(const EmbeddingTable& table,
                                 const Sentence& sentence, std::size_t i,
                                 int window);

// Differentiable encoding of every token: h_i depends only on tokens within
// the window radius. Returns one node of shape [l'] per token.
std::vector<NodeId> encode(Tape& tape, EncoderParams& params,
                           const EmbeddingTable& table,
                           const Sentence& sentence);

// Forward-only convenience: stacks encode() values into [n x l'].
Tensor encode_values(EncoderParams& params, const EmbeddingTable& table,
                     const Sentence& sentence);

}  // namespace fsner
