#include "fsner/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

std::span<const double> EmbeddingTable::row(const std::string& token) const {
  auto it = vocab.find(token);
  if (it == vocab.end()) {
    return {fallback.data(), fallback.size()};
  }
  return {vectors.data() + it->second * dim(), dim()};
}

EmbeddingTable parse_embeddings(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("embeddings: empty file");
  }
  std::size_t v = 0, d = 0;
  {
    std::istringstream hdr(line);
    if (!(hdr >> v >> d) || v == 0 || d == 0) {
      throw ParseError("embeddings line 1: expected 'V d' header");
    }
  }
  EmbeddingTable table;
  table.vectors = Tensor({v, d});
  table.vocab.reserve(v);
  std::size_t ln = 1;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    if (count >= v) {
      throw ParseError("embeddings line " + std::to_string(ln) +
                       ": more than " + std::to_string(v) + " entries");
    }
    if (!table.vocab.emplace(token, count).second) {
      throw ParseError("embeddings line " + std::to_string(ln) +
                       ": duplicate token '" + token + "'");
    }
    double* dst = table.vectors.data() + count * d;
    std::size_t got = 0;
    double x;
    while (ls >> x) {
      if (got < d) dst[got] = x;
      ++got;
    }
    if (got != d) {
      throw ParseError("embeddings line " + std::to_string(ln) + ": expected " +
                       std::to_string(d) + " values, got " +
                       std::to_string(got));
    }
    ++count;
  }
  if (count != v) {
    throw ParseError("embeddings: header promised " + std::to_string(v) +
                     " entries, file has " + std::to_string(count));
  }
  table.fallback.assign(d, 0.0);
  for (std::size_t r = 0; r < v; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      table.fallback[c] += table.vectors.at(r, c);
    }
  }
  for (double& x : table.fallback) x /= static_cast<double>(v);
  return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
  return parse_embeddings(read_text_file(path));
}

std::string write_embeddings(const EmbeddingTable& table,
                             const std::vector<std::string>& order) {
  std::string out = std::to_string(table.size()) + " " +
                    std::to_string(table.dim()) + "\n";
  char buf[32];
  for (const auto& token : order) {
    out += token;
    auto it = table.vocab.find(token);
    if (it == table.vocab.end()) {
      throw Error("write_embeddings: token '" + token + "' not in table");
    }
    const double* row = table.vectors.data() + it->second * table.dim();
    for (std::size_t c = 0; c < table.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), " %.17g", row[c]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::vector<Parameter*> EncoderParams::parameters() {
  return {&w1, &b1, &w2, &b2};
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (double& x : t.values()) x = rng.uniform(-limit, limit);
  return t;
}

// Small nonzero bias init keeps ReLU pre-activations off the exact kink and
// representations of dead units distinct from the zero vector.
Tensor bias_init(std::size_t n, Rng& rng) {
  Tensor t({n});
  for (double& x : t.values()) x = rng.uniform(-0.05, 0.05);
  return t;
}

}  // namespace

EncoderParams make_encoder(std::size_t d_emb, int window, std::size_t l_prime,
                           Rng& rng) {
  if (window < 0) throw DomainError("make_encoder: window must be >= 0");
  std::size_t in_dim = (2 * static_cast<std::size_t>(window) + 1) * d_emb;
  EncoderParams p;
  p.window = window;
  p.w1 = {"encoder.w1", glorot(in_dim, l_prime, rng)};
  p.b1 = {"encoder.b1", bias_init(l_prime, rng)};
  p.w2 = {"encoder.w2", glorot(l_prime, l_prime, rng)};
  p.b2 = {"encoder.b2", bias_init(l_prime, rng)};
  return p;
}

std::vector<double> window_input(const EmbeddingTable& table,
                                 const Sentence& sentence, std::size_t i,
                                 int window) {
  std::size_t d = table.dim();
  std::size_t width = 2 * static_cast<std::size_t>(window) + 1;
  std::vector<double> x(width * d, 0.0);
  long n = static_cast<long>(sentence.tokens.size());
  for (int off = -window; off <= window; ++off) {
    long j = static_cast<long>(i) + off;
    if (j < 0 || j >= n) continue;  // zero padding beyond sentence bounds
    auto emb = table.row(sentence.tokens[static_cast<std::size_t>(j)].text);
    std::size_t slot = static_cast<std::size_t>(off + window);
    std::copy(emb.begin(), emb.end(), x.begin() + slot * d);
  }
  return x;
}

std::vector<NodeId> encode(Tape& tape, EncoderParams& params,
                           const EmbeddingTable& table,
                           const Sentence& sentence) {
  if (sentence.tokens.empty()) {
    throw DimensionError("encode: empty sentence");
  }
  if (params.input_dim() !=
      (2 * static_cast<std::size_t>(params.window) + 1) * table.dim()) {
    throw DimensionError("encode: table dimension " +
                         std::to_string(table.dim()) +
                         " does not match encoder input " +
                         std::to_string(params.input_dim()));
  }
  NodeId w1 = tape.use(params.w1);
  NodeId b1 = tape.use(params.b1);
  NodeId w2 = tape.use(params.w2);
  NodeId b2 = tape.use(params.b2);

  std::vector<NodeId> hs;
  hs.reserve(sentence.tokens.size());
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    NodeId x = tape.leaf(
        Tensor::vector(window_input(table, sentence, i, params.window)));
    NodeId a1 = tape.relu(tape.add(tape.matmul(x, w1), b1));
    NodeId h = tape.add(tape.matmul(a1, w2), b2);
    hs.push_back(h);
  }
  return hs;
}

Tensor encode_values(EncoderParams& params, const EmbeddingTable& table,
                     const Sentence& sentence) {
  Tape tape;
  auto hs = encode(tape, params, table, sentence);
  std::size_t n = hs.size();
  std::size_t l = params.out_dim();
  Tensor out({n, l});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& h = tape.value(hs[i]);
    std::copy(h.values().begin(), h.values().end(), out.data() + i * l);
  }
  return out;
}

}  // namespace fsner
