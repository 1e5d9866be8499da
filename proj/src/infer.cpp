#include "fsner/infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "fsner/error.hpp"
#include "fsner/gauss.hpp"

namespace fsner {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> make_tag_order(const std::set<std::string>& targets) {
  std::vector<std::string> order;
  order.reserve(targets.size() + 1);
  order.push_back("O");
  for (const auto& t : targets) order.push_back("I-" + t);
  return order;
}

std::vector<double> token_representation(Model& model,
                                         const EmbeddingTable& table,
                                         std::span<const double> h,
                                         RepSource source) {
  if (source == RepSource::kPreProjection) {
    return std::vector<double>(h.begin(), h.end());
  }
  if (model.config.train_mode == DistanceMode::kPointEuclidean ||
      model.config.train_mode == DistanceMode::kPointCosine) {
    return project_point_values(model.heads, h);
  }
  return project_values(model.heads, h).mu;
}

std::vector<std::vector<double>> sentence_representations(
    Model& model, const EmbeddingTable& table, const Sentence& sentence,
    RepSource source) {
  Tensor hs = encode_values(model.encoder, table, sentence);
  std::size_t n = hs.rows();
  std::size_t lp = hs.cols();
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> h(hs.data() + i * lp, lp);
    out.push_back(token_representation(model, table, h, source));
  }
  return out;
}

}  // namespace

std::string rep_source_name(RepSource r) {
  return r == RepSource::kPreProjection ? "pre" : "post";
}

RepSource rep_source_from_name(const std::string& name) {
  if (name == "pre") return RepSource::kPreProjection;
  if (name == "post") return RepSource::kPostProjection;
  throw ParseError("unknown representation '" + name +
                   "' (expected pre or post)");
}

SupportIndex build_support_index(Model& model, const SupportSet& support,
                                 const EmbeddingTable& table,
                                 RepSource source) {
  if (support.sentences.empty()) {
    throw DimensionError("build_support_index: empty support set");
  }
  SupportIndex index;
  index.source = source;
  index.tag_order = make_tag_order(support.target_tags);
  for (const auto& sentence : support.sentences) {
    auto reps = sentence_representations(model, table, sentence, source);
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      index.vectors.push_back(std::move(reps[i]));
      index.labels.push_back(sentence.tokens[i].tag);
    }
  }
  return index;
}

NnResult nn_classify(const SupportIndex& index, const Sentence& query,
                     Model& model, const EmbeddingTable& table) {
  if (index.vectors.empty()) {
    throw DimensionError("nn_classify: empty support index");
  }
  auto reps = sentence_representations(model, table, query, index.source);

  // Support label -> position in tag_order, resolved once.
  std::vector<std::size_t> label_slot(index.labels.size(),
                                      index.tag_order.size());
  for (std::size_t s = 0; s < index.labels.size(); ++s) {
    auto it = std::find(index.tag_order.begin(), index.tag_order.end(),
                        index.labels[s]);
    if (it != index.tag_order.end()) {
      label_slot[s] = static_cast<std::size_t>(it - index.tag_order.begin());
    }
  }

  NnResult out;
  out.tags.reserve(query.tokens.size());
  out.tag_min_dist.reserve(query.tokens.size());
  for (const auto& rep : reps) {
    std::size_t best = 0;
    double best_d = kInf;
    std::vector<double> min_d(index.tag_order.size(), kInf);
    for (std::size_t s = 0; s < index.vectors.size(); ++s) {
      double d = squared_euclidean(rep, index.vectors[s]);
      if (d < best_d) {  // strict: ties keep the lowest support index
        best_d = d;
        best = s;
      }
      if (label_slot[s] < min_d.size()) {
        min_d[label_slot[s]] = std::min(min_d[label_slot[s]], d);
      }
    }
    out.tags.push_back(index.labels[best]);
    out.tag_min_dist.push_back(std::move(min_d));
  }
  return out;
}

AbstractTransitions estimate_transitions(const LabeledCorpus& corpus) {
  if (corpus.sentences.empty()) {
    throw DimensionError("estimate_transitions: empty corpus");
  }
  AbstractTransitions t;
  for (const auto& s : corpus.sentences) {
    if (s.tokens.empty()) continue;
    if (s.tokens[0].tag == "O") {
      ++t.start_o;
    } else {
      ++t.start_i;
    }
    for (std::size_t i = 1; i < s.tokens.size(); ++i) {
      const std::string& prev = s.tokens[i - 1].tag;
      const std::string& cur = s.tokens[i].tag;
      if (prev == "O") {
        if (cur == "O") {
          ++t.o_o;
        } else {
          ++t.o_i;
        }
      } else {
        if (cur == "O") {
          ++t.i_o;
        } else if (cur == prev) {
          ++t.i_same;
        } else {
          ++t.i_other;
        }
      }
    }
  }
  return t;
}

TransitionTable expand_transitions(const AbstractTransitions& abstract,
                                   const std::set<std::string>& target_tags) {
  if (target_tags.empty()) {
    throw DimensionError("expand_transitions: empty target tag set");
  }
  std::size_t n = target_tags.size();
  TransitionTable table;
  table.tags = make_tag_order(target_tags);
  std::size_t t = table.tags.size();  // 1 + n

  auto normalize = [](std::vector<double>& row) {
    double s = 0.0;
    for (double x : row) s += x;
    for (double& x : row) x /= s;
  };

  // START row: I mass split evenly across the target tags.
  table.start.assign(t, 0.0);
  table.start[0] = abstract.p_start_o();
  for (std::size_t j = 1; j < t; ++j) {
    table.start[j] = abstract.p_start_i() / static_cast<double>(n);
  }
  normalize(table.start);

  table.rows.assign(t, std::vector<double>(t, 0.0));
  // O row.
  table.rows[0][0] = abstract.p_o_o();
  for (std::size_t j = 1; j < t; ++j) {
    table.rows[0][j] = abstract.p_o_i() / static_cast<double>(n);
  }
  normalize(table.rows[0]);
  // I-X rows: same-tag mass stays put, other-tag mass splits over the
  // remaining N-1 targets (none when N = 1; renormalization absorbs it).
  for (std::size_t i = 1; i < t; ++i) {
    table.rows[i][0] = abstract.p_i_o();
    for (std::size_t j = 1; j < t; ++j) {
      if (j == i) {
        table.rows[i][j] = abstract.p_i_same();
      } else if (n >= 2) {
        table.rows[i][j] = abstract.p_i_other() / static_cast<double>(n - 1);
      }
    }
    normalize(table.rows[i]);
  }
  return table;
}

std::string format_transitions(const AbstractTransitions& abstract,
                               const TransitionTable& table) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "abstract counts: start_o=%llu start_i=%llu o_o=%llu o_i=%llu "
                "i_o=%llu i_same=%llu i_other=%llu\n",
                (unsigned long long)abstract.start_o,
                (unsigned long long)abstract.start_i,
                (unsigned long long)abstract.o_o,
                (unsigned long long)abstract.o_i,
                (unsigned long long)abstract.i_o,
                (unsigned long long)abstract.i_same,
                (unsigned long long)abstract.i_other);
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "abstract probs: start->O=%.6f start->I=%.6f O->O=%.6f "
                "O->I=%.6f I->O=%.6f I->same=%.6f I->other=%.6f\n",
                abstract.p_start_o(), abstract.p_start_i(), abstract.p_o_o(),
                abstract.p_o_i(), abstract.p_i_o(), abstract.p_i_same(),
                abstract.p_i_other());
  out += buf;
  out += "tags:";
  for (const auto& tag : table.tags) out += " " + tag;
  out += "\nSTART:";
  for (double x : table.start) {
    std::snprintf(buf, sizeof(buf), " %.6f", x);
    out += buf;
  }
  out += "\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out += table.tags[i] + ":";
    for (double x : table.rows[i]) {
      std::snprintf(buf, sizeof(buf), " %.6f", x);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

EmissionMatrix emissions(const std::vector<std::vector<double>>& tag_min_dist,
                         const std::vector<std::string>& tags, double tau) {
  if (!(tau > 0.0)) {
    throw DomainError("emissions: tau must be positive");
  }
  EmissionMatrix out;
  out.tags = tags;
  out.tau = tau;
  out.probs.reserve(tag_min_dist.size());
  for (const auto& dists : tag_min_dist) {
    if (dists.size() != tags.size()) {
      throw DimensionError("emissions: distance row width mismatch");
    }
    std::vector<double> scores(dists.size());
    for (std::size_t i = 0; i < dists.size(); ++i) {
      scores[i] = dists[i] == kInf ? -kInf : -dists[i] / tau;
    }
    double m = *std::max_element(scores.begin(), scores.end());
    std::vector<double> row(scores.size(), 0.0);
    if (m == -kInf) {
      // No support vector for any tag; fall back to uniform.
      for (double& x : row) x = 1.0 / static_cast<double>(row.size());
    } else {
      double s = 0.0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        row[i] = scores[i] == -kInf ? 0.0 : std::exp(scores[i] - m);
        s += row[i];
      }
      for (double& x : row) x /= s;
    }
    out.probs.push_back(std::move(row));
  }
  return out;
}

std::vector<std::string> viterbi_decode(const EmissionMatrix& emissions,
                                        const TransitionTable& transitions) {
  if (emissions.tags != transitions.tags) {
    throw DimensionError("viterbi_decode: emission/transition tag mismatch");
  }
  std::size_t n = emissions.probs.size();
  std::size_t t = transitions.tags.size();
  if (n == 0) return {};

  auto safe_log = [](double p) { return p > 0.0 ? std::log(p) : -kInf; };

  std::vector<std::vector<double>> score(n, std::vector<double>(t, -kInf));
  std::vector<std::vector<std::size_t>> back(n, std::vector<std::size_t>(t, 0));

  for (std::size_t j = 0; j < t; ++j) {
    score[0][j] = safe_log(transitions.start[j]) + safe_log(emissions.probs[0][j]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      double best = -kInf;
      std::size_t arg = 0;
      for (std::size_t prev = 0; prev < t; ++prev) {
        double cand = score[i - 1][prev] + safe_log(transitions.rows[prev][j]);
        if (cand > best) {  // strict: ties keep the lower prev index
          best = cand;
          arg = prev;
        }
      }
      score[i][j] = best + safe_log(emissions.probs[i][j]);
      back[i][j] = arg;
    }
  }

  std::size_t tail = 0;
  double best = -kInf;
  for (std::size_t j = 0; j < t; ++j) {
    if (score[n - 1][j] > best) {
      best = score[n - 1][j];
      tail = j;
    }
  }
  std::vector<std::string> out(n);
  for (std::size_t i = n; i-- > 0;) {
    out[i] = transitions.tags[tail];
    if (i > 0) tail = back[i][tail];
  }
  return out;
}

std::vector<Sentence> predict(Model& model, const SupportSet& support,
                              const std::vector<Sentence>& queries,
                              const EmbeddingTable& table, bool use_viterbi,
                              double tau, RepSource source) {
  SupportIndex index = build_support_index(model, support, table, source);
  TransitionTable transitions;
  if (use_viterbi) {
    transitions = expand_transitions(model.transitions, support.target_tags);
  }
  std::vector<Sentence> out;
  out.reserve(queries.size());
  for (const auto& query : queries) {
    NnResult nn = nn_classify(index, query, model, table);
    std::vector<std::string> tags;
    if (use_viterbi) {
      EmissionMatrix em = emissions(nn.tag_min_dist, index.tag_order, tau);
      tags = viterbi_decode(em, transitions);
    } else {
      tags = nn.tags;
    }
    Sentence tagged = query;
    for (std::size_t i = 0; i < tagged.tokens.size(); ++i) {
      tagged.tokens[i].tag = tags[i];
    }
    out.push_back(std::move(tagged));
  }
  return out;
}

}  // namespace fsner
