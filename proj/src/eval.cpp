#include "fsner/eval.hpp"

#include <cmath>
#include <cstdio>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

std::set<Span> extract_spans(const std::vector<std::string>& tags) {
  std::set<Span> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    std::string type = tag_type(tags[i]);
    if (type.empty()) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tag_type(tags[j]) == type) ++j;
    spans.insert({i, j, type});
    i = j;
  }
  return spans;
}

SpanF1Report report_from_counts(std::uint64_t tp, std::uint64_t fp,
                                std::uint64_t fn) {
  SpanF1Report r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp == 0 ? 0.0
                             : static_cast<double>(tp) /
                                   static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0
                          : static_cast<double>(tp) /
                                static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

namespace {

void span_counts(const std::vector<Sentence>& gold,
                 const std::vector<Sentence>& pred, std::uint64_t& tp,
                 std::uint64_t& fp, std::uint64_t& fn) {
  if (gold.size() != pred.size()) {
    throw DimensionError("micro_f1: sentence count mismatch (" +
                         std::to_string(gold.size()) + " vs " +
                         std::to_string(pred.size()) + ")");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens.size() != pred[i].tokens.size()) {
      throw DimensionError("micro_f1: token count mismatch in sentence " +
                           std::to_string(i));
    }
    std::vector<std::string> gt, pt;
    for (const auto& tok : gold[i].tokens) gt.push_back(tok.tag);
    for (const auto& tok : pred[i].tokens) pt.push_back(tok.tag);
    auto gs = extract_spans(gt);
    auto ps = extract_spans(pt);
    for (const auto& s : ps) {
      if (gs.count(s)) {
        ++tp;
      } else {
        ++fp;
      }
    }
    for (const auto& s : gs) {
      if (!ps.count(s)) ++fn;
    }
  }
}

}  // namespace

SpanF1Report micro_f1(const std::vector<Sentence>& gold,
                      const std::vector<Sentence>& pred) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  span_counts(gold, pred, tp, fp, fn);
  return report_from_counts(tp, fp, fn);
}

RunReport run_episodes(const Model& base, const LabeledCorpus& corpus,
                       const EmbeddingTable& table,
                       const EpisodeSettings& settings) {
  if (settings.episodes < 1) {
    throw DomainError("run_episodes: need at least 1 episode");
  }
  RunReport report;
  std::uint64_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;

  for (std::size_t e = 0; e < settings.episodes; ++e) {
    std::uint64_t episode_seed =
        Rng::child(settings.seed, "episode", e).next_u64();
    Episode ep;
    try {
      ep = sample_episode(corpus, settings.n, settings.k, episode_seed);
    } catch (const SamplingError& err) {
      throw SamplingError("episode " + std::to_string(e) + ": " + err.what());
    }
    if (!settings.dump_prefix.empty()) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "%04zu.txt", e);
      save_episode(ep, settings.dump_prefix + suffix);
    }

    Model episode_model = base;  // every episode starts from the same base
    if (settings.do_finetune) {
      finetune(episode_model, ep.support, table);
    }
    auto pred = predict(episode_model, ep.support, ep.query, table,
                        settings.use_viterbi, settings.tau, settings.rep);
    SpanF1Report r = micro_f1(ep.query, pred);
    report.episode_f1.push_back(r.f1);
    pooled_tp += r.tp;
    pooled_fp += r.fp;
    pooled_fn += r.fn;
  }

  double sum = 0.0;
  for (double f : report.episode_f1) sum += f;
  report.mean_f1 = sum / static_cast<double>(report.episode_f1.size());
  double var = 0.0;
  for (double f : report.episode_f1) {
    var += (f - report.mean_f1) * (f - report.mean_f1);
  }
  report.stddev_f1 =
      std::sqrt(var / static_cast<double>(report.episode_f1.size()));
  report.pooled_f1 = report_from_counts(pooled_tp, pooled_fp, pooled_fn).f1;
  return report;
}

std::string format_run_report(const RunReport& report,
                              const EpisodeSettings& settings) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "# run report: n=%zu k=%zu episodes=%zu seed=%llu viterbi=%d "
                "finetune=%d tau=%g rep=%s\n",
                settings.n, settings.k, settings.episodes,
                (unsigned long long)settings.seed, settings.use_viterbi ? 1 : 0,
                settings.do_finetune ? 1 : 0, settings.tau,
                rep_source_name(settings.rep).c_str());
  out += buf;
  for (std::size_t i = 0; i < report.episode_f1.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "episode %zu f1 %.6f\n", i,
                  report.episode_f1[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "mean_f1 %.6f\n", report.mean_f1);
  out += buf;
  std::snprintf(buf, sizeof(buf), "stddev_f1 %.6f\n", report.stddev_f1);
  out += buf;
  std::snprintf(buf, sizeof(buf), "pooled_f1 %.6f\n", report.pooled_f1);
  out += buf;
  out += "config_fingerprint " + report.config_fingerprint + "\n";
  return out;
}

std::string export_embeddings(Model& model, const LabeledCorpus& corpus,
                              const EmbeddingTable& table, RepSource source) {
  std::string out;
  char buf[32];
  for (std::size_t si = 0; si < corpus.sentences.size(); ++si) {
    const Sentence& sentence = corpus.sentences[si];
    Tensor hs = encode_values(model.encoder, table, sentence);
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      std::span<const double> h(hs.data() + i * hs.cols(), hs.cols());
      std::vector<double> rep;
      if (source == RepSource::kPreProjection) {
        rep.assign(h.begin(), h.end());
      } else if (model.config.train_mode == DistanceMode::kPointEuclidean ||
                 model.config.train_mode == DistanceMode::kPointCosine) {
        rep = project_point_values(model.heads, h);
      } else {
        rep = project_values(model.heads, h).mu;
      }
      out += std::to_string(si) + " " + std::to_string(i) + " " +
             sentence.tokens[i].tag;
      for (double v : rep) {
        std::snprintf(buf, sizeof(buf), " %.17g", v);
        out += buf;
      }
      out += "\n";
    }
  }
  return out;
}

std::string write_predictions(const std::vector<Sentence>& gold,
                              const std::vector<Sentence>& pred) {
  if (gold.size() != pred.size()) {
    throw DimensionError("write_predictions: sentence count mismatch");
  }
  std::string out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens.size() != pred[i].tokens.size()) {
      throw DimensionError("write_predictions: token count mismatch");
    }
    if (i) out += "\n";
    for (std::size_t j = 0; j < gold[i].tokens.size(); ++j) {
      out += gold[i].tokens[j].text;
      out += '\t';
      out += gold[i].tokens[j].tag;
      out += '\t';
      out += pred[i].tokens[j].tag;
      out += '\n';
    }
  }
  return out;
}

}  // namespace fsner
