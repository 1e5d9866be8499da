#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace fsner {

// One token with its IO tag: "O" or "I-<type>".
struct Token {
  std::string text;
  std::string tag = "O";
};

struct Sentence {
  std::vector<Token> tokens;
};

// Sentences plus the set of entity type names they use (excluding O).
struct LabeledCorpus {
  std::vector<Sentence> sentences;
  std::set<std::string> tag_set;

  std::size_t token_count() const;
};

// K-shot support: every type in target_tags has at least K entity mentions
// across the sentences.
struct SupportSet {
  std::vector<Sentence> sentences;
  std::set<std::string> target_tags;
  std::size_t shots = 1;
};

// One evaluation episode. Query sentences keep their gold tags for scoring;
// the inference path never reads them.
struct Episode {
  SupportSet support;
  std::vector<Sentence> query;
};

inline constexpr std::size_t kDefaultMaxSentenceLen = 128;

// True for "O" or "I-<type>" with a nonempty type name.
bool is_valid_io_tag(const std::string& tag);

// "I-PER" -> "PER"; "O" -> "".
std::string tag_type(const std::string& tag);

// BIO -> IO: every B-X becomes I-X, everything else is unchanged.
std::vector<std::string> to_io_scheme(const std::vector<std::string>& tags);

// Parses CoNLL column text: one token per line (first column text, last
// column tag, BIO or IO), blank line between sentences. Sentences longer
// than max_len are truncated; *truncated, when given, receives the number of
// truncated sentences. Throws ParseError with a line number on bad input.
LabeledCorpus parse_conll(const std::string& text,
                          std::size_t max_len = kDefaultMaxSentenceLen,
                          std::size_t* truncated = nullptr);
LabeledCorpus load_conll(const std::string& path,
                         std::size_t max_len = kDefaultMaxSentenceLen,
                         std::size_t* truncated = nullptr);

// Canonical form: "text<TAB>tag" lines, one blank line between sentences,
// trailing newline. parse_conll(write_conll(c)) == c.
std::string write_conll(const std::vector<Sentence>& sentences);
void save_conll(const LabeledCorpus& corpus, const std::string& path);

// Every token whose type is not in keep becomes O; tag_set becomes
// keep intersected with the observed types.
LabeledCorpus mask_tags(const LabeledCorpus& corpus,
                        const std::set<std::string>& keep);

// Greedy K-shot sampling: repeatedly picks a sentence covering the currently
// least-represented target tag until every tag has >= K entity mentions.
// Deterministic given the seed. Throws SamplingError naming the tag that
// cannot be covered.
SupportSet sample_support(const LabeledCorpus& corpus,
                          const std::set<std::string>& target_tags,
                          std::size_t k, std::uint64_t seed);

// N target types chosen uniformly at random (seeded); support via
// sample_support; query is an additional disjoint K-shot sample with all
// non-target types masked to O (gold target tags retained).
Episode sample_episode(const LabeledCorpus& corpus, std::size_t n,
                       std::size_t k, std::uint64_t seed);

// Line-delimited episode file with support/query sections.
// write -> parse -> write is byte identity.
std::string write_episode(const Episode& ep);
Episode parse_episode(const std::string& text);
void save_episode(const Episode& ep, const std::string& path);
Episode load_episode(const std::string& path);

// Entity mentions per type (maximal I-X runs), pooled over sentences.
std::size_t count_mentions(const std::vector<Sentence>& sentences,
                           const std::string& type);

// Reads a file into a string; throws Error on I/O failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace fsner
