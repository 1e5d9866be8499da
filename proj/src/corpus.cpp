#include "fsner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t'; });
}

bool is_valid_bio_tag(const std::string& tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(std::move(cur));
  }
  return lines;
}

}  // namespace

std::size_t LabeledCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

bool is_valid_io_tag(const std::string& tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && tag[0] == 'I' && tag[1] == '-';
}

std::string tag_type(const std::string& tag) {
  if (tag == "O") return "";
  return tag.substr(2);
}

std::vector<std::string> to_io_scheme(const std::vector<std::string>& tags) {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (const auto& t : tags) {
    if (t.size() > 2 && t[0] == 'B' && t[1] == '-') {
      out.push_back("I" + t.substr(1));
    } else {
      out.push_back(t);
    }
  }
  return out;
}

LabeledCorpus parse_conll(const std::string& text, std::size_t max_len,
                          std::size_t* truncated) {
  LabeledCorpus corpus;
  std::size_t truncated_count = 0;
  std::vector<Token> pending;
  std::vector<std::string> pending_tags;
  bool pending_truncated = false;

  auto flush = [&]() {
    if (pending.empty()) return;
    auto io = to_io_scheme(pending_tags);
    Sentence s;
    s.tokens.reserve(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
      s.tokens.push_back({std::move(pending[i].text), io[i]});
      if (io[i] != "O") corpus.tag_set.insert(tag_type(io[i]));
    }
    corpus.sentences.push_back(std::move(s));
    if (pending_truncated) ++truncated_count;
    pending.clear();
    pending_tags.clear();
    pending_truncated = false;
  };

  auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (is_blank(line)) {
      flush();
      continue;
    }
    auto cols = split_ws(line);
    if (cols.size() < 2) {
      throw ParseError("line " + std::to_string(ln + 1) +
                       ": expected at least 2 columns, got " +
                       std::to_string(cols.size()));
    }
    const std::string& tag = cols.back();
    if (!is_valid_bio_tag(tag)) {
      throw ParseError("line " + std::to_string(ln + 1) + ": bad tag '" + tag +
                       "' (expected O, B-<type> or I-<type>)");
    }
    if (pending.size() >= max_len) {
      pending_truncated = true;
      continue;
    }
    pending.push_back({cols.front(), ""});
    pending_tags.push_back(tag);
  }
  flush();
  if (truncated) *truncated = truncated_count;
  return corpus;
}

LabeledCorpus load_conll(const std::string& path, std::size_t max_len,
                         std::size_t* truncated) {
  return parse_conll(read_text_file(path), max_len, truncated);
}

std::string write_conll(const std::vector<Sentence>& sentences) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += "\n";
    for (const auto& tok : sentences[i].tokens) {
      out += tok.text;
      out += '\t';
      out += tok.tag;
      out += '\n';
    }
  }
  return out;
}

void save_conll(const LabeledCorpus& corpus, const std::string& path) {
  write_text_file(path, write_conll(corpus.sentences));
}

LabeledCorpus mask_tags(const LabeledCorpus& corpus,
                        const std::set<std::string>& keep) {
  LabeledCorpus out;
  out.sentences.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    Sentence ms;
    ms.tokens.reserve(s.tokens.size());
    for (const auto& tok : s.tokens) {
      std::string type = tag_type(tok.tag);
      if (!type.empty() && keep.count(type)) {
        ms.tokens.push_back(tok);
        out.tag_set.insert(type);
      } else {
        ms.tokens.push_back({tok.text, "O"});
      }
    }
    out.sentences.push_back(std::move(ms));
  }
  return out;
}

std::size_t count_mentions(const std::vector<Sentence>& sentences,
                           const std::string& type) {
  std::size_t count = 0;
  for (const auto& s : sentences) {
    std::string prev;
    for (const auto& tok : s.tokens) {
      std::string cur = tag_type(tok.tag);
      if (cur == type && prev != type) ++count;
      prev = cur;
    }
  }
  return count;
}

namespace {

std::size_t sentence_mentions(const Sentence& s, const std::string& type) {
  return count_mentions({s}, type);
}

Sentence mask_sentence(const Sentence& s, const std::set<std::string>& keep) {
  Sentence out;
  out.tokens.reserve(s.tokens.size());
  for (const auto& tok : s.tokens) {
    std::string type = tag_type(tok.tag);
    if (!type.empty() && keep.count(type)) {
      out.tokens.push_back(tok);
    } else {
      out.tokens.push_back({tok.text, "O"});
    }
  }
  return out;
}

// Shared by sample_support / sample_episode: greedy selection over the
// sentences listed in `pool` (indices into corpus.sentences). Selected
// indices are removed from the pool.
std::vector<std::size_t> greedy_select(const LabeledCorpus& corpus,
                                       std::vector<std::size_t>& pool,
                                       const std::set<std::string>& tags,
                                       std::size_t k, Rng& rng) {
  std::map<std::string, std::size_t> have;
  for (const auto& t : tags) have[t] = 0;
  std::vector<std::size_t> chosen;

  for (;;) {
    // Least-covered target tag still below K; ties break alphabetically.
    const std::string* worst = nullptr;
    for (const auto& [tag, n] : have) {
      if (n >= k) continue;
      if (!worst || have[*worst] > n) worst = &tag;
    }
    if (!worst) break;

    std::vector<std::size_t> candidates;
    for (std::size_t pi = 0; pi < pool.size(); ++pi) {
      if (sentence_mentions(corpus.sentences[pool[pi]], *worst) > 0) {
        candidates.push_back(pi);
      }
    }
    if (candidates.empty()) {
      throw SamplingError("not enough occurrences of tag '" + *worst +
                          "' to sample " + std::to_string(k) + " shots");
    }
    std::size_t pick = candidates[rng.uniform_index(candidates.size())];
    std::size_t si = pool[pick];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    chosen.push_back(si);
    for (auto& [tag, n] : have) {
      n += sentence_mentions(corpus.sentences[si], tag);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

SupportSet sample_support(const LabeledCorpus& corpus,
                          const std::set<std::string>& target_tags,
                          std::size_t k, std::uint64_t seed) {
  if (k < 1) throw SamplingError("sample_support: K must be >= 1");
  if (target_tags.empty()) {
    throw SamplingError("sample_support: empty target tag set");
  }
  Rng rng = Rng::child(seed, "support");
  std::vector<std::size_t> pool(corpus.sentences.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  auto chosen = greedy_select(corpus, pool, target_tags, k, rng);
  SupportSet out;
  out.target_tags = target_tags;
  out.shots = k;
  for (std::size_t si : chosen) out.sentences.push_back(corpus.sentences[si]);
  return out;
}

Episode sample_episode(const LabeledCorpus& corpus, std::size_t n,
                       std::size_t k, std::uint64_t seed) {
  if (n < 1) throw SamplingError("sample_episode: N must be >= 1");
  if (corpus.tag_set.size() < n) {
    throw SamplingError("sample_episode: corpus has " +
                        std::to_string(corpus.tag_set.size()) +
                        " tag types, need N = " + std::to_string(n));
  }
  Rng tag_rng = Rng::child(seed, "episode-tags");
  std::vector<std::string> all_tags(corpus.tag_set.begin(),
                                    corpus.tag_set.end());
  tag_rng.shuffle(all_tags);
  std::set<std::string> targets(all_tags.begin(),
                                all_tags.begin() + static_cast<long>(n));

  Rng pick_rng = Rng::child(seed, "episode-sentences");
  std::vector<std::size_t> pool(corpus.sentences.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  auto support_idx = greedy_select(corpus, pool, targets, k, pick_rng);
  auto query_idx = greedy_select(corpus, pool, targets, k, pick_rng);

  // Both sides of the episode are restricted to the target tag set; the
  // query keeps its gold target tags for scoring.
  Episode ep;
  ep.support.target_tags = targets;
  ep.support.shots = k;
  for (std::size_t si : support_idx) {
    ep.support.sentences.push_back(mask_sentence(corpus.sentences[si], targets));
  }
  for (std::size_t si : query_idx) {
    ep.query.push_back(mask_sentence(corpus.sentences[si], targets));
  }
  return ep;
}

std::string write_episode(const Episode& ep) {
  std::ostringstream out;
  out << "fsner-episode v1\n";
  out << "k " << ep.support.shots << "\n";
  out << "tags";
  for (const auto& t : ep.support.target_tags) out << " " << t;
  out << "\n";
  out << "support " << ep.support.sentences.size() << "\n";
  for (const auto& s : ep.support.sentences) {
    for (const auto& tok : s.tokens) out << tok.text << "\t" << tok.tag << "\n";
    out << "\n";
  }
  out << "query " << ep.query.size() << "\n";
  for (const auto& s : ep.query) {
    for (const auto& tok : s.tokens) out << tok.text << "\t" << tok.tag << "\n";
    out << "\n";
  }
  return out.str();
}

namespace {

struct LineReader {
  std::vector<std::string> lines;
  std::size_t pos = 0;

  const std::string& next(const char* what) {
    if (pos >= lines.size()) {
      throw ParseError(std::string("episode file ended while reading ") +
                       what);
    }
    return lines[pos++];
  }
};

std::size_t parse_count(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError(std::string("episode file: bad ") + what + " '" + s +
                     "'");
  }
}

std::vector<Sentence> read_sentences(LineReader& r, std::size_t count) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < count; ++i) {
    Sentence s;
    for (;;) {
      const std::string& line = r.next("sentence block");
      if (line.empty()) break;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ParseError("episode file line " + std::to_string(r.pos) +
                         ": expected 'text<TAB>tag'");
      }
      std::string tag = line.substr(tab + 1);
      if (!is_valid_io_tag(tag)) {
        throw ParseError("episode file line " + std::to_string(r.pos) +
                         ": bad IO tag '" + tag + "'");
      }
      s.tokens.push_back({line.substr(0, tab), tag});
    }
    if (s.tokens.empty()) {
      throw ParseError("episode file: empty sentence block");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Episode parse_episode(const std::string& text) {
  LineReader r{split_lines(text)};
  if (r.next("header") != "fsner-episode v1") {
    throw ParseError("episode file: bad header");
  }
  Episode ep;
  {
    auto cols = split_ws(r.next("k line"));
    if (cols.size() != 2 || cols[0] != "k") {
      throw ParseError("episode file: expected 'k <shots>'");
    }
    ep.support.shots = parse_count(cols[1], "shot count");
  }
  {
    auto cols = split_ws(r.next("tags line"));
    if (cols.empty() || cols[0] != "tags") {
      throw ParseError("episode file: expected 'tags <type>...'");
    }
    ep.support.target_tags.insert(cols.begin() + 1, cols.end());
  }
  {
    auto cols = split_ws(r.next("support line"));
    if (cols.size() != 2 || cols[0] != "support") {
      throw ParseError("episode file: expected 'support <count>'");
    }
    ep.support.sentences = read_sentences(r, parse_count(cols[1], "support count"));
  }
  {
    auto cols = split_ws(r.next("query line"));
    if (cols.size() != 2 || cols[0] != "query") {
      throw ParseError("episode file: expected 'query <count>'");
    }
    ep.query = read_sentences(r, parse_count(cols[1], "query count"));
  }
  return ep;
}

void save_episode(const Episode& ep, const std::string& path) {
  write_text_file(path, write_episode(ep));
}

Episode load_episode(const std::string& path) {
  return parse_episode(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace fsner
