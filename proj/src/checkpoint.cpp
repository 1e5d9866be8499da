#include "fsner/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <map>

#include "fsner/corpus.hpp"
#include "fsner/error.hpp"

namespace fsner {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'S', 'N', 'E', 'R', 'C', 'K', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_u64(std::string& out, std::uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_tensor(std::string& out, const Parameter& p) {
  put_string(out, p.name);
  put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
  for (std::size_t d : p.value.shape()) put_u64(out, d);
  out.append(reinterpret_cast<const char*>(p.value.data()),
             p.value.size() * sizeof(double));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > bytes.size()) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") +
                            what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str(const char* what) {
    std::uint32_t n = u32(what);
    need(n, what);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string config_blob(const TrainConfig& c) {
  char buf[64];
  std::string out;
  auto add = [&out](const std::string& k, const std::string& v) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  };
  auto fmt_double = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  add("seed", std::to_string(c.seed));
  add("max_sentence_len", std::to_string(c.max_sentence_len));
  add("d_emb", std::to_string(c.d_emb));
  add("window", std::to_string(c.window));
  add("l_prime", std::to_string(c.l_prime));
  add("l", std::to_string(c.l));
  add("sigma_eps", fmt_double(c.sigma_eps));
  add("batch_size", std::to_string(c.batch_size));
  add("epochs", std::to_string(c.epochs));
  add("lr_train", fmt_double(c.lr_train));
  add("lr_finetune", fmt_double(c.lr_finetune));
  add("train_mode", distance_mode_name(c.train_mode));
  add("finetune_mode", finetune_policy_name(c.finetune_mode));
  add("target_seen", c.target_seen ? "true" : "false");
  add("max_finetune_iters", std::to_string(c.max_finetune_iters));
  return out;
}

TrainConfig config_from_blob(const std::string& blob) {
  std::map<std::string, std::string> kv;
  std::size_t start = 0;
  while (start < blob.size()) {
    std::size_t nl = blob.find('\n', start);
    if (nl == std::string::npos) nl = blob.size();
    std::string line = blob.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw CheckpointError("malformed config entry in checkpoint");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto want = [&kv](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) {
      throw CheckpointError("checkpoint config misses key '" + k + "'");
    }
    return it->second;
  };
  TrainConfig c;
  try {
    c.seed = std::stoull(want("seed"));
    c.max_sentence_len = std::stoull(want("max_sentence_len"));
    c.d_emb = std::stoull(want("d_emb"));
    c.window = std::stoi(want("window"));
    c.l_prime = std::stoull(want("l_prime"));
    c.l = std::stoull(want("l"));
    c.sigma_eps = std::stod(want("sigma_eps"));
    c.batch_size = std::stoull(want("batch_size"));
    c.epochs = std::stoull(want("epochs"));
    c.lr_train = std::stod(want("lr_train"));
    c.lr_finetune = std::stod(want("lr_finetune"));
    c.train_mode = distance_mode_from_name(want("train_mode"));
    c.finetune_mode = finetune_policy_from_name(want("finetune_mode"));
    c.target_seen = want("target_seen") == "true";
    c.max_finetune_iters = std::stoull(want("max_finetune_iters"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad config value in checkpoint: ") +
                          e.what());
  }
  return c;
}

Parameter read_tensor(Reader& r) {
  Parameter p;
  p.name = r.str("tensor name");
  std::uint32_t rank = r.u32("tensor rank");
  if (rank > 4) throw CheckpointError("implausible tensor rank in checkpoint");
  std::vector<std::size_t> shape;
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint64_t d = r.u64("tensor shape");
    shape.push_back(static_cast<std::size_t>(d));
    total *= static_cast<std::size_t>(d);
  }
  r.need(total * sizeof(double), "tensor data");
  std::vector<double> data(total);
  std::memcpy(data.data(), r.bytes.data() + r.pos, total * sizeof(double));
  r.pos += total * sizeof(double);
  p.value = Tensor(std::move(shape), std::move(data));
  return p;
}

}  // namespace

std::string checkpoint_bytes(const Model& model) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_string(out, config_blob(model.config));

  const Parameter* params[] = {
      &model.encoder.w1,   &model.encoder.b1,   &model.encoder.w2,
      &model.encoder.b2,   &model.heads.w_mu,   &model.heads.b_mu,
      &model.heads.w_sigma, &model.heads.b_sigma};
  put_u32(out, static_cast<std::uint32_t>(std::size(params)));
  for (const Parameter* p : params) put_tensor(out, *p);

  const AbstractTransitions& t = model.transitions;
  put_u64(out, t.start_o);
  put_u64(out, t.start_i);
  put_u64(out, t.o_o);
  put_u64(out, t.o_i);
  put_u64(out, t.i_o);
  put_u64(out, t.i_same);
  put_u64(out, t.i_other);

  put_u64(out, model.config.seed);  // RNG seed record
  return out;
}

Model checkpoint_from_bytes(const std::string& bytes) {
  Reader r{bytes};
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  r.pos = sizeof(kMagic);
  std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(
        "incompatible checkpoint version " + std::to_string(version) +
        " (this build reads version " + std::to_string(kCheckpointVersion) +
        ")");
  }

  Model model;
  model.config = config_from_blob(r.str("config"));

  std::uint32_t count = r.u32("parameter count");
  std::map<std::string, Parameter> by_name;
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p = read_tensor(r);
    by_name[p.name] = p;
  }
  auto take = [&by_name](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointError("checkpoint misses tensor '" + name + "'");
    }
    return it->second;
  };
  model.encoder.window = model.config.window;
  model.encoder.w1 = take("encoder.w1");
  model.encoder.b1 = take("encoder.b1");
  model.encoder.w2 = take("encoder.w2");
  model.encoder.b2 = take("encoder.b2");
  model.heads.w_mu = take("heads.w_mu");
  model.heads.b_mu = take("heads.b_mu");
  model.heads.w_sigma = take("heads.w_sigma");
  model.heads.b_sigma = take("heads.b_sigma");
  model.heads.sigma_eps = model.config.sigma_eps;

  model.transitions.start_o = r.u64("transitions");
  model.transitions.start_i = r.u64("transitions");
  model.transitions.o_o = r.u64("transitions");
  model.transitions.o_i = r.u64("transitions");
  model.transitions.i_o = r.u64("transitions");
  model.transitions.i_same = r.u64("transitions");
  model.transitions.i_other = r.u64("transitions");

  std::uint64_t seed = r.u64("seed record");
  if (seed != model.config.seed) {
    throw CheckpointError("checkpoint seed record disagrees with its config");
  }
  if (r.pos != bytes.size()) {
    throw CheckpointError("trailing bytes after checkpoint payload");
  }
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  write_text_file(path, checkpoint_bytes(model));
}

Model load_checkpoint(const std::string& path) {
  return checkpoint_from_bytes(read_text_file(path));
}

}  // namespace fsner
