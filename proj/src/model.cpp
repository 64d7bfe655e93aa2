#include "spx/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace spx {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string to_string(FeatureMode m) { return m == FeatureMode::kRI ? "ri" : "ls"; }

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "ri" || s == "RI") return FeatureMode::kRI;
  if (s == "ls" || s == "LS") return FeatureMode::kLS;
  fail(ErrorKind::kConfig, "unknown feature mode '" + s + "'");
}

// ---------------------------------------------------------------- config

ModelConfig ModelConfig::from_widths(int stem, const std::vector<int>& encoder_outs,
                                     const std::vector<int>& decoder_outs, FeatureMode mode) {
  require(!encoder_outs.empty(), "model needs at least one encoder stage");
  require(decoder_outs.size() + 1 == encoder_outs.size(), "decoder widths must number depth-1");
  ModelConfig cfg;
  cfg.feature_mode = mode;
  cfg.stem_channels = stem;
  const int depth = static_cast<int>(encoder_outs.size());
  int prev = stem;
  for (int w : encoder_outs) {
    cfg.encoder_plan.push_back({prev, w});
    prev = w;
  }
  for (int j = 0; j < depth; ++j) {
    const int skip = 2 * encoder_outs[depth - 1 - j];
    const int in = j == 0 ? skip : cfg.decoder_plan.back().out + skip;
    const int out = j + 1 == depth ? cfg.feature_channels() : decoder_outs[j];
    cfg.decoder_plan.push_back({in, out});
  }
  return cfg;
}

ModelConfig ModelConfig::standard(FeatureMode mode) {
  return from_widths(64, {128, 256, 512, 512, 512, 512, 512}, {512, 512, 512, 256, 128, 64}, mode);
}

ModelConfig ModelConfig::scaled(int divisor) const {
  require(divisor >= 1, "scale divisor must be >= 1");
  auto div = [divisor](int c) { return std::max(1, c / divisor); };
  std::vector<int> enc, dec;
  for (const auto& p : encoder_plan) enc.push_back(div(p.out));
  for (std::size_t j = 0; j + 1 < decoder_plan.size(); ++j) dec.push_back(div(decoder_plan[j].out));
  ModelConfig cfg = from_widths(div(stem_channels), enc, dec, feature_mode);
  cfg.kernel = kernel;
  cfg.stride = stride;
  cfg.padding = padding;
  cfg.share_encoder_weights = share_encoder_weights;
  return cfg;
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::kConfig, "model config: " + msg);
  };
  const int d = depth();
  check(d >= 1 && d <= 12, "depth must be in [1, 12]");
  check(stem_channels >= 1, "stem channels must be positive");
  check(stride == 2 && kernel == 2 * padding + 2, "stages must exactly halve/double (stride 2, kernel = 2*padding + 2)");
  check(static_cast<int>(decoder_plan.size()) == d, "decoder plan length must equal encoder depth");
  for (int i = 0; i < d; ++i) {
    check(encoder_plan[i].out >= 1 && decoder_plan[i].out >= 1, "channel counts must be positive");
    const int expect_in = i == 0 ? stem_channels : encoder_plan[i - 1].out;
    check(encoder_plan[i].in == expect_in,
          "encoder stage " + std::to_string(i) + " in-channels " + std::to_string(encoder_plan[i].in) +
              " != " + std::to_string(expect_in));
  }
  for (int j = 0; j < d; ++j) {
    const int skip = 2 * encoder_plan[d - 1 - j].out;
    const int expect_in = j == 0 ? skip : decoder_plan[j - 1].out + skip;
    check(decoder_plan[j].in == expect_in,
          "decoder stage " + std::to_string(j) + " in-channels " + std::to_string(decoder_plan[j].in) +
              " != " + std::to_string(expect_in));
  }
  check(decoder_plan.back().out == feature_channels(), "last decoder stage must emit the feature channels");
}

std::int64_t count_parameters(const ModelConfig& cfg) {
  const std::int64_t f = cfg.feature_channels();
  const std::int64_t k2 = static_cast<std::int64_t>(cfg.kernel) * cfg.kernel;
  std::int64_t head = 9 * f * cfg.stem_channels + cfg.stem_channels;
  for (const auto& p : cfg.encoder_plan) head += k2 * p.in * p.out + p.out + 2 * p.out;
  std::int64_t total = head * (cfg.share_encoder_weights ? 1 : 2);
  for (const auto& p : cfg.decoder_plan) total += k2 * p.in * p.out + p.out + 2 * p.out;
  total += 9 * f * f + f;
  return total;
}

std::string config_to_json(const ModelConfig& cfg) {
  json enc = json::array(), dec = json::array();
  for (const auto& p : cfg.encoder_plan) enc.push_back({p.in, p.out});
  for (const auto& p : cfg.decoder_plan) dec.push_back({p.in, p.out});
  json j = {{"feature_mode", to_string(cfg.feature_mode)},
            {"stem_channels", cfg.stem_channels},
            {"encoder_plan", enc},
            {"decoder_plan", dec},
            {"kernel", cfg.kernel},
            {"stride", cfg.stride},
            {"padding", cfg.padding},
            {"share_encoder_weights", cfg.share_encoder_weights}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ModelConfig cfg;
    cfg.feature_mode = parse_feature_mode(j.at("feature_mode").get<std::string>());
    cfg.stem_channels = j.at("stem_channels").get<int>();
    for (const auto& p : j.at("encoder_plan")) cfg.encoder_plan.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    for (const auto& p : j.at("decoder_plan")) cfg.decoder_plan.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    cfg.kernel = j.at("kernel").get<int>();
    cfg.stride = j.at("stride").get<int>();
    cfg.padding = j.at("padding").get<int>();
    cfg.share_encoder_weights = j.at("share_encoder_weights").get<bool>();
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad model config json: ") + e.what());
  }
}

// ---------------------------------------------------------------- network

namespace {

class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : rng_(seed) {}
  double operator()(double bound) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * bound;
  }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
ConvLayer<T> make_conv(ConvGeometry g, bool transposed, UniformSource& rng) {
  ConvLayer<T> c;
  c.geom = g;
  c.transposed = transposed;
  const std::size_t n = static_cast<std::size_t>(g.in_channels) * g.out_channels * g.kernel * g.kernel;
  const int fan_in = (transposed ? g.out_channels : g.in_channels) * g.kernel * g.kernel;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  c.weight.resize(n);
  for (auto& w : c.weight) w = static_cast<T>(rng(bound));
  c.bias.resize(g.out_channels);
  for (auto& b : c.bias) b = static_cast<T>(rng(bound));
  c.grad_weight.assign(n, T(0));
  c.grad_bias.assign(g.out_channels, T(0));
  return c;
}

template <typename T>
BatchNormLayer<T> make_bn(int channels) {
  BatchNormLayer<T> b;
  b.channels = channels;
  b.gamma.assign(channels, T(1));
  b.beta.assign(channels, T(0));
  b.grad_gamma.assign(channels, T(0));
  b.grad_beta.assign(channels, T(0));
  b.running_mean.assign(channels, T(0));
  b.running_var.assign(channels, T(1));
  return b;
}

template <typename T>
std::span<const T> cs(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

template <typename T>
void conv_forward(const ConvLayer<T>& c, const Tensor<T>& x, Tensor<T>& y) {
  if (c.transposed)
    kernels::conv_transpose2d_forward(x, cs(c.weight), cs(c.bias), c.geom, y);
  else
    kernels::conv2d_forward(x, cs(c.weight), cs(c.bias), c.geom, y);
}

template <typename T>
void conv_backward(ConvLayer<T>& c, const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>* dx) {
  if (c.transposed)
    kernels::conv_transpose2d_backward(x, cs(c.weight), c.geom, dy, dx, std::span<T>(c.grad_weight),
                                       std::span<T>(c.grad_bias));
  else
    kernels::conv2d_backward(x, cs(c.weight), c.geom, dy, dx, std::span<T>(c.grad_weight),
                             std::span<T>(c.grad_bias));
}

template <typename T>
Tensor<T> stage_forward(Stage<T>& st, const Tensor<T>& x, bool training, StageCache<T>* sc) {
  Tensor<T> z, y;
  conv_forward(st.conv, x, z);
  auto& bn = st.bn;
  if (training) {
    Tensor<T> xhat;
    auto saved = kernels::batchnorm_forward_train(z, cs(bn.gamma), cs(bn.beta), xhat, y);
    const double count = static_cast<double>(z.n) * z.plane();
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    for (int c = 0; c < bn.channels; ++c) {
      bn.running_mean[c] = static_cast<T>((1 - kBatchNormMomentum) * bn.running_mean[c] +
                                          kBatchNormMomentum * saved.mean[c]);
      bn.running_var[c] = static_cast<T>((1 - kBatchNormMomentum) * bn.running_var[c] +
                                         kBatchNormMomentum * saved.var[c] * unbias);
    }
    if (sc) {
      sc->xhat = std::move(xhat);
      sc->inv_std = std::move(saved.inv_std);
    }
  } else {
    kernels::batchnorm_forward_eval(z, cs(bn.gamma), cs(bn.beta), cs(bn.running_mean), cs(bn.running_var), y);
  }
  if (st.relu) kernels::relu_inplace(y);
  if (sc) sc->output = y;
  return y;
}

// Returns dL/d(stage input); `g` is dL/d(stage output) and is consumed.
template <typename T>
Tensor<T> stage_backward(Stage<T>& st, const Tensor<T>& x, const StageCache<T>& sc, Tensor<T> g) {
  if (st.relu) kernels::relu_backward_inplace(sc.output, g);
  Tensor<T> gz, gx;
  kernels::batchnorm_backward(g, sc.xhat, cs(st.bn.gamma), cs(sc.inv_std), gz,
                              std::span<T>(st.bn.grad_gamma), std::span<T>(st.bn.grad_beta));
  conv_backward(st.conv, x, gz, &gx);
  return gx;
}

template <typename T>
Tensor<T> channel_slice(const Tensor<T>& src, int offset, int count) {
  Tensor<T> out(src.n, count, src.h, src.w);
  add_channel_slice(src, offset, out);
  return out;
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  if (dst.size() == 0) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

template <typename T>
Network<T>::Network(const ModelConfig& cfg, std::uint64_t seed) : config_(cfg) {
  config_.validate();
  UniformSource rng(seed);
  const int f = cfg.feature_channels();
  const int n_heads = cfg.share_encoder_weights ? 1 : 2;
  for (int h = 0; h < n_heads; ++h) {
    EncoderHead<T> head;
    head.stem = make_conv<T>({f, cfg.stem_channels, 3, 1, 1}, false, rng);
    for (const auto& p : cfg.encoder_plan) {
      Stage<T> st;
      st.conv = make_conv<T>({p.in, p.out, cfg.kernel, cfg.stride, cfg.padding}, false, rng);
      st.bn = make_bn<T>(p.out);
      head.stages.push_back(std::move(st));
    }
    heads_.push_back(std::move(head));
  }
  for (std::size_t j = 0; j < cfg.decoder_plan.size(); ++j) {
    const auto& p = cfg.decoder_plan[j];
    Stage<T> st;
    st.conv = make_conv<T>({p.in, p.out, cfg.kernel, cfg.stride, cfg.padding}, true, rng);
    st.bn = make_bn<T>(p.out);
    st.relu = j + 1 < cfg.decoder_plan.size();
    decoder_.push_back(std::move(st));
  }
  out_ = make_conv<T>({f, f, 3, 1, 1}, false, rng);
}

template <typename T>
Tensor<T> Network<T>::run(const Tensor<T>& mix, const Tensor<T>& ref, bool training, ForwardCache<T>* cache) {
  const int f = config_.feature_channels();
  const int m = config_.spatial_multiple();
  if (!mix.same_shape(ref) || mix.c != f || mix.n < 1 || mix.h % m != 0 || mix.w % m != 0 || mix.h == 0 ||
      mix.w == 0)
    fail(ErrorKind::kInvalidArgument,
         "network input must be (N, " + std::to_string(f) + ", H, W) pairs of equal shape with H, W multiples of " +
             std::to_string(m));
  const int d = config_.depth();

  auto encode = [&](EncoderHead<T>& head, const Tensor<T>& x, HeadCache<T>* hc) {
    std::vector<Tensor<T>> outs(d);
    Tensor<T> cur;
    conv_forward(head.stem, x, cur);
    if (hc) {
      hc->input = x;
      hc->stem_out = cur;
      hc->enc.resize(d);
    }
    for (int i = 0; i < d; ++i) {
      outs[i] = stage_forward(head.stages[i], i == 0 ? cur : outs[i - 1], training, hc ? &hc->enc[i] : nullptr);
    }
    return outs;
  };

  auto m_out = encode(head(0), mix, cache ? &cache->mix : nullptr);
  auto r_out = encode(head(1), ref, cache ? &cache->ref : nullptr);
  if (cache) cache->dec.resize(d);

  Tensor<T> u;
  for (int j = 0; j < d; ++j) {
    const int s = d - 1 - j;
    Tensor<T> in = j == 0 ? concat_channels({&m_out[s], &r_out[s]}) : concat_channels({&u, &m_out[s], &r_out[s]});
    StageCache<T>* sc = cache ? &cache->dec[j] : nullptr;
    u = stage_forward(decoder_[j], in, training, sc);
    if (sc) sc->input = std::move(in);
  }
  Tensor<T> y;
  conv_forward(out_, u, y);
  return y;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& mix, const Tensor<T>& ref, bool training, ForwardCache<T>* cache) {
  return run(mix, ref, training, training ? cache : nullptr);
}

template <typename T>
Tensor<T> Network<T>::infer(const Tensor<T>& mix, const Tensor<T>& ref) const {
  // Evaluation mode reads parameters only.
  return const_cast<Network*>(this)->run(mix, ref, false, nullptr);
}

template <typename T>
void Network<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& grad_out) {
  const int d = config_.depth();
  require(static_cast<int>(cache.dec.size()) == d, "backward needs a training-mode cache");
  Tensor<T> g;
  conv_backward(out_, cache.dec[d - 1].output, grad_out, &g);

  std::vector<Tensor<T>> gm(d), gr(d);
  for (int j = d - 1; j >= 0; --j) {
    const int s = d - 1 - j;
    const auto& sc = cache.dec[j];
    Tensor<T> gin = stage_backward(decoder_[j], sc.input, sc, std::move(g));
    int offset = 0;
    if (j > 0) {
      g = channel_slice(gin, 0, config_.decoder_plan[j - 1].out);
      offset = config_.decoder_plan[j - 1].out;
    }
    const int e = config_.encoder_plan[s].out;
    gm[s] = channel_slice(gin, offset, e);
    gr[s] = channel_slice(gin, offset + e, e);
  }

  auto encode_backward = [&](EncoderHead<T>& head, const HeadCache<T>& hc, std::vector<Tensor<T>>& skip) {
    Tensor<T> gy = std::move(skip[d - 1]);
    for (int i = d - 1; i >= 0; --i) {
      const Tensor<T>& x = i == 0 ? hc.stem_out : hc.enc[i - 1].output;
      Tensor<T> gx = stage_backward(head.stages[i], x, hc.enc[i], std::move(gy));
      if (i > 0) {
        gy = std::move(skip[i - 1]);
        add_into(gy, gx);
      } else {
        conv_backward(head.stem, hc.input, gx, static_cast<Tensor<T>*>(nullptr));
      }
    }
  };
  encode_backward(head(0), cache.mix, gm);
  encode_backward(head(1), cache.ref, gr);
}

template <typename T>
template <typename Self, typename Fn>
void Network<T>::visit(Self& self, Fn&& fn) {
  auto conv = [&](const std::string& p, auto& c) {
    fn(p + ".weight", c.weight, &c.grad_weight);
    fn(p + ".bias", c.bias, &c.grad_bias);
  };
  auto stage = [&](const std::string& p, auto& st) {
    conv(p + ".conv", st.conv);
    fn(p + ".bn.gamma", st.bn.gamma, &st.bn.grad_gamma);
    fn(p + ".bn.beta", st.bn.beta, &st.bn.grad_beta);
    fn(p + ".bn.running_mean", st.bn.running_mean, nullptr);
    fn(p + ".bn.running_var", st.bn.running_var, nullptr);
  };
  const char* head_names[2] = {"mix", "ref"};
  for (std::size_t h = 0; h < self.heads_.size(); ++h) {
    const std::string p = self.heads_.size() == 1 ? "shared" : head_names[h];
    conv(p + ".stem", self.heads_[h].stem);
    for (std::size_t i = 0; i < self.heads_[h].stages.size(); ++i)
      stage(p + ".enc" + std::to_string(i), self.heads_[h].stages[i]);
  }
  for (std::size_t j = 0; j < self.decoder_.size(); ++j) stage("dec" + std::to_string(j), self.decoder_[j]);
  conv("out", self.out_);
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
std::vector<ParamView<T>> Network<T>::parameters() {
  std::vector<ParamView<T>> out;
  visit(*this, [&](const std::string& name, std::vector<T>& v, std::vector<T>* g) {
    if (g) out.push_back({name, std::span<T>(v), std::span<T>(*g)});
  });
  return out;
}

template <typename T>
std::vector<ParamView<T>> Network<T>::buffers() {
  std::vector<ParamView<T>> out;
  visit(*this, [&](const std::string& name, std::vector<T>& v, std::vector<T>* g) {
    if (!g) out.push_back({name, std::span<T>(v), {}});
  });
  return out;
}

template <typename T>
std::int64_t Network<T>::parameter_count() const {
  std::int64_t n = 0;
  visit(*this, [&](const std::string&, const std::vector<T>& v, const std::vector<T>* g) {
    if (g) n += static_cast<std::int64_t>(v.size());
  });
  return n;
}

template <typename T>
bool Network<T>::operator==(const Network& o) const {
  if (!(config_ == o.config_)) return false;
  std::vector<const std::vector<T>*> a, b;
  visit(*this, [&](const std::string&, const std::vector<T>& v, const std::vector<T>*) { a.push_back(&v); });
  visit(o, [&](const std::string&, const std::vector<T>& v, const std::vector<T>*) { b.push_back(&v); });
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (*a[i] != *b[i]) return false;
  return true;
}

template <typename T>
void Network<T>::save(const std::filesystem::path& path) const {
  std::vector<std::pair<std::string, std::span<const T>>> entries;
  visit(*this, [&](const std::string& name, const std::vector<T>& v, const std::vector<T>*) {
    entries.emplace_back(name, std::span<const T>(v));
  });
  const json meta = {{"config", json::parse(config_to_json(config_))}};
  write_tensor_file<T>(path, "NET", meta.dump(), entries);
}

template <typename T>
Network<T> Network<T>::load(const std::filesystem::path& path) {
  const auto file = read_tensor_file<T>(path, "NET");
  ModelConfig cfg;
  try {
    cfg = config_from_json(json::parse(file.json).at("config").dump());
  } catch (const json::exception& e) {
    fail(ErrorKind::kCheckpoint, "checkpoint config unreadable: " + std::string(e.what()));
  }
  Network net(cfg, 0);
  visit(net, [&](const std::string& name, std::vector<T>& v, std::vector<T>*) {
    const auto& src = file.get(name);
    if (src.size() != v.size()) fail(ErrorKind::kCheckpoint, "checkpoint tensor '" + name + "' has wrong size");
    v = src;
  });
  return net;
}

// ---------------------------------------------------------------- tensor files

namespace {

std::string magic_for(const std::string& kind) {
  std::string m = "SPX" + kind;
  m.resize(8, '\0');
  return m;
}

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

class Reader {
 public:
  Reader(std::istream& is, const std::filesystem::path& path) : is_(is), path_(path) {}
  void bytes(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      fail(ErrorKind::kCheckpoint, "checkpoint truncated: " + path_.string());
  }
  template <typename V>
  V get() {
    V v;
    bytes(reinterpret_cast<char*>(&v), sizeof(V));
    return v;
  }

 private:
  std::istream& is_;
  const std::filesystem::path& path_;
};

}  // namespace

template <typename T>
const std::vector<T>& TensorFile<T>::get(const std::string& name) const {
  for (const auto& [n, v] : entries)
    if (n == name) return v;
  fail(ErrorKind::kCheckpoint, "checkpoint lacks tensor '" + name + "'");
}

template <typename T>
void write_tensor_file(const std::filesystem::path& path, const std::string& kind, const std::string& json_text,
                       const std::vector<std::pair<std::string, std::span<const T>>>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  const std::string magic = magic_for(kind);
  os.write(magic.data(), 8);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, sizeof(T));
  put<std::uint64_t>(os, json_text.size());
  os.write(json_text.data(), static_cast<std::streamsize>(json_text.size()));
  put<std::uint64_t>(os, entries.size());
  for (const auto& [name, values] : entries) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(os, values.size());
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  }
  if (!os) fail(ErrorKind::kIo, "failed writing checkpoint " + path.string());
}

template <typename T>
TensorFile<T> read_tensor_file(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kCheckpoint, "cannot open checkpoint " + path.string());
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0);
  Reader r(is, path);
  std::string magic(8, '\0');
  r.bytes(magic.data(), 8);
  if (magic != magic_for(kind)) fail(ErrorKind::kCheckpoint, "not a " + kind + " checkpoint: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(ErrorKind::kUnsupportedVersion, "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                             std::to_string(kCheckpointVersion) + ")");
  const auto scalar = r.get<std::uint32_t>();
  if (scalar != sizeof(T))
    fail(ErrorKind::kCheckpoint, "checkpoint scalar size " + std::to_string(scalar) + " does not match");
  TensorFile<T> out;
  const auto json_len = r.get<std::uint64_t>();
  if (json_len > file_size) fail(ErrorKind::kCheckpoint, "checkpoint truncated: " + path.string());
  out.json.resize(json_len);
  r.bytes(out.json.data(), json_len);
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    if (name_len > file_size) fail(ErrorKind::kCheckpoint, "checkpoint truncated: " + path.string());
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const auto n = r.get<std::uint64_t>();
    if (n * sizeof(T) > file_size) fail(ErrorKind::kCheckpoint, "checkpoint truncated: " + path.string());
    std::vector<T> values(n);
    r.bytes(reinterpret_cast<char*>(values.data()), n * sizeof(T));
    out.entries.emplace_back(std::move(name), std::move(values));
  }
  return out;
}

template class Network<float>;
template class Network<double>;
template struct TensorFile<float>;
template struct TensorFile<double>;
template void write_tensor_file<float>(const std::filesystem::path&, const std::string&, const std::string&,
                                       const std::vector<std::pair<std::string, std::span<const float>>>&);
template void write_tensor_file<double>(const std::filesystem::path&, const std::string&, const std::string&,
                                        const std::vector<std::pair<std::string, std::span<const double>>>&);
template TensorFile<float> read_tensor_file<float>(const std::filesystem::path&, const std::string&);
template TensorFile<double> read_tensor_file<double>(const std::filesystem::path&, const std::string&);

}  // namespace spx
