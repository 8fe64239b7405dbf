#include "blastmamba/network.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "blastmamba/error.hpp"
#include "blastmamba/ops.hpp"

namespace bm {

namespace {

enum SeedTag : std::uint64_t { kEncoderTag = 1, kMaskTag, kBlastTag, kDamageTag, kHeadTag };

std::string join(const std::array<std::size_t, kLevels>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("model config: bad integer for " + key);
  return out;
}

std::array<std::size_t, kLevels> parse_levels(const std::string& key, const std::string& v) {
  std::array<std::size_t, kLevels> out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= kLevels) throw ConfigError("model config: " + key + " needs exactly 4 values");
    out[i++] = parse_size(key, item);
  }
  if (i != kLevels) throw ConfigError("model config: " + key + " needs exactly 4 values");
  return out;
}

vss::VSSWeights copy_vss(const vss::VSSWeights& w);

Linear copy_linear(const Linear& l) {
  Linear c;
  c.w = l.w.clone();
  if (l.b.defined()) c.b = l.b.clone();
  return c;
}

vss::VSSWeights copy_vss(const vss::VSSWeights& w) {
  vss::VSSWeights c;
  c.ln_gamma = w.ln_gamma.clone();
  c.ln_beta = w.ln_beta.clone();
  c.in = copy_linear(w.in);
  c.gate = copy_linear(w.gate);
  c.out = copy_linear(w.out);
  for (std::size_t k = 0; k < vss::kScanDirections; ++k) {
    const auto& s = w.ss2d.dirs[k];
    auto& d = c.ss2d.dirs[k];
    d.w_b = s.w_b.clone();
    d.w_c = s.w_c.clone();
    d.w_delta = s.w_delta.clone();
    d.b_delta = s.b_delta.clone();
    d.a_log = s.a_log.clone();
  }
  return c;
}

void require_image(const Tensor& t, std::size_t h, std::size_t w, std::size_t c, const char* what) {
  if (t.shape() != Shape{h, w, c}) {
    throw ShapeError(std::string(what) + " must be " + shape_str({h, w, c}) + ", got " + shape_str(t.shape()));
  }
}

Tensor upsample_to(Tape& tape, const Tensor& x, std::size_t h, std::size_t w) {
  return ops::bilinear_resize(tape, x, h, w);
}

}  // namespace

void ModelConfig::validate() const {
  const std::size_t stride = kPatchSize << (kLevels - 1);
  if (height == 0 || width == 0 || height % stride != 0 || width % stride != 0) {
    throw ConfigError("model config: height and width must be positive multiples of " + std::to_string(stride));
  }
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (channels[l] == 0) throw ConfigError("model config: channels must be positive");
    if (l > 0 && channels[l] <= channels[l - 1]) throw ConfigError("model config: channels must strictly increase");
    if (blocks[l] == 0) throw ConfigError("model config: every level needs at least one VSS block");
    vss::VSSConfig{channels[l], state_dim, expand_ratio}.expanded_dim();
    vss::VSSConfig{2 * channels[l], state_dim, expand_ratio}.expanded_dim();
  }
  if (state_dim == 0) throw ConfigError("model config: state_dim must be positive");
  if (mask_classes < 2 || damage_classes < 2) throw ConfigError("model config: need at least two classes per head");
}

std::array<std::size_t, 2> ModelConfig::level_size(std::size_t level) const {
  const std::size_t s = kPatchSize << level;
  return {height / s, width / s};
}

std::string ModelConfig::serialize() const {
  char ratio[64];
  std::snprintf(ratio, sizeof ratio, "%.17g", expand_ratio);
  std::ostringstream os;
  os << "height=" << height << '\n'
     << "width=" << width << '\n'
     << "channels=" << join(channels) << '\n'
     << "blocks=" << join(blocks) << '\n'
     << "state_dim=" << state_dim << '\n'
     << "expand_ratio=" << ratio << '\n'
     << "mask_classes=" << mask_classes << '\n'
     << "damage_classes=" << damage_classes << '\n'
     << "residual=" << (residual == ResidualSource::kDecoderOutput ? "decoder" : "stss") << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("model config: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "height") c.height = parse_size(k, v);
    else if (k == "width") c.width = parse_size(k, v);
    else if (k == "channels") c.channels = parse_levels(k, v);
    else if (k == "blocks") c.blocks = parse_levels(k, v);
    else if (k == "state_dim") c.state_dim = parse_size(k, v);
    else if (k == "expand_ratio") c.expand_ratio = std::stod(v);
    else if (k == "mask_classes") c.mask_classes = parse_size(k, v);
    else if (k == "damage_classes") c.damage_classes = parse_size(k, v);
    else if (k == "residual") {
      if (v == "decoder") c.residual = ResidualSource::kDecoderOutput;
      else if (v == "stss") c.residual = ResidualSource::kStssOutput;
      else throw ConfigError("model config: residual must be 'decoder' or 'stss'");
    } else {
      throw ConfigError("model config: unknown key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

ParamList ModelWeights::named_parameters() const {
  ParamList out;
  const auto& e = encoder;
  e.patch_embed.collect("encoder.patch_embed", out);
  out.emplace_back("encoder.patch_ln.gamma", e.patch_ln_gamma);
  out.emplace_back("encoder.patch_ln.beta", e.patch_ln_beta);
  for (std::size_t l = 0; l < kLevels; ++l) {
    const auto lvl = std::to_string(l + 1);
    if (l > 0) e.down[l - 1].collect("encoder.down" + lvl, out);
    for (std::size_t b = 0; b < e.stages[l].size(); ++b)
      e.stages[l][b].collect("encoder.stage" + lvl + ".block" + std::to_string(b), out);
  }
  const auto& m = mask_decoder;
  for (std::size_t l = kLevels; l-- > 0;) {
    const auto lvl = std::to_string(l + 1);
    m.skip[l].collect("mask_decoder.skip" + lvl, out);
    if (l < kLevels - 1) m.lateral[l].collect("mask_decoder.lateral" + lvl, out);
    m.blocks[l].collect("mask_decoder.block" + lvl, out);
  }
  m.head.collect("mask_decoder.head", out);
  for (std::size_t l = 0; l < kLevels; ++l)
    blast_encoder.proj[l].collect("blast_encoder.proj" + std::to_string(l + 1), out);
  const auto& d = damage_decoder;
  for (std::size_t l = kLevels; l-- > 0;) {
    const auto lvl = std::to_string(l + 1);
    d.stss[l].collect("damage_decoder.stss" + lvl, out);
    if (l < kLevels - 1) d.lateral[l].collect("damage_decoder.lateral" + lvl, out);
  }
  d.head.collect("damage_decoder.head", out);
  return out;
}

std::vector<Tensor> ModelWeights::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

ModelWeights init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& ch = config.channels;
  ModelWeights w;
  w.config = config;

  Rng er(derive_seed(seed, kEncoderTag));
  const std::size_t patch_dim = kPatchSize * kPatchSize * 3;
  w.encoder.patch_embed = make_linear(er, patch_dim, ch[0]);
  w.encoder.patch_ln_gamma = Tensor::full({ch[0]}, 1.0, true);
  w.encoder.patch_ln_beta = Tensor::zeros({ch[0]}, true);
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (l > 0) w.encoder.down[l - 1] = make_linear(er, 4 * ch[l - 1], ch[l]);
    for (std::size_t b = 0; b < config.blocks[l]; ++b)
      w.encoder.stages[l].push_back(vss::init_vss(er, {ch[l], config.state_dim, config.expand_ratio}));
  }

  Rng mr(derive_seed(seed, kMaskTag));
  for (std::size_t l = kLevels; l-- > 0;) {
    w.mask_decoder.skip[l] = make_linear(mr, ch[l], ch[l]);
    if (l < kLevels - 1) w.mask_decoder.lateral[l] = make_linear(mr, ch[l + 1], ch[l]);
    w.mask_decoder.blocks[l] = vss::init_vss(mr, {ch[l], config.state_dim, config.expand_ratio});
  }
  w.mask_decoder.head = make_linear(mr, ch[0], config.mask_classes);

  Rng br(derive_seed(seed, kBlastTag));
  for (std::size_t l = 0; l < kLevels; ++l) w.blast_encoder.proj[l] = make_linear(br, 3, ch[l], 0.5);

  Rng dr(derive_seed(seed, kDamageTag));
  for (std::size_t l = kLevels; l-- > 0;) {
    w.damage_decoder.stss[l] = vss::init_stss(dr, ch[l], config.state_dim, config.expand_ratio);
    if (l < kLevels - 1) w.damage_decoder.lateral[l] = make_linear(dr, ch[l + 1], ch[l]);
  }
  Rng hr(derive_seed(seed, kHeadTag));
  w.damage_decoder.head = make_linear(hr, ch[0], config.damage_classes);
  return w;
}

ModelWeights clone_weights(const ModelWeights& w) {
  ModelWeights c;
  c.config = w.config;
  c.encoder.patch_embed = copy_linear(w.encoder.patch_embed);
  c.encoder.patch_ln_gamma = w.encoder.patch_ln_gamma.clone();
  c.encoder.patch_ln_beta = w.encoder.patch_ln_beta.clone();
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (l > 0) c.encoder.down[l - 1] = copy_linear(w.encoder.down[l - 1]);
    for (const auto& b : w.encoder.stages[l]) c.encoder.stages[l].push_back(copy_vss(b));
    c.mask_decoder.skip[l] = copy_linear(w.mask_decoder.skip[l]);
    c.mask_decoder.blocks[l] = copy_vss(w.mask_decoder.blocks[l]);
    c.blast_encoder.proj[l] = copy_linear(w.blast_encoder.proj[l]);
    c.damage_decoder.stss[l].vss = copy_vss(w.damage_decoder.stss[l].vss);
    c.damage_decoder.stss[l].proj = copy_linear(w.damage_decoder.stss[l].proj);
    if (l < kLevels - 1) {
      c.mask_decoder.lateral[l] = copy_linear(w.mask_decoder.lateral[l]);
      c.damage_decoder.lateral[l] = copy_linear(w.damage_decoder.lateral[l]);
    }
  }
  c.mask_decoder.head = copy_linear(w.mask_decoder.head);
  c.damage_decoder.head = copy_linear(w.damage_decoder.head);
  return c;
}

ModelWeights swap_head(const ModelWeights& w, std::size_t damage_classes, std::uint64_t seed) {
  if (damage_classes < 2) throw ConfigError("swap_head: need at least two damage classes");
  ModelWeights c = clone_weights(w);
  c.config.damage_classes = damage_classes;
  Rng hr(derive_seed(seed, kHeadTag));
  c.damage_decoder.head = make_linear(hr, c.config.channels[0], damage_classes);
  return c;
}

Tensor patch_partition(Tape& tape, const Tensor& image, const EncoderWeights& w) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ShapeError("patch_partition: expected an [H x W x 3] image, got " + shape_str(image.shape()));
  }
  const Tensor patches = ops::space_to_depth(tape, image, kPatchSize);
  return ops::layer_norm(tape, apply(tape, w.patch_embed, patches), w.patch_ln_gamma, w.patch_ln_beta);
}

FeaturePyramid encoder_forward(Tape& tape, const Tensor& image, const ModelWeights& w) {
  const auto& cfg = w.config;
  require_image(image, cfg.height, cfg.width, 3, "encoder input");
  FeaturePyramid p;
  Tensor x = patch_partition(tape, image, w.encoder);
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (l > 0) x = apply(tape, w.encoder.down[l - 1], ops::space_to_depth(tape, x, 2));
    for (const auto& blk : w.encoder.stages[l]) x = vss::vss_block(tape, x, blk);
    p.levels[l] = x;
  }
  return p;
}

Tensor mask_decoder_forward(Tape& tape, const FeaturePyramid& pre, const ModelWeights& w) {
  const auto& m = w.mask_decoder;
  Tensor x;
  for (std::size_t l = kLevels; l-- > 0;) {
    const Tensor& f = pre.levels[l];
    Tensor in = apply(tape, m.skip[l], f);
    if (x.defined()) {
      const Tensor lat = apply(tape, m.lateral[l], x);
      in = ops::add(tape, in, upsample_to(tape, lat, f.dim(0), f.dim(1)));
    }
    x = vss::vss_block(tape, in, m.blocks[l]);
  }
  const Tensor full = upsample_to(tape, x, w.config.height, w.config.width);
  return apply(tape, m.head, full);
}

std::array<Tensor, kLevels> blast_encoder_forward(Tape& tape, const Tensor& blast_map, const ModelWeights& w) {
  const auto& cfg = w.config;
  require_image(blast_map, cfg.height, cfg.width, 3, "blast map");
  std::array<Tensor, kLevels> out;
  for (std::size_t l = 0; l < kLevels; ++l) {
    const auto [h, wd] = cfg.level_size(l);
    const Tensor resized = ops::bilinear_resize(tape, blast_map, h, wd);
    out[l] = ops::conv1x1(tape, resized, w.blast_encoder.proj[l].w, w.blast_encoder.proj[l].b);
  }
  return out;
}

Tensor damage_decoder_forward(Tape& tape, const FeaturePyramid& pre, const FeaturePyramid& post,
                              const std::array<Tensor, kLevels>& blast, const ModelWeights& w) {
  const auto& d = w.damage_decoder;
  Tensor prev_d, prev_u;
  for (std::size_t l = kLevels; l-- > 0;) {
    if (pre.levels[l].shape() != post.levels[l].shape()) {
      throw ShapeError("damage decoder: pre/post pyramids misaligned at level " + std::to_string(l + 1));
    }
    const Tensor u = vss::stss_block(tape, pre.levels[l], post.levels[l], d.stss[l]);
    Tensor carried;
    const Tensor& source = w.config.residual == ResidualSource::kDecoderOutput ? prev_d : prev_u;
    if (source.defined()) carried = apply(tape, d.lateral[l], source);
    prev_d = vss::ra_stss_fuse(tape, u, carried, blast[l]);
    prev_u = u;
  }
  const Tensor full = upsample_to(tape, prev_d, w.config.height, w.config.width);
  return apply(tape, d.head, full);
}

ModelOutput model_forward(Tape& tape, const ModelWeights& w, const Tensor& pre_image, const Tensor& post_image,
                          const Tensor& blast_map) {
  const FeaturePyramid pre = encoder_forward(tape, pre_image, w);
  const FeaturePyramid post = encoder_forward(tape, post_image, w);
  std::array<Tensor, kLevels> blast;
  if (blast_map.defined()) blast = blast_encoder_forward(tape, blast_map, w);
  ModelOutput out;
  out.mask_logits = mask_decoder_forward(tape, pre, w);
  out.damage_logits = damage_decoder_forward(tape, pre, post, blast, w);
  return out;
}

std::vector<std::int32_t> classify(const Tensor& logits) {
  const std::size_t t = logits.shape().back();
  if (t < 2) throw ShapeError("classify: need at least two classes");
  const std::size_t n = logits.numel() / t;
  auto d = logits.data();
  std::vector<std::int32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = d.data() + i * t;
    out[i] = static_cast<std::int32_t>(std::max_element(row, row + t) - row);
  }
  return out;
}

}  // namespace bm
