// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/model.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "vitr/errors.hpp"

namespace vitr {

std::string to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::full: return "full";
    case ScoreMode::no_vit: return "no_vit";
    case ScoreMode::no_rel: return "no_rel";
  }
  return "full";
}

ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "full") return ScoreMode::full;
  if (s == "no_vit") return ScoreMode::no_vit;
  if (s == "no_rel") return ScoreMode::no_rel;
  throw ConfigError("unknown score mode '" + s + "', expected full, no_vit, or no_rel");
}

void ModelConfig::validate() const {
  if (d1 < 1 || d2 < 1 || k < 1)
    throw ConfigError("model config: corpus dimensions d1/d2/k must be >= 1");
  if (unified_dim < 1 || fusion_dim < 1)
    throw ConfigError("model config: d3 and d4 must be >= 1");
  if (!(gamma > 0.0)) throw ConfigError("model config: gamma must be positive");
  if (reasoning_rounds < 1 || fusion_rounds < 1)
    throw ConfigError("model config: g1 and g2 must be >= 1");
}

VitrParams VitrParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  VitrParams params;
  params.region_proj = LinearLayer::init(config.d2, config.unified_dim, rng);
  params.word_proj = LinearLayer::init(config.d1, config.unified_dim, rng);
  const std::size_t round_count =
      config.shared_reasoning_weights ? 1 : static_cast<std::size_t>(config.reasoning_rounds);
  params.reasoning.reserve(round_count);
  for (std::size_t i = 0; i < round_count; ++i)
    params.reasoning.push_back(ReasoningRound::init(config.k, config.unified_dim, rng));
  params.fusion = FusionStage::init(config.d1, config.unified_dim, config.fusion_dim, rng);
  params.norel_text = GruLayer::init(config.unified_dim, config.unified_dim, rng);
  params.norel_region = GruLayer::init(config.unified_dim, config.unified_dim, rng);
  return params;
}

namespace {

void add_linear(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                const LinearLayer& layer) {
  out.emplace_back(prefix + ".weight", layer.weight);
  out.emplace_back(prefix + ".bias", layer.bias);
}

void add_gru(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const GruLayer& gru) {
  out.emplace_back(prefix + ".w_update", gru.w_update);
  out.emplace_back(prefix + ".u_update", gru.u_update);
  out.emplace_back(prefix + ".b_update", gru.b_update);
  out.emplace_back(prefix + ".w_reset", gru.w_reset);
  out.emplace_back(prefix + ".u_reset", gru.u_reset);
  out.emplace_back(prefix + ".b_reset", gru.b_reset);
  out.emplace_back(prefix + ".w_cand", gru.w_cand);
  out.emplace_back(prefix + ".u_cand", gru.u_cand);
  out.emplace_back(prefix + ".b_cand", gru.b_cand);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> VitrParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  add_linear(out, "projection.region", region_proj);
  add_linear(out, "projection.word", word_proj);
  for (std::size_t i = 0; i < reasoning.size(); ++i) {
    const std::string prefix = "reasoning.round" + std::to_string(i);
    add_linear(out, prefix + ".edge_query", reasoning[i].edge_query);
    add_linear(out, prefix + ".edge_key", reasoning[i].edge_key);
    out.emplace_back(prefix + ".pair_conv.weight", reasoning[i].pair_conv.weight);
    out.emplace_back(prefix + ".pair_conv.bias", reasoning[i].pair_conv.bias);
    add_linear(out, prefix + ".inner_map", reasoning[i].inner_map);
    add_linear(out, prefix + ".merge_map", reasoning[i].merge_map);
  }
  add_linear(out, "fusion.join_global", fusion.join_global);
  add_linear(out, "fusion.join_word", fusion.join_word);
  add_linear(out, "fusion.edge_query", fusion.edge_query);
  add_linear(out, "fusion.edge_key", fusion.edge_key);
  add_linear(out, "fusion.fuse_map", fusion.fuse_map);
  add_gru(out, "fusion.seq", fusion.seq);
  add_linear(out, "fusion.score_head", fusion.score_head);
  add_gru(out, "norel.text_pool", norel_text);
  add_gru(out, "norel.region_pool", norel_region);
  return out;
}

void VitrParams::zero_grad() const {
  for (auto& [name, tensor] : named_tensors()) tensor.zero_grad();
}

VitrModel init_model(const ModelConfig& config, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(0x7061726d);  // parameter stream
  return VitrModel{config, VitrParams::init(config, rng)};
}

void check_model_corpus(const VitrModel& model, const Corpus& corpus) {
  if (model.config.d1 != corpus.d1 || model.config.d2 != corpus.d2 || model.config.k != corpus.k)
    throw ConfigError("model dimensions (d1=" + std::to_string(model.config.d1) +
                      ", d2=" + std::to_string(model.config.d2) +
                      ", k=" + std::to_string(model.config.k) + ") do not match corpus (d1=" +
                      std::to_string(corpus.d1) + ", d2=" + std::to_string(corpus.d2) +
                      ", k=" + std::to_string(corpus.k) + ")");
}

namespace {

Tensor score_full(const ImageFeatures& image, const DescriptionFeatures& description,
                  const VitrModel& model, AttentionTrace* trace_out) {
  const auto& p = model.params;
  const Tensor regions = project_regions(image.regions, p.region_proj);
  const Tensor words = project_words(description.words, p.word_proj);
  const Tensor gated = reason(regions, p.reasoning, model.config.reasoning_rounds);
  auto [aligned, trace] = attend(gated, words, model.config.gamma);
  if (trace_out) *trace_out = std::move(trace);
  const Tensor joined = join(description.u_glob, image.v_glob, words, aligned, p.fusion);
  const Tensor fused = graph_fuse(joined, p.fusion, model.config.fusion_rounds,
                                  model.config.fuse_variant);
  return score_sequence(fused, p.fusion, model.config.seq_state);
}

Tensor score_no_vit(const ImageFeatures& image, const DescriptionFeatures& description,
                    const VitrModel& model) {
  const auto& p = model.params;
  const Tensor regions = project_regions(image.regions, p.region_proj);
  const Tensor words = project_words(description.words, p.word_proj);
  const Tensor gated = reason(regions, p.reasoning, model.config.reasoning_rounds);
  auto [aligned, trace] = attend(gated, words, model.config.gamma);
  const Tensor joined = join_words_only(words, aligned, p.fusion);
  const Tensor fused = graph_fuse(joined, p.fusion, model.config.fusion_rounds,
                                  model.config.fuse_variant);
  return score_sequence(fused, p.fusion, model.config.seq_state);
}

Tensor score_no_rel(const ImageFeatures& image, const DescriptionFeatures& description,
                    const VitrModel& model) {
  const auto& p = model.params;
  const Tensor regions = project_regions(image.regions, p.region_proj);
  const Tensor words = project_words(description.words, p.word_proj);
  // Two sequence poolers stand in for relational reasoning: the last hidden
  // state of each GRU summarises words and regions respectively.
  const Tensor pooled_text = gru_forward_rows(p.norel_text, words).back();
  const Tensor pooled_region = gru_forward_rows(p.norel_region, regions).back();
  const Tensor local_join =
      linear(p.fusion.join_word, as_row(square(subtract(pooled_text, pooled_region))));
  const Tensor global_join = linear(
      p.fusion.join_global, as_row(square(subtract(description.u_glob, image.v_glob))));
  const Tensor joined = concat_rows(global_join, local_join);
  const Tensor fused = graph_fuse(joined, p.fusion, model.config.fusion_rounds,
                                  model.config.fuse_variant);
  return score_sequence(fused, p.fusion, model.config.seq_state);
}

}  // namespace

Tensor vitr_score(const ImageFeatures& image, const DescriptionFeatures& description,
                  const VitrModel& model, ScoreMode mode) {
  switch (mode) {
    case ScoreMode::full: return score_full(image, description, model, nullptr);
    case ScoreMode::no_vit: return score_no_vit(image, description, model);
    case ScoreMode::no_rel: return score_no_rel(image, description, model);
  }
  throw ConfigError("invalid score mode");
}

double vitr_score_value(const ImageFeatures& image, const DescriptionFeatures& description,
                        const VitrModel& model, ScoreMode mode) {
  NoGradGuard no_grad;
  return vitr_score(image, description, model, mode).value();
}

std::pair<double, AttentionTrace> vitr_score_traced(const ImageFeatures& image,
                                                    const DescriptionFeatures& description,
                                                    const VitrModel& model) {
  NoGradGuard no_grad;
  AttentionTrace trace;
  const Tensor s = score_full(image, description, model, &trace);
  return {s.value(), std::move(trace)};
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

constexpr char kCheckpointMagic[8] = {'V', 'I', 'T', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct CkptReader {
  std::istream& is;

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint file: " + what);
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) fail(std::string("truncated reading ") + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::string str(const char* what) {
    const std::uint32_t len = u32(what);
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), len)) fail(std::string("truncated reading ") + what);
    return s;
  }

  double f64(const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) fail(std::string("truncated reading ") + what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

std::map<std::string, std::string> config_to_entries(const ModelConfig& c) {
  std::map<std::string, std::string> e;
  e["d1"] = std::to_string(c.d1);
  e["d2"] = std::to_string(c.d2);
  e["k"] = std::to_string(c.k);
  e["d3"] = std::to_string(c.unified_dim);
  e["d4"] = std::to_string(c.fusion_dim);
  char gamma_buf[64];
  std::snprintf(gamma_buf, sizeof(gamma_buf), "%.17g", c.gamma);
  e["gamma"] = gamma_buf;
  e["g1"] = std::to_string(c.reasoning_rounds);
  e["g2"] = std::to_string(c.fusion_rounds);
  e["shared_reasoning_weights"] = c.shared_reasoning_weights ? "1" : "0";
  e["fuse_variant"] = c.fuse_variant == FuseVariant::literal ? "literal" : "message_passing";
  e["seq_state"] = c.seq_state == SeqState::first ? "first" : "last";
  e["mode"] = to_string(c.mode);
  return e;
}

ModelConfig config_from_entries(const std::map<std::string, std::string>& e) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = e.find(key);
    if (it == e.end()) throw DataError(std::string("checkpoint file: missing config key ") + key);
    return it->second;
  };
  ModelConfig c;
  c.d1 = std::stoll(get("d1"));
  c.d2 = std::stoll(get("d2"));
  c.k = std::stoll(get("k"));
  c.unified_dim = std::stoll(get("d3"));
  c.fusion_dim = std::stoll(get("d4"));
  c.gamma = std::stod(get("gamma"));
  c.reasoning_rounds = std::stoll(get("g1"));
  c.fusion_rounds = std::stoll(get("g2"));
  c.shared_reasoning_weights = get("shared_reasoning_weights") == "1";
  c.fuse_variant =
      get("fuse_variant") == "literal" ? FuseVariant::literal : FuseVariant::message_passing;
  c.seq_state = get("seq_state") == "first" ? SeqState::first : SeqState::last;
  c.mode = score_mode_from_string(get("mode"));
  return c;
}

}  // namespace

void save_checkpoint(const VitrModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint file " + path.string());
  os.write(kCheckpointMagic, 8);
  write_u32(os, kCheckpointVersion);

  const auto config = config_to_entries(model.config);
  write_u32(os, static_cast<std::uint32_t>(config.size()));
  for (const auto& [key, value] : config) {
    write_string(os, key);
    write_string(os, value);
  }

  const auto named = model.params.named_tensors();
  write_u32(os, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    write_string(os, name);
    write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) write_f64(os, v);
  }
  if (!os) throw DataError("write failed for checkpoint file " + path.string());
}

VitrModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint file " + path.string());
  CkptReader r{is};

  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    r.fail("bad magic, expected VITRCKPT");
  const std::uint32_t version = r.u32("format version");
  if (version != kCheckpointVersion) r.fail("unsupported format version " + std::to_string(version));

  std::map<std::string, std::string> entries;
  const std::uint32_t config_count = r.u32("config entry count");
  for (std::uint32_t i = 0; i < config_count; ++i) {
    std::string key = r.str("config key");
    entries[key] = r.str("config value");
  }
  const ModelConfig config = config_from_entries(entries);

  VitrModel model = init_model(config, /*seed=*/0);
  auto named = model.params.named_tensors();
  std::map<std::string, Tensor> by_name(named.begin(), named.end());

  const std::uint32_t tensor_count = r.u32("tensor count");
  if (tensor_count != named.size())
    r.fail("expected " + std::to_string(named.size()) + " tensors, found " +
           std::to_string(tensor_count));
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::string name = r.str("tensor name");
    auto it = by_name.find(name);
    if (it == by_name.end()) r.fail("unknown tensor name '" + name + "'");
    Tensor target = it->second;
    const std::uint32_t rank = r.u32("tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32("tensor extent");
    if (shape != target.shape())
      r.fail("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
             shape_str(target.shape()));
    auto& data = target.data_mut();
    for (auto& v : data) v = r.f64("tensor payload");
  }
  return model;
}

}  // namespace vitr
