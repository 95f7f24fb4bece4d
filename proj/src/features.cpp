// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "vitr/errors.hpp"

namespace vitr {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'T', 'R', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

// --- little-endian primitives ---

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct Reader {
  std::istream& is;
  std::string context;

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("corpus file: " + what + (context.empty() ? "" : " (" + context + ")"));
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) fail(std::string("truncated reading ") + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
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

  std::vector<double> f64_block(std::int64_t count, const char* what) {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto& v : out) {
      v = f64(what);
      if (!std::isfinite(v)) fail(std::string("non-finite value in ") + what);
    }
    return out;
  }
};

void write_f64_block(std::ostream& os, const std::vector<double>& data) {
  for (double v : data) write_f64(os, v);
}

}  // namespace

const ImageFeatures& Corpus::image_by_id(std::uint32_t id) const {
  auto it = image_index_.find(id);
  if (it == image_index_.end())
    throw DataError("unknown image id " + std::to_string(id));
  return images[it->second];
}

const DescriptionFeatures& Corpus::description_by_id(std::uint32_t id) const {
  auto it = description_index_.find(id);
  if (it == description_index_.end())
    throw DataError("unknown description id " + std::to_string(id));
  return descriptions[it->second];
}

bool Corpus::is_relevant(std::uint32_t image_id, std::uint32_t desc_id) const {
  auto it = relevance.find(image_id);
  if (it == relevance.end()) return false;
  const auto& ids = it->second;
  return std::find(ids.begin(), ids.end(), desc_id) != ids.end();
}

void Corpus::build_index() {
  image_index_.clear();
  description_index_.clear();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!image_index_.emplace(images[i].id, i).second)
      throw DataError("duplicate image id " + std::to_string(images[i].id));
  }
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    if (!description_index_.emplace(descriptions[i].id, i).second)
      throw DataError("duplicate description id " + std::to_string(descriptions[i].id));
  }
}

void Corpus::validate() const {
  if (descriptions.empty()) throw DataError("corpus must contain >=1 pair");
  if (images.empty()) throw DataError("corpus must contain >=1 image");
  if (d1 <= 0 || d2 <= 0 || k <= 0) throw DataError("corpus dimensions must be positive");
  for (const auto& img : images) {
    if (img.v_glob.rank() != 1 || img.v_glob.size() != d1)
      throw DataError("image " + std::to_string(img.id) + ": global vector is " +
                      shape_str(img.v_glob.shape()) + ", expected [" + std::to_string(d1) + "]");
    if (img.regions.rank() != 2 || img.regions.rows() != k || img.regions.cols() != d2)
      throw DataError("image " + std::to_string(img.id) + ": regions are " +
                      shape_str(img.regions.shape()) + ", expected [" + std::to_string(k) + " x " +
                      std::to_string(d2) + "]");
  }
  for (const auto& desc : descriptions) {
    if (desc.u_glob.rank() != 1 || desc.u_glob.size() != d1)
      throw DataError("description " + std::to_string(desc.id) + ": global vector is " +
                      shape_str(desc.u_glob.shape()) + ", expected [" + std::to_string(d1) + "]");
    if (desc.words.rank() != 2 || desc.words.rows() < 1 || desc.words.cols() != d1)
      throw DataError("description " + std::to_string(desc.id) + ": word matrix is " +
                      shape_str(desc.words.shape()) + ", expected [n x " + std::to_string(d1) +
                      "] with n >= 1");
    if (image_index_.find(desc.image_id) == image_index_.end())
      throw DataError("description " + std::to_string(desc.id) + " references missing image " +
                      std::to_string(desc.image_id));
  }
  // Relevance edges must reference existing ids and mirror description.image_id
  // one-to-one.
  std::set<std::uint32_t> covered;
  for (const auto& [image_id, desc_ids] : relevance) {
    if (image_index_.find(image_id) == image_index_.end())
      throw DataError("relevance references missing image " + std::to_string(image_id));
    for (auto desc_id : desc_ids) {
      auto it = description_index_.find(desc_id);
      if (it == description_index_.end())
        throw DataError("relevance references missing description " + std::to_string(desc_id));
      if (descriptions[it->second].image_id != image_id)
        throw DataError("description " + std::to_string(desc_id) + " is marked relevant to image " +
                        std::to_string(image_id) + " but belongs to image " +
                        std::to_string(descriptions[it->second].image_id));
      if (!covered.insert(desc_id).second)
        throw DataError("description " + std::to_string(desc_id) +
                        " is relevant to more than one image");
    }
  }
  for (const auto& desc : descriptions) {
    if (covered.find(desc.id) == covered.end())
      throw DataError("description " + std::to_string(desc.id) + " has no relevance entry");
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open corpus file " + path.string());
  Reader r{is, ""};

  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    r.fail("bad magic, expected VITRFEAT");
  const std::uint32_t version = r.u32("format version");
  if (version != kFormatVersion)
    r.fail("unsupported format version " + std::to_string(version));

  Corpus corpus;
  const std::uint32_t m = r.u32("description count");
  const std::uint32_t image_count = r.u32("image count");
  corpus.d1 = r.u32("d1");
  corpus.d2 = r.u32("d2");
  corpus.k = r.u32("k");
  if (m == 0) throw DataError("corpus must contain >=1 pair");
  if (image_count == 0) r.fail("corpus must contain >=1 image");
  if (corpus.d1 == 0 || corpus.d2 == 0 || corpus.k == 0) r.fail("zero dimension in header");

  // Per-table dimension fields; redundancy lets a malformed writer surface as
  // a named error instead of a misaligned payload.
  const std::uint32_t img_d1 = r.u32("image table d1");
  const std::uint32_t img_d2 = r.u32("image table d2");
  const std::uint32_t img_k = r.u32("image table k");
  if (img_d1 != corpus.d1 || img_d2 != corpus.d2 || img_k != corpus.k)
    r.fail("image table dimensions (" + std::to_string(img_d1) + ", " + std::to_string(img_d2) +
           ", " + std::to_string(img_k) + ") disagree with header");
  corpus.images.reserve(image_count);
  for (std::uint32_t i = 0; i < image_count; ++i) {
    r.context = "image record " + std::to_string(i);
    ImageFeatures img;
    img.id = r.u32("image id");
    img.v_glob = Tensor::from_data({corpus.d1}, r.f64_block(corpus.d1, "image global vector"));
    img.regions = Tensor::from_data({corpus.k, corpus.d2},
                                    r.f64_block(corpus.k * corpus.d2, "image regions"));
    corpus.images.push_back(std::move(img));
  }

  r.context.clear();
  const std::uint32_t txt_d1 = r.u32("description table d1");
  if (txt_d1 != corpus.d1)
    r.fail("d1 mismatch between image and text blocks: image table has " +
           std::to_string(corpus.d1) + ", text table has " + std::to_string(txt_d1));
  corpus.descriptions.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    r.context = "description record " + std::to_string(i);
    DescriptionFeatures desc;
    desc.id = r.u32("description id");
    desc.image_id = r.u32("description image id");
    const std::uint32_t n = r.u32("word count");
    if (n == 0) r.fail("word count must be >= 1");
    desc.u_glob = Tensor::from_data({corpus.d1}, r.f64_block(corpus.d1, "description global vector"));
    desc.words = Tensor::from_data({static_cast<std::int64_t>(n), corpus.d1},
                                   r.f64_block(static_cast<std::int64_t>(n) * corpus.d1, "word matrix"));
    const std::uint32_t text_len = r.u32("text length");
    desc.text.resize(text_len);
    if (text_len > 0 && !is.read(desc.text.data(), text_len)) r.fail("truncated reading text");
    corpus.descriptions.push_back(std::move(desc));
  }

  r.context.clear();
  const std::uint32_t rel_count = r.u32("relevance record count");
  for (std::uint32_t i = 0; i < rel_count; ++i) {
    r.context = "relevance record " + std::to_string(i);
    const std::uint32_t image_id = r.u32("relevance image id");
    const std::uint32_t count = r.u32("relevance entry count");
    auto& ids = corpus.relevance[image_id];
    for (std::uint32_t j = 0; j < count; ++j) ids.push_back(r.u32("relevant description id"));
  }

  corpus.build_index();
  corpus.validate();
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  {
    // Catch inconsistent in-memory structures before any bytes hit disk.
    Corpus copy = corpus;
    copy.build_index();
    copy.validate();
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write corpus file " + path.string());
  os.write(kMagic, 8);
  write_u32(os, kFormatVersion);
  write_u32(os, static_cast<std::uint32_t>(corpus.descriptions.size()));
  write_u32(os, static_cast<std::uint32_t>(corpus.images.size()));
  write_u32(os, static_cast<std::uint32_t>(corpus.d1));
  write_u32(os, static_cast<std::uint32_t>(corpus.d2));
  write_u32(os, static_cast<std::uint32_t>(corpus.k));

  write_u32(os, static_cast<std::uint32_t>(corpus.d1));
  write_u32(os, static_cast<std::uint32_t>(corpus.d2));
  write_u32(os, static_cast<std::uint32_t>(corpus.k));
  for (const auto& img : corpus.images) {
    write_u32(os, img.id);
    write_f64_block(os, img.v_glob.data());
    write_f64_block(os, img.regions.data());
  }

  write_u32(os, static_cast<std::uint32_t>(corpus.d1));
  for (const auto& desc : corpus.descriptions) {
    write_u32(os, desc.id);
    write_u32(os, desc.image_id);
    write_u32(os, static_cast<std::uint32_t>(desc.words.rows()));
    write_f64_block(os, desc.u_glob.data());
    write_f64_block(os, desc.words.data());
    write_u32(os, static_cast<std::uint32_t>(desc.text.size()));
    os.write(desc.text.data(), static_cast<std::streamsize>(desc.text.size()));
  }

  write_u32(os, static_cast<std::uint32_t>(corpus.relevance.size()));
  for (const auto& [image_id, ids] : corpus.relevance) {
    write_u32(os, image_id);
    write_u32(os, static_cast<std::uint32_t>(ids.size()));
    for (auto id : ids) write_u32(os, id);
  }
  if (!os) throw DataError("write failed for corpus file " + path.string());
}

namespace {

// Planted-signal weights. The object factor dominates the globals; the
// relation factor is weak there but strong in the designated regions and in
// the relation words, so paired images stay hard to separate globally.
constexpr double kGlobalObjectScale = 1.0;
constexpr double kGlobalRelationScale = 0.3;
constexpr double kGlobalNoise = 0.2;
constexpr double kRegionObjectScale = 0.8;
constexpr double kRegionRelationScale = 1.0;
constexpr double kRegionNoise = 0.35;
constexpr double kWordNoise = 0.25;

std::vector<double> random_unit(std::int64_t dim, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double sq = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
  for (auto& x : v) x *= inv;
  return v;
}

}  // namespace

Corpus synth_corpus(const SynthConfig& config) {
  if (config.num_images < 1 || config.descriptions_per_image < 1 || config.d1 < 1 ||
      config.d2 < 1 || config.k < 1 || config.n < 1)
    throw ConfigError("synth_corpus: all sizes must be >= 1");

  Rng factors_rng = Rng(config.seed).fork(1);
  Rng noise_rng = Rng(config.seed).fork(2);
  Rng lift_rng = Rng(config.seed).fork(3);

  // Fixed lift from the d1-dimensional latent space into region space.
  std::vector<double> lift(static_cast<std::size_t>(config.d2 * config.d1));
  {
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.d1));
    for (auto& v : lift) v = lift_rng.normal() * scale;
  }
  auto lift_latent = [&](const std::vector<double>& latent) {
    std::vector<double> out(static_cast<std::size_t>(config.d2), 0.0);
    for (std::int64_t row = 0; row < config.d2; ++row) {
      double acc = 0.0;
      for (std::int64_t col = 0; col < config.d1; ++col)
        acc += lift[static_cast<std::size_t>(row * config.d1 + col)] *
               latent[static_cast<std::size_t>(col)];
      out[static_cast<std::size_t>(row)] = acc;
    }
    return out;
  };

  Corpus corpus;
  corpus.d1 = config.d1;
  corpus.d2 = config.d2;
  corpus.k = config.k;

  const std::int64_t pair_total = (config.num_images + 1) / 2;
  std::vector<std::vector<double>> object_factor(static_cast<std::size_t>(pair_total));
  std::vector<std::array<std::vector<double>, 2>> relation_factor(
      static_cast<std::size_t>(pair_total));
  for (std::int64_t t = 0; t < pair_total; ++t) {
    object_factor[static_cast<std::size_t>(t)] = random_unit(config.d1, factors_rng);
    relation_factor[static_cast<std::size_t>(t)][0] = random_unit(config.d1, factors_rng);
    relation_factor[static_cast<std::size_t>(t)][1] = random_unit(config.d1, factors_rng);
  }

  // At least one region carries the planted signal; about a third do when k
  // allows it.
  const std::int64_t designated = std::max<std::int64_t>(1, config.k / 3);

  std::uint32_t next_desc_id = 0;
  for (std::int64_t img_idx = 0; img_idx < config.num_images; ++img_idx) {
    const std::int64_t pair = img_idx / 2;
    const int side = static_cast<int>(img_idx % 2);
    const auto& obj = object_factor[static_cast<std::size_t>(pair)];
    const auto& rel = relation_factor[static_cast<std::size_t>(pair)][side];

    ImageFeatures img;
    img.id = static_cast<std::uint32_t>(img_idx);
    {
      std::vector<double> g(static_cast<std::size_t>(config.d1));
      for (std::int64_t d = 0; d < config.d1; ++d)
        g[static_cast<std::size_t>(d)] = kGlobalObjectScale * obj[static_cast<std::size_t>(d)] +
                                         kGlobalRelationScale * rel[static_cast<std::size_t>(d)] +
                                         kGlobalNoise * noise_rng.normal();
      img.v_glob = Tensor::from_data({config.d1}, std::move(g));
    }
    {
      std::vector<double> regions(static_cast<std::size_t>(config.k * config.d2));
      for (std::int64_t r = 0; r < config.k; ++r) {
        std::vector<double> base(static_cast<std::size_t>(config.d2), 0.0);
        if (r < designated) {
          std::vector<double> latent(static_cast<std::size_t>(config.d1));
          for (std::int64_t d = 0; d < config.d1; ++d)
            latent[static_cast<std::size_t>(d)] =
                kRegionObjectScale * obj[static_cast<std::size_t>(d)] +
                kRegionRelationScale * rel[static_cast<std::size_t>(d)];
          base = lift_latent(latent);
        }
        for (std::int64_t c = 0; c < config.d2; ++c)
          regions[static_cast<std::size_t>(r * config.d2 + c)] =
              base[static_cast<std::size_t>(c)] + kRegionNoise * noise_rng.normal();
      }
      img.regions = Tensor::from_data({config.k, config.d2}, std::move(regions));
    }
    corpus.images.push_back(std::move(img));

    for (std::int64_t d_idx = 0; d_idx < config.descriptions_per_image; ++d_idx) {
      DescriptionFeatures desc;
      desc.id = next_desc_id++;
      desc.image_id = static_cast<std::uint32_t>(img_idx);
      {
        std::vector<double> g(static_cast<std::size_t>(config.d1));
        for (std::int64_t d = 0; d < config.d1; ++d)
          g[static_cast<std::size_t>(d)] = kGlobalObjectScale * obj[static_cast<std::size_t>(d)] +
                                           kGlobalRelationScale * rel[static_cast<std::size_t>(d)] +
                                           kGlobalNoise * noise_rng.normal();
        desc.u_glob = Tensor::from_data({config.d1}, std::move(g));
      }
      {
        // Word 0 carries the object factor, word 1 (when present) the
        // relation factor, the rest are filler noise.
        std::vector<double> words(static_cast<std::size_t>(config.n * config.d1));
        for (std::int64_t w = 0; w < config.n; ++w) {
          const std::vector<double>* factor = nullptr;
          if (w == 0) factor = &obj;
          else if (w == 1 && config.n > 1) factor = &rel;
          for (std::int64_t d = 0; d < config.d1; ++d) {
            double v = kWordNoise * noise_rng.normal();
            if (factor) v += (*factor)[static_cast<std::size_t>(d)];
            words[static_cast<std::size_t>(w * config.d1 + d)] = v;
          }
        }
        desc.words = Tensor::from_data({config.n, config.d1}, std::move(words));
      }
      {
        std::string text = "obj" + std::to_string(pair) + " rel" + std::to_string(side);
        for (std::int64_t w = 2; w < config.n; ++w)
          text += " w" + std::to_string(noise_rng.below(50));
        desc.text = std::move(text);
      }
      corpus.relevance[static_cast<std::uint32_t>(img_idx)].push_back(desc.id);
      corpus.descriptions.push_back(std::move(desc));
    }
  }

  corpus.build_index();
  corpus.validate();
  return corpus;
}

Tensor project_regions(const Tensor& regions, const LinearLayer& region_proj) {
  return linear(region_proj, regions);
}

Tensor project_words(const Tensor& words, const LinearLayer& word_proj) {
  return linear(word_proj, words);
}

}  // namespace vitr
