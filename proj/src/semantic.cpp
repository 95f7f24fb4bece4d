// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/semantic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "vitr/errors.hpp"

namespace vitr {

std::vector<std::string> tokenize_terms(const std::string& text) {
  std::vector<std::string> terms;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

TermMatrix build_term_matrix(const Corpus& corpus) {
  if (corpus.descriptions.empty()) throw DataError("term matrix requires a nonempty corpus");
  std::set<std::string> vocab_set;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(corpus.descriptions.size());
  for (const auto& desc : corpus.descriptions) {
    tokenized.push_back(tokenize_terms(desc.text));
    for (const auto& term : tokenized.back()) vocab_set.insert(term);
  }
  if (vocab_set.empty()) throw DataError("term matrix: no terms found in any description");

  TermMatrix tm;
  tm.vocabulary.assign(vocab_set.begin(), vocab_set.end());
  std::map<std::string, std::int64_t> column;
  for (std::size_t i = 0; i < tm.vocabulary.size(); ++i)
    column[tm.vocabulary[i]] = static_cast<std::int64_t>(i);

  const std::int64_t m = static_cast<std::int64_t>(corpus.descriptions.size());
  const std::int64_t w = static_cast<std::int64_t>(tm.vocabulary.size());
  std::vector<double> counts(static_cast<std::size_t>(m * w), 0.0);
  tm.row_ids.reserve(static_cast<std::size_t>(m));
  for (std::int64_t row = 0; row < m; ++row) {
    tm.row_ids.push_back(corpus.descriptions[static_cast<std::size_t>(row)].id);
    for (const auto& term : tokenized[static_cast<std::size_t>(row)])
      counts[static_cast<std::size_t>(row * w + column[term])] += 1.0;
  }
  tm.counts = Tensor::from_data({m, w}, std::move(counts));
  return tm;
}

namespace {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues land
/// in `values`, matching eigenvectors in the columns of `vectors`.
void symmetric_eigen(std::vector<double> s, std::int64_t n, std::vector<double>& values,
                     std::vector<double>& vectors) {
  vectors.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) vectors[static_cast<std::size_t>(i * n + i)] = 1.0;

  auto at = [&](std::vector<double>& m, std::int64_t r, std::int64_t c) -> double& {
    return m[static_cast<std::size_t>(r * n + c)];
  };

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::int64_t p = 0; p < n; ++p)
      for (std::int64_t q = p + 1; q < n; ++q) off += at(s, p, q) * at(s, p, q);
    if (off < 1e-26) break;

    for (std::int64_t p = 0; p < n; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) {
        const double apq = at(s, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = at(s, p, p);
        const double aqq = at(s, q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::int64_t i = 0; i < n; ++i) {
          const double sip = at(s, i, p);
          const double siq = at(s, i, q);
          at(s, i, p) = c * sip - sn * siq;
          at(s, i, q) = sn * sip + c * siq;
        }
        for (std::int64_t i = 0; i < n; ++i) {
          const double spi = at(s, p, i);
          const double sqi = at(s, q, i);
          at(s, p, i) = c * spi - sn * sqi;
          at(s, q, i) = sn * spi + c * sqi;
        }
        for (std::int64_t i = 0; i < n; ++i) {
          const double vip = at(vectors, i, p);
          const double viq = at(vectors, i, q);
          at(vectors, i, p) = c * vip - sn * viq;
          at(vectors, i, q) = sn * vip + c * viq;
        }
      }
    }
  }
  values.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = at(s, i, i);
}

}  // namespace

TruncatedSvd truncated_svd(const Tensor& a, std::int64_t rank) {
  if (a.rank() != 2) throw DimensionError("truncated_svd expects a rank-2 matrix");
  const std::int64_t m = a.rows(), w = a.cols();
  if (rank < 1 || rank > std::min(m, w))
    throw ConfigError("truncated_svd: rank " + std::to_string(rank) +
                      " must lie in [1, min(m, w)] = [1, " + std::to_string(std::min(m, w)) + "]");

  // Gram matrix A^T A, eigenvectors are the right singular vectors.
  std::vector<double> gram(static_cast<std::size_t>(w * w), 0.0);
  const auto& ad = a.data();
  for (std::int64_t i = 0; i < w; ++i)
    for (std::int64_t j = i; j < w; ++j) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < m; ++r)
        acc += ad[static_cast<std::size_t>(r * w + i)] * ad[static_cast<std::size_t>(r * w + j)];
      gram[static_cast<std::size_t>(i * w + j)] = acc;
      gram[static_cast<std::size_t>(j * w + i)] = acc;
    }

  std::vector<double> eigenvalues;
  std::vector<double> eigenvectors;
  symmetric_eigen(std::move(gram), w, eigenvalues, eigenvectors);

  // Descending by eigenvalue; ties broken by original column for determinism.
  std::vector<std::int64_t> order(static_cast<std::size_t>(w));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
    return eigenvalues[static_cast<std::size_t>(x)] > eigenvalues[static_cast<std::size_t>(y)];
  });

  TruncatedSvd svd;
  svd.values.resize(static_cast<std::size_t>(rank));
  std::vector<double> right(static_cast<std::size_t>(w * rank), 0.0);
  for (std::int64_t c = 0; c < rank; ++c) {
    const std::int64_t src = order[static_cast<std::size_t>(c)];
    const double ev = eigenvalues[static_cast<std::size_t>(src)];
    svd.values[static_cast<std::size_t>(c)] = ev > 0.0 ? std::sqrt(ev) : 0.0;
    // Sign convention: first component with magnitude above tolerance is
    // positive.
    double sign = 1.0;
    for (std::int64_t r = 0; r < w; ++r) {
      const double v = eigenvectors[static_cast<std::size_t>(r * w + src)];
      if (std::abs(v) > 1e-12) {
        sign = v > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::int64_t r = 0; r < w; ++r)
      right[static_cast<std::size_t>(r * rank + c)] =
          sign * eigenvectors[static_cast<std::size_t>(r * w + src)];
  }
  svd.right = Tensor::from_data({w, rank}, std::move(right));

  // X = A Y / sigma; columns with vanishing sigma are zero.
  std::vector<double> left(static_cast<std::size_t>(m * rank), 0.0);
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t c = 0; c < rank; ++c) {
      const double sigma = svd.values[static_cast<std::size_t>(c)];
      if (sigma <= 1e-12) continue;
      double acc = 0.0;
      for (std::int64_t j = 0; j < w; ++j)
        acc += ad[static_cast<std::size_t>(r * w + j)] *
               svd.right.data()[static_cast<std::size_t>(j * rank + c)];
      left[static_cast<std::size_t>(r * rank + c)] = acc / sigma;
    }
  svd.left = Tensor::from_data({m, rank}, std::move(left));
  return svd;
}

double reconstruction_error(const Tensor& a, const TruncatedSvd& svd) {
  const std::int64_t m = a.rows(), w = a.cols();
  const std::int64_t rank = static_cast<std::int64_t>(svd.values.size());
  double err = 0.0;
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      double rec = 0.0;
      for (std::int64_t j = 0; j < rank; ++j)
        rec += svd.left.data()[static_cast<std::size_t>(r * rank + j)] *
               svd.values[static_cast<std::size_t>(j)] *
               svd.right.data()[static_cast<std::size_t>(c * rank + j)];
      const double d = a.data()[static_cast<std::size_t>(r * w + c)] - rec;
      err += d * d;
    }
  return std::sqrt(err);
}

SemanticIndex build_semantic_index(const Corpus& corpus, std::int64_t d5) {
  TermMatrix tm = build_term_matrix(corpus);
  const std::int64_t m = tm.counts.rows();
  const std::int64_t w = tm.counts.cols();
  if (d5 < 1 || d5 > std::min(m, w))
    throw ConfigError("semantic index: d5=" + std::to_string(d5) +
                      " must lie in [1, min(m=" + std::to_string(m) + ", w=" + std::to_string(w) +
                      ")]");
  TruncatedSvd svd = truncated_svd(tm.counts, d5);

  SemanticIndex index;
  index.vocabulary = std::move(tm.vocabulary);
  index.right_vectors = svd.right;
  index.singular_values = svd.values;
  index.d5 = d5;
  {
    NoGradGuard no_grad;
    index.reduced = matmul(tm.counts, svd.right);  // B = A Y
  }
  for (std::size_t row = 0; row < tm.row_ids.size(); ++row)
    index.row_of[tm.row_ids[row]] = static_cast<std::int64_t>(row);
  return index;
}

double semantic_factor(std::uint32_t p, std::uint32_t q, const SemanticIndex& index,
                       double lambda) {
  auto find_row = [&](std::uint32_t id) {
    auto it = index.row_of.find(id);
    if (it == index.row_of.end())
      throw DataError("semantic factor: description id " + std::to_string(id) + " is not indexed");
    return it->second;
  };
  const std::int64_t rp = find_row(p);
  const std::int64_t rq = find_row(q);
  const std::int64_t d = index.d5;
  const auto& b = index.reduced.data();
  double dot = 0.0, np = 0.0, nq = 0.0;
  for (std::int64_t j = 0; j < d; ++j) {
    const double vp = b[static_cast<std::size_t>(rp * d + j)];
    const double vq = b[static_cast<std::size_t>(rq * d + j)];
    dot += vp * vq;
    np += vp * vp;
    nq += vq * vq;
  }
  if (np == 0.0 || nq == 0.0) return 0.0;
  return lambda * dot / (std::sqrt(np) * std::sqrt(nq));
}

}  // namespace vitr
