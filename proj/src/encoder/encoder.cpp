#include "unsee/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "unsee/error.hpp"

namespace unsee {

std::size_t TokenRow::length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

TokenRow tokenize(std::string_view sentence, const Vocab& vocab, std::size_t max_len) {
  require(max_len >= 1, ErrorKind::InvalidArgument, "tokenize: max_len must be >= 1");
  const auto tokens = split_tokens(sentence);
  require(!tokens.empty(), ErrorKind::EmptyInput, "tokenize: empty sentence");
  TokenRow row{std::vector<TokenId>(max_len, Vocab::kPad), std::vector<std::uint8_t>(max_len, 0)};
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t t = 0; t < n; ++t) {
    row.ids[t] = vocab.id(tokens[t]);
    row.mask[t] = 1;
  }
  return row;
}

TokenBatch make_batch(std::span<const TokenRow> rows) {
  TokenBatch batch;
  batch.rows = rows.size();
  batch.max_len = rows.empty() ? 0 : rows.front().ids.size();
  batch.ids.reserve(batch.rows * batch.max_len);
  batch.mask.reserve(batch.rows * batch.max_len);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require(row.ids.size() == batch.max_len && row.mask.size() == batch.max_len,
            ErrorKind::ShapeMismatch, "make_batch: row " + std::to_string(r) + " has a different max_len");
    std::size_t len = 0;
    while (len < row.mask.size() && row.mask[len] == 1) ++len;
    for (std::size_t t = len; t < row.mask.size(); ++t)
      require(row.mask[t] == 0, ErrorKind::InvalidArgument,
              "make_batch: mask of row " + std::to_string(r) + " is not a prefix");
    require(len >= 1, ErrorKind::EmptyInput, "make_batch: row " + std::to_string(r) + " has no real tokens");
    batch.ids.insert(batch.ids.end(), row.ids.begin(), row.ids.end());
    batch.mask.insert(batch.mask.end(), row.mask.begin(), row.mask.end());
    batch.lengths.push_back(len);
  }
  return batch;
}

TokenBatch tokenize_batch(std::span<const std::string> sentences, const Vocab& vocab,
                          std::size_t max_len) {
  std::vector<TokenRow> rows;
  rows.reserve(sentences.size());
  for (const auto& s : sentences) rows.push_back(tokenize(s, vocab, max_len));
  return make_batch(rows);
}

EncoderParams init_encoder(const EncoderInit& init, RngStream& rng) {
  EncoderParams p;
  p.embedding = Matrix(init.vocab_size, init.dim);
  for (double& v : p.embedding.values()) v = init.embedding_scale * rng.normal();
  p.feedforward = init.feedforward;
  if (init.feedforward) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(init.dim));
    p.ff_weight = Matrix(init.dim, init.dim);
    for (double& v : p.ff_weight.values()) v = bound * (2.0 * rng.uniform() - 1.0);
    p.ff_bias = Matrix(1, init.dim);
  }
  p.dropout = init.dropout;
  p.max_len = init.max_len;
  validate(p);
  return p;
}

void validate(const EncoderParams& p) {
  require(p.dim() >= 2, ErrorKind::InvalidArgument, "encoder: embedding dim must be >= 2");
  require(p.vocab_size() >= Vocab::kFirstToken, ErrorKind::InvalidArgument,
          "encoder: embedding table must cover PAD and UNK");
  require(p.dropout >= 0.0 && p.dropout < 1.0, ErrorKind::InvalidArgument,
          "encoder: dropout must lie in [0, 1)");
  require(p.max_len >= 1, ErrorKind::InvalidArgument, "encoder: max_len must be >= 1");
  require(p.embedding.all_finite(), ErrorKind::NonFinite, "encoder: non-finite embedding");
  if (p.feedforward) {
    require(p.ff_weight.rows() == p.dim() && p.ff_weight.cols() == p.dim(), ErrorKind::ShapeMismatch,
            "encoder: feed-forward weight must be d x d");
    require(p.ff_bias.rows() == 1 && p.ff_bias.cols() == p.dim(), ErrorKind::ShapeMismatch,
            "encoder: feed-forward bias must be 1 x d");
    require(p.ff_weight.all_finite() && p.ff_bias.all_finite(), ErrorKind::NonFinite,
            "encoder: non-finite feed-forward parameters");
  } else {
    require(p.ff_weight.empty() && p.ff_bias.empty(), ErrorKind::ShapeMismatch,
            "encoder: feed-forward tensors present but feed-forward disabled");
  }
}

namespace {

void check_ids(const EncoderParams& params, const TokenBatch& batch) {
  for (std::size_t r = 0; r < batch.rows; ++r)
    for (std::size_t t = 0; t < batch.lengths[r]; ++t)
      require(batch.id(r, t) < params.vocab_size(), ErrorKind::OutOfRange,
              "encode_batch: token id " + std::to_string(batch.id(r, t)) + " in row " +
                  std::to_string(r) + " exceeds vocab size " + std::to_string(params.vocab_size()));
}

// Feed-forward + pooling for one row; `in` holds the (dropped-out) token
// inputs of that row, `hidden` receives the per-token outputs.
void forward_row(const EncoderParams& p, const double* in, double* hidden, std::size_t n,
                 std::span<double> pooled) {
  const std::size_t d = p.dim();
  std::fill(pooled.begin(), pooled.end(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double* x = in + t * d;
    double* h = hidden + t * d;
    if (p.feedforward) {
      for (std::size_t o = 0; o < d; ++o) {
        double s = p.ff_bias(0, o);
        const auto w = p.ff_weight.row(o);
        for (std::size_t i = 0; i < d; ++i) s += w[i] * x[i];
        h[o] = std::tanh(s);
      }
    } else {
      std::copy(x, x + d, h);
    }
    for (std::size_t o = 0; o < d; ++o) pooled[o] += h[o];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : pooled) v *= inv;
}

}  // namespace

Encoded encode_batch(const EncoderParams& params, const TokenBatch& batch, Mode mode,
                     RngStream& rng) {
  check_ids(params, batch);
  const std::size_t d = params.dim();
  Encoded out{Matrix(batch.rows, d), EncoderContext{}};
  EncoderContext& ctx = out.context;
  ctx.batch = batch;
  ctx.vocab_size = params.vocab_size();
  ctx.dim = d;
  ctx.feedforward = params.feedforward;
  ctx.dropout = params.dropout;

  ctx.offsets.resize(batch.rows);
  std::size_t total = 0;
  for (std::size_t r = 0; r < batch.rows; ++r) {
    ctx.offsets[r] = total;
    total += batch.lengths[r];
  }
  ctx.keep.assign(total * d, 1.0);
  ctx.inputs.resize(total * d);
  ctx.hidden.resize(total * d);

  // Masks are drawn serially so the stream position never depends on threading.
  if (mode == Mode::Train && params.dropout > 0.0) {
    const double scale = 1.0 / (1.0 - params.dropout);
    for (double& k : ctx.keep) k = rng.uniform() < params.dropout ? 0.0 : scale;
  }

  const auto rows = static_cast<long long>(batch.rows);
#pragma omp parallel for schedule(static)
  for (long long rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const std::size_t n = batch.lengths[r];
    const std::size_t base = ctx.offsets[r] * d;
    for (std::size_t t = 0; t < n; ++t) {
      const auto emb = params.embedding.row(batch.id(r, t));
      for (std::size_t j = 0; j < d; ++j)
        ctx.inputs[base + t * d + j] = emb[j] * ctx.keep[base + t * d + j];
    }
    forward_row(params, ctx.inputs.data() + base, ctx.hidden.data() + base, n, out.pooled.row(r));
  }
  return out;
}

Matrix encode_eval(const EncoderParams& params, const TokenBatch& batch) {
  check_ids(params, batch);
  const std::size_t d = params.dim();
  Matrix pooled(batch.rows, d);
  const auto rows = static_cast<long long>(batch.rows);
#pragma omp parallel for schedule(static)
  for (long long rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const std::size_t n = batch.lengths[r];
    std::vector<double> in(n * d), hidden(n * d);
    for (std::size_t t = 0; t < n; ++t) {
      const auto emb = params.embedding.row(batch.id(r, t));
      std::copy(emb.begin(), emb.end(), in.begin() + static_cast<std::ptrdiff_t>(t * d));
    }
    forward_row(params, in.data(), hidden.data(), n, pooled.row(r));
  }
  return pooled;
}

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& params) {
  return {Matrix(params.embedding.rows(), params.embedding.cols()),
          Matrix(params.ff_weight.rows(), params.ff_weight.cols()),
          Matrix(params.ff_bias.rows(), params.ff_bias.cols())};
}

EncoderGrads& EncoderGrads::operator+=(const EncoderGrads& other) {
  embedding += other.embedding;
  ff_weight += other.ff_weight;
  ff_bias += other.ff_bias;
  return *this;
}

EncoderGrads encoder_backward(const EncoderParams& params, const EncoderContext& ctx,
                              const Matrix& upstream) {
  require(ctx.vocab_size == params.vocab_size() && ctx.dim == params.dim() &&
              ctx.feedforward == params.feedforward && ctx.dropout == params.dropout,
          ErrorKind::ShapeMismatch, "encoder_backward: context was produced by different parameters");
  require(upstream.rows() == ctx.batch.rows && upstream.cols() == ctx.dim, ErrorKind::ShapeMismatch,
          "encoder_backward: upstream gradient is " + std::to_string(upstream.rows()) + "x" +
              std::to_string(upstream.cols()) + ", expected " + std::to_string(ctx.batch.rows) +
              "x" + std::to_string(ctx.dim));
  const std::size_t d = ctx.dim;
  EncoderGrads g = EncoderGrads::zeros_like(params);
  std::vector<double> dpre(d), dx(d);

  for (std::size_t r = 0; r < ctx.batch.rows; ++r) {
    const std::size_t n = ctx.batch.lengths[r];
    const double inv = 1.0 / static_cast<double>(n);
    const auto up = upstream.row(r);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t base = (ctx.offsets[r] + t) * d;
      if (params.feedforward) {
        for (std::size_t o = 0; o < d; ++o) {
          const double h = ctx.hidden[base + o];
          dpre[o] = up[o] * inv * (1.0 - h * h);
        }
        for (std::size_t o = 0; o < d; ++o) {
          auto gw = g.ff_weight.row(o);
          for (std::size_t i = 0; i < d; ++i) gw[i] += dpre[o] * ctx.inputs[base + i];
          g.ff_bias(0, o) += dpre[o];
        }
        std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t o = 0; o < d; ++o) {
          const auto w = params.ff_weight.row(o);
          for (std::size_t i = 0; i < d; ++i) dx[i] += w[i] * dpre[o];
        }
      } else {
        for (std::size_t o = 0; o < d; ++o) dx[o] = up[o] * inv;
      }
      auto ge = g.embedding.row(ctx.batch.id(r, t));
      for (std::size_t i = 0; i < d; ++i) ge[i] += dx[i] * ctx.keep[base + i];
    }
  }
  return g;
}

}  // namespace unsee
