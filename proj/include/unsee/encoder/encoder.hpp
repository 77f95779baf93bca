#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "unsee/encoder/vocab.hpp"
#include "unsee/mode.hpp"
#include "unsee/numerics/matrix.hpp"
#include "unsee/rng.hpp"

namespace unsee {

struct TokenRow {
  std::vector<TokenId> ids;      // max_len entries, PAD-filled
  std::vector<std::uint8_t> mask;  // 1 on the real-token prefix
  std::size_t length() const;
};

// B x max_len grid of token ids plus the attention mask.
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t max_len = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> lengths;  // real tokens per row

  TokenId id(std::size_t r, std::size_t t) const { return ids[r * max_len + t]; }
};

// Throws EmptyInput for a sentence with no tokens.
TokenRow tokenize(std::string_view sentence, const Vocab& vocab, std::size_t max_len);
// Rows must share max_len and respect the prefix-mask invariant.
TokenBatch make_batch(std::span<const TokenRow> rows);
TokenBatch tokenize_batch(std::span<const std::string> sentences, const Vocab& vocab,
                          std::size_t max_len);

// Token embeddings -> inverted dropout (train only) -> optional tanh
// feed-forward -> masked mean pooling.
struct EncoderParams {
  Matrix embedding;   // |V| x d
  bool feedforward = true;
  Matrix ff_weight;   // d x d, out x in
  Matrix ff_bias;     // 1 x d
  double dropout = 0.1;
  std::size_t max_len = 64;

  std::size_t vocab_size() const { return embedding.rows(); }
  std::size_t dim() const { return embedding.cols(); }
};

struct EncoderInit {
  std::size_t vocab_size = 0;
  std::size_t dim = 32;
  bool feedforward = true;
  double dropout = 0.1;
  std::size_t max_len = 64;
  double embedding_scale = 1.0;  // std of the N(0, s^2) embedding init
};

EncoderParams init_encoder(const EncoderInit& init, RngStream& rng);
// Throws on a violated invariant (d < 2, dropout outside [0,1), bad shapes,
// non-finite values).
void validate(const EncoderParams& params);

// Everything encoder_backward needs. Per-token buffers are flattened over the
// real tokens of the batch in row order.
struct EncoderContext {
  TokenBatch batch;
  std::vector<std::size_t> offsets;  // first flattened token of each row
  std::vector<double> keep;          // dropout multiplier (0 or 1/(1-p)) per token and dim
  std::vector<double> inputs;        // embedding after dropout
  std::vector<double> hidden;        // after the feed-forward (== inputs without it)
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  bool feedforward = false;
  double dropout = 0.0;
};

struct Encoded {
  Matrix pooled;  // B x d
  EncoderContext context;
};

// Train mode draws dropout masks from `rng` (only for real tokens, row by
// row); eval mode leaves `rng` untouched and is deterministic.
Encoded encode_batch(const EncoderParams& params, const TokenBatch& batch, Mode mode,
                     RngStream& rng);
// Eval-mode forward without keeping a context.
Matrix encode_eval(const EncoderParams& params, const TokenBatch& batch);

struct EncoderGrads {
  Matrix embedding;
  Matrix ff_weight;
  Matrix ff_bias;

  static EncoderGrads zeros_like(const EncoderParams& params);
  EncoderGrads& operator+=(const EncoderGrads& other);
};

EncoderGrads encoder_backward(const EncoderParams& params, const EncoderContext& context,
                              const Matrix& upstream);

}  // namespace unsee
