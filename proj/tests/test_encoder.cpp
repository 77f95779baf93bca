#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <map>
#include <set>

#include "unsee/cli/synthetic.hpp"
#include "unsee/encoder/encoder.hpp"
#include "unsee/encoder/vocab.hpp"
#include "unsee/numerics/stats.hpp"

using namespace unsee;
using unsee::test::kind_of;
using unsee::test::random_matrix;

namespace {

EncoderParams small_encoder(std::size_t vocab, std::size_t dim, bool ff, double dropout,
                            std::uint64_t seed = 3) {
  RngStream rng(seed, "init");
  return init_encoder({vocab, dim, ff, dropout, 6, 1.0}, rng);
}

TokenBatch batch_of(std::vector<std::vector<TokenId>> rows, std::size_t max_len) {
  std::vector<TokenRow> out;
  for (auto& ids : rows) {
    TokenRow r;
    r.ids.assign(max_len, Vocab::kPad);
    r.mask.assign(max_len, 0);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      r.ids[t] = ids[t];
      r.mask[t] = 1;
    }
    out.push_back(std::move(r));
  }
  return make_batch(out);
}

double inner(const Matrix& a, const Matrix& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

}  // namespace

TEST_CASE("build_vocab") {
  SUBCASE("frequency order") {
    const std::vector<std::string> corpus{"a b", "a"};
    const Vocab v = Vocab::build(corpus, 1);
    CHECK(v.size() == 4);
    CHECK(v.id("a") == Vocab::kFirstToken);
    CHECK(v.id("b") == Vocab::kFirstToken + 1);
  }
  SUBCASE("min_count threshold") {
    const std::vector<std::string> corpus{"a b"};
    const Vocab v = Vocab::build(corpus, 2);
    CHECK(v.size() == 2);
    CHECK(v.id("a") == Vocab::kUnk);
    CHECK(v.id("b") == Vocab::kUnk);
  }
  SUBCASE("ties break lexicographically") {
    const std::vector<std::string> corpus{"zeta alpha mid"};
    const Vocab v = Vocab::build(corpus, 1);
    CHECK(v.token(2) == "alpha");
    CHECK(v.token(3) == "mid");
    CHECK(v.token(4) == "zeta");
  }
  SUBCASE("synthetic corpus size matches a frequency count") {
    SyntheticSpec spec;
    spec.n_sentences = 100;
    const auto corpus = generate_corpus(spec).sentences;
    for (std::size_t min_count : {1u, 2u, 5u}) {
      std::map<std::string, std::size_t> freq;
      for (const auto& s : corpus) {
        std::size_t start = 0;
        while (start < s.size()) {
          const auto end = std::min(s.find(' ', start), s.size());
          ++freq[s.substr(start, end - start)];
          start = end + 1;
        }
      }
      std::size_t kept = 0;
      for (const auto& [tok, n] : freq) kept += n >= min_count;
      CHECK(Vocab::build(corpus, min_count).size() == kept + 2);
    }
  }
  SUBCASE("reserved entries never collide") {
    const std::vector<std::string> corpus{"<pad> <unk> x"};
    const Vocab v = Vocab::build(corpus, 1);
    CHECK(v.id("<pad>") != Vocab::kPad);
    std::set<TokenId> ids{v.id("<pad>"), v.id("<unk>"), v.id("x")};
    CHECK(ids.size() == 3);
    CHECK(*ids.begin() >= Vocab::kFirstToken);
  }
  CHECK(kind_of([] { Vocab::build(std::vector<std::string>{}, 1); }) == ErrorKind::EmptyInput);
}

TEST_CASE("vocab file round trip") {
  test::TempDir dir("vocab");
  const std::vector<std::string> corpus{"the cat sat", "the dog"};
  const Vocab v = Vocab::build(corpus, 1);
  v.save(dir / "vocab.txt");
  const Vocab back = Vocab::load(dir / "vocab.txt");
  CHECK(back.size() == v.size());
  CHECK(back.hash() == v.hash());
  for (TokenId id = Vocab::kFirstToken; id < v.size(); ++id) CHECK(back.token(id) == v.token(id));
  CHECK(kind_of([&] { Vocab::load(dir / "missing.txt"); }) == ErrorKind::Io);
}

TEST_CASE("tokenize") {
  const std::vector<std::string> corpus{"hello world"};
  const Vocab v = Vocab::build(corpus, 1);
  const TokenRow r = tokenize("Hello WORLD", v, 4);
  CHECK(r.ids == std::vector<TokenId>{v.id("hello"), v.id("world"), Vocab::kPad, Vocab::kPad});
  CHECK(r.mask == std::vector<std::uint8_t>{1, 1, 0, 0});

  std::string long_sentence;
  for (int i = 0; i < 100; ++i) long_sentence += "hello ";
  const TokenRow trunc = tokenize(long_sentence, v, 64);
  CHECK(trunc.ids.size() == 64);
  CHECK(trunc.length() == 64);

  const TokenRow unk = tokenize("mystery", v, 3);
  CHECK(unk.ids[0] == Vocab::kUnk);
  CHECK(unk.mask[0] == 1);

  CHECK(kind_of([&] { tokenize("   \t ", v, 3); }) == ErrorKind::EmptyInput);
}

TEST_CASE("make_batch enforces the prefix mask") {
  TokenRow bad;
  bad.ids = {2, 0, 3};
  bad.mask = {1, 0, 1};
  CHECK(kind_of([&] { make_batch(std::vector<TokenRow>{bad}); }) == ErrorKind::InvalidArgument);
  TokenRow empty;
  empty.ids = {0, 0};
  empty.mask = {0, 0};
  CHECK(kind_of([&] { make_batch(std::vector<TokenRow>{empty}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("encode_batch") {
  SUBCASE("eval, one token, no feed-forward: pooling identity") {
    const EncoderParams p = small_encoder(6, 4, false, 0.1);
    const Matrix e = encode_eval(p, batch_of({{4}}, 3));
    for (std::size_t c = 0; c < 4; ++c) CHECK(e(0, c) == p.embedding(4, c));
  }
  SUBCASE("train with p = 0 equals eval") {
    const EncoderParams p = small_encoder(6, 4, true, 0.0);
    const TokenBatch b = batch_of({{2, 3, 4}, {5}}, 4);
    RngStream rng(1, "dropout-view-1");
    CHECK(encode_batch(p, b, Mode::Train, rng).pooled == encode_eval(p, b));
  }
  SUBCASE("two dropout views differ") {
    const EncoderParams p = small_encoder(6, 4, true, 0.1);
    const TokenBatch b = batch_of({{2, 3, 4, 5}, {5, 2, 3}}, 6);
    RngStream r1(9, "dropout-view-1"), r2(9, "dropout-view-2");
    const Matrix a = encode_batch(p, b, Mode::Train, r1).pooled;
    const Matrix c = encode_batch(p, b, Mode::Train, r2).pooled;
    CHECK(max_abs_diff(a, c) > 0.0);
  }
  SUBCASE("train mode reproducible from the same stream") {
    const EncoderParams p = small_encoder(6, 4, true, 0.3);
    const TokenBatch b = batch_of({{2, 3, 4, 5}, {5, 2, 3}}, 6);
    RngStream r1(9, "dropout-view-1"), r2(9, "dropout-view-1");
    CHECK(encode_batch(p, b, Mode::Train, r1).pooled == encode_batch(p, b, Mode::Train, r2).pooled);
    CHECK(r1 == r2);
  }
  SUBCASE("eval leaves the stream untouched and is pure") {
    const EncoderParams p = small_encoder(6, 4, true, 0.3);
    const TokenBatch b = batch_of({{2, 3}, {4}}, 3);
    RngStream r(1, "x");
    const RngStream before = r;
    const Matrix e1 = encode_batch(p, b, Mode::Eval, r).pooled;
    CHECK(r == before);
    CHECK(e1 == encode_eval(p, b));
  }
  SUBCASE("padding invariance") {
    const EncoderParams p = small_encoder(6, 4, true, 0.0);
    EncoderParams wide = p;
    wide.max_len = 12;
    CHECK(encode_eval(p, batch_of({{2, 3, 4}, {5}}, 4)) ==
          encode_eval(wide, batch_of({{2, 3, 4}, {5}}, 12)));
  }
  SUBCASE("id out of range") {
    const EncoderParams p = small_encoder(6, 4, true, 0.0);
    CHECK(kind_of([&] { encode_eval(p, batch_of({{6}}, 2)); }) == ErrorKind::OutOfRange);
  }
}

TEST_CASE("encoder_backward") {
  SUBCASE("zero upstream gives zero gradients") {
    const EncoderParams p = small_encoder(6, 3, true, 0.2);
    RngStream r(1, "d");
    const Encoded enc = encode_batch(p, batch_of({{2, 3}, {4}}, 3), Mode::Train, r);
    const EncoderGrads g = encoder_backward(p, enc.context, Matrix(2, 3));
    CHECK(max_abs(g.embedding) == 0.0);
    CHECK(max_abs(g.ff_weight) == 0.0);
    CHECK(max_abs(g.ff_bias) == 0.0);
  }
  SUBCASE("sum of pooled outputs, one token, p = 0") {
    const EncoderParams p = small_encoder(6, 3, false, 0.0);
    RngStream r(1, "d");
    const Encoded enc = encode_batch(p, batch_of({{4}}, 2), Mode::Train, r);
    const EncoderGrads g = encoder_backward(p, enc.context, Matrix::filled(1, 3, 1.0));
    for (std::size_t c = 0; c < 3; ++c) CHECK(g.embedding(4, c) == 1.0);
    for (TokenId t : {0u, 1u, 2u, 3u, 5u})
      for (std::size_t c = 0; c < 3; ++c) CHECK(g.embedding(t, c) == 0.0);
  }
  SUBCASE("finite differences on every tensor") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const bool ff = seed % 2 == 0;
      const std::size_t dim = 2 + seed % 7;
      const EncoderParams p = small_encoder(20, dim, ff, 0.25, seed);
      const TokenBatch b = batch_of({{2, 3, 19}, {7}, {11, 12, 13, 14, 2, 2}, {5, 6}}, 6);
      const Matrix up = random_matrix(4, dim, seed + 50);
      auto f_of = [&](auto member) {
        return [&, member](const Matrix& x) {
          EncoderParams q = p;
          q.*member = x;
          RngStream r(seed, "dropout-view-1");
          return inner(encode_batch(q, b, Mode::Train, r).pooled, up);
        };
      };
      RngStream r(seed, "dropout-view-1");
      const Encoded enc = encode_batch(p, b, Mode::Train, r);
      const EncoderGrads g = encoder_backward(p, enc.context, up);
      CHECK(gradient_relative_error(g.embedding,
                                    finite_diff_grad(f_of(&EncoderParams::embedding), p.embedding, 1e-5)) < 1e-4);
      if (ff) {
        CHECK(gradient_relative_error(g.ff_weight, finite_diff_grad(f_of(&EncoderParams::ff_weight),
                                                                    p.ff_weight, 1e-5)) < 1e-4);
        CHECK(gradient_relative_error(g.ff_bias, finite_diff_grad(f_of(&EncoderParams::ff_bias),
                                                                  p.ff_bias, 1e-5)) < 1e-4);
      }
    }
  }
  SUBCASE("context from other params is rejected") {
    const EncoderParams p = small_encoder(6, 3, true, 0.2);
    const EncoderParams other = small_encoder(7, 3, true, 0.2);
    RngStream r(1, "d");
    const Encoded enc = encode_batch(p, batch_of({{2, 3}, {4}}, 3), Mode::Train, r);
    CHECK(kind_of([&] { encoder_backward(other, enc.context, Matrix(2, 3)); }) ==
          ErrorKind::ShapeMismatch);
  }
}

TEST_CASE("encoder parameter validation") {
  EncoderParams p = small_encoder(6, 3, true, 0.1);
  p.dropout = 1.0;
  CHECK(kind_of([&] { validate(p); }) == ErrorKind::InvalidArgument);
  RngStream rng(0, "init");
  CHECK(kind_of([&] { init_encoder({6, 1, true, 0.1, 4, 1.0}, rng); }) == ErrorKind::InvalidArgument);
}
