#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "hgp/decoder.hpp"
#include "hgp/error.hpp"
#include "hgp/ops.hpp"
#include "test_util.hpp"

using namespace hgp;
using hgp::testing::random_tensor;

namespace {

const std::string kSymbols = "0123456789K+";

Tensor& param(PermDecoder& dec, const std::string& name) {
  static ParamList params;
  params.clear();
  dec.collect(params, "dec");
  for (auto& p : params) {
    if (p.name == "dec." + name) return p.tensor;
  }
  FAIL("no parameter " << name);
  return params.front().tensor;
}

void fill(Tensor& t, Real v) { std::fill(t.mutable_data().begin(), t.mutable_data().end(), v); }

// Every output row depends on its position query alone.
void silence_context_and_image(PermDecoder& dec) {
  for (const char* n : {"layer0.self_attn.out.weight", "layer0.self_attn.out.bias",
                        "layer0.cross_attn.out.weight", "layer0.cross_attn.out.bias",
                        "layer0.mlp.fc2.weight", "layer0.mlp.fc2.bias"}) {
    fill(param(dec, n), 0.0);
  }
}

// Brute-force mask: walk the generation order and record what each output
// position may see at the moment it is generated.
AttentionMask enumerate_mask(const Permutation& perm) {
  const std::size_t t = perm.size();
  AttentionMask m(t + 1, t + 1);
  std::vector<std::size_t> generated;
  for (std::size_t step = 0; step <= t; ++step) {
    const std::size_t row = step < t ? perm[step] : t;
    m.set(row, 0, true);
    for (std::size_t g : generated) m.set(row, g + 1, true);
    if (step < t) generated.push_back(perm[step]);
  }
  return m;
}

DecoderConfig small_config(std::size_t t) { return DecoderConfig{32, 1, t, 64, 1}; }

std::vector<int> random_context(std::size_t t, std::mt19937_64& rng, const Charset& cs) {
  std::vector<int> ctx(t + 1);
  ctx[0] = cs.bos();
  for (std::size_t i = 1; i <= t; ++i) ctx[i] = static_cast<int>(rng() % cs.size());
  return ctx;
}

}  // namespace

TEST_CASE("charset layout") {
  const Charset cs(kSymbols);
  CHECK(cs.size() == 12);
  CHECK(cs.eos() == 12);
  CHECK(cs.bos() == 13);
  CHECK(cs.pad() == 14);
  CHECK(cs.num_classes() == 13);
  CHECK(cs.vocab_size() == 15);
  CHECK(cs.id('K') == 10);
  CHECK(cs.symbol(11) == '+');
  CHECK_THROWS_AS(Charset("00"), ConfigError);
  CHECK_THROWS_AS(cs.id('x'), VocabularyError);
}

TEST_CASE("encode_label examples") {
  const Charset cs(kSymbols);
  const EncodedLabel e = encode_label("156", cs, 5);
  const int B = cs.bos(), P = cs.pad(), E = cs.eos();
  CHECK(e.context == std::vector<int>{B, 1, 5, 6, P, P});
  CHECK(e.targets == std::vector<int>{1, 5, 6, E, P, P});
  CHECK(e.length == 3);
  CHECK_THROWS_AS(encode_label("", cs, 5), LengthError);
  CHECK_THROWS_AS(encode_label("123456", cs, 5), LengthError);
  CHECK_THROWS_AS(encode_label("1a", cs, 5), VocabularyError);
}

TEST_CASE("encode then decode is the identity on valid strings") {
  const Charset cs(kSymbols);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s(1 + rng() % 10, '0');
    for (auto& c : s) c = kSymbols[rng() % kSymbols.size()];
    const EncodedLabel e = encode_label(s, cs, 10);
    CHECK(decode_ids(e.targets, cs) == s);
    CHECK(decode_ids(std::span<const int>(e.context).subspan(1), cs) == s);
  }
}

TEST_CASE("permutation sampling") {
  const PermutationSet one = sample_permutations(5, 1, 3);
  REQUIRE(one.perms.size() == 1);
  CHECK(one.perms[0] == Permutation{0, 1, 2, 3, 4});

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PermutationSet s = sample_permutations(3, 6, seed);
    REQUIRE(s.perms.size() == 6);
    std::set<Permutation> distinct(s.perms.begin(), s.perms.end());
    CHECK(distinct.size() == 6);
    for (const auto& p : s.perms) {
      Permutation sorted = p;
      std::sort(sorted.begin(), sorted.end());
      CHECK(sorted == Permutation{0, 1, 2});
    }
    CHECK(s.perms[0] == Permutation{0, 1, 2});
    for (std::size_t i = 0; i + 1 < 6; i += 2) {
      CHECK(s.perms[i + 1] == Permutation(s.perms[i].rbegin(), s.perms[i].rend()));
    }
  }
  CHECK(sample_permutations(10, 6, 42).perms == sample_permutations(10, 6, 42).perms);
  CHECK_THROWS_AS(sample_permutations(3, 7, 1), ConfigError);
  CHECK_THROWS_AS(sample_permutations(3, 0, 1), ConfigError);
}

TEST_CASE("perm_to_mask matches brute-force enumeration") {
  const AttentionMask m = perm_to_mask({2, 0, 1}, 3);
  CHECK(m == enumerate_mask({2, 0, 1}));
  // Rows are output positions, columns are [B] then label positions 0..2.
  const bool want[4][4] = {{1, 0, 0, 1}, {1, 1, 0, 1}, {1, 0, 0, 0}, {1, 1, 1, 1}};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(m.allowed(r, c) == want[r][c]);
  }

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    Permutation p(1 + rng() % 9);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    const AttentionMask mm = perm_to_mask(p, p.size());
    CHECK(mm == enumerate_mask(p));
    for (std::size_t r = 0; r < mm.rows(); ++r) CHECK(mm.allowed(r, 0));
  }
  CHECK(perm_to_mask({0, 1, 2, 3}, 4) == AttentionMask::causal(4));
  CHECK_THROWS_AS(perm_to_mask({0, 0, 1}, 3), ValidationError);
  CHECK_THROWS_AS(perm_to_mask({0, 1}, 3), ValidationError);
}

TEST_CASE("decoder output shape") {
  const Charset cs(kSymbols);
  std::mt19937_64 rng(3);
  for (std::size_t t : {1, 4, 10}) {
    Rng prng(t);
    const PermDecoder dec(small_config(t), cs, prng);
    const Tensor z = random_tensor({8, 32}, rng);
    const auto ctx = random_context(t, rng, cs);
    CHECK(dec.forward(z, ctx, AttentionMask::causal(t)).shape() == Shape{t + 1, 13});
    const PermutationSet set = sample_permutations(t, std::min<std::size_t>(t == 1 ? 1 : 2, t), 1);
    CHECK(dec.forward(z, ctx, AttentionMask::stack(set.masks)).shape() == Shape{set.masks.size() * (t + 1), 13});
  }
  Rng prng(0);
  CHECK_THROWS_AS(PermDecoder(DecoderConfig{30, 4, 4, 64, 1}, cs, prng), ConfigError);
}

TEST_CASE("identity permutation reproduces the causal decoder bitwise") {
  const Charset cs(kSymbols);
  Rng prng(4);
  const PermDecoder dec(small_config(6), cs, prng);
  std::mt19937_64 rng(4);
  const Tensor z = random_tensor({8, 32}, rng);
  const EncodedLabel e = encode_label("K12+3", cs, 6);
  const Tensor a = dec.forward(z, e.context, sample_permutations(6, 1, 0).masks[0]);
  const Tensor b = dec.forward(z, e.context, AttentionMask::causal(6));
  CHECK(testing::exactly_equal(a, b));
  std::vector<std::uint8_t> include(e.targets.size());
  for (std::size_t i = 0; i < include.size(); ++i) include[i] = e.targets[i] != cs.pad();
  CHECK(ops::cross_entropy(a, e.targets, include).item() == ops::cross_entropy(b, e.targets, include).item());
}

TEST_CASE("later-generated context never reaches earlier outputs") {
  const Charset cs(kSymbols);
  const std::size_t t = 6;
  Rng prng(5);
  const PermDecoder dec(small_config(t), cs, prng);
  std::mt19937_64 rng(5);
  const Tensor z = random_tensor({8, 32}, rng);
  const PermutationSet set = sample_permutations(t, 6, 11);
  const AttentionMask stacked = AttentionMask::stack(set.masks);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = rng() % set.perms.size();
    const Permutation& perm = set.perms[k];
    const std::size_t i = rng() % t;
    const auto ctx = random_context(t, rng, cs);
    auto poked = ctx;
    for (std::size_t j = i; j < t; ++j) poked[perm[j] + 1] = static_cast<int>((ctx[perm[j] + 1] + 1 + rng() % 11) % 12);
    const Tensor a = dec.forward(z, ctx, stacked), b = dec.forward(z, poked, stacked);
    const std::size_t base = k * (t + 1);
    for (std::size_t j = 0; j <= i; ++j) {
      for (std::size_t c = 0; c < 13; ++c) {
        CHECK(a.at(base + perm[j], c) == b.at(base + perm[j], c));
      }
    }
    // The final row sees everything, so the perturbation must show up there.
    CHECK_FALSE(a.at(base + t, 0) == b.at(base + t, 0));
  }
}

TEST_CASE("pad columns are blocked") {
  const Charset cs(kSymbols);
  Rng prng(6);
  const PermDecoder dec(small_config(4), cs, prng);
  std::mt19937_64 rng(6);
  const Tensor z = random_tensor({5, 32}, rng);
  const EncodedLabel e = encode_label("12", cs, 4);
  const AttentionMask full(5, 5, true);
  const Tensor a = dec.forward(z, e.context, full);
  AttentionMask explicit_mask = full;
  for (std::size_t r = 0; r < 5; ++r) {
    explicit_mask.set(r, 3, false);
    explicit_mask.set(r, 4, false);
  }
  CHECK(testing::exactly_equal(a, dec.forward(z, e.context, explicit_mask)));
}

TEST_CASE("mean loss over permutations ignores their order") {
  const Charset cs(kSymbols);
  const std::size_t t = 5;
  Rng prng(7);
  const PermDecoder dec(small_config(t), cs, prng);
  std::mt19937_64 rng(7);
  const Tensor z = random_tensor({6, 32}, rng);
  const EncodedLabel e = encode_label("9K+0", cs, t);
  PermutationSet set = sample_permutations(t, 6, 3);
  const auto loss = [&](const std::vector<AttentionMask>& masks) {
    std::vector<int> targets;
    std::vector<std::uint8_t> include;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      for (int id : e.targets) {
        targets.push_back(id);
        include.push_back(id != cs.pad());
      }
    }
    return ops::cross_entropy(dec.forward(z, e.context, AttentionMask::stack(masks)), targets, include).item();
  };
  const Real base = loss(set.masks);
  std::reverse(set.masks.begin(), set.masks.end());
  CHECK(loss(set.masks) == doctest::Approx(base).epsilon(1e-14));
  std::shuffle(set.masks.begin(), set.masks.end(), rng);
  CHECK(loss(set.masks) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("greedy decoding with rigged weights") {
  const Charset cs(kSymbols);
  std::mt19937_64 rng(8);
  const Tensor z = random_tensor({4, 32}, rng);
  {
    Rng prng(8);
    PermDecoder dec(small_config(5), cs, prng);
    fill(dec.head().weight, 0.0);
    fill(dec.head().bias, 0.0);
    dec.head().bias.mutable_data()[cs.eos()] = 1.0;
    CHECK(dec.greedy_decode(z) == "");
  }
  {
    Rng prng(9);
    PermDecoder dec(small_config(5), cs, prng);
    silence_context_and_image(dec);
    Tensor& queries = param(dec, "pos_queries");
    fill(queries, 0.0);
    const int spelled[4] = {1, 5, 6, cs.eos()};
    fill(dec.head().weight, 0.0);
    fill(dec.head().bias, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      queries.mutable_data()[j * 32 + j] = 1.0;
      dec.head().weight.mutable_data()[j * cs.num_classes() + static_cast<std::size_t>(spelled[j])] = 1.0;
    }
    CHECK(dec.greedy_decode(z) == "156");
  }
  {
    Rng prng(10);
    const PermDecoder dec(small_config(3), cs, prng);
    for (int trial = 0; trial < 10; ++trial) CHECK(dec.greedy_decode(random_tensor({4, 32}, rng)).size() <= 3);
  }
}
