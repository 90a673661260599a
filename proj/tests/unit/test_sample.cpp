#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "dtrack/error.hpp"
#include "dtrack/models.hpp"
#include "dtrack/sample.hpp"
#include "test_support.hpp"

using namespace dtrack;
using namespace dtrack::sample;
using models::Arch;
using models::Model;
using models::ModelConfig;
using repr::Representation;
using repr::Sequence;

namespace {

// Upper-tail p-value of Pearson's statistic for observed counts against
// expected probabilities.
double chi_square_p(const std::vector<long>& counts, const std::vector<double>& probs) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), 0L));
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * probs[i];
    stat += (counts[i] - e) * (counts[i] - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

std::vector<double> softmax(const std::vector<double>& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += p[i] = std::exp(x[i] - mx);
  for (auto& v : p) v /= total;
  return p;
}

template <typename Pick>
std::vector<long> histogram(std::size_t n, int draws, Pick&& pick) {
  std::vector<long> counts(n, 0);
  for (int i = 0; i < draws; ++i) ++counts[pick()];
  return counts;
}

ModelConfig tiny(Arch arch, Representation r) {
  ModelConfig c;
  c.arch = arch;
  c.generator_arch = Arch::AttnEncDec;
  c.repr = r;
  c.hidden_size = 8;
  c.embedding_size = 6;
  c.corpus_size = r == Representation::Embedding ? 12 : 0;
  c.in_len = 8;
  c.out_len = 8;
  c.mlp_hidden = 8;
  return c;
}

Sequence seed_for(const ModelConfig& c, std::mt19937_64& gen) {
  if (c.repr == Representation::Embedding) {
    std::vector<int> chords(c.in_len);
    for (auto& x : chords) x = static_cast<int>(gen() % c.corpus_size);
    return Sequence::of_chords(chords);
  }
  return Sequence::of_frames(dtrack::testing::random_roll(gen, c.in_len, 0.1).grid);
}

}  // namespace

TEST(Greedy, Examples) {
  EXPECT_EQ(greedy_pick(std::vector<double>{0.1, 2.0, -1.0}), 1u);
  EXPECT_EQ(greedy_pick(std::vector<double>{3.0, 3.0}), 0u);
}

TEST(Greedy, ShiftInvariant) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(1 + gen() % 20);
    for (auto& v : x) v = n(gen);
    const auto base = greedy_pick(x);
    for (auto& v : x) v += 17.25;
    EXPECT_EQ(greedy_pick(x), base);
  }
}

TEST(Greedy, Errors) {
  try {
    greedy_pick(std::vector<double>{});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyLogits);
  }
  EXPECT_THROW(greedy_pick(std::vector<double>{1.0, NAN}), Error);
}

TEST(TopK, KOneIsGreedy) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0, 2);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(1 + gen() % 16);
    for (auto& v : x) v = n(gen);
    EXPECT_EQ(top_k_pick(x, 1, rng), greedy_pick(x));
  }
}

TEST(TopK, FullKOnEqualLogitsIsUniform) {
  Rng rng(4);
  const std::vector<double> x(6, 0.5);
  const auto counts = histogram(6, 100000, [&] { return top_k_pick(x, 6, rng); });
  EXPECT_GT(chi_square_p(counts, std::vector<double>(6, 1.0 / 6)), 1e-3);
}

TEST(TopK, ExcludedIndexNeverPicked) {
  Rng rng(5);
  const std::vector<double> x = {5, 4, -100};
  for (int i = 0; i < 10000; ++i) EXPECT_NE(top_k_pick(x, 2, rng), 2u);
}

TEST(TopK, MatchesRenormalizedSoftmax) {
  Rng rng(6);
  const std::vector<double> x = {0.3, 2.0, -1.0, 1.1, 0.0};
  const auto counts = histogram(5, 100000, [&] { return top_k_pick(x, 3, rng); });
  EXPECT_EQ(counts[2] + counts[4], 0);
  const auto p = softmax({2.0, 1.1, 0.3});
  EXPECT_GT(chi_square_p({counts[1], counts[3], counts[0]}, p), 1e-3);
}

TEST(TopK, InvalidK) {
  Rng rng(7);
  for (std::size_t k : {0u, 4u}) {
    try {
      top_k_pick(std::vector<double>{1, 2, 3}, k, rng);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidK);
    }
  }
}

TEST(Gumbel, ZeroScaleIsGreedy) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n(0, 2);
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(1 + gen() % 16);
    for (auto& v : x) v = n(gen);
    EXPECT_EQ(gumbel_pick(x, 0.0, rng), greedy_pick(x));
  }
}

TEST(Gumbel, MatchesSoftmaxProbabilities) {
  Rng rng(10);
  const std::vector<double> x = {std::log(0.7), std::log(0.2), std::log(0.1)};
  const auto counts = histogram(3, 100000, [&] { return gumbel_pick(x, 1.0, rng); });
  EXPECT_GT(chi_square_p(counts, {0.7, 0.2, 0.1}), 1e-3);
}

TEST(Gumbel, LargeScaleApproachesUniform) {
  Rng rng(11);
  const std::vector<double> x = {std::log(0.7), std::log(0.2), std::log(0.1)};
  const auto counts = histogram(3, 100000, [&] { return gumbel_pick(x, 100.0, rng); });
  EXPECT_GT(chi_square_p(counts, std::vector<double>(3, 1.0 / 3)), 1e-3);
}

TEST(Gumbel, ShiftInvariantInDistribution) {
  const std::vector<double> x = {0.5, -0.25, 1.5, 0.0};
  std::vector<double> shifted = x;
  for (auto& v : shifted) v -= 40.0;
  // The same noise stream gives the same picks.
  Rng a(12), b(12);
  for (int i = 0; i < 5000; ++i) EXPECT_EQ(gumbel_pick(x, 1.0, a), gumbel_pick(shifted, 1.0, b));
  Rng c(13), d(13);
  for (int i = 0; i < 5000; ++i) EXPECT_EQ(top_k_pick(x, 3, c), top_k_pick(shifted, 3, d));
}

TEST(PickFrame, GreedyThresholdsAtHalf) {
  std::vector<double> logits(128, -1.0);
  logits[60] = 0.0;
  logits[64] = 2.0;
  Rng rng(14);
  const auto f = pick_frame(logits, SampleConfig{.strategy = Strategy::Greedy}, rng);
  EXPECT_EQ(std::accumulate(f.begin(), f.end(), 0), 2);
  EXPECT_EQ(f[60], 1);
  EXPECT_EQ(f[64], 1);
}

TEST(PickFrame, GumbelOnRateIsSigmoid) {
  std::vector<double> logits(128);
  for (int p = 0; p < 128; ++p) logits[p] = (p % 8) - 3.5;
  Rng rng(15);
  std::vector<long> on(8, 0);
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    const auto f = pick_frame(logits, SampleConfig{.strategy = Strategy::Gumbel}, rng);
    for (int p = 0; p < 128; ++p) on[p % 8] += f[p];
  }
  for (int j = 0; j < 8; ++j) {
    const double expect = 1.0 / (1.0 + std::exp(-(j - 3.5)));
    const double n = draws * 16.0;
    EXPECT_NEAR(on[j] / n, expect, 5 * std::sqrt(expect * (1 - expect) / n));
  }
}

TEST(PickFrame, TopKOnlyTouchesTopPitches) {
  std::vector<double> logits(128, 10.0);
  for (int p = 0; p < 128; ++p) logits[p] = p < 5 ? 50.0 : -0.01 * p;
  Rng rng(16);
  SampleConfig sc{.strategy = Strategy::TopK, .k = 3};
  for (int i = 0; i < 200; ++i) {
    const auto f = pick_frame(logits, sc, rng);
    for (int p = 3; p < 128; ++p) EXPECT_EQ(f[p], 0);
    EXPECT_EQ(f[0] + f[1] + f[2], 3);
  }
}

TEST(Generate, ZeroLengthIsEmpty) {
  std::mt19937_64 gen(17);
  const auto c = tiny(Arch::AttnEncDec, Representation::Embedding);
  const Model m = Model::build(c, 1);
  EXPECT_EQ(generate(m, seed_for(c, gen), SampleConfig{.length = 0}).output.size(), 0u);
}

TEST(Generate, LengthIsExactForEveryStrategy) {
  std::mt19937_64 gen(18);
  for (auto r : {Representation::Embedding, Representation::Pianoroll}) {
    const auto c = tiny(Arch::EncDec, r);
    const Model m = Model::build(c, 2);
    const Sequence s = seed_for(c, gen);
    for (auto st : {Strategy::Greedy, Strategy::TopK, Strategy::Gumbel}) {
      const auto g = generate(m, s, SampleConfig{.strategy = st, .length = 37, .seed = 3});
      EXPECT_EQ(g.output.size(), 37u);
      EXPECT_EQ(g.output.repr, r);
    }
  }
}

TEST(Generate, GreedyIsDeterministic) {
  std::mt19937_64 gen(19);
  const auto c = tiny(Arch::AttnEncDec, Representation::Pianoroll);
  const Model m = Model::build(c, 3);
  const Sequence s = seed_for(c, gen);
  const SampleConfig sc{.strategy = Strategy::Greedy, .length = 50, .seed = 1};
  EXPECT_EQ(generate(m, s, sc).output, generate(m, s, sc).output);
  EXPECT_EQ(generate(m, s, sc).output, generate(m, s, SampleConfig{.strategy = Strategy::Greedy, .length = 50, .seed = 99}).output);
}

TEST(Generate, GumbelSeedsDiffer) {
  std::mt19937_64 gen(20);
  const auto c = tiny(Arch::AttnEncDec, Representation::Embedding);
  const Model m = Model::build(c, 4);
  const Sequence s = seed_for(c, gen);
  bool differ = false;
  for (std::uint64_t attempt = 0; attempt < 3 && !differ; ++attempt) {
    const auto a = generate(m, s, SampleConfig{.length = 40, .seed = 100 + attempt});
    const auto b = generate(m, s, SampleConfig{.length = 40, .seed = 200 + attempt});
    differ = !(a.output == b.output);
  }
  EXPECT_TRUE(differ);
}

TEST(Generate, RestRunSaturates) {
  std::mt19937_64 gen(21);
  const auto c = tiny(Arch::EncDec, Representation::Pianoroll);
  Model m = Model::build(c, 5);
  m.generator_params()["head.W"].fill(0.0);
  m.generator_params()["head.b"].fill(-50.0);
  const auto g = generate(m, seed_for(c, gen), SampleConfig{.strategy = Strategy::Greedy, .length = 288});
  EXPECT_TRUE(g.saturated);
  EXPECT_EQ(g.saturated_at, 143u);
  EXPECT_EQ(g.output.size(), 288u);
  const auto off = generate(m, seed_for(c, gen),
                            SampleConfig{.strategy = Strategy::Greedy, .length = 288, .rest_cutoff = 0});
  EXPECT_FALSE(off.saturated);
}

TEST(Generate, ConfigValidation) {
  EXPECT_THROW(validate(SampleConfig{.k = 0}), Error);
  EXPECT_THROW(validate(SampleConfig{.gumbel_scale = -1.0}), Error);
  EXPECT_THROW(validate(SampleConfig{.pianoroll_threshold = 1.0}), Error);
  EXPECT_EQ(strategy_from_string(to_string(Strategy::TopK)), Strategy::TopK);
}

TEST(DualTrackGenerate, MergedIsExactOr) {
  std::mt19937_64 gen(22);
  const auto c = tiny(Arch::DualTrack, Representation::Pianoroll);
  const Model m = Model::build(c, 6);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto out = dual_track_generate(m, seed_for(c, gen), SampleConfig{.length = 72, .seed = seed});
    ASSERT_EQ(out.merged.length(), 72u);
    for (std::size_t t = 0; t < 72; ++t) {
      int right = 0, merged = 0;
      for (int p = 0; p < 128; ++p) {
        EXPECT_EQ(out.merged.grid[t][p], out.right.grid[t][p] | out.left.grid[t][p]);
        right += out.right.grid[t][p];
        merged += out.merged.grid[t][p];
      }
      EXPECT_GE(merged, right);
    }
  }
}

TEST(DualTrackGenerate, LeftDependsOnlyOnRight) {
  std::mt19937_64 gen(23);
  const auto c = tiny(Arch::DualTrack, Representation::Pianoroll);
  const Model m = Model::build(c, 7);
  const auto out = dual_track_generate(m, seed_for(c, gen), SampleConfig{.length = 30, .seed = 1});
  Rng unrelated(999);
  for (int i = 0; i < 100; ++i) unrelated.gumbel();
  EXPECT_EQ(left_hand_for(m, out.right), out.left);
}

TEST(DualTrackGenerate, RequiresDualTrackModel) {
  std::mt19937_64 gen(24);
  const auto c = tiny(Arch::EncDec, Representation::Pianoroll);
  EXPECT_THROW(dual_track_generate(Model::build(c, 1), seed_for(c, gen), SampleConfig{}), Error);
}

TEST(Gumbel, SoftmaxEquivalenceAcrossVocabSizes) {
  std::mt19937_64 gen(25);
  std::normal_distribution<double> n(0, 1.5);
  Rng rng(26);
  for (std::size_t v = 2; v <= 8; ++v) {
    std::vector<double> x(v);
    for (auto& e : x) e = n(gen);
    const auto counts = histogram(v, 100000, [&] { return gumbel_pick(x, 1.0, rng); });
    EXPECT_GT(chi_square_p(counts, softmax(x)), 1e-3) << "vocab " << v;
  }
}
