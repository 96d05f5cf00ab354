#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ttsrl/core_types.hpp"
#include "ttsrl/errors.hpp"
#include "ttsrl/rng.hpp"

using namespace ttsrl;

namespace {

// Independent oracle: textbook mean / population-std normalization.
std::vector<double> normalize_oracle(const std::vector<double>& r) {
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= static_cast<double>(r.size());
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean);
  var /= static_cast<double>(r.size());
  const double denom = std::max(std::sqrt(var), kAdvantageStdFloor);
  std::vector<double> out;
  for (double x : r) out.push_back((x - mean) / denom);
  return out;
}

}  // namespace

TEST_CASE("group advantages: worked examples") {
  SUBCASE("alternating binary rewards") {
    // mean 0.5, population std 0.5
    auto adv = normalize_group_advantages({1.0, 0.0, 1.0, 0.0});
    const std::vector<double> expected = {1.0, -1.0, 1.0, -1.0};
    for (size_t i = 0; i < adv.size(); ++i) CHECK(adv[i] == doctest::Approx(expected[i]).epsilon(1e-9));
    auto oracle = normalize_oracle({1.0, 0.0, 1.0, 0.0});
    for (size_t i = 0; i < adv.size(); ++i) CHECK(adv[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
  SUBCASE("constant rewards map to zero") {
    for (double c : {0.0, -3.5, 42.0}) {
      auto adv = normalize_group_advantages({c, c, c});
      for (double a : adv) CHECK(a == 0.0);
    }
  }
  SUBCASE("two-member group") {
    // mean 2, population std 1
    auto adv = normalize_group_advantages({3.0, 1.0});
    CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(adv[1] == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("group advantages: errors") {
  CHECK_THROWS_AS(normalize_group_advantages({}), InvalidGroupError);
  CHECK_THROWS_AS(normalize_group_advantages({1.0}), InvalidGroupError);
}

TEST_CASE("group advantages: zero mean and unit std on random groups") {
  Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t g = 2 + rng.next_below(15);
    std::vector<double> rewards(g);
    for (double& r : rewards) r = 10.0 * (rng.next_double() - 0.5);
    auto adv = normalize_group_advantages(rewards);

    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(g);
    CHECK(std::abs(mean) < 1e-9);

    double var = 0.0;
    for (double r : rewards) {
      double m = 0.0;
      for (double x : rewards) m += x;
      m /= static_cast<double>(g);
      var += (r - m) * (r - m);
    }
    var /= static_cast<double>(g);
    if (var > 1e-12) {
      double adv_var = 0.0;
      for (double a : adv) adv_var += (a - mean) * (a - mean);
      adv_var /= static_cast<double>(g);
      CHECK(std::abs(std::sqrt(adv_var) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("group advantages: shift invariance is exact on integer groups") {
  // Integer rewards with a group-sum divisible by G keep the arithmetic
  // exact, so the invariance can be asserted bitwise.
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t g = 2 + rng.next_below(15);
    std::vector<double> rewards(g);
    long long sum = 0;
    for (size_t i = 0; i + 1 < g; ++i) {
      const long long v = static_cast<long long>(rng.next_below(2001)) - 1000;
      rewards[i] = static_cast<double>(v);
      sum += v;
    }
    const long long remainder = ((sum % static_cast<long long>(g)) + g) % g;
    rewards[g - 1] = static_cast<double>(remainder == 0 ? 0 : static_cast<long long>(g) - remainder);

    const double shift = static_cast<double>(static_cast<long long>(rng.next_below(201)) - 100);
    std::vector<double> shifted = rewards;
    for (double& r : shifted) r += shift;

    const auto a = normalize_group_advantages(rewards);
    const auto b = normalize_group_advantages(shifted);
    for (size_t i = 0; i < g; ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("group advantages: positive scaling leaves output unchanged") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t g = 2 + rng.next_below(15);
    std::vector<double> rewards(g);
    for (double& r : rewards) r = 20.0 * (rng.next_double() - 0.5);
    // Keep the guard inactive.
    rewards[0] += 1.0;

    const double k = std::exp2(static_cast<double>(rng.next_below(7)) - 3.0);  // power of two
    std::vector<double> scaled = rewards;
    for (double& r : scaled) r *= k;

    const auto a = normalize_group_advantages(rewards);
    const auto b = normalize_group_advantages(scaled);
    for (size_t i = 0; i < g; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("aggregate reward: worked examples") {
  RewardConfig cfg;  // alpha_intl = alpha_sim = alpha_ent = alpha_pro = 1, alpha_len = 0.1
  SUBCASE("perfect components") {
    RewardBreakdown bd{1.0, 1.0, 1.0, 0.0, 1.0, 0.0};
    CHECK(aggregate_reward(bd, cfg) == doctest::Approx(3.1).epsilon(1e-12));
  }
  SUBCASE("all zero") {
    CHECK(aggregate_reward({}, cfg) == 0.0);
  }
  SUBCASE("mixed components") {
    RewardBreakdown bd{0.6, 0.5, 0.0, -0.2, 0.0, 0.0};
    CHECK(aggregate_reward(bd, cfg) == doctest::Approx(0.9).epsilon(1e-12));
  }
}

TEST_CASE("aggregate reward: linear in each component") {
  Rng rng(31);
  RewardConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    RewardBreakdown bd;
    bd.r_intl = rng.next_double();
    bd.r_sim = rng.next_double();
    bd.r_len = rng.next_double();
    bd.r_ent = -rng.next_double();
    bd.r_pro = rng.next_double();
    const double base = aggregate_reward(bd, cfg);
    const double delta = rng.next_double();

    RewardBreakdown bumped = bd;
    bumped.r_sim += delta;
    CHECK(aggregate_reward(bumped, cfg) ==
          doctest::Approx(base + cfg.alpha_sim * delta).epsilon(1e-12));

    bumped = bd;
    bumped.r_len += delta;
    CHECK(aggregate_reward(bumped, cfg) ==
          doctest::Approx(base + cfg.alpha_len * delta).epsilon(1e-12));
  }
}

TEST_CASE("aggregate reward: non-finite component is named") {
  RewardConfig cfg;
  RewardBreakdown bd;
  bd.r_len = std::numeric_limits<double>::infinity();
  try {
    aggregate_reward(bd, cfg);
    FAIL("expected RewardError");
  } catch (const RewardError& e) {
    CHECK(e.component == "r_len");
  }
}

TEST_CASE("vocab: construction and invariants") {
  Alphabet alphabet;
  Vocab v = make_vocab(alphabet);
  CHECK(v.size == 7 + alphabet.n_symbols);
  CHECK(v.is_pause(v.pause_token(1)));
  CHECK(v.pause_level(v.pause_token(4)) == 4);
  CHECK(v.is_grapheme(v.symbol_token(0)));
  CHECK(v.grapheme_symbol(v.symbol_token(alphabet.n_symbols - 1)) == alphabet.n_symbols - 1);

  Vocab bad = v;
  bad.eos = bad.bos;
  CHECK_THROWS_AS(validate_vocab(bad), ConfigError);
  bad = v;
  bad.pad = bad.pause_begin;  // overlaps pause range
  CHECK_THROWS_AS(validate_vocab(bad), ConfigError);
  bad = v;
  bad.size = bad.grapheme_begin;  // graphemes out of bounds
  CHECK_THROWS_AS(validate_vocab(bad), ConfigError);
}

TEST_CASE("trajectory validation") {
  Vocab v = make_vocab(Alphabet{});
  Trajectory traj;
  traj.prompt.symbols = {0, 1};
  CHECK_THROWS_AS(validate_trajectory(traj, v), InvalidTrajectoryError);

  traj.actions = {v.symbol_token(0)};
  traj.step_logprobs = {-0.5};
  traj.step_entropies = {0.3};
  CHECK_NOTHROW(validate_trajectory(traj, v));

  traj.step_entropies = {std::log(static_cast<double>(v.size)) + 0.5};
  CHECK_THROWS_AS(validate_trajectory(traj, v), InvalidTrajectoryError);

  traj.step_entropies = {0.3, 0.3};
  CHECK_THROWS_AS(validate_trajectory(traj, v), InvalidTrajectoryError);
}
