#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "ttc/strategies.hpp"

using namespace ttc;
using ttc::testing::make_script;

namespace {

/// Thinking length drawn from the seed; the answer is the length's parity.
MockBackend seeded_length_backend(std::size_t max_len) {
  return MockBackend([max_len](std::string_view, std::int64_t seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const std::size_t len = 1 + rng() % max_len;
    return make_script({{len, false}}, std::to_string(len % 2));
  });
}

}  // namespace

TEST_CASE("rejection sampling accepts the first short enough sample") {
  const MockBackend mock = seeded_length_backend(100);
  RejectionConfig cfg;
  cfg.token_budget = 30;
  cfg.seed = 11;
  const auto res = rejection_sample("Q", cfg, mock);
  CHECK(res.record.thinking_tokens < 30);
  CHECK(res.record.tries == res.tries);
  CHECK(res.record.seed == cfg.seed + static_cast<std::int64_t>(res.tries) - 1);
  CHECK(res.record.temperature == 1.0);
  CHECK_FALSE(res.record.answer_prefix_applied);

  // every earlier seed was rejected
  for (std::uint64_t t = 0; t + 1 < res.tries; ++t) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.seed) + t);
    CHECK(1 + rng() % 100 >= 30);
  }
}

TEST_CASE("rejection sampling budget at or above the max length accepts on try 1") {
  const MockBackend mock = seeded_length_backend(50);
  RejectionConfig cfg;
  cfg.token_budget = 51;
  CHECK(rejection_sample("Q", cfg, mock).tries == 1);
}

TEST_CASE("rejection sampling exhaustion carries the shortest run") {
  const MockBackend mock = seeded_length_backend(1000);
  RejectionConfig cfg;
  cfg.token_budget = 1;
  cfg.max_tries = 5;
  try {
    rejection_sample("Q", cfg, mock);
    FAIL("expected exhaustion");
  } catch (const RejectionExhaustedError& e) {
    CHECK(e.shortest().tries == 5);
    std::uint64_t best = 100000;
    for (int t = 0; t < 5; ++t) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(t));
      best = std::min<std::uint64_t>(best, 1 + rng() % 1000);
    }
    CHECK(e.shortest().thinking_tokens == best);
  }
}

TEST_CASE("rejection config validation") {
  RejectionConfig cfg;
  cfg.token_budget = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.token_budget = 1;
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.temperature = 1.0;
  cfg.max_tries = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("majority vote") {
  const std::vector<std::string> ballots{"\\boxed{7}", "12", " 7.", "012", "3"};
  const auto t = majority_vote(ballots);
  CHECK(t.tie_broken);
  CHECK(t.winner == "7");  // 7 and 12 tie at two; 7 came first
  CHECK(t.counts.at("12") == 2.0);

  const std::vector<std::string> clear{"1", "2", "2"};
  CHECK(majority_vote(clear).winner == "2");
  CHECK_FALSE(majority_vote(clear).tie_broken);

  const std::vector<std::string> none;
  CHECK_THROWS_AS(majority_vote(none), ValidationError);

  const auto raw = majority_vote(ballots, [](std::string_view s) { return std::string(s); });
  CHECK(raw.counts.size() == 5);
  CHECK(raw.winner == "\\boxed{7}");
  CHECK(json(t)["winner"] == "7");
}

TEST_CASE("weighted vote") {
  const std::vector<std::pair<std::string, double>> w{{"1", 0.2}, {"2", 0.5}, {"1", 0.2}};
  CHECK(weighted_vote(w).winner == "2");
  const std::vector<std::pair<std::string, double>> zeros{{"1", 0.0}, {"2", 0.0}, {"2", 0.0}};
  CHECK(weighted_vote(zeros).winner == "2");
  const std::vector<std::pair<std::string, double>> bad{{"1", -1.0}};
  CHECK_THROWS_AS(weighted_vote(bad), ValidationError);
  const std::vector<std::pair<std::string, double>> nan{{"1", std::nan("")}};
  CHECK_THROWS_AS(weighted_vote(nan), ValidationError);
}
