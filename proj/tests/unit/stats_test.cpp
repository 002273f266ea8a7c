#include "migra/error.hpp"
#include "migra/stats.hpp"

#include "../support/stats_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

using namespace migra;
using namespace migra::testing;

namespace {

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoFailure;
}

}  // namespace

TEST(PairedT, ThreeModelExample) {
  const std::vector<double> a = {0.9, 0.8, 0.6}, b = {0.5, 0.5, 0.5};
  const auto r = paired_t(a, b);
  const auto o = oracle_paired_t(a, b);
  EXPECT_NEAR(r.t, static_cast<double>(o.t), 1e-9);
  EXPECT_NEAR(r.t, 3.0237, 5e-5);
  EXPECT_EQ(r.dof, 2);
  EXPECT_EQ(o.dof, 2);
  EXPECT_NEAR(r.mean_diff, 0.8 / 3.0, 1e-12);
}

TEST(PairedT, MatchesOracleOnRandomVectors) {
  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 40);
  for (int i = 0; i < 200; ++i) {
    const int n = len(rng);
    std::vector<double> a(n), b(n);
    for (int k = 0; k < n; ++k) a[k] = score(rng), b[k] = score(rng);
    const auto r = paired_t(a, b);
    const auto o = oracle_paired_t(a, b);
    EXPECT_NEAR(r.t, static_cast<double>(o.t), 1e-9 * std::max(1.0L, std::fabs(o.t)));
    EXPECT_EQ(r.dof, o.dof);
  }
}

TEST(PairedT, AntisymmetricAndPermutationInvariant) {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 12);
  for (int i = 0; i < 100; ++i) {
    const int n = len(rng);
    std::vector<double> a(n), b(n);
    for (int k = 0; k < n; ++k) a[k] = score(rng), b[k] = score(rng);
    const auto ab = paired_t(a, b), ba = paired_t(b, a);
    EXPECT_NEAR(ab.t, -ba.t, 1e-12 * std::max(1.0, std::fabs(ab.t)));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pa(n), pb(n);
    for (int k = 0; k < n; ++k) pa[k] = a[perm[k]], pb[k] = b[perm[k]];
    EXPECT_NEAR(paired_t(pa, pb).t, ab.t, 1e-9 * std::max(1.0, std::fabs(ab.t)));
  }
}

TEST(PairedT, Errors) {
  EXPECT_EQ(error_of([] { paired_t(std::vector<double>{0.5}, std::vector<double>{0.4}); }), ErrorCode::TooFewPairs);
  EXPECT_EQ(error_of([] { paired_t(std::vector<double>{0.5, 0.6}, std::vector<double>{0.4}); }), ErrorCode::MisalignedModels);
  EXPECT_EQ(error_of([] { paired_t(std::vector<double>{0.5, 0.6, 0.7}, std::vector<double>{0.4, 0.5, 0.6}); }),
            ErrorCode::ZeroVariance);
  EXPECT_EQ(error_of([] { paired_t(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}); }), ErrorCode::ZeroVariance);
}

TEST(PairedT, AlignedByModelLabel) {
  const std::map<std::string, double> a = {{"m1", 0.9}, {"m2", 0.8}, {"m3", 0.6}};
  const std::map<std::string, double> b = {{"m3", 0.5}, {"m1", 0.5}, {"m2", 0.5}};
  EXPECT_NEAR(paired_t(a, b).t, paired_t(std::vector<double>{0.9, 0.8, 0.6}, std::vector<double>{0.5, 0.5, 0.5}).t, 1e-15);
  const std::map<std::string, double> c = {{"m1", 0.5}, {"m2", 0.5}, {"m4", 0.5}};
  EXPECT_EQ(error_of([&] { paired_t(a, c); }), ErrorCode::MisalignedModels);
  const std::map<std::string, double> d = {{"m1", 0.5}, {"m2", 0.5}, {"m3", 0.5}, {"m4", 0.1}};
  EXPECT_EQ(error_of([&] { paired_t(a, d); }), ErrorCode::MisalignedModels);
}

TEST(TCritical, TableValues) {
  EXPECT_DOUBLE_EQ(t_critical_05(2), 4.303);
  EXPECT_DOUBLE_EQ(t_critical_05(30), 2.042);
  EXPECT_DOUBLE_EQ(t_critical_05(100), 1.960);
  EXPECT_DOUBLE_EQ(t_critical_05(0), 0.0);
}

TEST(Aggregate, PerModelMeanThenUnweighted) {
  const std::vector<ScoreRecord> runs = {{"multi_agent", "m1", "r1", 1.0},   {"multi_agent", "m1", "r2", 0.5},
                                         {"multi_agent", "m1", "r3", 0.0},   {"multi_agent", "m2", "r1", 1.0},
                                         {"other", "m1", "r1", 0.25}};
  const auto agg = aggregate_scores(runs);
  ASSERT_EQ(agg.size(), 2u);
  const auto& ma = agg.at("multi_agent");
  EXPECT_DOUBLE_EQ(ma.models.at("m1").mean, 0.5);
  EXPECT_EQ(ma.models.at("m1").runs, 3u);
  EXPECT_DOUBLE_EQ(ma.total, 0.75);  // not 2.5 / 4
  ASSERT_TRUE(ma.flags);
  EXPECT_TRUE(ma.flags->planner_orchestrator);
  EXPECT_FALSE(ma.flags->client_playbook);
  EXPECT_FALSE(agg.at("other").flags);
  EXPECT_EQ(error_of([] { aggregate_scores({}); }), ErrorCode::EmptyRuns);
}

TEST(KnownConfigs, Flags) {
  EXPECT_EQ(known_config_flags("single_agent_baseline"), (ConfigFlags{false, false, false}));
  EXPECT_EQ(known_config_flags("single_agent_yt_specific"), (ConfigFlags{false, true, true}));
  EXPECT_EQ(known_config_flags("multi_agent"), (ConfigFlags{true, false, true}));
  EXPECT_EQ(known_config_flags("multi_agent_yt_specific"), (ConfigFlags{true, true, true}));
  EXPECT_FALSE(known_config_flags("custom"));
}

TEST(ScoresFile, RoundTripAndErrors) {
  const std::vector<ScoreRecord> recs = {{"c", "m", "1", 0.625}, {"c", "m", "2", 1.0}};
  EXPECT_EQ(parse_scores(serialize_scores(recs)), recs);
  for (const char* bad : {"{}", "[{\"config\":\"c\"}]", "[{\"config\":\"c\",\"model\":\"m\",\"run_id\":\"1\",\"score\":1.5}]", "x"})
    EXPECT_EQ(error_of([&] { parse_scores(bad); }), ErrorCode::MalformedDocument) << bad;
}
