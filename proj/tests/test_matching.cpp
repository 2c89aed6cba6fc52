#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mmv2v/verify.hpp"

using namespace mmv2v;

namespace {

SfInstance make(std::map<AgentId, std::vector<AgentId>> prefs, int c) {
  SfInstance inst;
  for (const auto& [a, l] : prefs) {
    inst.agents.push_back(a);
    inst.capacities[a] = c;
  }
  inst.preferences = std::move(prefs);
  return inst;
}

Matching pairs(std::initializer_list<AgentPair> ps) {
  Matching m;
  for (auto [a, b] : ps) m.add(a, b);
  return m;
}

bool in_oracle(const Matching& m, const SfInstance& inst) {
  const auto all = brute_force_oracle(inst);
  return std::find(all.begin(), all.end(), m) != all.end();
}

SfInstance three_cycle() { return make({{1, {2, 3}}, {2, {3, 1}}, {3, {1, 2}}}, 1); }

}  // namespace

TEST(PhaseOne, TwoAgents) {
  const auto p1 = sf_phase1(make({{1, {2}}, {2, {1}}}, 1));
  EXPECT_EQ(p1.bids, (std::set<AgentPair>{{1, 2}, {2, 1}}));
  EXPECT_EQ(p1.reduced.at(1), (std::vector<AgentId>{2}));
  EXPECT_EQ(p1.reduced.at(2), (std::vector<AgentId>{1}));
}

TEST(PhaseOne, ThreeAgentsDeletesWorseSuitor) {
  const auto p1 = sf_phase1(make({{1, {2, 3}}, {2, {1, 3}}, {3, {1, 2}}}, 1));
  EXPECT_EQ(p1.reduced.at(1), (std::vector<AgentId>{2}));
  EXPECT_EQ(p1.reduced.at(2), (std::vector<AgentId>{1}));
  EXPECT_TRUE(p1.reduced.at(3).empty());
  EXPECT_EQ(p1.bids, (std::set<AgentPair>{{1, 2}, {2, 1}}));
  EXPECT_FALSE(p1.bids.count({3, 1}));
}

TEST(PhaseOne, DeletionsAreSymmetric) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 500; ++k) {
    const auto inst = random_instance(rng);
    const auto p1 = sf_phase1(inst);
    for (const auto& [i, li] : p1.reduced)
      for (AgentId j : li) {
        const auto& lj = p1.reduced.at(j);
        ASSERT_NE(std::find(lj.begin(), lj.end(), i), lj.end());
      }
    // Reduced lists keep the original relative order.
    for (const auto& [i, li] : p1.reduced)
      for (std::size_t x = 1; x < li.size(); ++x) ASSERT_LT(inst.rank(i, li[x - 1]), inst.rank(i, li[x]));
    // Every surviving bid is on a surviving pair.
    for (const auto& [b, t] : p1.bids) {
      const auto& lb = p1.reduced.at(b);
      ASSERT_NE(std::find(lb.begin(), lb.end(), t), lb.end());
    }
  }
}

TEST(PhaseTwo, TwoAgentsMatched) {
  const auto inst = make({{1, {2}}, {2, {1}}}, 1);
  const auto out = sf_phase2(sf_phase1(inst), inst.capacities);
  ASSERT_TRUE(out.solved());
  EXPECT_EQ(*out.matching, pairs({{1, 2}}));
}

TEST(PhaseTwo, ThreeCycleIsUnsolvable) {
  const auto inst = three_cycle();
  const auto out = solve(inst);
  EXPECT_FALSE(out.solved());
  ASSERT_TRUE(out.reason.has_value());
  EXPECT_EQ(*out.reason, Unsolvable::odd_degree_sum);
  EXPECT_EQ(to_string(*out.reason), "odd-degree-sum");
  EXPECT_TRUE(brute_force_oracle(inst).empty());
}

TEST(PhaseTwo, FourAgents) {
  const auto inst = make({{1, {2, 3, 4}}, {2, {1, 3, 4}}, {3, {4, 1, 2}}, {4, {3, 1, 2}}}, 1);
  const auto out = solve(inst);
  ASSERT_TRUE(out.solved());
  EXPECT_EQ(*out.matching, pairs({{1, 2}, {3, 4}}));
  EXPECT_EQ(brute_force_oracle(inst), std::vector<Matching>{pairs({{1, 2}, {3, 4}})});
}

TEST(Solve, TriangleWithCapacityTwoMatchesEverything) {
  const auto inst = make({{1, {2, 3}}, {2, {3, 1}}, {3, {1, 2}}}, 2);
  const auto out = solve(inst);
  ASSERT_TRUE(out.solved());
  EXPECT_EQ(*out.matching, pairs({{1, 2}, {1, 3}, {2, 3}}));
  EXPECT_TRUE(verify_stability(*out.matching, inst));
}

TEST(Solve, EmptyListsGiveEmptyMatching) {
  const auto inst = make({{1, {}}, {2, {}}, {3, {}}}, 2);
  const auto out = solve(inst);
  ASSERT_TRUE(out.solved());
  EXPECT_TRUE(out.matching->empty());
  EXPECT_TRUE(verify_stability(*out.matching, inst));
}

TEST(Solve, SaturatedAgentTakesItsBestThree) {
  SfInstance inst = make({{1, {2, 3, 4, 5}}, {2, {1}}, {3, {1}}, {4, {1}}, {5, {1}}}, 1);
  inst.capacities[1] = 3;
  const auto out = solve(inst);
  ASSERT_TRUE(out.solved());
  EXPECT_EQ(*out.matching, pairs({{1, 2}, {1, 3}, {1, 4}}));
  EXPECT_TRUE(in_oracle(*out.matching, inst));
  for (AgentId j : {2, 3, 4, 5}) EXPECT_FALSE(is_blocking_pair(*out.matching, inst, 1, j));
}

TEST(Solve, IsDeterministic) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const auto inst = random_instance(rng);
    const auto a = solve(inst), b = solve(inst);
    ASSERT_EQ(a.matching, b.matching);
    ASSERT_EQ(a.reason, b.reason);
  }
}

TEST(Solve, RejectsInvalidInstances) {
  EXPECT_THROW(solve(make({{1, {2}}, {2, {}}}, 1)), Error);
  EXPECT_THROW(solve(make({{1, {1}}}, 1)), Error);
  EXPECT_THROW(solve(make({{1, {2, 2}}, {2, {1}}}, 1)), Error);
  EXPECT_THROW(solve(make({{1, {2}}, {2, {1}}}, 0)), Error);
}

TEST(Blocking, ThreeCycleWithOnePair) {
  const auto inst = three_cycle();
  const auto m = pairs({{1, 2}});
  EXPECT_TRUE(is_blocking_pair(m, inst, 2, 3));
  EXPECT_TRUE(is_blocking_pair(m, inst, 3, 2));
  EXPECT_FALSE(is_blocking_pair(m, inst, 1, 2));
  EXPECT_FALSE(is_blocking_pair(m, inst, 1, 3));  // 1 prefers 2 to 3
  EXPECT_FALSE(verify_stability(m, inst));
}

TEST(Blocking, EmptyMatchingWithAcceptablePairIsUnstable) {
  const auto inst = make({{1, {2}}, {2, {1}}, {3, {}}}, 1);
  EXPECT_FALSE(verify_stability(Matching{}, inst));
  EXPECT_TRUE(verify_stability(pairs({{1, 2}}), inst));
}

TEST(Blocking, OverCapacityIsNotStable) {
  const auto inst = make({{1, {2, 3}}, {2, {1}}, {3, {1}}}, 1);
  EXPECT_FALSE(verify_stability(pairs({{1, 2}, {1, 3}}), inst));
  EXPECT_FALSE(respects_constraints(pairs({{2, 3}}), inst));
}

TEST(Oracle, RejectsLargeInstances) {
  std::map<AgentId, std::vector<AgentId>> prefs;
  for (AgentId a = 1; a <= 9; ++a) prefs[a];
  EXPECT_THROW(brute_force_oracle(make(prefs, 1)), Error);
}

TEST(Oracle, AgreesWithSolveOnRandomInstances) {
  std::mt19937_64 rng(2024);
  int solved = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto inst = random_instance(rng);
    const auto out = solve(inst);
    const auto all = brute_force_oracle(inst);
    if (out.solved()) {
      ++solved;
      ASSERT_TRUE(verify_stability(*out.matching, inst)) << dump_instance(inst);
      ASSERT_NE(std::find(all.begin(), all.end(), *out.matching), all.end()) << dump_instance(inst);
      for (AgentId a : inst.agents) ASSERT_LE(out.matching->degree(a), inst.capacity(a));
    } else {
      ASSERT_TRUE(all.empty()) << dump_instance(inst);
    }
  }
  EXPECT_GT(solved, 900);
}

TEST(Oracle, EveryOracleMatchingIsStable) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 200; ++k) {
    const auto inst = random_instance(rng, {2, 5, 2, 0.8});
    for (const auto& m : brute_force_oracle(inst)) ASSERT_TRUE(verify_stability(m, inst));
  }
}

TEST(Fixtures, DumpParseRoundTrip) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 100; ++k) {
    const auto inst = random_instance(rng);
    ASSERT_EQ(parse_instance(dump_instance(inst)), inst);
  }
}

TEST(Fixtures, ParseErrors) {
  EXPECT_THROW(parse_instance("1:1\n"), ParseError);
  EXPECT_THROW(parse_instance("x:1:2\n2:1:1\n"), ParseError);
  EXPECT_THROW(parse_instance("1:1:2\n1:1:2\n"), ParseError);
  EXPECT_THROW(parse_instance("1:1:2\n2:1:\n"), Error);
  const auto inst = parse_instance("# comment\n1:2:2,3\n2:1:1\n3:1:1\n");
  EXPECT_EQ(inst.capacity(1), 2);
  EXPECT_EQ(inst.list(1), (std::vector<AgentId>{2, 3}));
}

TEST(Greedy, TakesBestScoresWithinCapacity) {
  const auto inst = three_cycle();
  auto score = [](AgentId a, AgentId b) { return (a == 2 && b == 3) ? 5.0 : 1.0; };
  const Matching m = greedy_matching(inst, score);
  EXPECT_EQ(m, pairs({{2, 3}}));
  EXPECT_TRUE(respects_constraints(m, inst));
}

TEST(Verify, SmallRunIsSound) {
  const VerifyReport rep = run_verification(500, {}, 3);
  EXPECT_EQ(rep.instances, 500u);
  EXPECT_TRUE(rep.sound());
  EXPECT_EQ(rep.deviations, 0u);
  EXPECT_EQ(rep.solved + rep.odd_degree_sum + rep.short_list, rep.instances);
}
