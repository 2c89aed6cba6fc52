#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "mmv2v/matching.hpp"

namespace mmv2v {

struct InstanceShape {
  int min_agents = 2;
  int max_agents = 6;
  int max_capacity = 3;
  double edge_probability = 0.7;
};

// Random mutual acceptability graph, independent random strict orders and
// capacities in [1, max_capacity].
template <typename Rng>
SfInstance random_instance(Rng& rng, const InstanceShape& shape = {}) {
  if (shape.min_agents < 1 || shape.max_agents < shape.min_agents) throw Error("bad agent range");
  if (shape.max_capacity < 1) throw Error("max capacity must be >= 1");
  const int n = std::uniform_int_distribution<int>(shape.min_agents, shape.max_agents)(rng);
  std::bernoulli_distribution edge(shape.edge_probability);
  std::uniform_int_distribution<int> cap(1, shape.max_capacity);
  SfInstance inst;
  for (int a = 1; a <= n; ++a) {
    inst.agents.push_back(a);
    inst.capacities[a] = cap(rng);
    inst.preferences[a];
  }
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b)
      if (edge(rng)) {
        inst.preferences[a].push_back(b);
        inst.preferences[b].push_back(a);
      }
  for (auto& [a, list] : inst.preferences) std::shuffle(list.begin(), list.end(), rng);
  return inst;
}

struct VerifyReport {
  std::size_t instances = 0;
  std::size_t solved = 0;
  std::size_t odd_degree_sum = 0;
  std::size_t short_list = 0;
  std::size_t unstable = 0;          // solve returned a matching that fails the stability check
  std::size_t outside_oracle = 0;    // stable by the check yet missing from the oracle's set
  std::size_t deviations = 0;        // unsolvable, but the oracle found a stable matching
  std::size_t oracle_empty = 0;      // instances with no stable matching at all
  std::size_t phase1_lost_pairs = 0; // stable pairs deleted during bidding

  bool sound() const { return unstable == 0 && outside_oracle == 0; }
};

inline void check_instance(const SfInstance& inst, VerifyReport& rep) {
  ++rep.instances;
  const auto stable = brute_force_oracle(inst);
  if (stable.empty()) ++rep.oracle_empty;

  const PhaseOneResult p1 = sf_phase1(inst);
  for (const auto& m : stable)
    for (const auto& [a, b] : m.pairs()) {
      const auto& la = p1.reduced.at(a);
      if (std::find(la.begin(), la.end(), b) == la.end()) ++rep.phase1_lost_pairs;
    }

  const SfOutcome out = sf_phase2(p1, inst.capacities);
  if (out.solved()) {
    ++rep.solved;
    if (!verify_stability(*out.matching, inst)) ++rep.unstable;
    else if (!std::binary_search(stable.begin(), stable.end(), *out.matching)) ++rep.outside_oracle;
    return;
  }
  (*out.reason == Unsolvable::odd_degree_sum ? rep.odd_degree_sum : rep.short_list)++;
  if (!stable.empty()) ++rep.deviations;
}

inline VerifyReport run_verification(std::size_t instances, const InstanceShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VerifyReport rep;
  for (std::size_t k = 0; k < instances; ++k) check_instance(random_instance(rng, shape), rep);
  return rep;
}

inline void print_report(const VerifyReport& r, std::ostream& os) {
  os << "instances:            " << r.instances << '\n'
     << "solved:               " << r.solved << '\n'
     << "unsolvable (odd sum): " << r.odd_degree_sum << '\n'
     << "unsolvable (short):   " << r.short_list << '\n'
     << "unstable results:     " << r.unstable << '\n'
     << "outside oracle set:   " << r.outside_oracle << '\n'
     << "deviations:           " << r.deviations << '\n'
     << "no stable matching:   " << r.oracle_empty << '\n'
     << "phase-1 lost pairs:   " << r.phase1_lost_pairs << '\n'
     << "soundness:            " << (r.sound() ? "ok" : "FAILED") << '\n';
}

}  // namespace mmv2v
