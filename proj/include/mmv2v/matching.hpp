#pragma once

// Stable Fixtures: many-to-many stable matching on a non-bipartite
// acceptability graph with per-agent capacities. Two-phase algorithm
// (bidding, then rotation elimination), pairwise stability checks and an
// exhaustive oracle for small instances.

#include <algorithm>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmv2v/common.hpp"

namespace mmv2v {

using AgentId = VehicleId;
using AgentPair = std::pair<AgentId, AgentId>;

struct SfInstance {
  std::vector<AgentId> agents;
  std::map<AgentId, std::vector<AgentId>> preferences;  // most preferred first
  std::map<AgentId, int> capacities;

  const std::vector<AgentId>& list(AgentId a) const {
    static const std::vector<AgentId> empty;
    auto it = preferences.find(a);
    return it == preferences.end() ? empty : it->second;
  }

  int capacity(AgentId a) const {
    auto it = capacities.find(a);
    if (it == capacities.end()) throw Error("no capacity for agent " + std::to_string(a));
    return it->second;
  }

  // Position of b in a's list, or -1 when unacceptable.
  int rank(AgentId a, AgentId b) const {
    const auto& l = list(a);
    auto it = std::find(l.begin(), l.end(), b);
    return it == l.end() ? -1 : static_cast<int>(it - l.begin());
  }

  bool acceptable(AgentId a, AgentId b) const { return rank(a, b) >= 0 && rank(b, a) >= 0; }

  void validate() const {
    std::set<AgentId> ids(agents.begin(), agents.end());
    if (ids.size() != agents.size()) throw Error("duplicate agent id");
    for (const auto& [a, prefs] : preferences)
      if (!ids.count(a)) throw Error("preferences for unknown agent " + std::to_string(a));
    for (const auto& [a, c] : capacities)
      if (!ids.count(a)) throw Error("capacity for unknown agent " + std::to_string(a));
    for (AgentId a : agents) {
      if (capacities.find(a) == capacities.end()) throw Error("missing capacity for agent " + std::to_string(a));
      if (capacity(a) < 1) throw Error("capacity of agent " + std::to_string(a) + " must be >= 1");
      std::set<AgentId> seen;
      for (AgentId b : list(a)) {
        if (b == a) throw Error("agent " + std::to_string(a) + " lists itself");
        if (!ids.count(b)) throw Error("agent " + std::to_string(a) + " lists unknown agent " + std::to_string(b));
        if (!seen.insert(b).second) throw Error("agent " + std::to_string(a) + " lists " + std::to_string(b) + " twice");
        if (rank(b, a) < 0)
          throw Error("acceptability not mutual: " + std::to_string(a) + " lists " + std::to_string(b));
      }
    }
  }

  friend bool operator==(const SfInstance&, const SfInstance&) = default;
};

// Symmetric set of unordered links; pairs are stored as (min, max).
class Matching {
 public:
  static AgentPair key(AgentId a, AgentId b) { return a < b ? AgentPair{a, b} : AgentPair{b, a}; }

  bool add(AgentId a, AgentId b) {
    if (a == b) throw Error("an agent cannot be matched with itself");
    return pairs_.insert(key(a, b)).second;
  }
  bool contains(AgentId a, AgentId b) const { return pairs_.count(key(a, b)) > 0; }

  std::vector<AgentId> partners(AgentId a) const {
    std::vector<AgentId> out;
    for (const auto& [x, y] : pairs_) {
      if (x == a) out.push_back(y);
      else if (y == a) out.push_back(x);
    }
    return out;
  }
  int degree(AgentId a) const { return static_cast<int>(partners(a).size()); }

  const std::set<AgentPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  friend bool operator==(const Matching&, const Matching&) = default;
  friend auto operator<=>(const Matching& a, const Matching& b) { return a.pairs_ <=> b.pairs_; }

 private:
  std::set<AgentPair> pairs_;
};

enum class Unsolvable { odd_degree_sum, short_list };

inline std::string_view to_string(Unsolvable u) {
  return u == Unsolvable::odd_degree_sum ? "odd-degree-sum" : "short-list";
}

struct SfOutcome {
  std::optional<Matching> matching;
  std::optional<Unsolvable> reason;

  bool solved() const { return matching.has_value(); }
};

struct PhaseOneResult {
  std::set<AgentPair> bids;                                // ordered (bidder, target)
  std::map<AgentId, std::vector<AgentId>> reduced;         // surviving preference lists
  std::vector<AgentPair> bid_log;                          // every bid in the order made
};

namespace detail {

// Preference list over dense agent indices with O(1) erase, front and back.
class PrefList {
 public:
  PrefList() = default;
  PrefList(const std::vector<int>& order, std::size_t agent_count)
      : order_(order), rank_(agent_count, -1), next_(order.size()), prev_(order.size()), size_(order.size()) {
    for (std::size_t k = 0; k < order.size(); ++k) {
      rank_[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
      next_[k] = static_cast<int>(k) + 1;
      prev_[k] = static_cast<int>(k) - 1;
    }
    head_ = order.empty() ? -1 : 0;
    tail_ = order.empty() ? -1 : static_cast<int>(order.size()) - 1;
    if (!order.empty()) next_.back() = -1;
  }

  bool contains(int a) const { return alive_rank(a) >= 0; }
  int rank(int a) const { return alive_rank(a); }
  int size() const { return static_cast<int>(size_); }
  bool empty() const { return size_ == 0; }
  int front() const { return head_ < 0 ? -1 : order_[static_cast<std::size_t>(head_)]; }
  int back() const { return tail_ < 0 ? -1 : order_[static_cast<std::size_t>(tail_)]; }

  void erase(int a) {
    const int pos = alive_rank(a);
    if (pos < 0) return;
    const auto p = static_cast<std::size_t>(pos);
    if (prev_[p] >= 0) next_[static_cast<std::size_t>(prev_[p])] = next_[p];
    else head_ = next_[p];
    if (next_[p] >= 0) prev_[static_cast<std::size_t>(next_[p])] = prev_[p];
    else tail_ = prev_[p];
    rank_[static_cast<std::size_t>(a)] = -1;
    --size_;
  }

  // Live entries strictly after a, best first.
  std::vector<int> successors(int a) const {
    std::vector<int> out;
    const int pos = alive_rank(a);
    if (pos < 0) return out;
    for (int k = next_[static_cast<std::size_t>(pos)]; k >= 0; k = next_[static_cast<std::size_t>(k)])
      out.push_back(order_[static_cast<std::size_t>(k)]);
    return out;
  }

  template <typename F>
  void for_each(F&& f) const {
    for (int k = head_; k >= 0; k = next_[static_cast<std::size_t>(k)])
      if (!f(order_[static_cast<std::size_t>(k)])) return;
  }

  template <typename F>
  void for_each_reverse(F&& f) const {
    for (int k = tail_; k >= 0; k = prev_[static_cast<std::size_t>(k)])
      if (!f(order_[static_cast<std::size_t>(k)])) return;
  }

  std::vector<int> items() const {
    std::vector<int> out;
    for_each([&](int a) {
      out.push_back(a);
      return true;
    });
    return out;
  }

 private:
  int alive_rank(int a) const {
    if (a < 0 || static_cast<std::size_t>(a) >= rank_.size()) return -1;
    return rank_[static_cast<std::size_t>(a)];
  }

  std::vector<int> order_;
  std::vector<int> rank_;  // position in order_, -1 once erased or never listed
  std::vector<int> next_;
  std::vector<int> prev_;
  int head_ = -1;
  int tail_ = -1;
  std::size_t size_ = 0;
};

// Working table shared by both phases: reduced lists plus the bid relation.
class SfTable {
 public:
  SfTable(std::vector<AgentId> ids, const std::map<AgentId, std::vector<AgentId>>& prefs,
          const std::map<AgentId, int>& caps)
      : ids_(std::move(ids)), n_(ids_.size()), lists_(n_), caps_(n_), bids_(n_, std::vector<char>(n_, 0)),
        targets_(n_, 0), bidders_(n_, 0) {
    for (std::size_t i = 0; i < n_; ++i) index_[ids_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < n_; ++i) {
      std::vector<int> order;
      auto it = prefs.find(ids_[i]);
      if (it != prefs.end())
        for (AgentId b : it->second) order.push_back(index_.at(b));
      lists_[i] = PrefList(order, n_);
      caps_[i] = caps.at(ids_[i]);
    }
  }

  std::size_t size() const { return n_; }
  AgentId id(int i) const { return ids_[static_cast<std::size_t>(i)]; }
  int index(AgentId a) const { return index_.at(a); }
  const PrefList& list(int i) const { return lists_[static_cast<std::size_t>(i)]; }
  int capacity(int i) const { return caps_[static_cast<std::size_t>(i)]; }
  int target_count(int i) const { return targets_[static_cast<std::size_t>(i)]; }
  int bidder_count(int i) const { return bidders_[static_cast<std::size_t>(i)]; }
  bool bids(int i, int j) const { return bids_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] != 0; }

  void add_bid(int i, int j) {
    if (bids(i, j)) return;
    bids_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
    ++targets_[static_cast<std::size_t>(i)];
    ++bidders_[static_cast<std::size_t>(j)];
  }

  void remove_bid(int i, int j) {
    if (!bids(i, j)) return;
    bids_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0;
    --targets_[static_cast<std::size_t>(i)];
    --bidders_[static_cast<std::size_t>(j)];
  }

  // Removes {a, b} from both lists along with any bid between them.
  void delete_pair(int a, int b) {
    remove_bid(a, b);
    remove_bid(b, a);
    lists_[static_cast<std::size_t>(a)].erase(b);
    lists_[static_cast<std::size_t>(b)].erase(a);
  }

  // First listed agent that i is not yet bidding for, or -1.
  int next_target(int i) const {
    int found = -1;
    list(i).for_each([&](int j) {
      if (bids(i, j)) return true;
      found = j;
      return false;
    });
    return found;
  }

  // Lowest-ranked agent currently bidding for j, or -1.
  int worst_bidder(int j) const {
    int found = -1;
    list(j).for_each_reverse([&](int i) {
      if (!bids(i, j)) return true;
      found = i;
      return false;
    });
    return found;
  }

  // The k-th best (1-based) agent bidding for j, or -1.
  int ranked_bidder(int j, int k) const {
    int found = -1;
    int seen = 0;
    list(j).for_each([&](int i) {
      if (bids(i, j) && ++seen == k) {
        found = i;
        return false;
      }
      return true;
    });
    return found;
  }

  // Once j holds at least c_j bids, drop everyone ranked below its c_j-th
  // bidder. Returns agents whose list or bids changed.
  std::vector<int> truncate(int j) {
    std::vector<int> touched;
    if (bidder_count(j) < capacity(j)) return touched;
    const int kth = ranked_bidder(j, capacity(j));
    for (int l : list(j).successors(kth)) {
      delete_pair(j, l);
      touched.push_back(l);
    }
    if (!touched.empty()) touched.push_back(j);
    return touched;
  }

  std::map<AgentId, std::vector<AgentId>> reduced_lists() const {
    std::map<AgentId, std::vector<AgentId>> out;
    for (std::size_t i = 0; i < n_; ++i) {
      auto& v = out[ids_[i]];
      for (int j : lists_[i].items()) v.push_back(ids_[static_cast<std::size_t>(j)]);
    }
    return out;
  }

  std::set<AgentPair> bid_set() const {
    std::set<AgentPair> out;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (bids_[i][j]) out.insert({ids_[i], ids_[j]});
    return out;
  }

 private:
  std::vector<AgentId> ids_;
  std::size_t n_;
  std::map<AgentId, int> index_;
  std::vector<PrefList> lists_;
  std::vector<int> caps_;
  std::vector<std::vector<char>> bids_;
  std::vector<int> targets_;
  std::vector<int> bidders_;
};

inline std::vector<AgentId> sorted_agents(const SfInstance& inst) {
  std::vector<AgentId> ids = inst.agents;
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace detail

// Phase 1: every agent bids down its list until it holds min(c_i, |P_i|)
// targets; an agent holding c_j or more bids deletes everything ranked below
// its c_j-th bidder, symmetrically.
inline PhaseOneResult sf_phase1(const SfInstance& inst) {
  inst.validate();
  detail::SfTable table(detail::sorted_agents(inst), inst.preferences, inst.capacities);
  PhaseOneResult result;

  const int n = static_cast<int>(table.size());
  std::deque<int> work;
  std::vector<char> queued(table.size(), 1);
  for (int i = 0; i < n; ++i) work.push_back(i);

  auto enqueue = [&](int a) {
    if (!queued[static_cast<std::size_t>(a)]) {
      queued[static_cast<std::size_t>(a)] = 1;
      work.push_back(a);
    }
  };

  while (!work.empty()) {
    const int i = work.front();
    work.pop_front();
    queued[static_cast<std::size_t>(i)] = 0;
    while (table.target_count(i) < std::min(table.capacity(i), table.list(i).size())) {
      const int j = table.next_target(i);
      if (j < 0) break;
      table.add_bid(i, j);
      result.bid_log.push_back({table.id(i), table.id(j)});
      for (int a : table.truncate(j))
        if (a != i) enqueue(a);
    }
  }

  result.bids = table.bid_set();
  result.reduced = table.reduced_lists();
  return result;
}

// Phase 2: reject odd degree sums, then repeatedly expose and eliminate a
// rotation starting from the lowest-id agent with a long list. Any list
// falling below its degree means no stable matching exists.
inline SfOutcome sf_phase2(const PhaseOneResult& p1, const std::map<AgentId, int>& capacities) {
  std::vector<AgentId> ids;
  for (const auto& [a, _] : p1.reduced) ids.push_back(a);
  detail::SfTable table(ids, p1.reduced, capacities);
  for (const auto& [bidder, target] : p1.bids) table.add_bid(table.index(bidder), table.index(target));

  const int n = static_cast<int>(table.size());
  std::vector<int> degree(table.size());
  long degree_sum = 0;
  for (int i = 0; i < n; ++i) {
    degree[static_cast<std::size_t>(i)] = std::min(table.capacity(i), table.list(i).size());
    degree_sum += degree[static_cast<std::size_t>(i)];
  }
  if (degree_sum % 2 != 0) return {std::nullopt, Unsolvable::odd_degree_sum};

  auto deg = [&](int i) { return degree[static_cast<std::size_t>(i)]; };

  for (;;) {
    int start = -1;
    for (int i = 0; i < n; ++i) {
      if (table.list(i).size() < deg(i)) return {std::nullopt, Unsolvable::short_list};
      if (start < 0 && table.list(i).size() > deg(i)) start = i;
    }
    if (start < 0) break;

    // Walk p -> next target q -> q's worst bidder until some p repeats.
    std::vector<int> ps;
    std::vector<int> qs;  // qs[k] is the next target of ps[k]
    std::vector<int> seen(table.size(), -1);
    int p = start;
    while (seen[static_cast<std::size_t>(p)] < 0) {
      seen[static_cast<std::size_t>(p)] = static_cast<int>(ps.size());
      ps.push_back(p);
      const int q = table.next_target(p);
      if (q < 0) return {std::nullopt, Unsolvable::short_list};
      qs.push_back(q);
      p = table.worst_bidder(q);
      if (p < 0) return {std::nullopt, Unsolvable::short_list};
    }
    const std::size_t first = static_cast<std::size_t>(seen[static_cast<std::size_t>(p)]);
    const std::size_t last = ps.size();

    // Each member drops its bid on the agent it was worst bidder of and bids
    // its next target instead; the targets then truncate below their new
    // c-th bidder.
    std::vector<std::pair<int, int>> moves;  // (agent, old target)
    for (std::size_t k = first; k < last; ++k) {
      const int old_target = (k == first) ? qs[last - 1] : qs[k - 1];
      moves.emplace_back(ps[k], old_target);
    }
    for (const auto& [agent, old_target] : moves) table.remove_bid(agent, old_target);
    for (std::size_t k = first; k < last; ++k) table.add_bid(ps[k], qs[k]);
    for (std::size_t k = first; k < last; ++k) table.truncate(qs[k]);
    for (const auto& [agent, old_target] : moves)
      if (table.list(old_target).contains(agent)) table.delete_pair(agent, old_target);
  }

  Matching m;
  for (int i = 0; i < n; ++i)
    for (int j : table.list(i).items()) m.add(table.id(i), table.id(j));
  return {m, std::nullopt};
}

inline SfOutcome solve(const SfInstance& inst) {
  const PhaseOneResult p1 = sf_phase1(inst);
  return sf_phase2(p1, inst.capacities);
}

// (i, j) blocks when both find each other acceptable, they are not linked,
// and each has a free slot or strictly prefers the other to its worst partner.
inline bool is_blocking_pair(const Matching& m, const SfInstance& inst, AgentId i, AgentId j) {
  if (i == j) return false;
  if (!inst.acceptable(i, j) || m.contains(i, j)) return false;
  auto wants = [&](AgentId a, AgentId b) {
    const auto partners = m.partners(a);
    if (static_cast<int>(partners.size()) < inst.capacity(a)) return true;
    int worst = -1;
    for (AgentId p : partners) worst = std::max(worst, inst.rank(a, p));
    return inst.rank(a, b) < worst;
  };
  return wants(i, j) && wants(j, i);
}

inline bool respects_constraints(const Matching& m, const SfInstance& inst) {
  for (const auto& [a, b] : m.pairs())
    if (!inst.acceptable(a, b)) return false;
  for (AgentId a : inst.agents)
    if (m.degree(a) > inst.capacity(a)) return false;
  return true;
}

inline bool verify_stability(const Matching& m, const SfInstance& inst) {
  if (!respects_constraints(m, inst)) return false;
  for (std::size_t x = 0; x < inst.agents.size(); ++x)
    for (std::size_t y = x + 1; y < inst.agents.size(); ++y)
      if (is_blocking_pair(m, inst, inst.agents[x], inst.agents[y])) return false;
  return true;
}

inline constexpr std::size_t oracle_max_agents = 8;

// Every stable matching, by enumerating capacity-respecting subsets of the
// acceptable pairs. Exponential; small instances only.
inline std::vector<Matching> brute_force_oracle(const SfInstance& inst) {
  inst.validate();
  if (inst.agents.size() > oracle_max_agents)
    throw Error("oracle limited to " + std::to_string(oracle_max_agents) + " agents");
  std::vector<AgentPair> edges;
  for (AgentId a : inst.agents)
    for (AgentId b : inst.list(a))
      if (a < b) edges.push_back({a, b});
  std::sort(edges.begin(), edges.end());

  std::map<AgentId, int> load;
  std::vector<Matching> found;
  Matching current;
  std::function<void(std::size_t)> walk = [&](std::size_t k) {
    if (k == edges.size()) {
      if (verify_stability(current, inst)) found.push_back(current);
      return;
    }
    walk(k + 1);
    const auto [a, b] = edges[k];
    if (load[a] < inst.capacity(a) && load[b] < inst.capacity(b)) {
      ++load[a];
      ++load[b];
      Matching saved = current;
      current.add(a, b);
      walk(k + 1);
      current = std::move(saved);
      --load[a];
      --load[b];
    }
  };
  walk(0);
  std::sort(found.begin(), found.end());
  return found;
}

// Fallback used when no stable matching exists: take acceptable pairs in
// descending score order while both ends have capacity left.
inline Matching greedy_matching(const SfInstance& inst, const std::function<double(AgentId, AgentId)>& score) {
  std::vector<std::pair<double, AgentPair>> edges;
  for (AgentId a : inst.agents)
    for (AgentId b : inst.list(a))
      if (a < b && inst.acceptable(a, b)) edges.push_back({score(a, b), {a, b}});
  std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::map<AgentId, int> load;
  Matching m;
  for (const auto& [s, e] : edges) {
    const auto [a, b] = e;
    if (load[a] < inst.capacity(a) && load[b] < inst.capacity(b)) {
      m.add(a, b);
      ++load[a];
      ++load[b];
    }
  }
  return m;
}

// ---- Text fixtures: one line per agent, `id:c:pref1,pref2,...` ----

inline std::string dump_instance(const SfInstance& inst) {
  std::ostringstream os;
  for (AgentId a : inst.agents) {
    os << a << ':' << inst.capacity(a) << ':';
    const auto& l = inst.list(a);
    for (std::size_t k = 0; k < l.size(); ++k) os << (k ? "," : "") << l[k];
    os << '\n';
  }
  return os.str();
}

inline SfInstance parse_instance(std::istream& is) {
  SfInstance inst;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto c1 = line.find(':');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ParseError(lineno, "expected id:capacity:preferences");
    std::string_view sv(line);
    AgentId id = 0;
    int cap = 0;
    if (!parse_int(sv.substr(0, c1), id)) throw ParseError(lineno, "bad agent id");
    if (!parse_int(sv.substr(c1 + 1, c2 - c1 - 1), cap)) throw ParseError(lineno, "bad capacity");
    std::vector<AgentId> prefs;
    std::string_view rest = sv.substr(c2 + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      AgentId b = 0;
      if (!parse_int(rest.substr(0, comma), b)) throw ParseError(lineno, "bad preference entry");
      prefs.push_back(b);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (inst.capacities.count(id)) throw ParseError(lineno, "agent " + std::to_string(id) + " defined twice");
    inst.agents.push_back(id);
    inst.capacities[id] = cap;
    inst.preferences[id] = std::move(prefs);
  }
  inst.validate();
  return inst;
}

inline SfInstance parse_instance(const std::string& text) {
  std::istringstream is(text);
  return parse_instance(is);
}

}  // namespace mmv2v
