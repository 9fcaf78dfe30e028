#pragma once

// Brute-force reference semantics over an explicit block list. Deliberately
// naive: adjacency matrices, Floyd-Warshall closures and definitions applied
// literally, sharing nothing with the incremental blocklace indices.

#include <cstddef>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "flash/types.hpp"

namespace flash::oracle {

struct Lace {
  std::vector<Block> blocks;  // any topological order
  std::size_t n{0};
  std::size_t threshold{0};

  std::vector<std::vector<bool>> reach;  // reflexive, any pointer
  std::vector<std::vector<bool>> dep;    // reflexive, input pointers

  Lace(std::vector<Block> bs, std::size_t agents, std::size_t thresh)
      : blocks(std::move(bs)), n(agents), threshold(thresh) {
    const std::size_t m = blocks.size();
    reach.assign(m, std::vector<bool>(m, false));
    dep.assign(m, std::vector<bool>(m, false));
    for (std::size_t a = 0; a < m; ++a) {
      reach[a][a] = dep[a][a] = true;
      for (const auto& p : blocks[a].pointers) {
        for (std::size_t t = 0; t < m; ++t) {
          if (blocks[t].hash == p.target) {
            reach[a][t] = true;
            if (p.isInput) dep[a][t] = true;
          }
        }
      }
    }
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          if (reach[i][k] && reach[k][j]) reach[i][j] = true;
          if (dep[i][k] && dep[k][j]) dep[i][j] = true;
        }
  }

  std::size_t find(const Hash& h) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].hash == h) return i;
    return blocks.size();
  }

  std::set<std::size_t> roots() const {
    std::set<std::size_t> out;
    for (std::size_t t = 0; t < blocks.size(); ++t) {
      std::size_t indeg = 0;
      for (const auto& b : blocks)
        for (const auto& p : b.pointers) indeg += p.target == blocks[t].hash;
      if (indeg == 0) out.insert(t);
    }
    return out;
  }

  bool equivocation(std::size_t a, std::size_t b) const {
    return a != b && blocks[a].creator == blocks[b].creator && !reach[a][b] && !reach[b][a];
  }

  std::set<std::size_t> inputClosure(std::size_t b) const {
    std::set<std::size_t> out;
    for (std::size_t x = 0; x < blocks.size(); ++x)
      if (dep[b][x] || (reach[b][x] && blocks[x].creator == blocks[b].creator)) out.insert(x);
    return out;
  }

  bool approves(std::size_t b, std::size_t x) const {
    if (!reach[b][x]) return false;
    for (std::size_t y = 0; y < blocks.size(); ++y)
      if (reach[b][y] && equivocation(x, y)) return false;
    return true;
  }

  bool agentApproves(AgentId q, std::size_t x) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (blocks[b].creator == q && approves(b, x)) return true;
    return false;
  }

  bool isFinal(std::size_t x) const {
    std::size_t count = 0;
    for (std::uint32_t q = 0; q < n; ++q) count += agentApproves(AgentId(q), x);
    return count >= threshold;
  }

  /// (block, payment index) pairs that are unspent payments to p in final blocks.
  std::set<std::pair<std::size_t, std::size_t>> utxos(AgentId p) const {
    std::set<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t x = 0; x < blocks.size(); ++x) {
      if (!isFinal(x)) continue;
      bool spent = false;
      for (const auto& b : blocks)
        if (b.creator == p)
          for (const auto& ptr : b.pointers) spent = spent || (ptr.isInput && ptr.target == blocks[x].hash);
      if (spent) continue;
      for (std::size_t i = 0; i < blocks[x].payments.size(); ++i)
        if (blocks[x].payments[i].recipient == p) out.insert({x, i});
    }
    return out;
  }

  Amount balance(AgentId p) const {
    Amount sum = 0;
    for (auto [x, i] : utxos(p)) sum += blocks[x].payments[i].amount;
    return sum;
  }
};

/// The oracle view of a blocklace (blocks in insertion order).
template <class L>
Lace of(const L& lace) {
  std::vector<Block> bs;
  for (std::size_t i = 0; i < lace.size(); ++i) bs.push_back(lace.block(i));
  return Lace(std::move(bs), lace.agentCount(), lace.config().quorum.threshold());
}

}  // namespace flash::oracle
