#pragma once

// Order-statistics multiset: a treap keyed by value, one node per distinct
// key with a multiplicity, each node augmented with its subtree population.
// insert / count_less / count_equal are O(log n) expected.
//
// Node priorities come from a fixed mixing function of the node's creation
// index, so the tree shape (and therefore everything observable) is a pure
// function of the insertion sequence.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ctm/rng.hpp"

namespace ctm {

template <class Key, class Compare = std::less<Key>>
class RankMultiset {
 public:
  RankMultiset() = default;
  explicit RankMultiset(Compare comp) : comp_(std::move(comp)) {}

  void reserve(std::size_t n) { nodes_.reserve(n); }

  void insert(const Key& key) { root_ = insert_at(root_, key); }

  /// Number of stored elements strictly less than key.
  std::size_t count_less(const Key& key) const {
    std::size_t count = 0;
    for (Index t = root_; t != kNil;) {
      const Node& node = nodes_[t];
      if (comp_(node.key, key)) {
        count += population(node.left) + node.multiplicity;
        t = node.right;
      } else {
        t = node.left;
      }
    }
    return count;
  }

  /// Number of stored elements equivalent to key under Compare.
  std::size_t count_equal(const Key& key) const {
    for (Index t = root_; t != kNil;) {
      const Node& node = nodes_[t];
      if (comp_(key, node.key)) {
        t = node.left;
      } else if (comp_(node.key, key)) {
        t = node.right;
      } else {
        return node.multiplicity;
      }
    }
    return 0;
  }

  std::size_t count_greater(const Key& key) const { return size() - count_less(key) - count_equal(key); }

  std::size_t size() const { return population(root_); }
  std::size_t distinct() const { return nodes_.size(); }
  bool empty() const { return root_ == kNil; }

  /// In-order traversal, each key visited once with its multiplicity.
  template <class Visitor>
  void for_each(Visitor&& visit) const {
    std::vector<Index> stack;
    Index t = root_;
    while (t != kNil || !stack.empty()) {
      while (t != kNil) {
        stack.push_back(t);
        t = nodes_[t].left;
      }
      t = stack.back();
      stack.pop_back();
      visit(nodes_[t].key, nodes_[t].multiplicity);
      t = nodes_[t].right;
    }
  }

 private:
  using Index = std::uint32_t;
  static constexpr Index kNil = 0xFFFFFFFFu;

  struct Node {
    Key key;
    std::uint64_t priority;
    std::size_t multiplicity;
    std::size_t population;
    Index left = kNil;
    Index right = kNil;
  };

  std::size_t population(Index t) const { return t == kNil ? 0 : nodes_[t].population; }

  void refresh(Index t) {
    Node& node = nodes_[t];
    node.population = population(node.left) + population(node.right) + node.multiplicity;
  }

  Index rotate_right(Index t) {
    const Index l = nodes_[t].left;
    nodes_[t].left = nodes_[l].right;
    nodes_[l].right = t;
    refresh(t);
    refresh(l);
    return l;
  }

  Index rotate_left(Index t) {
    const Index r = nodes_[t].right;
    nodes_[t].right = nodes_[r].left;
    nodes_[r].left = t;
    refresh(t);
    refresh(r);
    return r;
  }

  Index insert_at(Index t, const Key& key) {
    if (t == kNil) {
      const auto id = static_cast<Index>(nodes_.size());
      nodes_.push_back(Node{key, splitmix64_mix(0xD1B54A32D192ED03ULL * (id + 1)), 1, 1});
      return id;
    }
    if (comp_(key, nodes_[t].key)) {
      const Index child = insert_at(nodes_[t].left, key);
      nodes_[t].left = child;
      refresh(t);
      if (nodes_[child].priority > nodes_[t].priority) t = rotate_right(t);
    } else if (comp_(nodes_[t].key, key)) {
      const Index child = insert_at(nodes_[t].right, key);
      nodes_[t].right = child;
      refresh(t);
      if (nodes_[child].priority > nodes_[t].priority) t = rotate_left(t);
    } else {
      ++nodes_[t].multiplicity;
      ++nodes_[t].population;
    }
    return t;
  }

  std::vector<Node> nodes_;
  Index root_ = kNil;
  [[no_unique_address]] Compare comp_{};
};

}  // namespace ctm
