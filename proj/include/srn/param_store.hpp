#ifndef SRN_PARAM_STORE_HPP_
#define SRN_PARAM_STORE_HPP_

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

/// Named parameter tensors with paired gradients and per-group freeze flags.
///
/// Parameters keep their registration order so that seeded initialization
/// and optimizer sweeps are deterministic.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::string group;
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    Tensor<Scalar> velocity;  // SGD momentum buffer, lazily zero-initialized
  };

  /// Registers a zero-initialized parameter. Gradient gets the same shape.
  Entry& add(const std::string& name, const std::string& group, std::vector<int> shape) {
    if (index_.count(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, group, Tensor<Scalar>(shape), Tensor<Scalar>(shape),
                             Tensor<Scalar>(shape)});
    return entries_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Entry& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
    return entries_[it->second];
  }
  const Entry& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
    return entries_[it->second];
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void set_group_frozen(const std::string& group, bool frozen) {
    if (frozen)
      frozen_groups_.insert(group);
    else
      frozen_groups_.erase(group);
  }

  void freeze_all() {
    for (const auto& e : entries_) frozen_groups_.insert(e.group);
  }

  void unfreeze_all() { frozen_groups_.clear(); }

  bool group_frozen(const std::string& group) const { return frozen_groups_.count(group) != 0; }
  bool frozen(const Entry& e) const { return group_frozen(e.group); }
  const std::set<std::string>& frozen_groups() const { return frozen_groups_; }

  void zero_grads() {
    for (auto& e : entries_) e.grad.set_zero();
  }

  void zero_velocity() {
    for (auto& e : entries_) e.velocity.set_zero();
  }

  long param_count() const {
    long n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  long group_param_count(const std::string& group) const {
    long n = 0;
    for (const auto& e : entries_)
      if (e.group == group) n += e.value.size();
    return n;
  }

  std::vector<std::string> groups() const {
    std::set<std::string> seen;
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (seen.insert(e.group).second) out.push_back(e.group);
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> frozen_groups_;
};

}  // namespace srn

#endif  // SRN_PARAM_STORE_HPP_
