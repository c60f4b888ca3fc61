#pragma once

#include "semi3/parameter.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace semi3 {

struct Init {
  enum class Kind { kGaussian, kZeros, kIdentity };
  Kind kind = Kind::kZeros;
  double sigma = 0.0;

  static Init gaussian(double sigma) { return {Kind::kGaussian, sigma}; }
  static Init zeros() { return {Kind::kZeros, 0.0}; }
  static Init identity() { return {Kind::kIdentity, 0.0}; }
};

enum class ShareStrategy { kSemi3, kAllSharing, kFcOnly, kSketchEdgemapOnly };

std::string to_string(ShareStrategy strategy);
ShareStrategy parse_share_strategy(const std::string& text);

enum class LayerKind { kConv, kHead };

// Parameters named "<role>.<local>" whose local part belongs to `kind`
// are tied across `roles`, one group per local name. The first role donates.
struct ShareRule {
  std::string family;
  std::vector<std::string> roles;
  LayerKind kind;
};

/// Declarative weight-tying topology. Families: "SE-conv" (sketch+edgemap
/// convolutions), "conv-all", "FC-all" (all three heads), "SE-fc".
struct SharePlan {
  ShareStrategy strategy = ShareStrategy::kSemi3;
  std::vector<ShareRule> rules;

  static SharePlan make(ShareStrategy strategy);

  // group id -> member names, members in donor-first order.
  std::map<std::string, std::vector<std::string>> groups(const std::vector<std::string>& names) const;
};

// Local names starting with "conv" are convolutions; "fc", "embed" and
// "cls" belong to the embedding head.
bool local_name_is(const std::string& local, LayerKind kind);

struct TieReport {
  struct Group {
    std::string id;
    std::vector<std::string> members;
    bool identical = true;
  };
  std::vector<Group> groups;

  bool all_identical() const;
  // True when every group of the given family (prefix before '/') is identical.
  bool family_identical(const std::string& family) const;
  std::size_t family_size(const std::string& family) const;
};

/// Named trainable tensors. Tied names alias one Parameter object, so any
/// read through one member observes updates made through another.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0);

  std::shared_ptr<Parameter> add(const std::string& name, const Shape& shape, Init init);
  std::shared_ptr<Parameter> get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  // Registration order.
  const std::vector<std::string>& names() const noexcept { return order_; }
  // One entry per underlying tensor, in order of first registration.
  std::vector<std::shared_ptr<Parameter>> unique_parameters() const;

  void tie(const SharePlan& plan);
  // Ties an explicit group; the first member's values win.
  void tie_group(const std::string& group_id, const std::vector<std::string>& members);
  const std::map<std::string, std::vector<std::string>>& groups() const noexcept { return groups_; }

  // Re-draws a parameter from its init with the store's generator.
  void reinitialize(const std::string& name, Init init);

  std::mt19937_64& rng() noexcept { return rng_; }

 private:
  std::map<std::string, std::shared_ptr<Parameter>> entries_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::string>> groups_;
  std::mt19937_64 rng_;
};

/// Whether every member of every plan group is bitwise identical.
TieReport assert_tied(const ParameterStore& store, const SharePlan& plan);

}  // namespace semi3
