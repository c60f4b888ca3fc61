#include "semi3/param_store.hpp"

#include "semi3/errors.hpp"

#include <algorithm>
#include <set>

namespace semi3 {
namespace {

Tensor draw(const Shape& shape, Init init, std::mt19937_64& rng) {
  Tensor t(shape);
  switch (init.kind) {
    case Init::Kind::kZeros:
      break;
    case Init::Kind::kGaussian: {
      std::normal_distribution<double> normal(0.0, init.sigma);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
      break;
    }
    case Init::Kind::kIdentity:
      if (shape.size() != 2 || shape[0] != shape[1]) {
        throw ContractError("identity init requires a square matrix, got " + shape_string(shape));
      }
      for (std::size_t i = 0; i < shape[0]; ++i) t[i * shape[0] + i] = 1.0;
      break;
  }
  return t;
}

}  // namespace

std::string to_string(ShareStrategy strategy) {
  switch (strategy) {
    case ShareStrategy::kSemi3:
      return "semi3";
    case ShareStrategy::kAllSharing:
      return "all_sharing";
    case ShareStrategy::kFcOnly:
      return "fc_only";
    case ShareStrategy::kSketchEdgemapOnly:
      return "sketch_edgemap_only";
  }
  return "semi3";
}

ShareStrategy parse_share_strategy(const std::string& text) {
  for (ShareStrategy s : {ShareStrategy::kSemi3, ShareStrategy::kAllSharing, ShareStrategy::kFcOnly,
                          ShareStrategy::kSketchEdgemapOnly}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown share strategy '" + text + "'");
}

bool local_name_is(const std::string& local, LayerKind kind) {
  auto starts = [&](const char* prefix) { return local.rfind(prefix, 0) == 0; };
  if (kind == LayerKind::kConv) return starts("conv");
  return starts("fc") || starts("embed") || starts("cls");
}

SharePlan SharePlan::make(ShareStrategy strategy) {
  const std::vector<std::string> se{"sketch", "edgemap"};
  const std::vector<std::string> all{"sketch", "image", "edgemap"};
  SharePlan plan;
  plan.strategy = strategy;
  switch (strategy) {
    case ShareStrategy::kSemi3:
      plan.rules = {{"SE-conv", se, LayerKind::kConv}, {"FC-all", all, LayerKind::kHead}};
      break;
    case ShareStrategy::kAllSharing:
      plan.rules = {{"conv-all", all, LayerKind::kConv}, {"FC-all", all, LayerKind::kHead}};
      break;
    case ShareStrategy::kFcOnly:
      plan.rules = {{"FC-all", all, LayerKind::kHead}};
      break;
    case ShareStrategy::kSketchEdgemapOnly:
      plan.rules = {{"SE-conv", se, LayerKind::kConv}};
      break;
  }
  return plan;
}

std::map<std::string, std::vector<std::string>> SharePlan::groups(const std::vector<std::string>& names) const {
  const std::set<std::string> present(names.begin(), names.end());
  std::map<std::string, std::vector<std::string>> out;
  for (const ShareRule& rule : rules) {
    // Local names are discovered from the donor role, then required of every other role.
    const std::string donor_prefix = rule.roles.front() + ".";
    for (const std::string& name : names) {
      if (name.rfind(donor_prefix, 0) != 0) continue;
      const std::string local = name.substr(donor_prefix.size());
      if (!local_name_is(local, rule.kind)) continue;
      std::vector<std::string> members;
      for (const std::string& role : rule.roles) {
        const std::string member = role + "." + local;
        if (!present.count(member)) {
          throw ContractError("share plan " + to_string(strategy) + " expects parameter '" + member + "'");
        }
        members.push_back(member);
      }
      out[rule.family + "/" + local] = std::move(members);
    }
    for (const std::string& role : rule.roles) {
      const std::string prefix = role + ".";
      for (const std::string& name : names) {
        if (name.rfind(prefix, 0) != 0 || !local_name_is(name.substr(prefix.size()), rule.kind)) continue;
        if (!present.count(donor_prefix + name.substr(prefix.size()))) {
          throw ContractError("share plan " + to_string(strategy) + ": '" + name + "' has no donor counterpart");
        }
      }
    }
  }
  return out;
}

bool TieReport::all_identical() const {
  return std::all_of(groups.begin(), groups.end(), [](const Group& g) { return g.identical; });
}

bool TieReport::family_identical(const std::string& family) const {
  const std::string prefix = family + "/";
  return std::all_of(groups.begin(), groups.end(),
                     [&](const Group& g) { return g.id.rfind(prefix, 0) != 0 || g.identical; });
}

std::size_t TieReport::family_size(const std::string& family) const {
  const std::string prefix = family + "/";
  return static_cast<std::size_t>(
      std::count_if(groups.begin(), groups.end(), [&](const Group& g) { return g.id.rfind(prefix, 0) == 0; }));
}

ParameterStore::ParameterStore(std::uint64_t seed) : rng_(seed) {}

std::shared_ptr<Parameter> ParameterStore::add(const std::string& name, const Shape& shape, Init init) {
  if (entries_.count(name)) throw ContractError("parameter '" + name + "' already registered");
  auto parameter = std::make_shared<Parameter>();
  parameter->name = name;
  parameter->value = draw(shape, init, rng_);
  parameter->velocity = Tensor(shape);
  entries_.emplace(name, parameter);
  order_.push_back(name);
  return parameter;
}

std::shared_ptr<Parameter> ParameterStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::shared_ptr<Parameter>> ParameterStore::unique_parameters() const {
  std::vector<std::shared_ptr<Parameter>> out;
  std::set<const Parameter*> seen;
  for (const std::string& name : order_) {
    const auto& p = entries_.at(name);
    if (seen.insert(p.get()).second) out.push_back(p);
  }
  return out;
}

void ParameterStore::tie_group(const std::string& group_id, const std::vector<std::string>& members) {
  if (members.empty()) return;
  const auto donor = get(members.front());
  for (const std::string& member : members) {
    const auto p = get(member);
    if (p->value.shape() != donor->value.shape()) {
      throw DimensionError("cannot tie '" + member + "' " + shape_string(p->value.shape()) + " with '" +
                           members.front() + "' " + shape_string(donor->value.shape()));
    }
  }
  for (const std::string& member : members) entries_[member] = donor;
  groups_[group_id] = members;
}

void ParameterStore::tie(const SharePlan& plan) {
  for (const auto& [id, members] : plan.groups(order_)) tie_group(id, members);
}

void ParameterStore::reinitialize(const std::string& name, Init init) {
  auto p = get(name);
  p->value = draw(p->value.shape(), init, rng_);
  p->velocity = Tensor(p->value.shape());
}

TieReport assert_tied(const ParameterStore& store, const SharePlan& plan) {
  TieReport report;
  for (const auto& [id, members] : plan.groups(store.names())) {
    TieReport::Group group{id, members, true};
    const Tensor& first = store.get(members.front())->value;
    for (const std::string& member : members) {
      group.identical = group.identical && bitwise_equal(first, store.get(member)->value);
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace semi3
