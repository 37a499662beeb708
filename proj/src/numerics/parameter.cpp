#include "numerics/parameter.hpp"

#include "common/error.hpp"

namespace dvr::num {

Parameter::Parameter(std::string n, std::string g, Tensor init)
    : name(std::move(n)), group(std::move(g)), value(std::move(init)), grad(value.shape(), 0.0) {}

Parameter& ParameterStore::add(std::string name, std::string group, Tensor init) {
  if (find(name)) throw InvalidArgument("parameter '" + name + "' registered twice");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(group), std::move(init)));
  return *params_.back();
}

Parameter& ParameterStore::add_uniform(std::string name, std::string group, Shape shape, double bound,
                                       std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng);
  return add(std::move(name), std::move(group), std::move(t));
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterStore::get(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw NotFound("no parameter named '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw NotFound("no parameter named '" + name + "'");
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterStore::group(const std::string& group) {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p->group == group) out.push_back(p.get());
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

}  // namespace dvr::num
