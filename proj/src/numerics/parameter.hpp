#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "numerics/tensor.hpp"

namespace dvr::num {

// A learnable tensor with its gradient buffer. `group` names the parameter
// group (e.g. "video_embed") used for freezing and diagnostics.
struct Parameter {
  std::string name;
  std::string group;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;

  Parameter(std::string name, std::string group, Tensor init);
  void zero_grad() { grad.fill(0.0); }
};

// Owns parameters in registration order. Names are unique.
class ParameterStore {
 public:
  Parameter& add(std::string name, std::string group, Tensor init);
  Parameter& add_uniform(std::string name, std::string group, Shape shape, double bound, std::mt19937_64& rng);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> group(const std::string& group);

  void zero_grad();
  std::size_t count() const;
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace dvr::num
