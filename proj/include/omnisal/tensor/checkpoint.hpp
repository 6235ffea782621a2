#pragma once

#include <map>
#include <string>
#include <vector>

#include "omnisal/common/rng.hpp"
#include "omnisal/tensor/tensor.hpp"

namespace omnisal::ag {

// Ordered collection of named parameter tensors. Name order is lexicographic
// and drives the checkpoint blob layout, so save/load round-trips exactly.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Shape shape, bool requires_grad = true);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::vector<std::string> names() const;
  std::vector<Tensor> tensors() const;
  std::vector<Tensor> tensors(const std::vector<std::string>& names) const;
  std::size_t total_parameters() const;
  void zero_grads();

  // Writes <basename>.json (manifest) and <basename>.bin (raw little-endian
  // f64/f32 blob). Loading validates names and shapes against the manifest.
  void save(const std::string& basename, bool as_f32 = false) const;
  void save_subset(const std::string& basename, const std::vector<std::string>& names,
                   bool as_f32 = false) const;
  void load(const std::string& basename);

  // Loads a checkpoint that may contain only a subset of this store's
  // parameters (adapter-only checkpoints on top of a visual one).
  void load_partial(const std::string& basename);

 private:
  std::map<std::string, Tensor> params_;
};

namespace init {

void zeros(Tensor& t);
void constant(Tensor& t, double v);
void uniform(Tensor& t, Rng& rng, double lo, double hi);
void normal(Tensor& t, Rng& rng, double mean, double stddev);
// Kaiming-style scaling for relu stacks: N(0, sqrt(2 / fan_in) * gain).
void kaiming(Tensor& t, Rng& rng, std::size_t fan_in, double gain = 1.0);

}  // namespace init

}  // namespace omnisal::ag
