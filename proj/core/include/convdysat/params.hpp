#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "convdysat/tensor.hpp"

namespace convdysat {

// Named trainable tensors. Iteration order is lexicographic by name, which fixes the
// order of every reduction over parameters.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  void zero_grad();
  void clear_grad();

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  // Bitwise equality of names, shapes and values.
  bool identical(const ParameterSet& other) const;

 private:
  std::map<std::string, Tensor> tensors_;
};

}  // namespace convdysat
