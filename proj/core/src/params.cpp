#include "convdysat/params.hpp"

#include <cstring>

#include "convdysat/error.hpp"

namespace convdysat {

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  value.set_requires_grad(true);
  auto [it, inserted] = tensors_.insert_or_assign(name, std::move(value));
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeMismatchError("missing parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeMismatchError("missing parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

void ParameterSet::clear_grad() {
  for (auto& [name, t] : tensors_) t.clear_grad();
}

bool ParameterSet::identical(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  for (; a != tensors_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
    if (std::memcmp(a->second.data().data(), b->second.data().data(), a->second.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace convdysat
