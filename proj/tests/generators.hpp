#pragma once

// Deterministic random inputs shared by the unit and acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "crts/model.hpp"
#include "crts/eval.hpp"

namespace crts::testing {

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  int range(int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(engine_) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(range(0, static_cast<int>(v.size()) - 1))];
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Reference formula tree, independent of ExprGraph: the oracle evaluates
// this shape directly.
struct Formula {
  enum class Kind { Leaf, And, Or };
  Kind kind = Kind::Leaf;
  std::string leaf;
  std::vector<Formula> children;
};

// Random AND/OR tree over at most max_leaves distinct leaves; leaves may be
// shared between branches.
Formula random_formula(Rng& rng, int max_leaves, int depth = 0);

// Distinct leaf names, in first-appearance order.
std::vector<std::string> formula_leaves(const Formula& f);

// Rebuild the formula as a population section (each leaf becomes a disorder,
// each internal node an ExprNode) so graph construction is exercised the
// same way production inputs are.
Population formula_to_population(const Formula& f);

Recommendation random_recommendation(Rng& rng, const std::string& doc_id);

// Patient with vocabulary overlapping random_recommendation's pools.
PatientRecord random_patient(Rng& rng);

}  // namespace crts::testing
