#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlsmo/random.hpp"

namespace mlsmo {

enum class ModelKind { kGbt, kMlp, kEnsemble };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Flat key -> value map. Integer and categorical parameters are stored as
// doubles and rounded where they are consumed.
class Hyperparameters {
 public:
  Hyperparameters() = default;
  Hyperparameters(std::initializer_list<std::pair<const std::string, double>> values)
      : values_(values) {}

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  double get(const std::string& key) const;
  double get_or(const std::string& key, double fallback) const;
  void set(const std::string& key, double value) { values_[key] = value; }

  const std::map<std::string, double>& values() const noexcept { return values_; }
  std::string to_string() const;

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;

 private:
  std::map<std::string, double> values_;
};

// One tunable dimension. A non-empty `choices` list makes it categorical;
// otherwise values are drawn from [low, high], log-uniformly if requested.
struct ParamRange {
  std::string name;
  double low = 0.0;
  double high = 0.0;
  bool log_scale = false;
  bool integer = false;
  std::vector<double> choices;

  double sample(Rng& rng) const;
};

struct SearchSpace {
  std::vector<ParamRange> params;
  bool empty() const noexcept { return params.empty(); }
};

Hyperparameters default_hyperparameters(ModelKind kind);

// Throws Error(kInvalidArgument) if any known key lies outside the declared
// limits for the model kind, or an unknown key is present.
void validate_hyperparameters(ModelKind kind, const Hyperparameters& hp);

SearchSpace default_search_space(ModelKind kind);
// Two hidden layers with tanh; fills the second deep-model slot.
SearchSpace alternate_mlp_search_space();

}  // namespace mlsmo
