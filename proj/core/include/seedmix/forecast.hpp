#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "seedmix/domain.hpp"

namespace seedmix {

// Min-max bounds of one attribute over the training set. A zero-width range is
// widened to span 1 so normalization stays invertible.
struct MinMax {
  double min = 0.0;
  double max = 1.0;

  double span() const { return max > min ? max - min : 1.0; }
  double normalize(double v) const { return (v - min) / span(); }
  double denormalize(double v) const { return min + v * span(); }

  friend bool operator==(const MinMax&, const MinMax&) = default;
};

struct SequencePair {
  std::string sub_region;
  std::vector<double> input;
  double target = 0.0;
};

enum class UpdateRule { gradient_descent, adam };

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.03;
  std::uint64_t seed = 1;
  std::size_t hidden_size = 16;
  UpdateRule rule = UpdateRule::adam;
};

void validate(const TrainConfig& config);

// Single-layer LSTM cell over a scalar series with a linear readout of the
// final hidden state. Parameters live in one flat vector:
//
//   [ w_input (4H) | w_recurrent (4H x H, row-major) | bias (4H) |
//     w_readout (H) | b_readout (1) ]
//
// Gate rows are ordered input, forget, candidate, output.
class SequenceModel {
 public:
  SequenceModel(std::size_t hidden_size, MinMax bounds);

  // Uniform [-0.1, 0.1] weights, forget-gate bias 1.
  static SequenceModel initialized(std::size_t hidden_size, MinMax bounds, std::uint64_t seed);

  static std::size_t parameter_count(std::size_t hidden_size);

  std::size_t hidden_size() const { return hidden_; }
  const MinMax& bounds() const { return bounds_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  std::span<const double> w_input() const;
  std::span<const double> w_recurrent() const;
  std::span<const double> bias() const;
  std::span<const double> w_readout() const;
  double b_readout() const { return params_.back(); }

  // Output in normalized units for an already-normalized input sequence.
  double forward_normalized(std::span<const double> sequence) const;

  friend bool operator==(const SequenceModel&, const SequenceModel&) = default;

 private:
  std::size_t hidden_;
  MinMax bounds_;
  std::vector<double> params_;
};

// One (sequence, target) pair per sub-region for `weather_attribute`. Inputs
// are the raw values of years [first_year, target_year - 1]; the target is the
// value at target_year. first_year defaults to the earliest year present.
// Throws DataGapError naming the sub-region and year when a value is missing.
std::vector<SequencePair> make_sequences(const RegionMap& regions,
                                         std::size_t weather_attribute, int target_year,
                                         std::optional<int> first_year = std::nullopt);

MinMax fit_bounds(const std::vector<SequencePair>& pairs);
std::vector<SequencePair> normalize(const std::vector<SequencePair>& pairs, const MinMax& bounds);

// Mean squared error over normalized pairs; fills `gradient` (same layout as
// the parameters) when non-null.
double loss_and_gradient(const SequenceModel& model, const std::vector<SequencePair>& normalized,
                         std::vector<double>* gradient);

// Full-batch training on raw pairs. Throws DivergenceError on a non-finite
// loss and ArgumentError on empty input or ragged sequences.
SequenceModel train(const std::vector<SequencePair>& pairs, const TrainConfig& config);

// Training loss (normalized units) recorded after each epoch.
struct TrainHistory {
  std::vector<double> loss;
};
SequenceModel train(const std::vector<SequencePair>& pairs, const TrainConfig& config,
                    TrainHistory* history);

// De-normalized one-step-ahead prediction for a raw sequence.
double predict_next(const SequenceModel& model, std::span<const double> sequence);

double rmse(std::span<const double> actual, std::span<const double> predicted);
// RMSE divided by the range of `actual`, in percent.
double n_rmse(std::span<const double> actual, std::span<const double> predicted);

// Predicts every pair and returns the N-RMSE against the targets.
double evaluate_n_rmse(const SequenceModel& model, const std::vector<SequencePair>& pairs);

// One model per weather attribute, keyed by attribute name.
struct ForecastModels {
  std::map<std::string, SequenceModel> by_attribute;

  const SequenceModel& at(std::string_view attribute) const;
};

nlohmann::json to_json(const SequenceModel& model);
SequenceModel sequence_model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ForecastModels& models);
ForecastModels forecast_models_from_json(const nlohmann::json& doc);

}  // namespace seedmix
