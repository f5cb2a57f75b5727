#include "seedmix/forecast.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "seedmix/errors.hpp"
#include "seedmix/random.hpp"

namespace seedmix {
namespace {

constexpr int kModelVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Offsets {
  std::size_t w_input, w_recurrent, bias, w_readout, b_readout, total;

  explicit Offsets(std::size_t h)
      : w_input(0),
        w_recurrent(4 * h),
        bias(4 * h + 4 * h * h),
        w_readout(8 * h + 4 * h * h),
        b_readout(9 * h + 4 * h * h),
        total(9 * h + 4 * h * h + 1) {}
};

// Activations of one time step, kept for the backward pass.
struct StepCache {
  std::vector<double> i, f, g, o, c, tanh_c, h;
};

// Runs the cell over `seq`; caches[t] holds step t, caches[0] is the zero state.
double run_forward(std::span<const double> p, std::size_t hidden, std::span<const double> seq,
                   std::vector<StepCache>* caches) {
  const Offsets off(hidden);
  const std::size_t H = hidden;
  std::vector<double> h(H, 0.0), c(H, 0.0), z(4 * H);
  if (caches) {
    caches->assign(seq.size() + 1, StepCache{});
    (*caches)[0].h = h;
    (*caches)[0].c = c;
  }
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const double x = seq[t];
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double acc = p[off.w_input + r] * x + p[off.bias + r];
      const double* row = p.data() + off.w_recurrent + r * H;
      for (std::size_t j = 0; j < H; ++j) acc += row[j] * h[j];
      z[r] = acc;
    }
    StepCache step;
    if (caches) {
      step.i.resize(H);
      step.f.resize(H);
      step.g.resize(H);
      step.o.resize(H);
      step.tanh_c.resize(H);
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double ig = sigmoid(z[j]);
      const double fg = sigmoid(z[H + j]);
      const double gg = std::tanh(z[2 * H + j]);
      const double og = sigmoid(z[3 * H + j]);
      c[j] = fg * c[j] + ig * gg;
      const double tc = std::tanh(c[j]);
      h[j] = og * tc;
      if (caches) {
        step.i[j] = ig;
        step.f[j] = fg;
        step.g[j] = gg;
        step.o[j] = og;
        step.tanh_c[j] = tc;
      }
    }
    if (caches) {
      step.c = c;
      step.h = h;
      (*caches)[t + 1] = std::move(step);
    }
  }
  double y = p[off.b_readout];
  for (std::size_t j = 0; j < H; ++j) y += p[off.w_readout + j] * h[j];
  return y;
}

// Accumulates d(scale * (y - target)^2)/d(params) into grad.
void backward(std::span<const double> p, std::size_t hidden, std::span<const double> seq,
              const std::vector<StepCache>& caches, double dy, std::vector<double>& grad) {
  const Offsets off(hidden);
  const std::size_t H = hidden;
  const std::size_t T = seq.size();

  grad[off.b_readout] += dy;
  std::vector<double> dh(H), dc(H, 0.0), dz(4 * H);
  for (std::size_t j = 0; j < H; ++j) {
    grad[off.w_readout + j] += dy * caches[T].h[j];
    dh[j] = dy * p[off.w_readout + j];
  }
  for (std::size_t t = T; t >= 1; --t) {
    const StepCache& s = caches[t];
    const std::vector<double>& c_prev = caches[t - 1].c;
    const std::vector<double>& h_prev = caches[t - 1].h;
    for (std::size_t j = 0; j < H; ++j) {
      const double d_o = dh[j] * s.tanh_c[j];
      dc[j] += dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
      const double d_i = dc[j] * s.g[j];
      const double d_g = dc[j] * s.i[j];
      const double d_f = dc[j] * c_prev[j];
      dz[j] = d_i * s.i[j] * (1.0 - s.i[j]);
      dz[H + j] = d_f * s.f[j] * (1.0 - s.f[j]);
      dz[2 * H + j] = d_g * (1.0 - s.g[j] * s.g[j]);
      dz[3 * H + j] = d_o * s.o[j] * (1.0 - s.o[j]);
      dc[j] *= s.f[j];
    }
    const double x = seq[t - 1];
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      grad[off.w_input + r] += dz[r] * x;
      grad[off.bias + r] += dz[r];
      double* grow = grad.data() + off.w_recurrent + r * H;
      const double* prow = p.data() + off.w_recurrent + r * H;
      for (std::size_t j = 0; j < H; ++j) {
        grow[j] += dz[r] * h_prev[j];
        dh[j] += prow[j] * dz[r];
      }
    }
  }
}

void check_pairs(const std::vector<SequencePair>& pairs) {
  if (pairs.empty()) throw ArgumentError("training requires at least one sequence pair");
  const std::size_t len = pairs.front().input.size();
  if (len == 0) throw ArgumentError("sequences must be non-empty");
  for (const auto& pair : pairs) {
    if (pair.input.size() != len) throw ArgumentError("sequences must have equal length");
  }
}

std::vector<double> json_array(const nlohmann::json& doc, const char* key, std::size_t expected) {
  const auto& node = doc.at(key);
  auto values = node.get<std::vector<double>>();
  if (values.size() != expected) {
    throw SchemaError(std::string("model field '") + key + "' has wrong length");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError(std::string("non-finite value in '") + key + "'");
  }
  return values;
}

}  // namespace

void validate(const TrainConfig& config) {
  if (config.epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw ArgumentError("learning_rate must be a finite non-negative number");
  }
  if (config.hidden_size < 1) throw ArgumentError("hidden_size must be >= 1");
}

SequenceModel::SequenceModel(std::size_t hidden_size, MinMax bounds)
    : hidden_(hidden_size), bounds_(bounds), params_(parameter_count(hidden_size), 0.0) {
  if (hidden_size < 1) throw ArgumentError("hidden_size must be >= 1");
}

SequenceModel SequenceModel::initialized(std::size_t hidden_size, MinMax bounds,
                                         std::uint64_t seed) {
  SequenceModel model(hidden_size, bounds);
  Rng rng(seed);
  for (double& w : model.params_) w = rng.uniform(-0.1, 0.1);
  const Offsets off(hidden_size);
  for (std::size_t j = 0; j < hidden_size; ++j) model.params_[off.bias + hidden_size + j] = 1.0;
  return model;
}

std::size_t SequenceModel::parameter_count(std::size_t hidden_size) {
  return Offsets(hidden_size).total;
}

std::span<const double> SequenceModel::w_input() const {
  const Offsets off(hidden_);
  return std::span<const double>(params_).subspan(off.w_input, 4 * hidden_);
}
std::span<const double> SequenceModel::w_recurrent() const {
  const Offsets off(hidden_);
  return std::span<const double>(params_).subspan(off.w_recurrent, 4 * hidden_ * hidden_);
}
std::span<const double> SequenceModel::bias() const {
  const Offsets off(hidden_);
  return std::span<const double>(params_).subspan(off.bias, 4 * hidden_);
}
std::span<const double> SequenceModel::w_readout() const {
  const Offsets off(hidden_);
  return std::span<const double>(params_).subspan(off.w_readout, hidden_);
}

double SequenceModel::forward_normalized(std::span<const double> sequence) const {
  return run_forward(params_, hidden_, sequence, nullptr);
}

std::vector<SequencePair> make_sequences(const RegionMap& regions, std::size_t weather_attribute,
                                         int target_year, std::optional<int> first_year) {
  if (weather_attribute >= kWeatherCount) throw ArgumentError("unknown weather attribute index");
  int start = 0;
  if (first_year) {
    start = *first_year;
  } else {
    bool any = false;
    for (const auto& [id, region] : regions) {
      const YearSeries& series = region.weather[weather_attribute];
      if (series.empty()) continue;
      start = any ? std::min(start, series.begin()->first) : series.begin()->first;
      any = true;
    }
    if (!any) return {};
  }
  if (target_year <= start) {
    throw ArgumentError("target year must come after the first input year");
  }

  std::vector<SequencePair> pairs;
  pairs.reserve(regions.size());
  for (const auto& [id, region] : regions) {
    const YearSeries& series = region.weather[weather_attribute];
    SequencePair pair;
    pair.sub_region = id;
    pair.input.reserve(static_cast<std::size_t>(target_year - start));
    for (int year = start; year <= target_year; ++year) {
      const auto it = series.find(year);
      if (it == series.end()) {
        throw DataGapError("sub-region " + id + " is missing " +
                           std::string(kWeatherAttributes[weather_attribute]) + " for year " +
                           std::to_string(year));
      }
      if (year == target_year) {
        pair.target = it->second;
      } else {
        pair.input.push_back(it->second);
      }
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

MinMax fit_bounds(const std::vector<SequencePair>& pairs) {
  if (pairs.empty()) throw ArgumentError("cannot fit bounds on an empty set");
  MinMax b{pairs.front().target, pairs.front().target};
  for (const auto& pair : pairs) {
    b.min = std::min(b.min, pair.target);
    b.max = std::max(b.max, pair.target);
    for (double v : pair.input) {
      b.min = std::min(b.min, v);
      b.max = std::max(b.max, v);
    }
  }
  return b;
}

std::vector<SequencePair> normalize(const std::vector<SequencePair>& pairs, const MinMax& bounds) {
  std::vector<SequencePair> out = pairs;
  for (auto& pair : out) {
    for (double& v : pair.input) v = bounds.normalize(v);
    pair.target = bounds.normalize(pair.target);
  }
  return out;
}

double loss_and_gradient(const SequenceModel& model, const std::vector<SequencePair>& normalized,
                         std::vector<double>* gradient) {
  const auto params = model.parameters();
  if (gradient) gradient->assign(params.size(), 0.0);
  if (normalized.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(normalized.size());
  double loss = 0.0;
  std::vector<StepCache> caches;
  for (const auto& pair : normalized) {
    const double y = run_forward(params, model.hidden_size(), pair.input,
                                 gradient ? &caches : nullptr);
    const double err = y - pair.target;
    loss += scale * err * err;
    if (gradient) backward(params, model.hidden_size(), pair.input, caches, 2.0 * scale * err, *gradient);
  }
  return loss;
}

SequenceModel train(const std::vector<SequencePair>& pairs, const TrainConfig& config) {
  return train(pairs, config, nullptr);
}

SequenceModel train(const std::vector<SequencePair>& pairs, const TrainConfig& config,
                    TrainHistory* history) {
  validate(config);
  check_pairs(pairs);
  const MinMax bounds = fit_bounds(pairs);
  const auto data = normalize(pairs, bounds);
  SequenceModel model = SequenceModel::initialized(config.hidden_size, bounds, config.seed);
  auto params = model.parameters();

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<double> grad, m(params.size(), 0.0), v(params.size(), 0.0);
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = loss_and_gradient(model, data, &grad);
    if (!std::isfinite(loss)) {
      throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (config.rule == UpdateRule::gradient_descent) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grad[i];
    } else {
      beta1_power *= kBeta1;
      beta2_power *= kBeta2;
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        const double m_hat = m[i] / (1.0 - beta1_power);
        const double v_hat = v[i] / (1.0 - beta2_power);
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
      }
    }
    if (history) history->loss.push_back(loss_and_gradient(model, data, nullptr));
  }
  for (double w : model.parameters()) {
    if (!std::isfinite(w)) throw DivergenceError("parameters became non-finite after training");
  }
  return model;
}

double predict_next(const SequenceModel& model, std::span<const double> sequence) {
  if (sequence.empty()) throw ArgumentError("prediction requires a non-empty sequence");
  std::vector<double> normalized(sequence.begin(), sequence.end());
  for (double& v : normalized) {
    if (!std::isfinite(v)) throw ArgumentError("prediction sequence must be finite");
    v = model.bounds().normalize(v);
  }
  return model.bounds().denormalize(model.forward_normalized(normalized));
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty() || actual.size() != predicted.size()) {
    throw ArgumentError("rmse requires equal non-zero lengths");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

double n_rmse(std::span<const double> actual, std::span<const double> predicted) {
  const double r = rmse(actual, predicted);
  const auto [lo, hi] = std::minmax_element(actual.begin(), actual.end());
  if (!(*hi > *lo)) throw DegenerateRangeError("n_rmse undefined: actual values are constant");
  return r / (*hi - *lo) * 100.0;
}

double evaluate_n_rmse(const SequenceModel& model, const std::vector<SequencePair>& pairs) {
  std::vector<double> actual, predicted;
  actual.reserve(pairs.size());
  predicted.reserve(pairs.size());
  for (const auto& pair : pairs) {
    actual.push_back(pair.target);
    predicted.push_back(predict_next(model, pair.input));
  }
  return n_rmse(actual, predicted);
}

const SequenceModel& ForecastModels::at(std::string_view attribute) const {
  const auto it = by_attribute.find(std::string(attribute));
  if (it == by_attribute.end()) {
    throw KeyError("no forecast model for attribute " + std::string(attribute));
  }
  return it->second;
}

nlohmann::json to_json(const SequenceModel& model) {
  const auto span_vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  return nlohmann::json{
      {"format", "seedmix.sequence_model"},
      {"version", kModelVersion},
      {"hidden_size", model.hidden_size()},
      {"norm_min", model.bounds().min},
      {"norm_max", model.bounds().max},
      {"w_input", span_vec(model.w_input())},
      {"w_recurrent", span_vec(model.w_recurrent())},
      {"bias", span_vec(model.bias())},
      {"w_readout", span_vec(model.w_readout())},
      {"b_readout", std::vector<double>{model.b_readout()}},
  };
}

SequenceModel sequence_model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "seedmix.sequence_model") {
      throw SchemaError("not a sequence model document");
    }
    if (doc.at("version").get<int>() != kModelVersion) {
      throw SchemaError("unsupported sequence model version");
    }
    const auto h = doc.at("hidden_size").get<std::size_t>();
    SequenceModel model(h, MinMax{doc.at("norm_min").get<double>(), doc.at("norm_max").get<double>()});
    const Offsets off(h);
    auto p = model.parameters();
    const auto copy_into = [&](const char* key, std::size_t offset, std::size_t count) {
      const auto values = json_array(doc, key, count);
      std::copy(values.begin(), values.end(), p.begin() + static_cast<std::ptrdiff_t>(offset));
    };
    copy_into("w_input", off.w_input, 4 * h);
    copy_into("w_recurrent", off.w_recurrent, 4 * h * h);
    copy_into("bias", off.bias, 4 * h);
    copy_into("w_readout", off.w_readout, h);
    copy_into("b_readout", off.b_readout, 1);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed sequence model: ") + e.what());
  }
}

nlohmann::json to_json(const ForecastModels& models) {
  nlohmann::json by_attribute = nlohmann::json::object();
  for (const auto& [name, model] : models.by_attribute) by_attribute[name] = to_json(model);
  return nlohmann::json{{"format", "seedmix.forecast_models"},
                        {"version", kModelVersion},
                        {"models", by_attribute}};
}

ForecastModels forecast_models_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "seedmix.forecast_models") {
      throw SchemaError("not a forecast model bundle");
    }
    if (doc.at("version").get<int>() != kModelVersion) {
      throw SchemaError("unsupported forecast model bundle version");
    }
    ForecastModels models;
    for (const auto& [name, node] : doc.at("models").items()) {
      models.by_attribute.emplace(name, sequence_model_from_json(node));
    }
    return models;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed forecast model bundle: ") + e.what());
  }
}

}  // namespace seedmix
