#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "greenhouse/episode.hpp"
#include "greenhouse/rng.hpp"

namespace greenhouse {

enum class CellKind { kLstm, kGru };

std::string cell_kind_name(CellKind kind);
CellKind cell_kind_from_name(const std::string& name);

// Architecture: two bidirectional recurrent layers (hidden units per
// direction), final-step features through a two-layer dense head.
struct NetDims {
  int input = 11;
  int hidden = 16;
  int output = 4;
  int window = 24;

  void validate() const;
};

inline constexpr int kNumLayers = 2;
inline constexpr int kNumDirections = 2;

// Per-step feature order: d1..d4, u1..u3, y1..y4. Channels 11..14 scale the
// prediction targets.
inline constexpr int kFeatureCount = 11;
inline constexpr int kTargetCount = 4;
inline constexpr int kScalerChannels = kFeatureCount + kTargetCount;

std::array<double, kFeatureCount> record_features(const EpisodeRecord& r);

// Unit-range normalization fitted on the training split only.
struct Scaler {
  std::array<double, kScalerChannels> min{};
  std::array<double, kScalerChannels> max{};

  double normalize(int channel, double v) const { return (v - min[channel]) / span(channel); }
  double denormalize(int channel, double v) const { return min[channel] + v * span(channel); }
  double span(int channel) const { return max[channel] - min[channel]; }
};

Scaler fit_scaler(const std::vector<EpisodeLog>& train_episodes);

// Normalized input window (row-major window x 11) and next-step target.
struct WindowSample {
  std::vector<double> features;
  std::array<double, kTargetCount> target{};
};

struct WindowSet {
  int window = 0;
  std::vector<WindowSample> samples;
  std::size_t skipped_episodes = 0;  // episodes shorter than window + 1
};

// Per episode of length L: L - window samples; windows never cross episodes.
WindowSet make_windows(const std::vector<EpisodeLog>& episodes, int window, const Scaler& scaler);

// --- cells ------------------------------------------------------------------

// Gate parameter block: per gate a row-major weight matrix over the
// concatenated [h_prev, x] vector followed by its bias. Gate order is
// input, forget, candidate, output for LSTM and update, reset, candidate
// for GRU.
struct CellStep {
  std::vector<double> h;
  std::vector<double> c;      // LSTM only
  std::vector<double> gates;  // activated gate values, one block per gate
};

CellStep lstm_cell_forward(const std::vector<double>& x, const std::vector<double>& h_prev,
                           const std::vector<double>& c_prev,
                           const std::vector<double>& gate_params, int hidden);

CellStep gru_cell_forward(const std::vector<double>& x, const std::vector<double>& h_prev,
                          const std::vector<double>& gate_params, int hidden);

std::size_t cell_param_count(CellKind kind, int hidden, int input);

// --- network ----------------------------------------------------------------

struct NetworkWeights {
  CellKind kind = CellKind::kGru;
  NetDims dims;
  Scaler scaler;
  std::vector<double> params;
};

std::size_t param_count(CellKind kind, const NetDims& dims);
std::size_t recurrent_param_count(CellKind kind, const NetDims& dims);

// Seeded uniform(-1/sqrt(hidden), 1/sqrt(hidden)) initialization.
NetworkWeights init_network(CellKind kind, const NetDims& dims, const Scaler& scaler,
                            std::uint64_t seed);

// Intermediate activations recorded by forward() for exact backpropagation.
struct ForwardCache {
  int window = 0;
  std::vector<double> layer1_in;  // layer-0 outputs, window x 2*hidden
  // [layer][direction], position-major
  std::vector<double> gates[kNumLayers][kNumDirections];
  std::vector<double> cell[kNumLayers][kNumDirections];
  std::vector<double> hidden[kNumLayers][kNumDirections];
  std::vector<double> feat, head_pre, head_act, head_mask, head_drop;
  std::array<double, kTargetCount> pred{};
};

// Forward pass over one normalized window. In train mode a fresh dropout mask
// is drawn from rng; eval mode is deterministic.
void net_forward(const NetworkWeights& w, const double* window, int window_len, bool train,
                 double dropout_rate, Rng* rng, ForwardCache& cache);

// Exact gradient of a scalar loss with d(loss)/d(prediction) = dpred.
// Accumulates into param_grad (param-sized) and, when not null, into
// window_grad (window_len x input).
void net_backward(const NetworkWeights& w, const double* window, int window_len,
                  const ForwardCache& cache, const std::array<double, kTargetCount>& dpred,
                  std::vector<double>* param_grad, double* window_grad);

double mse_loss(const std::array<double, kTargetCount>& pred,
                const std::array<double, kTargetCount>& target);

// Mean batch MSE and its exact parameter gradient. Dropout masks are drawn
// per sample in train mode.
double batch_gradient(const NetworkWeights& w, const std::vector<WindowSample>& samples,
                      const std::vector<std::size_t>& batch_indices, bool train,
                      double dropout_rate, Rng* rng, std::vector<double>& param_grad,
                      ForwardCache& cache);

// --- optimization -----------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// lr0 * gamma^floor(epoch / step_size)
double steplr(double lr0, int epoch, int step_size, double gamma);

struct TrainConfig {
  int window = 24;
  int batch_size = 16;
  int epochs = 15;
  double learning_rate = 3e-5;
  int sched_step = 5;
  double sched_gamma = 0.5;
  double dropout = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> loss_history;   // mean train loss per epoch
  std::vector<double> epoch_seconds;  // wall time per epoch
};

// Deterministic in (seed, data, config): init, shuffling and dropout masks all
// derive from config.seed. Throws on NaN loss.
TrainResult train(CellKind kind, const std::vector<EpisodeLog>& train_episodes,
                  const TrainConfig& config);

struct EvalResult {
  double mse = 0.0;
  double rmse = 0.0;
};

// Normalized-unit MSE/RMSE on the test split using the training scaler.
EvalResult evaluate(const NetworkWeights& w, const std::vector<EpisodeLog>& test_episodes);
EvalResult evaluate_windows(const NetworkWeights& w, const WindowSet& windows);

// --- checkpoint io ----------------------------------------------------------

// Container layout: magic "SEQNET1", cell kind, dims, scaler, then all
// parameters little-endian f64 in layer/direction/gate order followed by the
// dense head.
void save_checkpoint(const NetworkWeights& w, const std::string& path);
NetworkWeights load_checkpoint(const std::string& path);

}  // namespace greenhouse
