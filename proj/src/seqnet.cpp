#include "greenhouse/seqnet.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace greenhouse {

namespace {

constexpr int kMaxHidden = 64;
constexpr int kMaxConcat = 256;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// y = W x + b with a fixed 4-way accumulation tree.
void affine(const double* W, const double* b, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      a0 += row[c] * x[c];
      a1 += row[c + 1] * x[c + 1];
      a2 += row[c + 2] * x[c + 2];
      a3 += row[c + 3] * x[c + 3];
    }
    for (; c < cols; ++c) a0 += row[c] * x[c];
    y[r] = b[r] + ((a0 + a1) + (a2 + a3));
  }
}

// W += a b^T, b_grad += a
void add_outer(double* W, double* b_grad, const double* a, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = W + static_cast<std::size_t>(r) * cols;
    const double ar = a[r];
    for (int c = 0; c < cols; ++c) row[c] += ar * x[c];
    b_grad[r] += ar;
  }
}

// y += W^T a
void add_matvec_t(double* y, const double* W, const double* a, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    const double ar = a[r];
    for (int c = 0; c < cols; ++c) y[c] += ar * row[c];
  }
}

int gates_of(CellKind kind) { return kind == CellKind::kLstm ? 4 : 3; }

int layer_input(const NetDims& dims, int layer) {
  return layer == 0 ? dims.input : kNumDirections * dims.hidden;
}

std::size_t gate_block(int hidden, int input) {
  return static_cast<std::size_t>(hidden) * (hidden + input) + hidden;
}

std::size_t layer_dir_size(CellKind kind, const NetDims& dims, int layer) {
  return static_cast<std::size_t>(gates_of(kind)) * gate_block(dims.hidden, layer_input(dims, layer));
}

std::size_t layer_dir_offset(CellKind kind, const NetDims& dims, int layer, int dir) {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) off += kNumDirections * layer_dir_size(kind, dims, l);
  return off + static_cast<std::size_t>(dir) * layer_dir_size(kind, dims, layer);
}

std::size_t head_offset(CellKind kind, const NetDims& dims) {
  return layer_dir_offset(kind, dims, kNumLayers - 1, kNumDirections - 1) +
         layer_dir_size(kind, dims, kNumLayers - 1);
}

std::size_t head_size(const NetDims& dims) {
  const std::size_t feat = kNumDirections * dims.hidden;
  return static_cast<std::size_t>(dims.hidden) * feat + dims.hidden +
         static_cast<std::size_t>(dims.output) * dims.hidden + dims.output;
}

struct GateView {
  const double* w;
  const double* b;
};

GateView gate_view(const double* base, int gate, int hidden, int input) {
  const double* block = base + static_cast<std::size_t>(gate) * gate_block(hidden, input);
  return {block, block + static_cast<std::size_t>(hidden) * (hidden + input)};
}

struct GateGradView {
  double* w;
  double* b;
};

GateGradView gate_grad_view(double* base, int gate, int hidden, int input) {
  double* block = base + static_cast<std::size_t>(gate) * gate_block(hidden, input);
  return {block, block + static_cast<std::size_t>(hidden) * (hidden + input)};
}

// One bidirectional layer pass in a single direction. in_seq is position-major
// (window x in_cols); caches are position-major as well.
void run_layer_dir(CellKind kind, const double* params, int hidden, int in_cols, int window,
                   const double* in_seq, int dir, double* gates_cache, double* cell_cache,
                   double* hidden_cache) {
  const int n_gates = gates_of(kind);
  const int concat_len = hidden + in_cols;
  double concat[kMaxConcat];
  double pre[kMaxHidden];
  const double zeros[kMaxHidden] = {};

  for (int s = 0; s < window; ++s) {
    const int t = dir == 0 ? s : window - 1 - s;
    const int prev_t = dir == 0 ? t - 1 : t + 1;
    const double* h_prev = s == 0 ? zeros : hidden_cache + static_cast<std::size_t>(prev_t) * hidden;
    const double* x = in_seq + static_cast<std::size_t>(t) * in_cols;
    std::memcpy(concat, h_prev, sizeof(double) * hidden);
    std::memcpy(concat + hidden, x, sizeof(double) * in_cols);

    double* g_t = gates_cache + static_cast<std::size_t>(t) * n_gates * hidden;
    double* h_t = hidden_cache + static_cast<std::size_t>(t) * hidden;

    if (kind == CellKind::kLstm) {
      const double* c_prev =
          s == 0 ? zeros : cell_cache + static_cast<std::size_t>(prev_t) * hidden;
      double* c_t = cell_cache + static_cast<std::size_t>(t) * hidden;
      for (int g = 0; g < 4; ++g) {
        const GateView gv = gate_view(params, g, hidden, in_cols);
        affine(gv.w, gv.b, concat, hidden, concat_len, pre);
        double* out = g_t + static_cast<std::size_t>(g) * hidden;
        if (g == 2) {
          for (int i = 0; i < hidden; ++i) out[i] = std::tanh(pre[i]);
        } else {
          for (int i = 0; i < hidden; ++i) out[i] = sigmoid(pre[i]);
        }
      }
      const double* gi = g_t;
      const double* gf = g_t + hidden;
      const double* gc = g_t + 2 * hidden;
      const double* go = g_t + 3 * hidden;
      for (int i = 0; i < hidden; ++i) {
        c_t[i] = gf[i] * c_prev[i] + gi[i] * gc[i];
        h_t[i] = go[i] * std::tanh(c_t[i]);
      }
    } else {
      for (int g = 0; g < 2; ++g) {
        const GateView gv = gate_view(params, g, hidden, in_cols);
        affine(gv.w, gv.b, concat, hidden, concat_len, pre);
        double* out = g_t + static_cast<std::size_t>(g) * hidden;
        for (int i = 0; i < hidden; ++i) out[i] = sigmoid(pre[i]);
      }
      const double* gz = g_t;
      const double* gr = g_t + hidden;
      // Candidate sees the reset-gated previous hidden state.
      for (int i = 0; i < hidden; ++i) concat[i] = gr[i] * h_prev[i];
      const GateView gv = gate_view(params, 2, hidden, in_cols);
      affine(gv.w, gv.b, concat, hidden, concat_len, pre);
      double* gc = g_t + 2 * hidden;
      for (int i = 0; i < hidden; ++i) gc[i] = std::tanh(pre[i]);
      for (int i = 0; i < hidden; ++i) {
        h_t[i] = (1.0 - gz[i]) * h_prev[i] + gz[i] * gc[i];
      }
    }
  }
}

// Reverse-mode pass over one layer direction. dh_seq holds d(loss)/d(h_t) for
// this direction (position-major, stride dh_stride); din_seq accumulates
// gradients w.r.t. the layer input sequence.
void run_layer_dir_backward(CellKind kind, const double* params, double* param_grad, int hidden,
                            int in_cols, int window, const double* in_seq, int dir,
                            const double* gates_cache, const double* cell_cache,
                            const double* hidden_cache, const double* dh_seq, int dh_stride,
                            double* din_seq) {
  const int concat_len = hidden + in_cols;
  const int n_gates = gates_of(kind);
  double concat[kMaxConcat];
  double dconcat[kMaxConcat];
  double dh[kMaxHidden];
  double dc_carry[kMaxHidden] = {};
  double dh_carry[kMaxHidden] = {};
  double dpre[kMaxHidden];
  const double zeros[kMaxHidden] = {};

  for (int s = window - 1; s >= 0; --s) {
    const int t = dir == 0 ? s : window - 1 - s;
    const int prev_t = dir == 0 ? t - 1 : t + 1;
    const double* h_prev = s == 0 ? zeros : hidden_cache + static_cast<std::size_t>(prev_t) * hidden;
    const double* x = in_seq + static_cast<std::size_t>(t) * in_cols;
    const double* g_t = gates_cache + static_cast<std::size_t>(t) * n_gates * hidden;
    std::memcpy(concat, h_prev, sizeof(double) * hidden);
    std::memcpy(concat + hidden, x, sizeof(double) * in_cols);

    for (int i = 0; i < hidden; ++i) {
      dh[i] = dh_seq[static_cast<std::size_t>(t) * dh_stride + i] + dh_carry[i];
    }
    std::fill(dconcat, dconcat + concat_len, 0.0);

    if (kind == CellKind::kLstm) {
      const double* c_prev =
          s == 0 ? zeros : cell_cache + static_cast<std::size_t>(prev_t) * hidden;
      const double* c_t = cell_cache + static_cast<std::size_t>(t) * hidden;
      const double* gi = g_t;
      const double* gf = g_t + hidden;
      const double* gc = g_t + 2 * hidden;
      const double* go = g_t + 3 * hidden;

      double dc[kMaxHidden];
      for (int i = 0; i < hidden; ++i) {
        const double th = std::tanh(c_t[i]);
        dc[i] = dh[i] * go[i] * (1.0 - th * th) + dc_carry[i];
      }
      // output gate
      for (int i = 0; i < hidden; ++i) {
        dpre[i] = dh[i] * std::tanh(c_t[i]) * go[i] * (1.0 - go[i]);
      }
      {
        const GateView gv = gate_view(params, 3, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 3, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, concat, hidden, concat_len);
        }
        add_matvec_t(dconcat, gv.w, dpre, hidden, concat_len);
      }
      // forget gate
      for (int i = 0; i < hidden; ++i) dpre[i] = dc[i] * c_prev[i] * gf[i] * (1.0 - gf[i]);
      {
        const GateView gv = gate_view(params, 1, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 1, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, concat, hidden, concat_len);
        }
        add_matvec_t(dconcat, gv.w, dpre, hidden, concat_len);
      }
      // input gate
      for (int i = 0; i < hidden; ++i) dpre[i] = dc[i] * gc[i] * gi[i] * (1.0 - gi[i]);
      {
        const GateView gv = gate_view(params, 0, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 0, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, concat, hidden, concat_len);
        }
        add_matvec_t(dconcat, gv.w, dpre, hidden, concat_len);
      }
      // candidate
      for (int i = 0; i < hidden; ++i) dpre[i] = dc[i] * gi[i] * (1.0 - gc[i] * gc[i]);
      {
        const GateView gv = gate_view(params, 2, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 2, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, concat, hidden, concat_len);
        }
        add_matvec_t(dconcat, gv.w, dpre, hidden, concat_len);
      }
      for (int i = 0; i < hidden; ++i) dc_carry[i] = dc[i] * gf[i];
    } else {
      const double* gz = g_t;
      const double* gr = g_t + hidden;
      const double* gc = g_t + 2 * hidden;

      double dh_prev[kMaxHidden];
      for (int i = 0; i < hidden; ++i) dh_prev[i] = dh[i] * (1.0 - gz[i]);

      // candidate gate: input was [r ⊙ h_prev, x]
      for (int i = 0; i < hidden; ++i) dpre[i] = dh[i] * gz[i] * (1.0 - gc[i] * gc[i]);
      double dcand_concat[kMaxConcat];
      std::fill(dcand_concat, dcand_concat + concat_len, 0.0);
      {
        double gated[kMaxConcat];
        for (int i = 0; i < hidden; ++i) gated[i] = gr[i] * h_prev[i];
        std::memcpy(gated + hidden, x, sizeof(double) * in_cols);
        const GateView gv = gate_view(params, 2, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 2, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, gated, hidden, concat_len);
        }
        add_matvec_t(dcand_concat, gv.w, dpre, hidden, concat_len);
      }
      double dr[kMaxHidden];
      for (int i = 0; i < hidden; ++i) {
        dr[i] = dcand_concat[i] * h_prev[i];
        dh_prev[i] += dcand_concat[i] * gr[i];
      }
      for (int i = 0; i < in_cols; ++i) dconcat[hidden + i] += dcand_concat[hidden + i];

      // update gate
      for (int i = 0; i < hidden; ++i) {
        dpre[i] = dh[i] * (gc[i] - h_prev[i]) * gz[i] * (1.0 - gz[i]);
      }
      {
        const GateView gv = gate_view(params, 0, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 0, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, concat, hidden, concat_len);
        }
        add_matvec_t(dconcat, gv.w, dpre, hidden, concat_len);
      }
      // reset gate
      for (int i = 0; i < hidden; ++i) dpre[i] = dr[i] * gr[i] * (1.0 - gr[i]);
      {
        const GateView gv = gate_view(params, 1, hidden, in_cols);
        if (param_grad) {
          const GateGradView gg = gate_grad_view(param_grad, 1, hidden, in_cols);
          add_outer(gg.w, gg.b, dpre, concat, hidden, concat_len);
        }
        add_matvec_t(dconcat, gv.w, dpre, hidden, concat_len);
      }
      for (int i = 0; i < hidden; ++i) dconcat[i] += dh_prev[i];
    }

    for (int i = 0; i < hidden; ++i) dh_carry[i] = dconcat[i];
    if (din_seq) {
      double* slot = din_seq + static_cast<std::size_t>(t) * in_cols;
      for (int i = 0; i < in_cols; ++i) slot[i] += dconcat[hidden + i];
    }
  }
}

}  // namespace

std::string cell_kind_name(CellKind kind) { return kind == CellKind::kLstm ? "lstm" : "gru"; }

CellKind cell_kind_from_name(const std::string& name) {
  if (name == "lstm") return CellKind::kLstm;
  if (name == "gru") return CellKind::kGru;
  throw std::invalid_argument("unknown cell kind '" + name + "'");
}

void NetDims::validate() const {
  if (input < 1 || hidden < 1 || output < 1 || window < 1) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  if (hidden > kMaxHidden || input > kMaxConcat - kMaxHidden ||
      kNumDirections * hidden > kMaxConcat - kMaxHidden) {
    throw std::invalid_argument("network dimensions exceed the supported size");
  }
}

std::array<double, kFeatureCount> record_features(const EpisodeRecord& r) {
  return {r.d.radiation,    r.d.co2_out, r.d.temp_out, r.d.humidity_out,
          r.u.co2_injection, r.u.ventilation, r.u.heating,
          r.y.dry_weight_g, r.y.co2_ppm, r.y.temp_c, r.y.rel_humidity};
}

Scaler fit_scaler(const std::vector<EpisodeLog>& train_episodes) {
  if (train_episodes.empty()) throw std::invalid_argument("fit_scaler: no episodes");
  Scaler s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  for (const EpisodeLog& log : train_episodes) {
    for (const EpisodeRecord& r : log.records) {
      const auto f = record_features(r);
      for (int c = 0; c < kFeatureCount; ++c) {
        s.min[c] = std::min(s.min[c], f[c]);
        s.max[c] = std::max(s.max[c], f[c]);
      }
      const auto y = r.y.as_array();
      for (int c = 0; c < kTargetCount; ++c) {
        s.min[kFeatureCount + c] = std::min(s.min[kFeatureCount + c], y[c]);
        s.max[kFeatureCount + c] = std::max(s.max[kFeatureCount + c], y[c]);
      }
    }
  }
  for (int c = 0; c < kScalerChannels; ++c) {
    if (!(s.max[c] - s.min[c] > 0.0)) s.max[c] = s.min[c] + 1e-9;  // degenerate channel
  }
  return s;
}

WindowSet make_windows(const std::vector<EpisodeLog>& episodes, int window, const Scaler& scaler) {
  if (window < 1) throw std::invalid_argument("make_windows: window must be >= 1");
  WindowSet set;
  set.window = window;
  for (const EpisodeLog& log : episodes) {
    const auto len = static_cast<std::ptrdiff_t>(log.records.size());
    if (len < window + 1) {
      ++set.skipped_episodes;
      continue;
    }
    for (std::ptrdiff_t t = window - 1; t + 1 < len; ++t) {
      WindowSample sample;
      sample.features.resize(static_cast<std::size_t>(window) * kFeatureCount);
      for (int row = 0; row < window; ++row) {
        const auto f = record_features(log.records[static_cast<std::size_t>(t - window + 1 + row)]);
        for (int c = 0; c < kFeatureCount; ++c) {
          sample.features[static_cast<std::size_t>(row) * kFeatureCount + c] =
              scaler.normalize(c, f[c]);
        }
      }
      const auto y = log.records[static_cast<std::size_t>(t + 1)].y.as_array();
      for (int c = 0; c < kTargetCount; ++c) {
        sample.target[c] = scaler.normalize(kFeatureCount + c, y[c]);
      }
      set.samples.push_back(std::move(sample));
    }
  }
  return set;
}

std::size_t cell_param_count(CellKind kind, int hidden, int input) {
  return static_cast<std::size_t>(gates_of(kind)) * gate_block(hidden, input);
}

CellStep lstm_cell_forward(const std::vector<double>& x, const std::vector<double>& h_prev,
                           const std::vector<double>& c_prev,
                           const std::vector<double>& gate_params, int hidden) {
  const int input = static_cast<int>(x.size());
  if (static_cast<int>(h_prev.size()) != hidden || static_cast<int>(c_prev.size()) != hidden) {
    throw std::invalid_argument("lstm_cell_forward: state size mismatch");
  }
  if (gate_params.size() != cell_param_count(CellKind::kLstm, hidden, input)) {
    throw std::invalid_argument("lstm_cell_forward: parameter block size mismatch");
  }
  CellStep out;
  out.h.resize(hidden);
  out.c.resize(hidden);
  out.gates.resize(4 * static_cast<std::size_t>(hidden));
  const int concat_len = hidden + input;
  std::vector<double> concat(concat_len), pre(hidden);
  std::copy(h_prev.begin(), h_prev.end(), concat.begin());
  std::copy(x.begin(), x.end(), concat.begin() + hidden);
  for (int g = 0; g < 4; ++g) {
    const GateView gv = gate_view(gate_params.data(), g, hidden, input);
    affine(gv.w, gv.b, concat.data(), hidden, concat_len, pre.data());
    for (int i = 0; i < hidden; ++i) {
      out.gates[static_cast<std::size_t>(g) * hidden + i] =
          g == 2 ? std::tanh(pre[i]) : sigmoid(pre[i]);
    }
  }
  for (int i = 0; i < hidden; ++i) {
    const double gi = out.gates[i];
    const double gf = out.gates[hidden + i];
    const double gc = out.gates[2 * static_cast<std::size_t>(hidden) + i];
    const double go = out.gates[3 * static_cast<std::size_t>(hidden) + i];
    out.c[i] = gf * c_prev[i] + gi * gc;
    out.h[i] = go * std::tanh(out.c[i]);
  }
  return out;
}

CellStep gru_cell_forward(const std::vector<double>& x, const std::vector<double>& h_prev,
                          const std::vector<double>& gate_params, int hidden) {
  const int input = static_cast<int>(x.size());
  if (static_cast<int>(h_prev.size()) != hidden) {
    throw std::invalid_argument("gru_cell_forward: state size mismatch");
  }
  if (gate_params.size() != cell_param_count(CellKind::kGru, hidden, input)) {
    throw std::invalid_argument("gru_cell_forward: parameter block size mismatch");
  }
  CellStep out;
  out.h.resize(hidden);
  out.gates.resize(3 * static_cast<std::size_t>(hidden));
  const int concat_len = hidden + input;
  std::vector<double> concat(concat_len), pre(hidden);
  std::copy(h_prev.begin(), h_prev.end(), concat.begin());
  std::copy(x.begin(), x.end(), concat.begin() + hidden);
  for (int g = 0; g < 2; ++g) {
    const GateView gv = gate_view(gate_params.data(), g, hidden, input);
    affine(gv.w, gv.b, concat.data(), hidden, concat_len, pre.data());
    for (int i = 0; i < hidden; ++i) {
      out.gates[static_cast<std::size_t>(g) * hidden + i] = sigmoid(pre[i]);
    }
  }
  for (int i = 0; i < hidden; ++i) {
    concat[i] = out.gates[static_cast<std::size_t>(hidden) + i] * h_prev[i];
  }
  const GateView gv = gate_view(gate_params.data(), 2, hidden, input);
  affine(gv.w, gv.b, concat.data(), hidden, concat_len, pre.data());
  for (int i = 0; i < hidden; ++i) {
    const double cand = std::tanh(pre[i]);
    out.gates[2 * static_cast<std::size_t>(hidden) + i] = cand;
    const double z = out.gates[i];
    out.h[i] = (1.0 - z) * h_prev[i] + z * cand;
  }
  return out;
}

std::size_t param_count(CellKind kind, const NetDims& dims) {
  return head_offset(kind, dims) + head_size(dims);
}

std::size_t recurrent_param_count(CellKind kind, const NetDims& dims) {
  return head_offset(kind, dims);
}

NetworkWeights init_network(CellKind kind, const NetDims& dims, const Scaler& scaler,
                            std::uint64_t seed) {
  dims.validate();
  NetworkWeights w;
  w.kind = kind;
  w.dims = dims;
  w.scaler = scaler;
  w.params.resize(param_count(kind, dims));
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  for (double& p : w.params) p = rng.uniform(-bound, bound);
  return w;
}

void net_forward(const NetworkWeights& w, const double* window, int window_len, bool train,
                 double dropout_rate, Rng* rng, ForwardCache& cache) {
  if (window_len < 1) throw std::invalid_argument("net_forward: empty window");
  const NetDims& d = w.dims;
  const int h = d.hidden;
  const int feat_len = kNumDirections * h;
  const int n_gates = gates_of(w.kind);

  cache.window = window_len;
  cache.layer1_in.assign(static_cast<std::size_t>(window_len) * feat_len, 0.0);
  for (int l = 0; l < kNumLayers; ++l) {
    const int in_cols = layer_input(d, l);
    const double* in_seq = l == 0 ? window : cache.layer1_in.data();
    for (int dir = 0; dir < kNumDirections; ++dir) {
      auto& gates = cache.gates[l][dir];
      auto& cell = cache.cell[l][dir];
      auto& hid = cache.hidden[l][dir];
      gates.assign(static_cast<std::size_t>(window_len) * n_gates * h, 0.0);
      hid.assign(static_cast<std::size_t>(window_len) * h, 0.0);
      if (w.kind == CellKind::kLstm) cell.assign(static_cast<std::size_t>(window_len) * h, 0.0);
      run_layer_dir(w.kind, w.params.data() + layer_dir_offset(w.kind, d, l, dir), h, in_cols,
                    window_len, in_seq, dir, gates.data(), cell.data(), hid.data());
    }
    if (l == 0) {
      // Interleave directions into the layer-1 input sequence.
      for (int t = 0; t < window_len; ++t) {
        for (int dir = 0; dir < kNumDirections; ++dir) {
          std::memcpy(cache.layer1_in.data() + (static_cast<std::size_t>(t) * feat_len) + dir * h,
                      cache.hidden[0][dir].data() + static_cast<std::size_t>(t) * h,
                      sizeof(double) * h);
        }
      }
    }
  }

  cache.feat.assign(feat_len, 0.0);
  for (int dir = 0; dir < kNumDirections; ++dir) {
    std::memcpy(cache.feat.data() + dir * h,
                cache.hidden[kNumLayers - 1][dir].data() +
                    static_cast<std::size_t>(window_len - 1) * h,
                sizeof(double) * h);
  }

  const double* head = w.params.data() + head_offset(w.kind, d);
  const double* w1 = head;
  const double* b1 = w1 + static_cast<std::size_t>(h) * feat_len;
  const double* w2 = b1 + h;
  const double* b2 = w2 + static_cast<std::size_t>(d.output) * h;

  cache.head_pre.assign(h, 0.0);
  affine(w1, b1, cache.feat.data(), h, feat_len, cache.head_pre.data());
  cache.head_act.assign(h, 0.0);
  for (int i = 0; i < h; ++i) cache.head_act[i] = cache.head_pre[i] > 0.0 ? cache.head_pre[i] : 0.0;

  cache.head_mask.assign(h, 1.0);
  if (train && dropout_rate > 0.0) {
    if (!rng) throw std::invalid_argument("net_forward: train mode with dropout needs an RNG");
    const double keep = 1.0 - dropout_rate;
    for (int i = 0; i < h; ++i) {
      cache.head_mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
  }
  cache.head_drop.assign(h, 0.0);
  for (int i = 0; i < h; ++i) cache.head_drop[i] = cache.head_act[i] * cache.head_mask[i];

  double pred[kMaxHidden];
  affine(w2, b2, cache.head_drop.data(), d.output, h, pred);
  for (int i = 0; i < d.output; ++i) cache.pred[i] = pred[i];
}

void net_backward(const NetworkWeights& w, const double* window, int window_len,
                  const ForwardCache& cache, const std::array<double, kTargetCount>& dpred,
                  std::vector<double>* param_grad, double* window_grad) {
  const NetDims& d = w.dims;
  const int h = d.hidden;
  const int feat_len = kNumDirections * h;

  const double* head = w.params.data() + head_offset(w.kind, d);
  const double* w1 = head;
  const double* w2 = w1 + static_cast<std::size_t>(h) * feat_len + h;

  double* g_head = nullptr;
  if (param_grad) {
    if (param_grad->size() != w.params.size()) {
      throw std::invalid_argument("net_backward: gradient buffer size mismatch");
    }
    g_head = param_grad->data() + head_offset(w.kind, d);
  }

  // Head backward.
  std::vector<double> da1d(h, 0.0);
  if (g_head) {
    double* gw2 = g_head + static_cast<std::size_t>(h) * feat_len + h;
    double* gb2 = gw2 + static_cast<std::size_t>(d.output) * h;
    add_outer(gw2, gb2, dpred.data(), cache.head_drop.data(), d.output, h);
  }
  add_matvec_t(da1d.data(), w2, dpred.data(), d.output, h);

  std::vector<double> dz1(h, 0.0);
  for (int i = 0; i < h; ++i) {
    const double da1 = da1d[i] * cache.head_mask[i];
    dz1[i] = cache.head_pre[i] > 0.0 ? da1 : 0.0;
  }
  std::vector<double> dfeat(feat_len, 0.0);
  if (g_head) {
    double* gw1 = g_head;
    double* gb1 = gw1 + static_cast<std::size_t>(h) * feat_len;
    add_outer(gw1, gb1, dz1.data(), cache.feat.data(), h, feat_len);
  }
  add_matvec_t(dfeat.data(), w1, dz1.data(), h, feat_len);

  // d(loss)/d(layer output sequence), top layer first.
  std::vector<double> dlayer(static_cast<std::size_t>(window_len) * feat_len, 0.0);
  std::memcpy(dlayer.data() + static_cast<std::size_t>(window_len - 1) * feat_len, dfeat.data(),
              sizeof(double) * feat_len);

  std::vector<double> dlower;
  for (int l = kNumLayers - 1; l >= 0; --l) {
    const int in_cols = layer_input(d, l);
    const double* in_seq = l == 0 ? window : cache.layer1_in.data();
    double* din = nullptr;
    if (l > 0) {
      dlower.assign(static_cast<std::size_t>(window_len) * in_cols, 0.0);
      din = dlower.data();
    } else {
      din = window_grad;  // may be null
    }
    for (int dir = 0; dir < kNumDirections; ++dir) {
      run_layer_dir_backward(
          w.kind, w.params.data() + layer_dir_offset(w.kind, d, l, dir),
          param_grad ? param_grad->data() + layer_dir_offset(w.kind, d, l, dir) : nullptr, h,
          in_cols, window_len, in_seq, dir, cache.gates[l][dir].data(),
          cache.cell[l][dir].data(), cache.hidden[l][dir].data(),
          dlayer.data() + static_cast<std::size_t>(dir) * h, feat_len, din);
    }
    if (l > 0) dlayer.swap(dlower);
  }
}

double mse_loss(const std::array<double, kTargetCount>& pred,
                const std::array<double, kTargetCount>& target) {
  double sum = 0.0;
  for (int i = 0; i < kTargetCount; ++i) {
    const double e = pred[i] - target[i];
    sum += e * e;
  }
  return sum / kTargetCount;
}

double batch_gradient(const NetworkWeights& w, const std::vector<WindowSample>& samples,
                      const std::vector<std::size_t>& batch_indices, bool train,
                      double dropout_rate, Rng* rng, std::vector<double>& param_grad,
                      ForwardCache& cache) {
  if (batch_indices.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  param_grad.assign(w.params.size(), 0.0);
  const auto batch = static_cast<double>(batch_indices.size());
  double loss = 0.0;
  for (const std::size_t idx : batch_indices) {
    const WindowSample& s = samples.at(idx);
    const int window_len = static_cast<int>(s.features.size()) / w.dims.input;
    net_forward(w, s.features.data(), window_len, train, dropout_rate, rng, cache);
    loss += mse_loss(cache.pred, s.target);
    std::array<double, kTargetCount> dpred{};
    for (int i = 0; i < kTargetCount; ++i) {
      dpred[i] = 2.0 * (cache.pred[i] - s.target[i]) / (kTargetCount * batch);
    }
    net_backward(w, s.features.data(), window_len, cache, dpred, &param_grad, nullptr);
  }
  return loss / batch;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (grad.size() != params.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double steplr(double lr0, int epoch, int step_size, double gamma) {
  if (epoch < 0) throw std::invalid_argument("steplr: negative epoch");
  if (step_size < 1) throw std::invalid_argument("steplr: step_size must be >= 1");
  return lr0 * std::pow(gamma, static_cast<double>(epoch / step_size));
}

void TrainConfig::validate() const {
  if (window < 1 || batch_size < 1 || epochs < 1 || sched_step < 1) {
    throw std::invalid_argument("train config: counts must be positive");
  }
  if (!(learning_rate > 0.0) || !(sched_gamma > 0.0) || dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("train config: bad rate");
  }
}

TrainResult train(CellKind kind, const std::vector<EpisodeLog>& train_episodes,
                  const TrainConfig& config) {
  config.validate();
  if (train_episodes.empty()) throw std::invalid_argument("train: empty training set");

  const Scaler scaler = fit_scaler(train_episodes);
  const WindowSet windows = make_windows(train_episodes, config.window, scaler);
  if (windows.samples.empty()) {
    throw std::invalid_argument("train: no usable windows (episodes shorter than window + 1)");
  }

  NetDims dims;
  dims.window = config.window;
  TrainResult result;
  result.weights = init_network(kind, dims, scaler, splitmix64(config.seed ^ 0x1f123bb5159a55adULL));

  // Start the head at the target means; the low learning rate then works on
  // dynamics rather than on removing a constant offset.
  {
    std::array<double, kTargetCount> mean{};
    for (const WindowSample& s : windows.samples) {
      for (int c = 0; c < kTargetCount; ++c) mean[static_cast<std::size_t>(c)] += s.target[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < kTargetCount; ++c) {
      result.weights.params[result.weights.params.size() - kTargetCount +
                            static_cast<std::size_t>(c)] =
          mean[static_cast<std::size_t>(c)] / static_cast<double>(windows.samples.size());
    }
  }

  Rng rng(splitmix64(config.seed ^ 0x60bee2bee120fc15ULL));
  AdamState adam;
  std::vector<double> grad;
  ForwardCache cache;
  std::vector<std::size_t> order(windows.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = steplr(config.learning_rate, epoch, config.sched_step, config.sched_gamma);
    // Fisher-Yates shuffle, seeded.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    std::vector<std::size_t> batch;
    for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      const std::size_t end = std::min(order.size(), pos + config.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const double loss = batch_gradient(result.weights, windows.samples, batch, true,
                                         config.dropout, &rng, grad, cache);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch) +
                                 "; lower the learning rate or inspect the data");
      }
      adam_step(result.weights.params, grad, adam, lr);
      epoch_loss += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(seen));
    result.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return result;
}

EvalResult evaluate_windows(const NetworkWeights& w, const WindowSet& windows) {
  if (windows.samples.empty()) throw std::invalid_argument("evaluate: empty test set");
  ForwardCache cache;
  double sum = 0.0;
  for (const WindowSample& s : windows.samples) {
    const int window_len = static_cast<int>(s.features.size()) / w.dims.input;
    net_forward(w, s.features.data(), window_len, false, 0.0, nullptr, cache);
    sum += mse_loss(cache.pred, s.target);
  }
  EvalResult r;
  r.mse = sum / static_cast<double>(windows.samples.size());
  r.rmse = std::sqrt(r.mse);
  return r;
}

EvalResult evaluate(const NetworkWeights& w, const std::vector<EpisodeLog>& test_episodes) {
  return evaluate_windows(w, make_windows(test_episodes, w.dims.window, w.scaler));
}

// --- checkpoint io ----------------------------------------------------------

namespace {

constexpr char kMagic[] = "SEQNET1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::string& data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace

void save_checkpoint(const NetworkWeights& w, const std::string& path) {
  std::string out;
  out.reserve(64 + 8 * w.params.size());
  out.append(kMagic, 7);
  out.push_back(w.kind == CellKind::kLstm ? '\0' : '\1');
  put_u32(out, static_cast<std::uint32_t>(w.dims.input));
  put_u32(out, static_cast<std::uint32_t>(w.dims.hidden));
  put_u32(out, kNumLayers);
  put_u32(out, static_cast<std::uint32_t>(w.dims.output));
  put_u32(out, static_cast<std::uint32_t>(w.dims.window));
  put_u32(out, kScalerChannels);
  for (double v : w.scaler.min) put_f64(out, v);
  for (double v : w.scaler.max) put_f64(out, v);
  put_u64(out, w.params.size());
  for (double v : w.params) put_f64(out, v);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

NetworkWeights load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string data = buf.str();
  if (data.size() < 8 || data.compare(0, 7, kMagic) != 0) {
    throw std::runtime_error(path + ": not a SEQNET1 checkpoint");
  }
  Reader r{data, 7};
  r.need(1);
  const char kind_byte = data[r.pos++];
  NetworkWeights w;
  w.kind = kind_byte == '\0' ? CellKind::kLstm : CellKind::kGru;
  w.dims.input = static_cast<int>(r.u32());
  w.dims.hidden = static_cast<int>(r.u32());
  const std::uint32_t layers = r.u32();
  w.dims.output = static_cast<int>(r.u32());
  w.dims.window = static_cast<int>(r.u32());
  if (layers != kNumLayers) throw std::runtime_error(path + ": unsupported layer count");
  const std::uint32_t channels = r.u32();
  if (channels != kScalerChannels) throw std::runtime_error(path + ": unsupported scaler layout");
  for (double& v : w.scaler.min) v = r.f64();
  for (double& v : w.scaler.max) v = r.f64();
  const std::uint64_t count = r.u64();
  if (count != param_count(w.kind, w.dims)) {
    throw std::runtime_error(path + ": parameter count does not match dimensions");
  }
  w.params.resize(count);
  for (double& v : w.params) v = r.f64();
  if (r.pos != data.size()) throw std::runtime_error(path + ": trailing bytes");
  return w;
}

}  // namespace greenhouse
