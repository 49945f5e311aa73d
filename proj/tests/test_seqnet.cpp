#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "greenhouse/episode.hpp"
#include "greenhouse/seqnet.hpp"
#include "greenhouse/weather.hpp"

using namespace greenhouse;

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Straight-line single-cell references, independent of the library kernels.
struct CellRef {
  std::vector<double> h, c, gates;
};

std::vector<double> affine_ref(const std::vector<double>& w, const std::vector<double>& b,
                               const std::vector<double>& concat, int hidden) {
  const int cols = static_cast<int>(concat.size());
  std::vector<double> out(static_cast<std::size_t>(hidden));
  for (int r = 0; r < hidden; ++r) {
    double acc = b[static_cast<std::size_t>(r)];
    for (int ccol = 0; ccol < cols; ++ccol) {
      acc += w[static_cast<std::size_t>(r) * cols + ccol] * concat[static_cast<std::size_t>(ccol)];
    }
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

CellRef lstm_ref(const std::vector<double>& x, const std::vector<double>& h_prev,
                 const std::vector<double>& c_prev, const std::vector<double>& params,
                 int hidden) {
  const int input = static_cast<int>(x.size());
  const std::size_t wsz = static_cast<std::size_t>(hidden) * (hidden + input);
  std::vector<double> concat(h_prev);
  concat.insert(concat.end(), x.begin(), x.end());
  auto gate = [&](int g) {
    const std::vector<double> w(params.begin() + g * (wsz + hidden),
                                params.begin() + g * (wsz + hidden) + wsz);
    const std::vector<double> b(params.begin() + g * (wsz + hidden) + wsz,
                                params.begin() + (g + 1) * (wsz + hidden));
    return affine_ref(w, b, concat, hidden);
  };
  const auto zi = gate(0), zf = gate(1), zc = gate(2), zo = gate(3);
  CellRef ref;
  ref.h.resize(static_cast<std::size_t>(hidden));
  ref.c.resize(static_cast<std::size_t>(hidden));
  for (int i = 0; i < hidden; ++i) {
    const double gi = sigmoid(zi[static_cast<std::size_t>(i)]);
    const double gf = sigmoid(zf[static_cast<std::size_t>(i)]);
    const double cand = std::tanh(zc[static_cast<std::size_t>(i)]);
    const double go = sigmoid(zo[static_cast<std::size_t>(i)]);
    ref.c[static_cast<std::size_t>(i)] = gf * c_prev[static_cast<std::size_t>(i)] + gi * cand;
    ref.h[static_cast<std::size_t>(i)] = go * std::tanh(ref.c[static_cast<std::size_t>(i)]);
  }
  return ref;
}

CellRef gru_ref(const std::vector<double>& x, const std::vector<double>& h_prev,
                const std::vector<double>& params, int hidden) {
  const int input = static_cast<int>(x.size());
  const std::size_t wsz = static_cast<std::size_t>(hidden) * (hidden + input);
  std::vector<double> concat(h_prev);
  concat.insert(concat.end(), x.begin(), x.end());
  auto gate = [&](int g, const std::vector<double>& cc) {
    const std::vector<double> w(params.begin() + g * (wsz + hidden),
                                params.begin() + g * (wsz + hidden) + wsz);
    const std::vector<double> b(params.begin() + g * (wsz + hidden) + wsz,
                                params.begin() + (g + 1) * (wsz + hidden));
    return affine_ref(w, b, cc, hidden);
  };
  const auto zz = gate(0, concat);
  const auto zr = gate(1, concat);
  CellRef ref;
  ref.h.resize(static_cast<std::size_t>(hidden));
  std::vector<double> gated(concat);
  for (int i = 0; i < hidden; ++i) {
    gated[static_cast<std::size_t>(i)] =
        sigmoid(zr[static_cast<std::size_t>(i)]) * h_prev[static_cast<std::size_t>(i)];
  }
  const auto zh = gate(2, gated);
  for (int i = 0; i < hidden; ++i) {
    const double z = sigmoid(zz[static_cast<std::size_t>(i)]);
    const double cand = std::tanh(zh[static_cast<std::size_t>(i)]);
    ref.h[static_cast<std::size_t>(i)] =
        (1.0 - z) * h_prev[static_cast<std::size_t>(i)] + z * cand;
  }
  return ref;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

WindowSample random_sample(Rng& rng, int window, int input) {
  WindowSample s;
  s.features = random_vec(rng, static_cast<std::size_t>(window) * input, 0.0, 1.0);
  for (auto& t : s.target) t = rng.uniform(0.0, 1.0);
  return s;
}

// Per-sample loss over the first `output` components only, for tiny nets with
// fewer than four outputs.
double mse_loss_partial(const std::array<double, kTargetCount>& pred,
                        const std::array<double, kTargetCount>& target, int output) {
  double sum = 0.0;
  for (int i = 0; i < output; ++i) {
    const double e = pred[static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)];
    sum += e * e;
  }
  return sum / output;
}

}  // namespace

TEST_CASE("lstm cell with zero weights") {
  const int hidden = 3;
  const std::vector<double> x = {0.4, -0.2};
  const std::vector<double> h_prev = {0.1, -0.5, 0.9};
  const std::vector<double> c_prev = {0.3, -0.6, 1.2};
  const std::vector<double> params(cell_param_count(CellKind::kLstm, hidden, 2), 0.0);

  const CellStep out = lstm_cell_forward(x, h_prev, c_prev, params, hidden);
  for (int i = 0; i < hidden; ++i) {
    CHECK(out.gates[static_cast<std::size_t>(i)] == 0.5);                      // input gate
    CHECK(out.gates[static_cast<std::size_t>(hidden + i)] == 0.5);             // forget gate
    CHECK(out.gates[static_cast<std::size_t>(2 * hidden + i)] == 0.0);         // candidate
    CHECK(out.gates[static_cast<std::size_t>(3 * hidden + i)] == 0.5);         // output gate
    CHECK(out.c[static_cast<std::size_t>(i)] ==
          doctest::Approx(0.5 * c_prev[static_cast<std::size_t>(i)]));
    CHECK(out.h[static_cast<std::size_t>(i)] ==
          doctest::Approx(0.5 * std::tanh(0.5 * c_prev[static_cast<std::size_t>(i)])));
  }

  const CellStep zero = lstm_cell_forward(x, h_prev, {0.0, 0.0, 0.0}, params, hidden);
  for (double h : zero.h) CHECK(h == 0.0);
}

TEST_CASE("gru cell with zero weights") {
  const int hidden = 2;
  const std::vector<double> x = {0.7};
  const std::vector<double> h_prev = {0.6, -0.8};
  const std::vector<double> params(cell_param_count(CellKind::kGru, hidden, 1), 0.0);

  const CellStep out = gru_cell_forward(x, h_prev, params, hidden);
  for (int i = 0; i < hidden; ++i) {
    CHECK(out.gates[static_cast<std::size_t>(i)] == 0.5);
    CHECK(out.gates[static_cast<std::size_t>(hidden + i)] == 0.5);
    CHECK(out.h[static_cast<std::size_t>(i)] ==
          doctest::Approx(0.5 * h_prev[static_cast<std::size_t>(i)]));
  }
  const CellStep zero = gru_cell_forward(x, {0.0, 0.0}, params, hidden);
  for (double h : zero.h) CHECK(h == 0.0);
}

TEST_CASE("cells match a straight-line transcription with random weights") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int hidden = 2 + static_cast<int>(rng.index(3));
    const int input = 1 + static_cast<int>(rng.index(4));
    const auto x = random_vec(rng, static_cast<std::size_t>(input), -1.0, 1.0);
    const auto h_prev = random_vec(rng, static_cast<std::size_t>(hidden), -1.0, 1.0);
    const auto c_prev = random_vec(rng, static_cast<std::size_t>(hidden), -1.0, 1.0);

    const auto lp = random_vec(rng, cell_param_count(CellKind::kLstm, hidden, input), -0.5, 0.5);
    const CellStep lstm = lstm_cell_forward(x, h_prev, c_prev, lp, hidden);
    const CellRef lref = lstm_ref(x, h_prev, c_prev, lp, hidden);
    for (int i = 0; i < hidden; ++i) {
      CHECK(lstm.h[static_cast<std::size_t>(i)] ==
            doctest::Approx(lref.h[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(lstm.c[static_cast<std::size_t>(i)] ==
            doctest::Approx(lref.c[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }

    const auto gp = random_vec(rng, cell_param_count(CellKind::kGru, hidden, input), -0.5, 0.5);
    const CellStep gru = gru_cell_forward(x, h_prev, gp, hidden);
    const CellRef gref = gru_ref(x, h_prev, gp, hidden);
    for (int i = 0; i < hidden; ++i) {
      CHECK(gru.h[static_cast<std::size_t>(i)] ==
            doctest::Approx(gref.h[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gate ranges and the GRU convex combination property") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const int hidden = 3;
    const int input = 2;
    const auto x = random_vec(rng, 2, -2.0, 2.0);
    const auto h_prev = random_vec(rng, 3, -1.0, 1.0);
    const auto gp = random_vec(rng, cell_param_count(CellKind::kGru, hidden, input), -2.0, 2.0);
    const CellStep gru = gru_cell_forward(x, h_prev, gp, hidden);
    for (int i = 0; i < 2 * hidden; ++i) {
      CHECK(gru.gates[static_cast<std::size_t>(i)] > 0.0);
      CHECK(gru.gates[static_cast<std::size_t>(i)] < 1.0);
    }
    for (int i = 0; i < hidden; ++i) {
      const double cand = gru.gates[static_cast<std::size_t>(2 * hidden + i)];
      const double lo = std::min(h_prev[static_cast<std::size_t>(i)], cand);
      const double hi = std::max(h_prev[static_cast<std::size_t>(i)], cand);
      CHECK(gru.h[static_cast<std::size_t>(i)] >= lo - 1e-15);
      CHECK(gru.h[static_cast<std::size_t>(i)] <= hi + 1e-15);
    }
  }
}

TEST_CASE("architecture identities") {
  NetDims dims;  // 11 -> 2x16 bidirectional -> head 32-16-4
  CHECK(recurrent_param_count(CellKind::kLstm, dims) * 3 ==
        recurrent_param_count(CellKind::kGru, dims) * 4);

  const NetworkWeights w = init_network(CellKind::kGru, dims, Scaler{}, 1);
  ForwardCache cache;
  std::vector<double> window(static_cast<std::size_t>(dims.window) * kFeatureCount, 0.3);
  net_forward(w, window.data(), dims.window, false, 0.0, nullptr, cache);
  CHECK(cache.feat.size() == 32);
  CHECK(cache.head_pre.size() == 16);
  std::size_t n_pred = cache.pred.size();
  CHECK(n_pred == 4);
}

TEST_CASE("forward determinism and dropout behaviour") {
  Scaler sc;
  for (int c = 0; c < kScalerChannels; ++c) {
    sc.min[static_cast<std::size_t>(c)] = 0.0;
    sc.max[static_cast<std::size_t>(c)] = 1.0;
  }
  NetDims dims;
  dims.input = 11;
  dims.hidden = 4;
  dims.window = 5;
  const NetworkWeights w = init_network(CellKind::kLstm, dims, sc, 9);
  Rng data_rng(17);
  const WindowSample s = random_sample(data_rng, dims.window, dims.input);

  ForwardCache a, b;
  net_forward(w, s.features.data(), dims.window, false, 0.0, nullptr, a);
  net_forward(w, s.features.data(), dims.window, false, 0.0, nullptr, b);
  CHECK(a.pred == b.pred);

  Rng dropout_rng(3);
  net_forward(w, s.features.data(), dims.window, true, 0.0, &dropout_rng, b);
  CHECK(a.pred == b.pred);  // dropout rate 0: train equals eval

  // Zeroing the head leaves only the output bias.
  NetworkWeights wb = w;
  const std::size_t head = recurrent_param_count(wb.kind, wb.dims);
  for (std::size_t i = head; i + 4 < wb.params.size(); ++i) wb.params[i] = 0.0;
  wb.params[wb.params.size() - 4] = 1.5;
  wb.params[wb.params.size() - 3] = -2.5;
  wb.params[wb.params.size() - 2] = 0.25;
  wb.params[wb.params.size() - 1] = 42.0;
  net_forward(wb, s.features.data(), dims.window, false, 0.0, nullptr, a);
  CHECK(a.pred == std::array<double, 4>{1.5, -2.5, 0.25, 42.0});

  CHECK_THROWS_AS(net_forward(w, s.features.data(), 0, false, 0.0, nullptr, a),
                  std::invalid_argument);
}

TEST_CASE("mse loss") {
  CHECK(mse_loss({1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0}) == 0.0);
  CHECK(mse_loss({2.0, 3.0, 4.0, 5.0}, {1.0, 2.0, 3.0, 4.0}) == 1.0);
  // batch of two windows with per-sample losses 0 and 1
  const double batch = 0.5 * (mse_loss({1.0, 1.0, 1.0, 1.0}, {1.0, 1.0, 1.0, 1.0}) +
                              mse_loss({2.0, 2.0, 2.0, 2.0}, {1.0, 1.0, 1.0, 1.0}));
  CHECK(batch == 0.5);
}

namespace {

double batch_loss(const NetworkWeights& w, const std::vector<WindowSample>& samples) {
  ForwardCache cache;
  double loss = 0.0;
  for (const WindowSample& s : samples) {
    net_forward(w, s.features.data(), static_cast<int>(s.features.size()) / w.dims.input, false,
                0.0, nullptr, cache);
    loss += mse_loss(cache.pred, s.target);
  }
  return loss / static_cast<double>(samples.size());
}

double gradcheck_max_err(CellKind kind, std::uint64_t seed, double dropout) {
  Rng rng(seed);
  const int input = 2 + static_cast<int>(rng.index(3));
  const int hidden = 2;
  const int output = 2 + static_cast<int>(rng.index(2));
  const int window = 2 + static_cast<int>(rng.index(3));

  NetDims dims;
  dims.input = input;
  dims.hidden = hidden;
  dims.output = output;
  dims.window = window;
  NetworkWeights w = init_network(kind, dims, Scaler{}, seed ^ 0xabcdef);

  std::vector<WindowSample> samples;
  std::vector<std::size_t> indices;
  for (int i = 0; i < 3; ++i) {
    WindowSample s;
    s.features = random_vec(rng, static_cast<std::size_t>(window) * input, 0.0, 1.0);
    for (int c = 0; c < output; ++c) s.target[static_cast<std::size_t>(c)] = rng.uniform(0.0, 1.0);
    samples.push_back(std::move(s));
    indices.push_back(static_cast<std::size_t>(i));
  }

  // In train mode the dropout mask must be identical across evaluations, so
  // every evaluation reconstructs the same RNG.
  auto loss_at = [&](const std::vector<double>& params) {
    NetworkWeights wp = w;
    wp.params = params;
    ForwardCache cache;
    Rng drng(seed ^ 0x5151);
    double loss = 0.0;
    for (const WindowSample& s : samples) {
      net_forward(wp, s.features.data(), window, dropout > 0.0, dropout, &drng, cache);
      loss += mse_loss_partial(cache.pred, s.target, output);
    }
    return loss / static_cast<double>(samples.size());
  };

  std::vector<double> grad;
  ForwardCache cache;
  {
    Rng drng(seed ^ 0x5151);
    grad.assign(w.params.size(), 0.0);
    for (const WindowSample& s : samples) {
      net_forward(w, s.features.data(), window, dropout > 0.0, dropout, &drng, cache);
      std::array<double, kTargetCount> dpred{};
      for (int c = 0; c < output; ++c) {
        dpred[static_cast<std::size_t>(c)] =
            2.0 * (cache.pred[static_cast<std::size_t>(c)] - s.target[static_cast<std::size_t>(c)]) /
            (output * static_cast<double>(samples.size()));
      }
      net_backward(w, s.features.data(), window, cache, dpred, &grad, nullptr);
    }
  }

  double max_err = 0.0;
  const double eps = 1e-5;
  for (std::size_t i = 0; i < w.params.size(); ++i) {
    std::vector<double> p = w.params;
    p[i] += eps;
    const double up = loss_at(p);
    p[i] -= 2.0 * eps;
    const double down = loss_at(p);
    const double fd = (up - down) / (2.0 * eps);
    const double err =
        std::fabs(fd - grad[i]) / std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace

TEST_CASE("BPTT gradients match central finite differences") {
  double worst = 0.0;
  for (int c = 0; c < 10; ++c) {
    worst = std::max(worst, gradcheck_max_err(CellKind::kLstm, 1000 + c, 0.0));
    worst = std::max(worst, gradcheck_max_err(CellKind::kGru, 2000 + c, 0.0));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("BPTT gradients with an active dropout mask") {
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) {
    worst = std::max(worst, gradcheck_max_err(CellKind::kGru, 3000 + c, 0.3));
    worst = std::max(worst, gradcheck_max_err(CellKind::kLstm, 4000 + c, 0.3));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("zero loss gives zero gradient; duplicated batch leaves the mean unchanged") {
  NetDims dims;
  dims.input = 3;
  dims.hidden = 2;
  dims.output = 4;
  dims.window = 3;
  NetworkWeights w = init_network(CellKind::kGru, dims, Scaler{}, 77);
  Rng rng(5);
  WindowSample s = random_sample(rng, dims.window, dims.input);

  ForwardCache cache;
  net_forward(w, s.features.data(), dims.window, false, 0.0, nullptr, cache);
  s.target = cache.pred;  // loss is exactly zero

  std::vector<double> grad;
  const double loss = batch_gradient(w, {s}, {0}, false, 0.0, nullptr, grad, cache);
  CHECK(loss == 0.0);
  for (double g : grad) CHECK(g == 0.0);

  WindowSample s2 = random_sample(rng, dims.window, dims.input);
  std::vector<WindowSample> samples = {s, s2};
  std::vector<double> g1, g2;
  batch_gradient(w, samples, {0, 1}, false, 0.0, nullptr, g1, cache);
  batch_gradient(w, samples, {0, 1, 0, 1}, false, 0.0, nullptr, g2, cache);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
  }
}

TEST_CASE("adam") {
  SUBCASE("first step with unit gradient") {
    std::vector<double> params = {1.0, -2.0};
    AdamState st;
    adam_step(params, {1.0, 1.0}, st, 0.1);
    const double expect = 0.1 * (1.0 / (1.0 + 1e-8));
    CHECK(params[0] == doctest::Approx(1.0 - expect).epsilon(1e-12));
    CHECK(params[1] == doctest::Approx(-2.0 - expect).epsilon(1e-12));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> params = {0.5};
    AdamState st;
    for (int i = 0; i < 10; ++i) adam_step(params, {0.0}, st, 0.1);
    CHECK(params[0] == 0.5);
  }
  SUBCASE("drives a scalar quadratic toward its minimum") {
    std::vector<double> theta = {1.0};
    AdamState st;
    for (int i = 0; i < 100; ++i) adam_step(theta, {theta[0]}, st, 0.1);  // f = theta^2/2
    CHECK(std::fabs(theta[0]) < 0.5);
  }
}

TEST_CASE("steplr") {
  CHECK(steplr(3e-5, 0, 5, 0.5) == 3e-5);
  CHECK(steplr(3e-5, 5, 5, 0.5) == doctest::Approx(1.5e-5));
  CHECK(steplr(3e-5, 14, 5, 0.5) == doctest::Approx(3e-5 * 0.25));
  CHECK_THROWS_AS(steplr(3e-5, -1, 5, 0.5), std::invalid_argument);
}

namespace {

std::vector<EpisodeLog> tiny_corpus(int episodes, int days, std::uint64_t seed) {
  std::vector<EpisodeLog> logs;
  for (int e = 0; e < episodes; ++e) {
    WeatherProfile p;
    p.seed = seed + static_cast<std::uint64_t>(e);
    const DisturbanceSeries weather = synth_weather(p, days);
    const auto policy = [](std::int64_t k, const State&, const Output&, const Disturbance& d) {
      ControlInput u;
      u.ventilation = 2.0 + (k % 7) * 0.5;
      u.heating = d.temp_out < 12.0 ? 40.0 : 0.0;
      u.co2_injection = d.radiation > 10.0 ? 0.6 : 0.0;
      return u;
    };
    logs.push_back(simulate_episode(State{0.0035, 0.001, 15.0, 0.008}, policy, weather,
                                    days * 96 - 1));
  }
  return logs;
}

}  // namespace

TEST_CASE("scaler") {
  const auto episodes = tiny_corpus(2, 1, 900);
  const Scaler sc = fit_scaler(episodes);

  SUBCASE("unit range on the training data") {
    const WindowSet ws = make_windows(episodes, 6, sc);
    for (const WindowSample& s : ws.samples) {
      for (double f : s.features) {
        CHECK(f >= -1e-12);
        CHECK(f <= 1.0 + 1e-12);
      }
    }
  }
  SUBCASE("midpoint example") {
    Scaler s;
    s.min[0] = 0.0;
    s.max[0] = 10.0;
    CHECK(s.normalize(0, 5.0) == 0.5);
  }
  SUBCASE("round-trip to machine precision") {
    Rng rng(8);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const int c = static_cast<int>(rng.index(kScalerChannels));
      const double v = rng.uniform(sc.min[static_cast<std::size_t>(c)] - 5.0,
                                   sc.max[static_cast<std::size_t>(c)] + 5.0);
      worst = std::max(worst, std::fabs(sc.denormalize(c, sc.normalize(c, v)) - v));
    }
    CHECK(worst < 1e-12);
  }
  SUBCASE("out-of-range test values are not clipped") {
    // A value above the training maximum normalizes above 1.
    const double v = sc.max[9] + 1.0;
    CHECK(sc.normalize(9, v) > 1.0);
  }
  SUBCASE("degenerate channels are widened") {
    EpisodeLog flat = episodes[0];
    for (auto& r : flat.records) r.d.co2_out = 7.2e-4;
    const Scaler s2 = fit_scaler({flat});
    CHECK(s2.span(1) > 0.0);
  }
}

TEST_CASE("window construction") {
  const auto episodes = tiny_corpus(1, 2, 901);  // length 192
  const Scaler sc = fit_scaler(episodes);

  SUBCASE("counting formula") {
    EpisodeLog truncated = episodes[0];
    truncated.records.resize(100);
    const WindowSet ws = make_windows({truncated}, 24, sc);
    CHECK(ws.samples.size() == 76);
  }
  SUBCASE("minimum length episode yields one sample") {
    EpisodeLog tiny = episodes[0];
    tiny.records.resize(7);
    CHECK(make_windows({tiny}, 6, sc).samples.size() == 1);
  }
  SUBCASE("short episodes are skipped and counted") {
    EpisodeLog tiny = episodes[0];
    tiny.records.resize(5);
    const WindowSet ws = make_windows({tiny, episodes[0]}, 6, sc);
    CHECK(ws.skipped_episodes == 1);
    CHECK(ws.samples.size() == episodes[0].records.size() - 6);
  }
  SUBCASE("windows never span episodes") {
    EpisodeLog a = episodes[0], b = episodes[0];
    a.records.resize(10);
    b.records.resize(10);
    const WindowSet ws = make_windows({a, b}, 6, sc);
    CHECK(ws.samples.size() == 8);  // 4 per episode, never 10-6+... across the seam
  }
}

TEST_CASE("training runs deterministically and makes progress") {
  const auto episodes = tiny_corpus(2, 1, 902);
  TrainConfig tc;
  tc.window = 6;
  tc.batch_size = 8;
  tc.epochs = 15;
  tc.learning_rate = 3e-4;
  tc.seed = 11;

  const TrainResult a = train(CellKind::kGru, episodes, tc);
  CHECK(a.loss_history.size() == 15);
  CHECK(a.loss_history.back() < a.loss_history.front());

  const TrainResult b = train(CellKind::kGru, episodes, tc);
  REQUIRE(a.weights.params.size() == b.weights.params.size());
  CHECK(std::memcmp(a.weights.params.data(), b.weights.params.data(),
                    a.weights.params.size() * sizeof(double)) == 0);
}

TEST_CASE("evaluation") {
  const auto episodes = tiny_corpus(3, 1, 903);
  TrainConfig tc;
  tc.window = 6;
  tc.batch_size = 16;
  tc.epochs = 2;
  tc.seed = 4;
  const TrainResult r = train(CellKind::kLstm, {episodes[0], episodes[1]}, tc);

  const EvalResult ev = evaluate(r.weights, {episodes[2]});
  CHECK(ev.mse >= 0.0);
  CHECK(std::fabs(ev.rmse * ev.rmse - ev.mse) < 1e-15);
  CHECK_THROWS_AS(evaluate(r.weights, {}), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip is byte-exact") {
  const auto episodes = tiny_corpus(1, 1, 904);
  const Scaler sc = fit_scaler(episodes);
  NetDims dims;
  dims.window = 6;
  const NetworkWeights w = init_network(CellKind::kLstm, dims, sc, 42);

  const auto dir = std::filesystem::temp_directory_path();
  const std::string p1 = (dir / "gh_ckpt_a.bin").string();
  const std::string p2 = (dir / "gh_ckpt_b.bin").string();
  save_checkpoint(w, p1);
  const NetworkWeights loaded = load_checkpoint(p1);
  CHECK(loaded.kind == w.kind);
  CHECK(loaded.dims.window == w.dims.window);
  CHECK(loaded.params == w.params);
  CHECK(loaded.scaler.min == w.scaler.min);
  save_checkpoint(loaded, p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 7) == "SEQNET1");
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/path.ckpt"), std::runtime_error);
}
