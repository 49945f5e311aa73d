"""Python smoke tests for the greenhouse_lab extension module."""

import math

import pytest

import greenhouse_lab as gl


def test_dynamics_roundtrip():
    x = gl.State(0.0035, 0.001, 15.0, 0.008)
    d = gl.Disturbance(300.0, 7.2e-4, 12.0, 0.006)
    u = gl.ControlInput(0.5, 2.0, 50.0)

    rate = gl.derivatives(x, u, d)
    assert all(math.isfinite(v) for v in rate.as_array())

    x1 = gl.rk4_step(x, u, d)
    assert x1.dry_weight >= x.dry_weight  # daylight photosynthesis dominates

    y = gl.measure(x1)
    assert y.dry_weight_g == pytest.approx(1e3 * x1.dry_weight)
    assert y.temp_c == x1.temp


def test_measurement_ppm_anchor():
    y = gl.measure(gl.State(0.0035, 0.0018, 20.0, 0.008))
    assert y.co2_ppm == pytest.approx(984.0, abs=1.0)


def test_weather_and_simulation():
    profile = gl.WeatherProfile()
    profile.seed = 7
    weather = gl.synth_weather(profile, 2)
    assert len(weather) == 192
    assert weather.interval_s == 900

    log = gl.simulate_episode(
        gl.State(0.0035, 0.001, 15.0, 0.008),
        lambda k, x, y, d: gl.ControlInput(0.0, 1.0, 30.0 if d.temp_out < 10 else 0.0),
        weather,
        96,
    )
    assert len(log) == 97
    gl.validate_episode(log)
    assert gl.epi(log) != 0.0


def test_policy_bounds_are_enforced():
    weather = gl.synth_weather(gl.WeatherProfile(), 1)
    with pytest.raises(RuntimeError):
        gl.simulate_episode(
            gl.State(0.0035, 0.001, 15.0, 0.008),
            lambda k, x, y, d: gl.ControlInput(99.0, 0.0, 0.0),
            weather,
            1,
        )


def test_training_and_surrogate_mpc(tmp_path):
    profile = gl.WeatherProfile()
    episodes = []
    for e in range(2):
        profile.seed = 100 + e
        weather = gl.synth_weather(profile, 1)
        episodes.append(
            gl.simulate_episode(
                gl.State(0.0035, 0.001, 15.0, 0.008),
                lambda k, x, y, d: gl.ControlInput(
                    0.4 if d.radiation > 10 else 0.0, 1.5, 25.0 if d.temp_out < 12 else 0.0
                ),
                weather,
                95,
            )
        )

    config = gl.TrainConfig()
    config.window = 6
    config.batch_size = 16
    config.epochs = 2
    config.learning_rate = 1e-3
    config.seed = 5
    result = gl.train(gl.CellKind.GRU, episodes, config)
    assert len(result.loss_history) == 2

    ckpt = tmp_path / "net.ckpt"
    gl.save_checkpoint(result.weights, str(ckpt))
    loaded = gl.load_checkpoint(str(ckpt))
    assert list(loaded.params) == list(result.weights.params)

    ev = gl.evaluate(loaded, episodes)
    assert ev.rmse == pytest.approx(math.sqrt(ev.mse))

    mpc = gl.MpcConfig()
    mpc.horizon = 4
    mpc.solver.iterations = 15
    mpc.solver.restarts = 1
    profile.seed = 999
    weather = gl.synth_weather(profile, 1)
    run = gl.surrogate_mpc(loaded, weather, gl.State(0.0035, 0.001, 15.0, 0.008), 8, mpc)
    assert len(run.log) == 9
    assert gl.count_input_violations(run.log, mpc) == 0


def test_parameter_count_ratio():
    dims = gl.NetDims()
    assert 3 * gl.recurrent_param_count(gl.CellKind.LSTM, dims) == 4 * gl.recurrent_param_count(
        gl.CellKind.GRU, dims
    )


def test_night_mask_and_bounds():
    lo, hi = gl.temp_bounds(5.0)
    assert (lo, hi) == (10.0, 15.0)
    masked = gl.night_co2_mask(gl.ControlInput(1.0, 3.0, 50.0), 5.0)
    assert masked.co2_injection == 0.0
    assert masked.ventilation == 3.0


def test_svg_emission(tmp_path):
    weather = gl.synth_weather(gl.WeatherProfile(), 1)
    log = gl.simulate_episode(
        gl.State(0.0035, 0.001, 15.0, 0.008),
        lambda k, x, y, d: gl.ControlInput(0.0, 1.0, 0.0),
        weather,
        10,
    )
    out = tmp_path / "episode.svg"
    gl.emit_svg(log, ["y3", "y4"], str(out))
    text = out.read_text()
    assert text.startswith("<?xml")
    assert "<svg" in text
