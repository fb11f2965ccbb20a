import numpy as np
import numpy.testing as npt
import pytest

from taucoh.engine import (
    STATUS_ABORTED,
    STATUS_CONVERGED,
    STATUS_WARMING_UP,
    CoherencyEngine,
    ConvergenceConfig,
    run,
)
from taucoh.errors import (
    ConfigError,
    DataFormatError,
    InputQualityError,
    InsufficientDataError,
    StreamShapeError,
)
from taucoh.io import frames_from_arrays
from taucoh.preprocess import PreprocessConfig, stable_prefix
from taucoh.siggen import generate, kundur_preset
from taucoh.tda import MeasurementFrame

from conftest import batch_properties

FS = 20.0
DT = 1.0 / FS
NOMINAL = 60.0


def frames_of(values, t0=0.0, dt=DT, nominal=NOMINAL):
    times = t0 + np.arange(len(values)) * dt
    return list(frames_from_arrays(times, np.asarray(values, dtype=np.float64), nominal))


def quiet_values(n_frames, n_buses=4):
    return np.full((n_frames, n_buses), NOMINAL)


def default_engine(**kw):
    return CoherencyEngine(PreprocessConfig(nominal_hz=NOMINAL), **kw)


# -- configuration guards ------------------------------------------------


def test_convergence_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        ConvergenceConfig(lambda_s=0.0)
    with pytest.raises(ConfigError):
        ConvergenceConfig(var_rel_tol=0.0)
    with pytest.raises(ConfigError):
        ConvergenceConfig(lambda_s=2.0, max_window_s=2.0)


def test_sample_rate_unknown_before_spacing_established():
    eng = default_engine()
    with pytest.raises(InsufficientDataError):
        eng.sample_rate_hz
    eng.step(frames_of(quiet_values(2))[0])
    with pytest.raises(InsufficientDataError):
        eng.sample_rate_hz


# -- warm-up and degenerate streams ---------------------------------------


def test_result_requires_completed_warmup():
    eng = default_engine()
    # far fewer frames than the pipeline delay: nothing is ever analyzed
    for f in frames_of(quiet_values(10)):
        assert eng.step(f) is None
    assert eng.status == STATUS_WARMING_UP
    with pytest.raises(InsufficientDataError):
        eng.result()


def test_run_raises_when_stream_too_short():
    with pytest.raises(InsufficientDataError):
        run(frames_of(quiet_values(10)), PreprocessConfig(nominal_hz=NOMINAL))


def test_quiescent_stream_converges_degenerate_single_cluster():
    # constant input: deviations are exactly zero, every window length
    # produces the same single all-bus cluster with zero variance, so the
    # engine converges as soon as the assertion horizon fills up
    res = run(frames_of(quiet_values(60)), PreprocessConfig(nominal_hz=NOMINAL))
    assert res.converged
    assert res.status == STATUS_CONVERGED
    assert res.degenerate
    assert len(res.groups.clusters) == 1
    assert res.groups.clusters[0].members == (0, 1, 2, 3)
    # warm-up needs 5 samples and the 0.5 s horizon at 20 frames/s spans 11
    # snapshots, so the first convergent length is 5 + 10 samples
    assert res.window_samples == 15
    assert res.window_length_s == pytest.approx(15 * DT)
    assert res.sample_rate_hz == pytest.approx(FS)
    # median half-width 2 plus 20 detrend samples at this rate
    assert res.group_delay_s == pytest.approx(22 * DT)
    assert res.window_from_event_s is None
    assert res.frames_rejected == 0


def test_engine_refuses_frames_after_convergence():
    eng = default_engine()
    frames = frames_of(quiet_values(80))
    for i, f in enumerate(frames):
        eng.step(f)
        if eng.status == STATUS_CONVERGED:
            break
    with pytest.raises(ConfigError):
        eng.step(frames[i + 1])


# -- frame validation ------------------------------------------------------


def test_width_change_rejected():
    eng = default_engine()
    eng.step(MeasurementFrame(0.0, np.zeros(3), NOMINAL))
    with pytest.raises(StreamShapeError):
        eng.step(MeasurementFrame(DT, np.zeros(4), NOMINAL))


def test_non_increasing_timestamp_rejected():
    eng = default_engine()
    eng.step(MeasurementFrame(0.0, np.zeros(3), NOMINAL))
    with pytest.raises(DataFormatError):
        eng.step(MeasurementFrame(0.0, np.ones(3), NOMINAL))


def test_spacing_drift_rejected():
    eng = default_engine()
    eng.step(MeasurementFrame(0.0, np.zeros(3), NOMINAL))
    eng.step(MeasurementFrame(DT, np.zeros(3), NOMINAL))
    with pytest.raises(DataFormatError):
        eng.step(MeasurementFrame(2 * DT + 0.011, np.zeros(3), NOMINAL))


def test_non_finite_sample_rejected_with_channel():
    eng = default_engine()
    eng.step(MeasurementFrame(0.0, np.zeros(3), NOMINAL))
    with pytest.raises(InputQualityError) as exc:
        eng.step(MeasurementFrame(DT, np.array([0.0, np.nan, 0.0]), NOMINAL))
    assert exc.value.bus == 1


def test_rejected_frame_leaves_state_usable():
    eng = default_engine()
    frames = frames_of(quiet_values(60))
    eng.step(frames[0])
    eng.step(frames[1])
    with pytest.raises(DataFormatError):
        eng.step(MeasurementFrame(frames[1].timestamp, np.zeros(4), NOMINAL))
    for f in frames[2:]:
        eng.step(f)
        if eng.status == STATUS_CONVERGED:
            break
    assert eng.status == STATUS_CONVERGED
    assert eng.frames_in == eng.K + 22  # pipeline delay sits in the buffers


# -- abort path -------------------------------------------------------------


def test_unstable_stream_aborts_at_max_window():
    rng = np.random.default_rng(42)
    values = NOMINAL + rng.normal(0.0, 0.05, (200, 8))
    res = run(
        frames_of(values),
        PreprocessConfig(nominal_hz=NOMINAL),
        ConvergenceConfig(max_window_s=1.2),
    )
    assert not res.converged
    assert res.status == STATUS_ABORTED
    assert res.window_length_s > 1.2
    # the first length past the bound is the last one analyzed; 24 samples
    # of 1/20 s already land a hair above 1.2 in binary floating point
    assert res.window_samples == 24


def test_engine_refuses_frames_after_abort():
    rng = np.random.default_rng(42)
    values = NOMINAL + rng.normal(0.0, 0.05, (200, 8))
    eng = CoherencyEngine(
        PreprocessConfig(nominal_hz=NOMINAL),
        ConvergenceConfig(max_window_s=1.2),
    )
    frames = frames_of(values)
    for i, f in enumerate(frames):
        eng.step(f)
        if eng.status == STATUS_ABORTED:
            break
    with pytest.raises(ConfigError):
        eng.step(frames[i + 1])


def test_stream_ending_early_reports_best_effort():
    cfg = kundur_preset(seed=7, duration_s=2.0)
    t, v, _ = generate(cfg)
    res = run(
        list(frames_from_arrays(t, v, cfg.nominal_hz)),
        PreprocessConfig(nominal_hz=cfg.nominal_hz),
    )
    assert not res.converged
    assert res.status == STATUS_ABORTED
    assert len(res.groups.clusters) >= 1


# -- online analysis equals offline recomputation ---------------------------


def test_trace_matches_batch_recomputation_on_preset():
    cfg = kundur_preset(seed=11, duration_s=6.0)
    t, v, _ = generate(cfg)
    pre = PreprocessConfig(nominal_hz=cfg.nominal_hz)
    eng = CoherencyEngine(pre)
    for f in frames_from_arrays(t, v, cfg.nominal_hz):
        eng.step(f)
        if eng.status == STATUS_CONVERGED:
            break
    rows = stable_prefix(v, pre, cfg.sample_rate_hz)
    assert eng.status == STATUS_CONVERGED
    ks = eng.trace.k
    assert ks == list(range(ks[0], ks[0] + len(ks)))
    for idx in [0, len(ks) // 3, 2 * len(ks) // 3, len(ks) - 1]:
        k = ks[idx]
        _, props = batch_properties(rows[:k])
        npt.assert_allclose(eng.trace.tau[idx], props.tau, rtol=1e-8, atol=1e-12)
    # final grouping equals the snapshot of the final window
    d2, props = batch_properties(rows[: eng.K])
    from taucoh.clustering import cluster_snapshot

    want = cluster_snapshot(props.tau, d2, eng.K)
    assert eng.result().groups.membership_key() == want.membership_key()


def test_trace_series_are_aligned():
    res = run(frames_of(quiet_values(60)), PreprocessConfig(nominal_hz=NOMINAL))
    tr = res.trace
    n = len(tr.k)
    assert n == len(tr.t_s) == len(tr.tau) == len(tr.n_clusters)
    assert n == len(tr.cluster_variances)
    assert all(b - a == 1 for a, b in zip(tr.k, tr.k[1:]))
    npt.assert_allclose(tr.t_s, [k * DT for k in tr.k])
    for count, variances in zip(tr.n_clusters, tr.cluster_variances):
        assert count == len(variances)


# -- event bookkeeping -------------------------------------------------------


def test_window_from_event_uses_stream_anchored_offset():
    # stream starts at t = 10 s, the disturbance hits at t = 11 s
    frames = frames_of(quiet_values(60), t0=10.0)
    res = run(
        frames,
        PreprocessConfig(nominal_hz=NOMINAL),
        disturbance_offset_s=11.0,
    )
    assert res.disturbance_offset_s == pytest.approx(1.0)
    assert res.window_from_event_s == pytest.approx(res.window_length_s - 1.0)


# -- convergence-parameter behaviour ------------------------------------------


@pytest.fixture(scope="module")
def preset_frames():
    cfg = kundur_preset(seed=7)
    t, v, _ = generate(cfg)
    return cfg, list(frames_from_arrays(t, v, cfg.nominal_hz))


def preset_window(preset_frames, **kw):
    cfg, frames = preset_frames
    res = run(
        frames,
        PreprocessConfig(nominal_hz=cfg.nominal_hz),
        ConvergenceConfig(**kw),
        disturbance_offset_s=cfg.event_time_s,
    )
    return res


def test_longer_horizon_needs_longer_window(preset_frames):
    wins = [
        preset_window(preset_frames, lambda_s=lam).window_samples
        for lam in (0.25, 0.5, 1.0)
    ]
    assert wins[0] <= wins[1] <= wins[2]
    assert wins[0] < wins[2]


def test_tighter_variance_tolerance_needs_longer_window(preset_frames):
    wins = [
        preset_window(preset_frames, var_rel_tol=tol).window_samples
        for tol in (1e-3, 1e-2, 1e-1)
    ]
    assert wins[0] >= wins[1] >= wins[2]
    assert wins[0] > wins[2]


def test_seed_matched_convergence_is_no_slower(preset_frames):
    pinned = preset_window(preset_frames, require_stable_membership=True)
    loose = preset_window(preset_frames, require_stable_membership=False)
    assert pinned.converged and loose.converged
    assert loose.window_samples <= pinned.window_samples
    assert loose.groups.membership_key() == pinned.groups.membership_key()


def test_converged_drift_is_within_tolerance(preset_frames):
    cfg, frames = preset_frames
    eng = CoherencyEngine(
        PreprocessConfig(nominal_hz=cfg.nominal_hz),
        disturbance_offset_s=cfg.event_time_s,
    )
    for f in frames:
        eng.step(f)
        if eng.status == STATUS_CONVERGED:
            break
    assert eng.last_drift is not None
    assert eng.last_drift <= eng.convergence_config.var_rel_tol
