import numpy as np
import numpy.testing as npt
import pytest

from taucoh import _backend
from taucoh.bench import run_benchmark
from taucoh.engine import CoherencyEngine, run
from taucoh.errors import ConfigError
from taucoh.io import frames_from_arrays
from taucoh.preprocess import PreprocessConfig
from taucoh.siggen import generate, kundur_preset
from taucoh.tda import StreamingTda

HAVE_COMPILED = "compiled" in _backend.available_backends()
needs_compiled = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled kernels not built"
)


def both_backends():
    py = _backend.load("python")
    cp = _backend.load("compiled")
    return py, cp


# -- selection ----------------------------------------------------------------


def test_python_backend_always_available():
    assert "python" in _backend.available_backends()
    assert _backend.load("python").BACKEND_NAME == "python"


def test_unknown_backend_rejected():
    with pytest.raises(ConfigError):
        _backend.load("fortran")


def test_environment_variable_selects_backend(monkeypatch):
    monkeypatch.setenv("TAUCOH_BACKEND", "python")
    assert _backend.load().BACKEND_NAME == "python"
    monkeypatch.delenv("TAUCOH_BACKEND")
    assert _backend.load().BACKEND_NAME in ("python", "compiled")


@needs_compiled
def test_compiled_backend_loads():
    assert _backend.load("compiled").BACKEND_NAME == "compiled"
    # default (no override) prefers the extension
    assert _backend.load().BACKEND_NAME == "compiled"


# -- kernel-by-kernel agreement ---------------------------------------------------


@needs_compiled
def test_distance_update_kernels_agree(rng):
    py, cp = both_backends()
    dev = rng.normal(size=40)
    a = np.zeros((40, 40))
    b = np.zeros((40, 40))
    for _ in range(3):
        py.update_distance_matrix(a, dev)
        cp.update_distance_matrix(b, dev)
        dev = rng.normal(size=40)
    npt.assert_array_equal(a, b)


@needs_compiled
def test_centered_accumulator_kernels_agree(rng):
    py, cp = both_backends()
    dev = rng.normal(size=50)
    sa = np.zeros(50)
    sb = np.zeros(50)
    ma, va = py.update_centered_accumulators(sa, dev)
    mb, vb = cp.update_centered_accumulators(sb, dev)
    assert ma == pytest.approx(mb, rel=1e-14)
    assert va == pytest.approx(vb, rel=1e-13)
    npt.assert_allclose(sa, sb, rtol=1e-13, atol=0)


@needs_compiled
def test_chain_walk_kernels_agree_including_ties(rng):
    py, cp = both_backends()
    # exact distance ties from repeated coordinates
    xs = np.array([0.0, 1.0, 2.0, 1.0, 0.0, 3.0])
    d2 = (xs[:, None] - xs[None, :]) ** 2
    tau = np.array([0.2, 0.3, 0.3, 0.1, 0.05, 0.05])
    npt.assert_array_equal(py.chain_walk(d2, tau), cp.chain_walk(d2, tau))
    for _ in range(10):
        pts = rng.normal(size=(3, 7))
        d2 = ((pts[:, :, None] - pts[:, None, :]) ** 2).sum(axis=0)
        tau = rng.uniform(0.0, 1.0, 7)
        npt.assert_array_equal(py.chain_walk(d2, tau), cp.chain_walk(d2, tau))


@needs_compiled
def test_label_pair_sum_kernels_agree(rng):
    py, cp = both_backends()
    pts = rng.normal(size=(4, 30))
    d2 = ((pts[:, :, None] - pts[:, None, :]) ** 2).sum(axis=0)
    labels = rng.integers(0, 4, 30).astype(np.intp)
    a = py.label_pair_sums(d2, labels, 4)
    b = cp.label_pair_sums(d2, labels, 4)
    npt.assert_allclose(a, b, rtol=1e-12)
    assert a.shape == (4, 4)


# -- end-to-end agreement ------------------------------------------------------------


@needs_compiled
def test_streaming_analytics_agree_across_backends(rng):
    py, cp = both_backends()
    ta = StreamingTda(9, backend=py)
    tb = StreamingTda(9, backend=cp)
    for _ in range(30):
        row = rng.normal(size=9)
        ta.push(row)
        tb.push(row)
    pa, pb = ta.properties(), tb.properties()
    npt.assert_allclose(pa.tau, pb.tau, rtol=1e-12)
    npt.assert_allclose(pa.eps, pb.eps, rtol=1e-12)
    npt.assert_allclose(ta.d2, tb.d2, rtol=1e-13)


@needs_compiled
def test_engine_result_identical_groups_across_backends():
    cfg = kundur_preset(seed=9)
    t, v, _ = generate(cfg)
    frames = list(frames_from_arrays(t, v, cfg.nominal_hz))
    results = {}
    for name in ("python", "compiled"):
        res = run(
            frames,
            PreprocessConfig(nominal_hz=cfg.nominal_hz),
            backend=_backend.load(name),
        )
        results[name] = res
        assert res.backend == name
    a, b = results["python"], results["compiled"]
    assert a.converged and b.converged
    assert a.groups.membership_key() == b.groups.membership_key()
    assert a.window_samples == b.window_samples
    assert a.center_buses == b.center_buses


def test_engine_records_backend_name():
    eng = CoherencyEngine(
        PreprocessConfig(nominal_hz=60.0), backend=_backend.load("python")
    )
    assert eng.kernels.BACKEND_NAME == "python"


# -- benchmark -----------------------------------------------------------------------


def test_benchmark_smoke():
    rows = run_benchmark(n_buses=12, n_frames=60, repeat=1)
    assert rows[-1]["backend"] == "python"
    names = [r["backend"] for r in rows]
    assert names == _backend.available_backends()
    for row in rows:
        assert row["frames_per_s"] > 0


def test_benchmark_cli_table(capsys):
    from taucoh import cli

    code = cli.main(["bench", "--n-buses", "10", "--frames", "40", "--repeat", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "frames/s" in out
    assert "python" in out
