"""Observable catalog: values, derivatives, branch structure."""

import numpy as np
import pytest

import obsmatch as om
from obsmatch.errors import BreakpointError, CatalogError, EvaluationError
from obsmatch.observables import (CATALOG_NAMES, FD_STEP, _finite_difference,
                                  breakpoints, piecewise_value)


def test_identity_and_fig1_f2_values():
    ident = om.catalog("identity")
    np.testing.assert_allclose(om.evaluate(ident, np.array([0.2, 0.7])), [0.2, 0.7])
    f2 = om.catalog("fig1_f2")
    np.testing.assert_allclose(om.evaluate(f2, np.array([0.1, 0.2])), [0.4, 0.4])


def test_example_f_values_and_branches():
    f = om.catalog("example_f")
    assert om.evaluate(f, 0.75) == pytest.approx(0.75, abs=1e-15)
    assert om.evaluate(f, 0.2) == pytest.approx(0.4, abs=1e-15)
    assert om.evaluate(f, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert len(f.branches) == 2


def test_fig3_f4_and_mean_values():
    f4 = om.catalog("fig3_f4")
    np.testing.assert_allclose(om.evaluate(f4, np.array([0.5, -0.2])), [0.25, 0.04])
    mean = om.catalog("mean")
    assert om.evaluate(mean, np.array([0.4, 0.6])) == pytest.approx(0.5)


def test_fig1_f5_keeps_degenerate_axis():
    f5 = om.catalog("fig1_f5")
    out = om.evaluate(f5, np.array([0.3, 0.4]))
    assert out[0] == 1.0
    assert out[1] == pytest.approx(0.3 + 0.16)
    assert f5.out_dim == 2


def test_catalog_is_total_and_rejects_unknown():
    for name in CATALOG_NAMES:
        assert om.catalog(name).name
    with pytest.raises(CatalogError):
        om.catalog("nope")


def test_derivative_examples():
    f = om.catalog("example_f")
    assert om.derivative(f, 0.2) == pytest.approx(2.0, abs=0)
    assert om.derivative(f, 0.8) == pytest.approx(-1.0, abs=0)
    ident = om.catalog("identity")
    assert om.derivative(ident, 0.3) == 1.0


def test_derivative_at_breakpoint_raises_and_names_boundary():
    f = om.catalog("example_f")
    with pytest.raises(BreakpointError) as err:
        om.derivative(f, 0.5)
    assert err.value.breakpoint == pytest.approx(0.5)


def test_reciprocal_trig_strict_vs_batch():
    f3 = om.catalog("fig1_f3")
    with pytest.raises(EvaluationError):
        om.evaluate(f3, np.array([0.0, 0.5]))
    out = f3.eval_batch(np.array([[0.0, 0.5]]))
    assert np.isfinite(out).all()


@pytest.mark.parametrize("name,low", [
    ("fig1_f2", None), ("fig1_f3", 0.01), ("fig1_f4", None), ("fig1_f5", None),
    ("fig3_f2", None), ("fig3_f3", None), ("fig3_f4", None), ("fig3_f5", 0.01),
    ("mean", None),
])
def test_analytic_derivative_matches_finite_difference(name, low):
    # 1e3 points; singular observables sampled away from their axes, where
    # the FD truncation error stays below the 1e-4 relative tolerance
    obs = om.catalog(name)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.0, 1.0, size=(1000, 2))
    if low is not None:
        pts = np.sign(pts) * np.maximum(np.abs(pts), low)
    for x in pts:
        ana = np.atleast_2d(np.asarray(obs.derivative(x), dtype=float))
        fd = np.atleast_2d(np.asarray(_finite_difference(obs, x), dtype=float))
        scale = np.maximum(np.abs(ana), 1.0)
        assert np.max(np.abs(ana - fd) / scale) < 1e-4, (name, x)


def test_example_f_derivative_matches_fd_away_from_breakpoints():
    f = om.catalog("example_f")
    rng = np.random.default_rng(2)
    xs = rng.uniform(0.01, 0.99, 1000)
    xs = xs[np.abs(xs - 0.5) > 1e-3]
    for x in xs:
        fd = float(_finite_difference(f, float(x)))
        assert om.derivative(f, float(x)) == pytest.approx(fd, rel=1e-4)


def test_piecewise_branches_partition_and_invert():
    f = om.catalog("example_f")
    rng = np.random.default_rng(3)
    for br in f.branches:
        a, b = br.domain
        xs = rng.uniform(a, b, 1000)
        np.testing.assert_allclose(br.inverse(br.map(xs)), xs, rtol=0, atol=1e-12)
        assert np.all(np.abs(br.dmap(xs)) > 0)
        np.testing.assert_allclose(piecewise_value(f.branches, xs), br.map(xs),
                                   rtol=0, atol=1e-12)
    assert breakpoints(f.branches).tolist() == [0.0, 0.5, 1.0]


def test_resolve_observable_inline_specs():
    piece = om.resolve_observable({
        "type": "piecewise", "name": "tent",
        "branches": [
            {"domain": [0.0, 0.5], "kind": "affine", "coeffs": [0.0, 2.0]},
            {"domain": [0.5, 1.0], "kind": "affine", "coeffs": [2.0, -2.0]},
        ]})
    assert piece.eval(0.25) == pytest.approx(0.5)
    assert piece.eval(0.75) == pytest.approx(0.5)

    lin = om.resolve_observable({"type": "linear", "name": "proj", "matrix": [[1.0, 2.0]]})
    assert lin.out_dim == 1
    assert lin.eval(np.array([0.5, 0.25])) == pytest.approx(1.0)

    mono = om.resolve_observable({
        "type": "piecewise", "name": "sq",
        "branches": [{"domain": [0.0, 1.0], "kind": "monomial", "coef": 1.0, "power": 2.0}]})
    assert mono.eval(0.5) == pytest.approx(0.25)

    with pytest.raises(CatalogError):
        om.resolve_observable("unknown_name")
    with pytest.raises(ValueError):
        om.resolve_observable({"type": "piecewise", "branches": []})
    with pytest.raises(ValueError):
        om.resolve_observable({"type": "weird"})


def test_evaluation_is_deterministic():
    f3 = om.catalog("fig1_f3")
    x = np.array([0.123, 0.456])
    assert np.array_equal(om.evaluate(f3, x), om.evaluate(f3, x))


def test_fd_step_constant():
    assert FD_STEP == 1e-6
