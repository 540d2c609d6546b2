import numpy as np
import pytest
import sympy as sp

from eulerlimits.defects import MatrixMeasureField, identity_times
from eulerlimits.grid import Grid, SupportError, make_battery, make_bump
from eulerlimits.liouville import (
    VERDICT_NOT_PSD, VERDICT_OK, BumpPotential, boundary_trace_check, counterexample_field, div_pairing,
    linear_extension_pairing, liouville_verdict,
)

BOX = ((-1.0, 1.0), (-1.0, 1.0))


def grid(n, pad=0.25):
    return Grid((n, n), BOX, "far_field_padded", pad)


def test_zero_measure():
    g = grid(16)
    D = MatrixMeasureField.zeros(g)
    for tf in make_battery(g, 5, 0, kind="vector"):
        assert div_pairing(D, tf) == 0.0
    assert liouville_verdict(D).verdict == VERDICT_OK


def test_uniform_identity_pairs_to_zero():
    g = grid(64)
    c = 2.5
    D = identity_times(g, np.full(g.cells, c * g.cell_volume))
    for tf in make_battery(g, 16, 3, kind="vector"):
        assert abs(div_pairing(D, tf)) < 1e-6 * c * tf.c1_norm()


def test_div_pairing_support_and_kind():
    g = grid(16)
    D = MatrixMeasureField.zeros(g)
    with pytest.raises(ValueError):
        div_pairing(D, make_bump((0.0, 0.0), 0.2))
    with pytest.raises(SupportError):
        div_pairing(D, make_bump((0.6, 0.0), 0.2, kind="vector"))


def test_linear_extension_on_atom():
    g = Grid((17, 17), ((-1.0625, 1.0625),) * 2, pad=0.25)
    D = MatrixMeasureField.atom(g, (8, 8), np.outer([1.0, 0.0], [1.0, 0.0]))
    assert linear_extension_pairing(D, (1.0, 0.0)).limit == pytest.approx(1.0, abs=1e-14)
    assert linear_extension_pairing(D, (0.0, 1.0)).limit == pytest.approx(0.0, abs=1e-14)


def test_psd_corpus_is_never_divergence_free():
    g = grid(32)
    rng = np.random.default_rng(0)
    corpus = [MatrixMeasureField.atom(g, (16, 16), np.diag([1.0, 0.0])),
              MatrixMeasureField.atom(g, (10, 20), np.array([[2.0, 1.0], [1.0, 1.0]])),
              identity_times(g, np.where(np.arange(32)[:, None] < 16, 1.0, 0.0) * np.ones(g.cells))]
    for _ in range(5):
        V = rng.normal(size=(2, 2) + g.cells) * (rng.uniform(size=g.cells) < 0.1)
        corpus.append(MatrixMeasureField.from_full(g, np.einsum("kiab,kjab->ijab", V, V)))
    for D in corpus:
        v = liouville_verdict(D, count=64)
        assert v.psd and v.sup_div > v.tol_div and v.verdict == VERDICT_OK


def test_counterexample_is_divergence_free_symbolically():
    x, y = sp.symbols("x y")
    phi = sp.Function("phi")(x, y)
    D = sp.Matrix([[phi.diff(y, 2), -phi.diff(x, y)], [-phi.diff(x, y), phi.diff(x, 2)]])
    div = [sp.simplify(D[i, 0].diff(x) + D[i, 1].diff(y)) for i in range(2)]
    assert div == [0, 0]


def test_counterexample_pairing_second_order():
    pot = BumpPotential()
    tests = make_battery(grid(16), 12, 4, kind="vector")
    sups, mins, tvs = [], [], []
    for n in (32, 64, 128, 256):
        D = counterexample_field(pot, grid(n))
        sups.append(max(abs(div_pairing(D, tf)) for tf in tests))
        mins.append(float(D.min_eig.min()))
        tvs.append(D.total_variation())
    slope = -np.polyfit(np.log2([32, 64, 128, 256]), np.log2(sups), 1)[0]
    assert 1.7 < slope < 2.3
    assert all(m < 0 for m in mins)
    assert max(tvs) / min(tvs) < 1.1
    v = liouville_verdict(counterexample_field(pot, grid(128)))
    assert v.verdict == VERDICT_NOT_PSD and not v.psd


def test_smoothness_guard():
    with pytest.raises(ValueError, match="smooth"):
        counterexample_field(BumpPotential(power=2), grid(64))
    with pytest.raises(ValueError):
        counterexample_field(BumpPotential(), Grid((8,), ((0, 1),)))


def test_boundary_trace_ladder():
    g = Grid((64, 64), BOX, "bounded_domain", 0.0)
    X = g.centers()
    interior = identity_times(g, np.where((np.abs(X[0]) < 0.5) & (np.abs(X[1]) < 0.5), g.cell_volume, 0.0))
    rep = boundary_trace_check(interior, [0.25, 0.125, 0.0625])
    assert rep.verdict == "pass" and rep.values == [0.0, 0.0, 0.0]
    const = identity_times(g, np.full(g.cells, g.cell_volume))
    rep = boundary_trace_check(const, [0.5, 0.25, 0.125, 0.0625])
    assert rep.verdict == "fail"
    # perimeter 8, trace 2: the layer value tends to 16 for small delta
    assert rep.values[-1] == pytest.approx(16.0, rel=0.1)
    dist = np.minimum.reduce([X[0] + 1, 1 - X[0], X[1] + 1, 1 - X[1]])
    taper = identity_times(g, np.clip(dist / 0.5, 0, 1) * g.cell_volume)
    rep = boundary_trace_check(taper, [0.25, 0.125, 0.0625])
    assert rep.passed and rep.slope == pytest.approx(1.0, abs=0.15)
    with pytest.raises(ValueError, match="unresolvable"):
        boundary_trace_check(const, [0.01])
