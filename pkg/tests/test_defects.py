import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from eulerlimits.eos import FarField, GasParameters, IsentropicState
from eulerlimits.generators import (
    SequenceSpec, concentration_bump, constant_state_sequence, oscillatory_two_state,
)
from eulerlimits.defects import (
    MatrixMeasureField, ScalarMeasureField, defect_report, extrapolate_levels, identity_times,
    internal_energy_defect, psd_check, total_defect, viscosity_defect, weak_limit_estimate,
)
from eulerlimits.grid import Grid

G2 = GasParameters(2.0, 1.0)
G2D = Grid((4, 4), ((0, 1), (0, 1)))


def test_extrapolation_geometric_and_constant():
    n = np.arange(5)
    vals = 3.0 + 0.7 * 0.5**n
    lim, code = extrapolate_levels(vals)
    assert lim == pytest.approx(3.0, rel=1e-13) and code == 1
    lim, code = extrapolate_levels(np.full(4, 2.5))
    assert lim == 2.5 and code == 0
    # ratio above the limit keeps the last level
    lim, code = extrapolate_levels(1.0 + 0.95**n)
    assert code == 0 and lim == 1.0 + 0.95**4
    with pytest.raises(ValueError, match="cannot extrapolate"):
        extrapolate_levels([1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 3), st.floats(0.1, 0.8))
def test_extrapolation_exact_on_geometric(L, A, r):
    vals = L + A * r ** np.arange(5)
    lim, code = extrapolate_levels(vals)
    assert code == 1 and lim == pytest.approx(L, abs=1e-9 * (abs(L) + A))


def spec(levels=4, cells=64, **kw):
    return SequenceSpec(levels=levels, base_cells=(cells,), n_times=3, g=G2, **kw)


def test_constant_sequence_has_no_defect():
    s = spec()
    seq = constant_state_sequence(s)
    coarse = s.grid(1).coarsen(8)
    lim = weak_limit_estimate(seq, coarse)
    np.testing.assert_array_equal(lim.rho, 1.0)
    rep = defect_report(seq, lim, coarse, G2)
    assert rep.mass == 0.0 and rep.identity_gap == 0.0
    assert np.all(rep.R_v.mats == 0.0)


def test_laminate_internal_energy_defect():
    s = spec(levels=4, cells=64)
    A, B = IsentropicState(1.0, (0.0,)), IsentropicState(3.0, (0.0,))
    seq = oscillatory_two_state(s, A, B, 0.5, cells_per_period=2)
    coarse = s.grid(1).coarsen(2)
    lim = weak_limit_estimate(seq, coarse)
    region = seq[0].meta["region"][0]
    x = coarse.axis_centers(0)
    inside = (x > region[0]) & (x < region[1])
    np.testing.assert_allclose(lim.rho[0][inside], 2.0, rtol=1e-12)
    R_e = internal_energy_defect(seq, lim, coarse, G2)
    # 1/2 (P(1) + P(3)) - P(2) = 1 per unit volume for gamma = 2, a = 1
    np.testing.assert_allclose(R_e.weights[inside] / coarse.cell_volume, 1.0, rtol=1e-12)
    np.testing.assert_allclose(R_e.weights[~inside], 0.0, atol=1e-14)
    rep = defect_report(seq, lim, coarse, G2)
    assert rep.identity_relative_gap < 1e-12
    np.testing.assert_allclose(rep.R_v.mats, 0.0, atol=1e-14)


def test_concentration_viscosity_defect():
    s = spec(levels=5, cells=128, far=FarField(2.0, (0.0,)))
    seq = concentration_bump(s, radius_cells=4)
    coarse = s.grid(1).coarsen(8)
    lim = weak_limit_estimate(seq, coarse)
    R_v = viscosity_defect(seq, lim, coarse, G2)
    norm2 = seq[0].meta["chi_norm2"]
    assert R_v.mats[0, 0].sum() == pytest.approx(norm2 / 2.0, rel=1e-10)
    r0 = 4 * s.grid(1).h
    assert norm2 == pytest.approx(float(oracles.quartic_squared_integral()) * r0, rel=2e-2)
    assert psd_check(R_v).psd
    rep = defect_report(seq, lim, coarse, G2)
    assert rep.identity_relative_gap < 1e-6
    assert rep.level_mass[-1] == pytest.approx(rep.level_mass[-2], rel=1e-12)


def test_total_defect_examples():
    z = MatrixMeasureField.zeros(G2D)
    w = np.arange(16.0).reshape(4, 4)
    D = total_defect(z, ScalarMeasureField.zeros(G2D), G2)
    assert np.all(D.mats == 0)
    D = total_defect(z, ScalarMeasureField(G2D, w), G2)
    np.testing.assert_array_equal(D.mats[0, 0], w)
    np.testing.assert_array_equal(D.mats[1, 1], w)
    np.testing.assert_array_equal(D.mats[0, 1], 0.0)
    with pytest.raises(ValueError, match="grid mismatch"):
        total_defect(z, ScalarMeasureField.zeros(Grid((8, 8), ((0, 1), (0, 1)))), G2)


def test_psd_check_examples():
    rep = psd_check(MatrixMeasureField.zeros(G2D))
    assert rep.psd and rep.worst == 0.0
    bad = MatrixMeasureField.atom(G2D, (1, 2), np.diag([1.0, -0.1]))
    rep = psd_check(bad)
    assert not rep.psd and rep.worst == pytest.approx(-0.1) and rep.worst_cell == (1, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_gram_measures_are_psd(seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(3, 2, 4, 4))
    full = np.einsum("kiab,kjab->ijab", V, V)
    M = MatrixMeasureField.from_full(G2D, full)
    assert psd_check(M).psd
    # operator-norm mass of a PSD field: largest eigenvalue per cell, at most the trace
    tv = M.total_variation()
    lam_max = np.linalg.eigvalsh(np.moveaxis(full, (0, 1), (-2, -1)))[..., -1]
    assert tv == pytest.approx(lam_max.sum(), rel=1e-12)
    assert tv <= np.sum(np.trace(full)) * (1 + 1e-12)


def test_identity_measure_trace():
    M = identity_times(G2D, np.ones((4, 4)))
    np.testing.assert_array_equal(M.trace, 2.0)
