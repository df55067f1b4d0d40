import math

import numpy as np
import pytest

from pumpep.core import default_params, pump_from_d0
from pumpep.errors import NoEPError
from pumpep.ep import (
    OVERLAP_GATE,
    discriminant_at,
    ep_locus,
    locate_ep,
    splitting_curve,
)

P = default_params()
GAMMA_COR = (0.0, 1.5e-3, 5e-3, 1e-2)
# regression values pinned after the first scan
FROZEN_EP = {
    0.0: -5.521587568495554e-4,
    1.5e-3: -1.1619449064217272e-3,
    5e-3: -4.519102262103815e-3,
    1e-2: -1.3239480487859577e-2,
}


@pytest.fixture(scope="module")
def eps():
    return {gc: locate_ep(P.updated(gamma_cor=gc)) for gc in GAMMA_COR}


class TestLocate:
    @pytest.mark.parametrize("gc", GAMMA_COR)
    def test_negative_inversion_ep(self, eps, gc):
        r = eps[gc]
        assert -1 < r.d0_ep < 0
        assert r.overlap_ep >= OVERLAP_GATE and r.is_ep and r.status == "ep"
        assert r.splitting <= 1e-6
        assert r.bracket_width < 1e-12
        assert r.mode == "coupled"
        assert r.gamma_p_ep == pytest.approx(pump_from_d0(P, r.d0_ep), rel=1e-15)
        assert r.d0_ep == pytest.approx(FROZEN_EP[gc], abs=1e-11)
        assert abs(r.lambda_ep.imag) <= 1e-6

    def test_correlation_lowers_ep(self, eps):
        assert eps[1e-2].d0_ep < eps[0.0].d0_ep

    def test_bracketing_soundness(self, eps):
        for gc, r in eps.items():
            a, b = r.bracket
            assert a <= r.d0_ep <= b
            p = P.updated(gamma_cor=gc)
            assert discriminant_at(p, a) < 0 < discriminant_at(p, b)

    def test_refinement_convergence(self, eps):
        for gc, r in eps.items():
            coarse = locate_ep(P.updated(gamma_cor=gc), n_scan=1001)
            step = (-1e-6 - (-1 + 1e-6)) / 1000
            assert abs(coarse.d0_ep - r.d0_ep) <= step

    def test_no_coupling_raises(self):
        with pytest.raises(NoEPError):
            locate_ep(P.updated(omega_R=0.0), (-1 + 1e-6, -1e-6))

    def test_search_without_ep(self):
        with pytest.raises(NoEPError):
            locate_ep(P, (-0.9, -0.5), n_scan=51)

    @pytest.mark.parametrize("search", [(-0.2, -0.5), (-1.5, 0.0), (0.0, 1.0)])
    def test_bad_search(self, search):
        with pytest.raises(ValueError):
            locate_ep(P, search)

    def test_frozen_mode_runs(self):
        # the frozen pump keeps gamma_sigma fixed; the pair still collapses
        r = locate_ep(P, pump_mode="frozen")
        assert r.mode == "frozen" and r.gamma_p_ep == P.gamma_P
        assert -1 < r.d0_ep < 0


class TestLocus:
    def test_four_values(self):
        rows = ep_locus(P, GAMMA_COR)
        assert [r.gamma_cor for r in rows] == list(GAMMA_COR)
        for r in rows:
            assert r.status == "ep" and r.d0_ep < 0 and r.overlap_ep >= OVERLAP_GATE

    def test_monotone_on_21_points(self):
        rows = ep_locus(P, np.linspace(0, 1e-2, 21))
        d = [r.d0_ep for r in rows]
        assert all(r.status == "ep" for r in rows)
        assert all(b < a - 1e-12 for a, b in zip(d, d[1:]))

    def test_repeated_values_identical(self):
        a, b = ep_locus(P, [2e-3, 2e-3])
        assert a == b

    def test_no_ep_flagged_per_row(self):
        rows = ep_locus(P, [0.0], search=(-0.9, -0.5), n_scan=51)
        assert rows[0].status == "no-ep" and math.isnan(rows[0].d0_ep)

    def test_negative_gamma_cor_rejected(self):
        with pytest.raises(ValueError):
            ep_locus(P, [-1e-3])


class TestSplitting:
    def test_two_sided(self, eps):
        d_ep = eps[0.0].d0_ep
        grid = np.concatenate([np.linspace(-1, d_ep, 400, endpoint=False), np.linspace(d_ep, 0, 401)[1:-1]])
        rows = splitting_curve(P, grid)
        for r in rows:
            if r.d0 < d_ep:
                assert r.dim > 0
            else:
                assert r.dim <= 1e-10

    def test_at_ep(self, eps):
        for gc, r in eps.items():
            row = splitting_curve(P.updated(gamma_cor=gc), [r.d0_ep])[0]
            assert row.dim <= 1e-6

    @pytest.mark.parametrize("gc", GAMMA_COR)
    def test_strong_coupling_persistence(self, gc):
        row = splitting_curve(P.updated(gamma_cor=gc), [-0.9])[0]
        assert row.dim >= 5e-3

    def test_scale_without_correlation(self):
        row = splitting_curve(P, [-0.9])[0]
        # order 2 sqrt(N) Omega_R
        assert 1e-2 < row.dim < 4e-2

    def test_first_row_never_ambiguous(self):
        rows = splitting_curve(P, [-0.5, -0.4])
        assert rows[0].ambiguous is False
