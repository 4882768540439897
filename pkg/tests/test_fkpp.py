import math

import numpy as np
import pytest

from brbm.errors import NumericalError
from brbm import fkpp
from brbm.analytics import frontier_fit

SQRT2 = math.sqrt(2.0)


def line_grid(T, dx=0.1, lo=-20.0, margin=20.0, dt=None):
    return fkpp.Grid1D(lo=lo, hi=SQRT2 * T + margin, dx=dx, dt=dt or dx * dx, T=T)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            fkpp.Grid1D(lo=1.0, hi=0.0, dx=0.1, dt=0.01, T=1.0)
        with pytest.raises(ValueError):
            fkpp.Grid1D(lo=0.0, hi=1.0, dx=-0.1, dt=0.01, T=1.0)
        with pytest.raises(ValueError):
            fkpp.Grid1D(lo=0.0, hi=1.0, dx=0.1, dt=1.5, T=1.0)  # reaction stability
        with pytest.raises(ValueError):
            fkpp.Grid1D(lo=0.0, hi=1.0, dx=0.1, dt=0.01, T=-1.0)

    def test_nodes(self):
        g = fkpp.Grid1D(lo=-1.0, hi=1.0, dx=0.5, dt=0.1, T=1.0)
        np.testing.assert_allclose(g.nodes(), [-1.0, -0.5, 0.0, 0.5, 1.0])


class TestEquilibria:
    def test_zero_state_is_fixed(self):
        g = fkpp.Grid1D(lo=-5.0, hi=5.0, dx=0.1, dt=0.05, T=2.0)
        hist = fkpp.solve_fkpp_line(g, initial=np.zeros(g.n_nodes))
        assert np.all(hist.final.values == 0.0)

    def test_one_state_is_fixed(self):
        g = fkpp.Grid1D(lo=-5.0, hi=5.0, dx=0.1, dt=0.05, T=2.0)
        hist = fkpp.solve_fkpp_line(g, initial=np.ones(g.n_nodes))
        np.testing.assert_allclose(hist.final.values, 1.0, atol=1e-13)

    def test_halfline_ones_fixed(self):
        g = fkpp.Grid1D(lo=0.0, hi=10.0, dx=0.1, dt=0.05, T=2.0)
        hist = fkpp.solve_fkpp_halfline(g, x_shift=25.0)
        np.testing.assert_allclose(hist.final.values, 1.0, atol=1e-13)

    def test_halfline_zero_shift_stays_zero(self):
        g = fkpp.Grid1D(lo=0.0, hi=10.0, dx=0.1, dt=0.05, T=2.0)
        hist = fkpp.solve_fkpp_halfline(g, x_shift=0.0)
        assert np.all(hist.final.values == 0.0)


class TestLineSolver:
    def test_range_and_monotone(self):
        hist = fkpp.solve_fkpp_line(line_grid(6.0))
        u = hist.final.values
        assert u.min() >= -1e-12 and u.max() <= 1.0 + 1e-12
        assert np.all(np.diff(u) >= -1e-10)

    def test_comparison_principle(self):
        g = line_grid(4.0)
        a = fkpp.solve_fkpp_line(g, jump_position=0.0).final.values
        b = fkpp.solve_fkpp_line(g, jump_position=0.5).final.values
        # data ordered H(x) >= H(x - 0.5) pointwise, so solutions stay ordered
        assert np.all(a - b >= -1e-12)

    def test_translation_equivariance(self):
        g = line_grid(2.0, dx=0.1)
        a = fkpp.solve_fkpp_line(g, jump_position=0.0).final.values
        b = fkpp.solve_fkpp_line(g, jump_position=1.0).final.values
        shift = int(round(1.0 / g.dx))
        np.testing.assert_allclose(b[shift:-1], a[:-shift - 1], atol=1e-9)

    def test_front_at_domain_edge_raises(self):
        g = fkpp.Grid1D(lo=-5.0, hi=6.0, dx=0.1, dt=0.01, T=8.0)
        with pytest.raises(NumericalError):
            fkpp.solve_fkpp_line(g)

    def test_initial_front_on_node(self):
        g = line_grid(1.0)
        hist = fkpp.solve_fkpp_line(g)
        state0 = hist.state(0.0)
        assert fkpp.front_position(state0, 0.5) == pytest.approx(0.0, abs=g.dx / 2)

    def test_refinement_moves_front_below_tolerance(self):
        f = {}
        for dx in (0.1, 0.05):
            hist = fkpp.solve_fkpp_line(line_grid(8.0, dx=dx))
            f[dx] = fkpp.front_position(hist.final, 0.5)
        assert abs(f[0.1] - f[0.05]) < 1e-2


class TestFrontPosition:
    def test_level_must_be_bracketed(self):
        g = fkpp.Grid1D(lo=-5.0, hi=5.0, dx=0.1, dt=0.05, T=1.0)
        hist = fkpp.solve_fkpp_line(g, initial=np.zeros(g.n_nodes))
        with pytest.raises(ValueError):
            fkpp.front_position(hist.final, 0.5)

    def test_level_domain(self):
        hist = fkpp.solve_fkpp_line(line_grid(1.0))
        with pytest.raises(ValueError):
            fkpp.front_position(hist.final, 1.5)

    def test_translated_field_translated_front(self):
        g = line_grid(2.0, dx=0.1)
        a = fkpp.solve_fkpp_line(g, jump_position=0.0).final
        b = fkpp.solve_fkpp_line(g, jump_position=1.0).final
        fa = fkpp.front_position(a, 0.5)
        fb = fkpp.front_position(b, 0.5)
        assert fb - fa == pytest.approx(1.0, abs=1e-6)

    def test_decreasing_fields_supported(self):
        g = fkpp.Grid1D(lo=0.0, hi=10.0, dx=0.1, dt=0.01, T=1.0)
        hist = fkpp.solve_fkpp_halfline(g, x_shift=5.0)
        pos = fkpp.front_position(hist.final, 0.5)
        assert 3.0 < pos < 7.0


class TestHalfline:
    def test_requires_origin_grid(self):
        g = fkpp.Grid1D(lo=-1.0, hi=5.0, dx=0.1, dt=0.01, T=1.0)
        with pytest.raises(ValueError):
            fkpp.solve_fkpp_halfline(g, x_shift=1.0)

    def test_nonincreasing_in_y(self):
        g = fkpp.Grid1D(lo=0.0, hi=SQRT2 * 4 + 20.0, dx=0.05, dt=0.0025, T=4.0)
        hist = fkpp.solve_fkpp_halfline(g, x_shift=5.0)
        assert np.all(np.diff(hist.final.values) <= 1e-10)

    def test_neumann_closure_second_order(self):
        vals = {}
        for dx in (0.1, 0.05):
            g = fkpp.Grid1D(lo=0.0, hi=SQRT2 * 4 + 20.0, dx=dx, dt=dx * dx, T=4.0)
            u = fkpp.solve_fkpp_halfline(g, x_shift=6.0).final.values
            vals[dx] = abs(-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
        assert vals[0.1] < 1e-4
        assert vals[0.05] < 1e-4

    def test_family_threshold_profile_monotone_in_x(self):
        g = fkpp.Grid1D(lo=0.0, hi=SQRT2 * 3 + 20.0, dx=0.1, dt=0.01, T=3.0)
        xs = np.arange(0.0, 10.0 + 1e-9, 0.5)
        fam = fkpp.solve_halfline_family(g, xs, store_dt=1.0)
        for y in (0.0, 1.0):
            prof = fam.threshold_profile(3.0, y)
            assert np.all(np.diff(prof) >= -1e-10)

    def test_family_consistent_with_single_solve(self):
        g = fkpp.Grid1D(lo=0.0, hi=10.0, dx=0.1, dt=0.01, T=2.0)
        fam = fkpp.solve_halfline_family(g, [3.0, 5.0], store_dt=1.0)
        single = fkpp.solve_fkpp_halfline(g, 5.0, store_dt=1.0)
        np.testing.assert_allclose(fam.at_time(2.0)[1], single.final.values, atol=1e-13)


class TestHistory:
    def test_unstored_time_rejected(self):
        hist = fkpp.solve_fkpp_line(line_grid(1.0), store_dt=0.5)
        with pytest.raises(ValueError):
            hist.state(0.123)

    def test_store_grid(self):
        hist = fkpp.solve_fkpp_line(line_grid(1.0), store_dt=0.25)
        np.testing.assert_allclose(hist.times, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)


class TestRenewal:
    def make_history(self, dx=0.05, T=2.0, x=6.0, store=0.05):
        g = fkpp.Grid1D(lo=0.0, hi=SQRT2 * T + 20.0, dx=dx, dt=dx * dx, T=T)
        return fkpp.solve_fkpp_halfline(g, x, store_dt=store)

    def test_constant_one_field_consistent(self):
        g = fkpp.Grid1D(lo=0.0, hi=10.0, dx=0.05, dt=0.0025, T=2.0)
        hist = fkpp.solve_fkpp_halfline(g, 50.0, store_dt=0.05)
        res = fkpp.renewal_residuals(hist, [(2.0, 50.0, 0.0), (2.0, 50.0, 1.0)])
        assert res.max() < 1e-6

    def test_short_time_residual_vanishes(self):
        hist = self.make_history()
        res = fkpp.renewal_residuals(hist, [(0.05, 6.0, 1.0)])
        assert res[0] < 1e-4

    def test_residual_small_on_coarse_grid(self):
        hist = self.make_history()
        res = fkpp.renewal_residuals(hist, [(2.0, 6.0, y) for y in (0.0, 1.0)])
        assert res.max() < 1e-3

    def test_sample_point_validation(self):
        hist = self.make_history()
        with pytest.raises(ValueError):
            fkpp.renewal_residuals(hist, [(2.0, 5.0, 0.0)])  # x mismatch
        with pytest.raises(ValueError):
            fkpp.renewal_residuals(hist, [(0.777, 6.0, 0.0)])  # unstored time
        with pytest.raises(ValueError):
            fkpp.renewal_residuals(hist, [(2.0, 6.0, 0.033)])  # off-grid y

    def test_line_history_rejected(self):
        hist = fkpp.solve_fkpp_line(line_grid(1.0), store_dt=0.5)
        with pytest.raises(ValueError):
            fkpp.renewal_residuals(hist, [(1.0, 0.0, 0.0)])


class TestProfileConvergence:
    def test_identical_starting_points_zero_distance(self):
        g = fkpp.Grid1D(lo=0.0, hi=SQRT2 * 5 + 20.0, dx=0.1, dt=0.01, T=5.0)
        xs = np.arange(0.0, 16.0 + 1e-9, 0.25)
        fam = fkpp.solve_halfline_family(g, xs, store_dt=5.0)
        dists = fkpp.profile_convergence(fam, (1.0, 1.0), [5.0])
        assert dists[0][1] == 0.0

    def test_unformed_front_flagged(self):
        g = fkpp.Grid1D(lo=0.0, hi=SQRT2 * 5 + 20.0, dx=0.1, dt=0.01, T=5.0)
        xs = np.arange(0.0, 4.0 + 1e-9, 0.5)  # window too narrow at t=5
        fam = fkpp.solve_halfline_family(g, xs, store_dt=5.0)
        dists = fkpp.profile_convergence(fam, (0.0, 2.0), [5.0])
        assert math.isnan(dists[0][1])


class TestExports:
    def test_field_export_roundtrip(self, tmp_path):
        hist = fkpp.solve_fkpp_line(line_grid(1.0), store_dt=0.5)
        path = tmp_path / "fields.csv"
        fkpp.export_fields(hist, path, stride=2)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,x,u"
        n_nodes = hist.grid.n_nodes
        kept_times = {float(line.split(",")[0]) for line in lines[1:]}
        assert any(abs(kt - 1.0) < 1e-9 for kt in kept_times)  # final field always present
        assert len(lines) - 1 == len(kept_times) * n_nodes
        t, x, u = lines[1].split(",")
        assert float(t) == hist.times[0]
        assert float(u) == hist.values[0][0]

    def test_front_trajectory_export(self, tmp_path):
        hist = fkpp.solve_fkpp_line(line_grid(2.0), store_dt=0.5)
        path = tmp_path / "front.csv"
        fkpp.export_front_trajectory(hist, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,front"
        assert len(lines) >= 4
        fronts = [float(line.split(",")[1]) for line in lines[1:]]
        assert fronts == sorted(fronts)  # front advances monotonically

    def test_stride_validation(self, tmp_path):
        hist = fkpp.solve_fkpp_line(line_grid(1.0))
        with pytest.raises(ValueError):
            fkpp.export_fields(hist, tmp_path / "x.csv", stride=0)


class TestFrontSpeedSanity:
    def test_modest_horizon_speed(self):
        hist = fkpp.solve_fkpp_line(line_grid(10.0, dx=0.1), store_dt=0.5)
        ts, fs = fkpp.front_trajectory(hist, 0.5, t_min=5.0, t_max=10.0)
        fit = frontier_fit(ts, fs)
        assert 1.25 < fit.speed < 1.55
        assert fit.log_coeff < 0.0
