import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stickyflow import (AtomsSpec, DiscreteMeasure, InvalidSpecError, PiecewiseLinearFn,
                        PLDensitySpec, TruncatedGaussianSpec, UniformSpec, discretize,
                        parse_measure_spec, second_moment, wasserstein1)
from stickyflow.measures import measure_spec_to_dict


def w1_by_cdf_integral(a, b):
    """Independent oracle: integrate |F_a - F_b| over the merged breakpoints.

    Both CDFs are piecewise constant in x, so the integral is an exact sum
    over the union grid.
    """
    xs = np.union1d(a.positions, b.positions)
    fa = np.cumsum(a.masses)
    fb = np.cumsum(b.masses)
    total = 0.0
    for lo, hi in zip(xs[:-1], xs[1:]):
        ia = np.searchsorted(a.positions, lo, side="right") - 1
        ib = np.searchsorted(b.positions, lo, side="right") - 1
        ca = fa[ia] if ia >= 0 else 0.0
        cb = fb[ib] if ib >= 0 else 0.0
        total += abs(ca - cb) * (hi - lo)
    return total


class TestDiscreteMeasure:
    def test_sorts_and_merges_coincident_atoms(self):
        m = DiscreteMeasure([1.0, 0.0, 1.0 + 1e-16], [0.25, 0.5, 0.25])
        assert len(m) == 2
        np.testing.assert_allclose(m.positions, [0.0, 1.0])
        np.testing.assert_allclose(m.masses, [0.5, 0.5])

    def test_rejects_bad_mass(self):
        with pytest.raises(InvalidSpecError):
            DiscreteMeasure([0.0, 1.0], [0.5, -0.5])
        with pytest.raises(InvalidSpecError):
            DiscreteMeasure([0.0, 1.0], [0.5, 0.4])
        with pytest.raises(InvalidSpecError):
            DiscreteMeasure([0.0, np.nan], [0.5, 0.5])

    def test_quantile(self):
        m = DiscreteMeasure([0.0, 1.0, 5.0], [0.25, 0.5, 0.25])
        assert m.quantile(0.1) == 0.0
        assert m.quantile(0.5) == 1.0
        assert m.quantile(0.99) == 5.0


class TestDiscretize:
    def test_uniform_two_blocks(self):
        m = discretize(UniformSpec(0.0, 1.0), 2)
        np.testing.assert_array_equal(m.positions, [0.25, 0.75])
        np.testing.assert_array_equal(m.masses, [0.5, 0.5])
        assert second_moment(m) == pytest.approx(0.3125, abs=0)

    def test_identity_on_equal_mass_atoms(self):
        base = DiscreteMeasure([-1.0, 0.5, 2.0, 7.0], [0.25, 0.25, 0.25, 0.25])
        out = discretize(AtomsSpec(base), 4)
        np.testing.assert_array_equal(out.positions, base.positions)
        np.testing.assert_array_equal(out.masses, base.masses)

    def test_uniform_second_moment_closed_form(self):
        # conditional means of n blocks give E[X^2] = 1/3 - 1/(12 n^2) exactly
        for n in (2, 10, 100, 1024):
            m = discretize(UniformSpec(0.0, 1.0), n)
            expected = 1.0 / 3.0 - 1.0 / (12.0 * n * n)
            assert second_moment(m) == pytest.approx(expected, abs=1e-14)
        # and sits within (1/3) / (4 n^2) of the continuum value
        n = 100
        gap = abs(second_moment(discretize(UniformSpec(0.0, 1.0), n)) - 1.0 / 3.0)
        assert gap <= (1.0 / 3.0) / (4 * n * n)

    @pytest.mark.parametrize("spec", [
        UniformSpec(-2.0, 5.0),
        TruncatedGaussianSpec(0.3, 1.2, -2.0, 4.0),
        PLDensitySpec(PiecewiseLinearFn([0.0, 1.0, 3.0], [0.0, 2.0, 1.0])),
        AtomsSpec(DiscreteMeasure([-1.0, 0.0, 2.5], [0.2, 0.5, 0.3])),
    ], ids=["uniform", "gauss", "pl", "atoms"])
    @pytest.mark.parametrize("n", [1, 2, 7, 100, 10_000])
    def test_mass_and_mean_preserved(self, spec, n):
        m = discretize(spec, n)
        assert abs(float(np.sum(m.masses)) - 1.0) <= 1e-12
        assert m.mean == pytest.approx(spec.mean(), rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("spec", [
        UniformSpec(0.0, 1.0),
        TruncatedGaussianSpec(0.5, 0.3, 0.0, 1.0),
    ], ids=["uniform", "gauss"])
    def test_second_moment_from_below_and_w1_contraction(self, spec):
        target = spec.second_moment()
        prev_sm = -np.inf
        prev_w1 = np.inf
        ns = [2 ** k for k in range(1, 11)]
        for n in ns:
            sm = second_moment(discretize(spec, n))
            assert prev_sm < sm <= target + 1e-12
            prev_sm = sm
        for n in ns:
            w1 = wasserstein1(discretize(spec, n), discretize(spec, 2 * n))
            assert w1 <= prev_w1
            prev_w1 = w1

    def test_heavy_atom_collapses_blocks(self):
        out = discretize(AtomsSpec(DiscreteMeasure([0.0], [1.0])), 3)
        assert len(out) == 1 and out.positions[0] == 0.0

    def test_invalid(self):
        with pytest.raises(InvalidSpecError):
            discretize(UniformSpec(0.0, 1.0), 0)
        with pytest.raises(InvalidSpecError):
            PLDensitySpec(PiecewiseLinearFn([0.0, 1.0], [-1.0, 1.0]))
        with pytest.raises(InvalidSpecError):
            PLDensitySpec(PiecewiseLinearFn([0.0, 1.0], [0.0, 0.0]))


class TestWasserstein:
    def test_point_masses(self):
        d0 = DiscreteMeasure([0.0], [1.0])
        d1 = DiscreteMeasure([1.0], [1.0])
        assert wasserstein1(d0, d1) == 1.0
        assert wasserstein1(d0, d0) == 0.0

    def test_shift_equals_offset(self):
        m = discretize(UniformSpec(0.0, 1.0), 37)
        h = 0.3
        shifted = DiscreteMeasure(m.positions + h, m.masses)
        assert wasserstein1(m, shifted) == pytest.approx(h, abs=1e-14)
        assert w1_by_cdf_integral(m, shifted) == pytest.approx(h, abs=1e-12)

    def test_matches_cdf_integral_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            na, nb = rng.integers(1, 9, 2)
            a = DiscreteMeasure(rng.normal(size=na), np.full(na, 1.0 / na))
            b = DiscreteMeasure(rng.normal(size=nb), np.full(nb, 1.0 / nb))
            assert wasserstein1(a, b) == pytest.approx(w1_by_cdf_integral(a, b), rel=1e-12, abs=1e-12)

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8),
           st.lists(st.floats(-50, 50), min_size=1, max_size=8),
           st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_metric_axioms(self, xs, ys, zs):
        mk = lambda v: DiscreteMeasure(v, np.full(len(v), 1.0 / len(v)))
        a, b, c = mk(xs), mk(ys), mk(zs)
        dab = wasserstein1(a, b)
        assert dab >= 0.0
        assert dab == pytest.approx(wasserstein1(b, a), rel=1e-12, abs=1e-12)
        assert dab <= wasserstein1(a, c) + wasserstein1(c, b) + 1e-9


class TestPiecewiseLinearFn:
    def test_eval_and_extrapolation(self):
        f = PiecewiseLinearFn([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
        assert f(0.5) == 0.5
        assert f(-1.0) == 2.0  # slope -1 continues left
        assert f(3.0) == 2.0  # slope +1 continues right
        np.testing.assert_allclose(f(np.array([0.0, 2.0])), [1.0, 1.0])

    def test_total_variation(self):
        f = PiecewiseLinearFn([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
        assert f.total_variation(0.0, 2.0) == 2.0
        assert f.total_variation(0.5, 1.5) == 1.0
        assert f.total_variation(-1.0, 0.0) == 1.0  # extrapolated tail varies too

    def test_validation(self):
        with pytest.raises(InvalidSpecError):
            PiecewiseLinearFn([0.0], [1.0])
        with pytest.raises(InvalidSpecError):
            PiecewiseLinearFn([0.0, 0.0], [1.0, 2.0])


class TestSpecParsing:
    @pytest.mark.parametrize("obj", [
        {"kind": "uniform", "a": 0, "b": 1},
        {"kind": "atoms", "atoms": [[0.0, 0.5], [1.0, 0.5]]},
        {"kind": "pl-density", "knots": [[0.0, 1.0], [1.0, 1.0]]},
        {"kind": "truncated-gaussian", "mean": 0.0, "sd": 1.0, "a": -1.0, "b": 1.0},
    ])
    def test_round_trip(self, obj):
        spec = parse_measure_spec(obj)
        again = parse_measure_spec(measure_spec_to_dict(spec))
        assert type(again) is type(spec)
        assert again.mean() == pytest.approx(spec.mean(), rel=1e-12)

    def test_rejects_unknown(self):
        with pytest.raises(InvalidSpecError):
            parse_measure_spec({"kind": "uniform", "a": 0, "b": 1, "c": 2})
        with pytest.raises(InvalidSpecError):
            parse_measure_spec({"kind": "gamma", "a": 0})
        with pytest.raises(InvalidSpecError):
            parse_measure_spec({"kind": "uniform", "a": 0})

    def test_gauss_moments_match_quantile_refinement(self):
        spec = TruncatedGaussianSpec(0.2, 0.7, -1.0, 1.5)
        fine = discretize(spec, 200_000)
        assert second_moment(fine) == pytest.approx(spec.second_moment(), rel=1e-8)

    def test_pl_density_moments_match_quadrature(self):
        from scipy.integrate import quad
        f = PiecewiseLinearFn([0.0, 1.0, 3.0], [0.0, 2.0, 1.0])
        spec = PLDensitySpec(f)
        z = quad(f, 0.0, 3.0)[0]
        assert spec.mean() == pytest.approx(quad(lambda x: x * f(x), 0, 3)[0] / z, rel=1e-10)
        assert spec.second_moment() == pytest.approx(quad(lambda x: x * x * f(x), 0, 3)[0] / z, rel=1e-10)
        # quantile edges integrate back to the right block masses
        qs = spec.quantile(np.linspace(0.0, 1.0, 7))
        for lo, hi in zip(qs[:-1], qs[1:]):
            assert quad(f, lo, hi)[0] / z == pytest.approx(1.0 / 6.0, rel=1e-9)
