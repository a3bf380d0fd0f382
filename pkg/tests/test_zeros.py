import cmath
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from pfzeros.errors import ConvergenceError
from pfzeros.evaluators import DosFisherEvaluator, DosLeeYangEvaluator
from pfzeros.model import build_chain, build_cylinder, from_edge_list
from pfzeros.oracle import density_of_states
from pfzeros.zeros import (
    GridSpec,
    ScanGrid,
    find_minima,
    map_roots,
    polynomial_roots,
    refine_newton,
    rescale_from_x,
    roots_of_polynomial,
    scan,
    unit_circle_distance,
)


def match_multisets(a, b):
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


class TestScan:
    def test_constant_evaluator(self):
        spec = GridSpec(-1, 1, -1, 1, 5, 4)
        grid = scan(lambda w: 2.5, spec)
        assert grid.values.shape == (4, 5)
        assert np.all(grid.values == 2.5)

    def test_failure_recorded_as_nan(self):
        spec = GridSpec(-1, 1, -1, 1, 4, 4)

        def evaluator(w):
            if abs(w.real) < 0.4:
                raise RuntimeError("backend failure")
            return 1.0

        grid = scan(evaluator, spec)
        assert np.isnan(grid.values).any()
        assert np.isfinite(grid.values).any()

    def test_thread_count_invariance(self):
        spec = GridSpec(-1, 1, -1, 1, 13, 9)
        f = lambda w: math.log(abs(2 * cmath.cosh(w)) ** 2 + 1e-30)
        a = scan(f, spec, threads=1)
        b = scan(f, spec, threads=4)
        assert np.array_equal(a.values, b.values)

    def test_one_spin_lee_yang_minimum(self):
        # |2 cosh(H)|^2 vanishes at H = i pi/2
        spec = GridSpec(-1, 1, 0, math.pi, 61, 63, "H")
        grid = scan(lambda w: math.log(abs(2 * cmath.cosh(w)) ** 2 + 1e-300), spec)
        cands = find_minima(grid, rel_threshold=1e-2)
        assert len(cands) == 1
        dre, dim = spec.cell_size()
        target = 1j * math.pi / 2
        assert abs(cands[0].location.real - target.real) <= dre
        assert abs(cands[0].location.imag - target.imag) <= dim


class TestFindMinima:
    def test_monotone_grid_empty(self):
        spec = GridSpec(0, 1, 0, 1, 8, 8)
        grid = scan(lambda w: w.real + 2 * w.imag, spec)
        assert find_minima(grid, rel_threshold=None) == []

    def test_single_deep_minimum(self):
        spec = GridSpec(-1, 1, -1, 1, 21, 21)
        grid = scan(lambda w: 2 * math.log(abs(w - (0.1 + 0.2j)) + 1e-12), spec)
        cands = find_minima(grid, rel_threshold=1e-2)
        assert len(cands) == 1

    def test_border_cells_excluded(self):
        spec = GridSpec(0, 1, 0, 1, 6, 6)
        grid = scan(lambda w: abs(w) ** 2, spec)  # minimum at the corner
        assert find_minima(grid, rel_threshold=None) == []

    def test_threshold_cuts_shallow_minima(self):
        spec = GridSpec(-1, 1, -1, 1, 21, 23)
        values = np.zeros((23, 21))
        values[5, 5] = -0.5  # shallow dip
        values[11, 11] = -30.0  # deep zero
        grid = ScanGrid(spec, values)
        assert len(find_minima(grid, rel_threshold=None)) == 2
        assert len(find_minima(grid, rel_threshold=1e-3)) == 1


class TestNewton:
    def test_start_at_exact_zero(self):
        est = refine_newton(lambda z: 2 * cmath.cosh(z), 1j * math.pi / 2)
        assert est.iterations <= 1
        assert abs(est.location - 1j * math.pi / 2) < 1e-12

    def test_one_spin_field_zero(self):
        est = refine_newton(lambda z: 2 * cmath.cosh(z), 0.1 + 1.4j)
        assert abs(est.location - 1j * math.pi / 2) < 1e-10
        assert est.method == "newton"

    def test_derivative_underflow(self):
        with pytest.raises(ConvergenceError, match="underflow"):
            refine_newton(lambda z: 1.0 + 0j, 0.3)

    def test_double_root_accelerated(self):
        # plain Newton is only linear on multiple roots; the step-ratio
        # acceleration must still land inside the 50-iteration budget
        est = refine_newton(lambda z: (z + 1.0) ** 2 * (z - 2.0), -1.04 + 0.02j)
        assert abs(est.location - (-1.0)) < 1e-6


class TestPolynomialRoots:
    def test_one_spin_lee_yang_root(self):
        dos = density_of_states(from_edge_list(1, []))
        roots = polynomial_roots(dos, "lee_yang", 0j)
        assert len(roots) == 1
        assert roots[0] == pytest.approx(-1.0)  # z = -1 <-> H = i pi/2 mod i pi

    def test_two_spin_open_chain_fisher(self):
        dos = density_of_states(build_chain(2, K=0.1))
        roots = polynomial_roots(dos, "fisher", 0j)
        assert len(roots) == 1
        assert roots[0] == pytest.approx(-1.0)  # x = -1 <-> cosh K = 0

    def test_aberth_vs_companion_random(self, rng):
        for _ in range(15):
            deg = int(rng.integers(2, 24))
            c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
            a = roots_of_polynomial(c, "aberth")
            b = roots_of_polynomial(c, "companion")
            assert match_multisets(a, b) < 1e-8

    def test_3x3_multiset_stability(self):
        dos = density_of_states(build_cylinder(3, 3, -0.2, -0.2))
        a = polynomial_roots(dos, "fisher", 0j, method="aberth")
        b = polynomial_roots(dos, "fisher", 0j, method="companion")
        assert len(a) == dos.bond_count  # degree with multiplicity
        assert match_multisets(a, b) < 1e-8

    def test_exact_unit_deflation(self):
        # (x+1)^4 (x-1) (x-0.5) with integer-ish coefficients
        c = np.poly1d([1, -1]) * np.poly1d([1, 1]) ** 4 * np.poly1d([2, -1])
        coeffs = np.array(c.coefficients[::-1], dtype=complex)
        roots = roots_of_polynomial(coeffs)
        assert int(np.sum(roots == -1.0)) == 4
        assert int(np.sum(roots == 1.0)) == 1
        assert min(abs(roots - 0.5)) < 1e-12

    def test_origin_multiplicity(self):
        roots = roots_of_polynomial(np.array([0, 0, 0, 1.0, 2.0]))
        assert int(np.sum(roots == 0)) == 3

    def test_conjugation_closure(self):
        dos = density_of_states(build_cylinder(3, 2, -0.2, -0.2))
        roots = polynomial_roots(dos, "fisher", 0j)
        assert match_multisets(roots, np.conj(roots)) < 1e-9

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            roots_of_polynomial(np.ones(300))

    def test_zero_polynomial(self):
        with pytest.raises(ValueError):
            roots_of_polynomial(np.zeros(4))


class TestMapRoots:
    def test_unit_root_branch_lattice(self):
        window = GridSpec(-0.5, 0.5, -7, 7, 4, 4, "K")
        ks = map_roots([1.0 + 0j], window, "K")
        expected = [1j * math.pi * k for k in range(-2, 3)]
        assert len(ks) == len(expected)
        for k, e in zip(ks, expected):
            assert k == pytest.approx(e, abs=1e-12)

    def test_negative_unit_root(self):
        window = GridSpec(-0.5, 0.5, -2, 2, 4, 4, "K")
        ks = map_roots([-1.0 + 0j], window, "K")
        assert sorted(round(k.imag, 6) for k in ks) == [-1.570796, 1.570796]

    def test_origin_skipped(self):
        window = GridSpec(-1, 1, -1, 1, 4, 4, "K")
        assert map_roots([0j], window, "K") == []

    def test_out_of_real_band(self):
        window = GridSpec(-0.1, 0.1, -4, 4, 4, 4, "K")
        assert map_roots([5.0 + 0j], window, "K") == []  # Re K = -ln(5)/2 outside


class TestRescaling:
    def test_variables(self):
        x = np.array([0.5 + 0.1j])
        k = -np.log(x) / 2
        assert rescale_from_x(x, "x")[0] == x[0]
        assert rescale_from_x(x, "tanh_k")[0] == pytest.approx(np.tanh(k)[0])
        assert rescale_from_x(x, "sinh_2k")[0] == pytest.approx(np.sinh(2 * k)[0])
        with pytest.raises(ValueError):
            rescale_from_x(x, "bogus")

    def test_unit_circle_distance_drops_origin(self):
        d = unit_circle_distance([0j, 1j], "x")
        assert len(d) == 1 and d[0] == pytest.approx(0.0)


class TestRootScanConsistency:
    def test_3x3_fisher_k_plane(self):
        dos = density_of_states(build_cylinder(3, 3, -0.2, -0.2))
        roots = polynomial_roots(dos, "fisher", 0j)
        spec = GridSpec(-0.62, 0.63, -1.45, 1.47, 100, 100, "K")
        mapped = map_roots(roots, spec, "K")
        ev = DosFisherEvaluator(dos, 0j, "K")
        grid = scan(ev, spec)
        cands = find_minima(grid, rel_threshold=None)
        # candidate count equals the in-window root count at this resolution
        assert len(cands) == len(mapped) == 8
        dre, dim = spec.cell_size()
        for root in mapped:
            best = min(
                max(abs(root.real - c.location.real) / dre, abs(root.imag - c.location.imag) / dim)
                for c in cands
            )
            assert best <= 1.0

    def test_lee_yang_ferromagnetic_axis(self):
        dos = density_of_states(build_cylinder(3, 3, -0.3, -0.3))
        roots = polynomial_roots(dos, "lee_yang", -0.3)
        assert np.max(np.abs(np.abs(roots) - 1.0)) < 1e-9  # Lee-Yang circle
        window = GridSpec(-1, 1, 0, math.pi, 4, 4, "H")
        hs = map_roots(roots, window, "H")
        ev = DosLeeYangEvaluator(dos, -0.3, "H")
        nz = ev.newton_z()
        for h0 in hs:
            est = refine_newton(nz, h0 + 0.002 + 0.001j, step_scale=0.5)
            assert abs(est.location.real) < 1e-6


class TestComplexFixedParameter:
    def test_lee_yang_roots_at_complex_coupling(self):
        dos = density_of_states(build_cylinder(3, 2, -0.2 + 0.15j, -0.2 + 0.15j))
        a = polynomial_roots(dos, "lee_yang", -0.2 + 0.15j, method="aberth")
        b = polynomial_roots(dos, "lee_yang", -0.2 + 0.15j, method="companion")
        assert len(a) == 6  # degree N
        assert match_multisets(a, b) < 1e-8


class TestScanPerformance:
    def test_large_cylinders_scan_quickly(self):
        # 5x5 and 7x7 transfer-oracle scans at 100x100 stay in the seconds range
        import time

        from pfzeros.evaluators import TransferFisherEvaluator

        spec = GridSpec(-0.62, 0.63, -1.45, 1.47, 100, 100, "K")
        t0 = time.monotonic()
        for size in (5, 7):
            grid = scan(TransferFisherEvaluator(size, size, 0j, "K"), spec)
            assert np.isfinite(grid.values).all()
        assert time.monotonic() - t0 < 120.0
