import cmath
import math

import numpy as np
import pytest

from conftest import enumerate_correlation, enumerate_Z, random_complex, random_model
from pfzeros.errors import CapExceededError, IllConditionedError
from pfzeros.model import build_chain, build_cylinder, from_edge_list
from pfzeros.oracle import (
    DensityOfStates,
    LogComplex,
    _dos_enumerate,
    brute_force_Z,
    correlation,
    density_of_states,
    transfer_matrix_Z,
    transfer_matrix_Z_grid,
)


class TestLogComplex:
    def test_round_trip(self, rng):
        for _ in range(20):
            z = random_complex(rng, 2.0)
            lz = LogComplex.from_complex(z)
            assert abs(lz.to_complex() - z) < 1e-12 * abs(z)

    def test_zero_element(self):
        lz = LogComplex.from_complex(0)
        assert lz.log_magnitude == float("-inf")
        assert lz.to_complex() == 0

    def test_phase_wrapped(self):
        lz = LogComplex.from_log(0.0, 7.5)
        assert -math.pi < lz.phase <= math.pi

    def test_scaled(self):
        lz = LogComplex.from_log(500.0, 0.3)  # e^500 overflows a plain complex
        v = lz.scaled(500.0)
        assert abs(v - cmath.exp(0.3j)) < 1e-12


class TestBruteForce:
    def test_single_spin_lee_yang_zero(self):
        m = from_edge_list(1, [], [(0, 1j * math.pi / 2)])
        assert abs(brute_force_Z(m)) < 1e-12  # 2 cosh(i pi/2) = 0

    def test_all_zero_couplings(self):
        m = build_chain(5, K=0)
        assert brute_force_Z(m) == pytest.approx(2**5)

    def test_2x2_open_plaquette_vs_enumeration(self, rng):
        bonds4 = [(0, 1, 0j), (2, 3, 0j), (0, 2, 0j), (1, 3, 0j)]
        for _ in range(5):
            k = random_complex(rng)
            bonds = [(i, j, k) for (i, j, _) in bonds4]
            m = from_edge_list(4, bonds)
            expected = enumerate_Z(4, bonds)
            assert brute_force_Z(m) == pytest.approx(expected, rel=1e-12)

    def test_random_models_vs_enumeration(self, rng):
        for _ in range(15):
            m = random_model(rng)
            bonds = [(b.i, b.j, b.coupling) for b in m.bonds]
            fields = [(f.i, f.field) for f in m.fields]
            expected = enumerate_Z(m.n_spins, bonds, fields)
            assert brute_force_Z(m) == pytest.approx(expected, rel=1e-11)

    def test_zero_coupling_factorizes(self, rng):
        # Z(K=0, H) = prod_i 2 cosh(H_i)
        for _ in range(10):
            n = int(rng.integers(1, 7))
            fields = [(i, random_complex(rng)) for i in range(n)]
            m = from_edge_list(n, [], fields)
            expected = np.prod([2 * cmath.cosh(h) for _, h in fields])
            assert brute_force_Z(m) == pytest.approx(expected, rel=1e-12)

    def test_conjugation_symmetry(self, rng):
        for _ in range(10):
            m = random_model(rng)
            conj = from_edge_list(
                m.n_spins,
                [(b.i, b.j, b.coupling.conjugate()) for b in m.bonds],
                [(f.i, f.field.conjugate()) for f in m.fields],
            )
            assert brute_force_Z(conj) == pytest.approx(
                brute_force_Z(m).conjugate(), rel=1e-12
            )

    def test_cap(self):
        with pytest.raises(CapExceededError):
            brute_force_Z(build_chain(25, K=0.1))


class TestCorrelation:
    def test_independent_spins(self):
        m = from_edge_list(3, [])
        assert correlation(m, 0, 2) == 0

    def test_same_site(self):
        m = build_chain(3, K=0.4)
        assert correlation(m, 1, 1) == 1

    def test_adjacent_real_chain_vs_enumeration(self):
        bonds = [(0, 1, 0.37), (1, 2, 0.37), (2, 3, 0.37)]
        m = from_edge_list(4, bonds)
        expected = enumerate_correlation(4, bonds, [], 0, 1)
        assert correlation(m, 0, 1) == pytest.approx(expected, rel=1e-12)

    def test_error_at_partition_zero(self):
        h = 1j * math.pi / 2
        m = from_edge_list(2, [], [(0, h), (1, h)])  # Z = (2 cosh(i pi/2))^2 = 0
        with pytest.raises(IllConditionedError):
            correlation(m, 0, 1)


class TestTransferMatrix:
    def test_zero_coupling_log(self):
        lz = transfer_matrix_Z(4, 3, 0, 0, 0)
        assert lz.log_magnitude == pytest.approx(12 * math.log(2), rel=1e-12)

    def test_single_row_equals_ring(self, rng):
        for _ in range(5):
            k = random_complex(rng)
            ring = build_chain(5, periodic=True, K=k)
            z = brute_force_Z(ring)
            lz = transfer_matrix_Z(5, 1, k, 0.3)  # Ky unused for L=1
            assert lz.to_complex() == pytest.approx(z, rel=1e-12)

    @pytest.mark.parametrize("dims", [(3, 2), (3, 3), (4, 3), (4, 5), (2, 5), (5, 4)])
    def test_matches_brute_force(self, dims, rng):
        n, l = dims
        for _ in range(10):
            kx, ky, h = (random_complex(rng) for _ in range(3))
            m = build_cylinder(n, l, kx, ky, h, merge_duplicate_bonds=n == 2)
            z = brute_force_Z(m)
            lz = transfer_matrix_Z(n, l, kx, ky, h)
            assert abs(lz.to_complex() - z) <= 1e-10 * abs(z)

    def test_grid_vectorization(self, rng):
        kxs = np.array([random_complex(rng) for _ in range(6)])
        logmag, phase = transfer_matrix_Z_grid(3, 2, kxs, kxs, np.zeros(6))
        for k, lm, ph in zip(kxs, logmag, phase):
            single = transfer_matrix_Z(3, 2, k, k, 0)
            assert lm == pytest.approx(single.log_magnitude, abs=1e-12)
            assert ph == pytest.approx(single.phase, abs=1e-12)

    def test_no_overflow_7x7(self):
        # |Z| ~ e^(|K| * 91) = e^728, beyond double range, still finite in logs
        lz = transfer_matrix_Z(7, 7, -8.0, -8.0, 0)
        assert lz.log_magnitude > 709
        assert math.isfinite(lz.log_magnitude)

    def test_circumference_cap(self):
        with pytest.raises(CapExceededError):
            transfer_matrix_Z(17, 2, 0.1, 0.1)


class TestDensityOfStates:
    def test_two_spin_table(self):
        dos = density_of_states(from_edge_list(2, [(0, 1, 0.5)]))
        assert dos.bond_count == 1
        # aligned configs (m = +-2) sit at E_bond = +1, i.e. b = 1
        assert dos.table[1, 2] == 1 and dos.table[1, 0] == 1
        assert dos.table[0, 1] == 2
        assert dos.total() == 4

    def test_total_is_2_to_n(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 7))
            m = build_chain(n, K=0.3, periodic=n > 2 and bool(rng.integers(2)))
            assert density_of_states(m).total() == 2**n

    def test_reconstruction_matches_brute_force(self, rng):
        model = build_cylinder(3, 2, 0.2, 0.2)
        dos = density_of_states(model)
        for _ in range(5):
            k, h = random_complex(rng), random_complex(rng)
            probe = build_cylinder(3, 2, k, k, h)
            z = brute_force_Z(probe)
            zr = dos.evaluate(k, h).to_complex()
            assert abs(zr - z) <= 1e-10 * abs(z)

    def test_cylinder_transfer_equals_enumeration(self):
        for dims in [(3, 2), (3, 3), (4, 2)]:
            m = build_cylinder(dims[0], dims[1], -0.2, -0.2)
            assert np.array_equal(density_of_states(m).table, _dos_enumerate(m).table)

    def test_inhomogeneous_rejected(self):
        m = from_edge_list(3, [(0, 1, 0.2), (1, 2, 0.3)])
        with pytest.raises(ValueError):
            density_of_states(m)
        m2 = from_edge_list(2, [(0, 1, 0.2)], [(0, 0.5)])
        with pytest.raises(ValueError):
            density_of_states(m2)

    def test_json_round_trip(self):
        dos = density_of_states(build_cylinder(3, 2, 0.1, 0.1))
        back = DensityOfStates.from_json(dos.to_json())
        assert np.array_equal(back.table, dos.table)
        assert (back.n_spins, back.bond_count) == (dos.n_spins, dos.bond_count)

    def test_polynomial_coefficients_reconstruct(self, rng):
        dos = density_of_states(build_chain(4, K=0.1))
        k, h = random_complex(rng), random_complex(rng)
        coeffs = dos.fisher_coefficients(h)
        x = cmath.exp(-2 * k)
        poly = sum(c * x**b for b, c in enumerate(coeffs))
        z = poly * cmath.exp(k * dos.bond_count)
        expected = brute_force_Z(build_chain(4, K=k, H=h))
        assert z == pytest.approx(expected, rel=1e-10)


class TestDosCache:
    def test_cache_round_trip(self, tmp_path):
        from pfzeros.oracle import cached_density_of_states

        m = build_cylinder(3, 2, 0.1, 0.1)
        a = cached_density_of_states(m, str(tmp_path))
        files = list(tmp_path.glob("dos_*.json"))
        assert len(files) == 1
        b = cached_density_of_states(m, str(tmp_path))
        assert np.array_equal(a.table, b.table)
