"""Ground-truth evaluation of complex partition functions.

Three independent routes are provided: direct configuration sums
(brute_force_Z), row-to-row transfer operators for cylinders
(transfer_matrix_Z), and integer density-of-states tables that render Z as a
polynomial in x = exp(-2K) and z = exp(-2H) (density_of_states).  All
operations are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, IllConditionedError
from .model import IsingModel

BRUTE_FORCE_CAP = 24
TRANSFER_CIRC_CAP = 16
DOS_ENUMERATION_CAP = 30
DOS_TRANSFER_CIRC_CAP = 10

_CHUNK_BITS = 20


@dataclass(frozen=True)
class LogComplex:
    """A complex number z = exp(log_magnitude + i*phase), overflow-safe.

    log_magnitude is -inf for the distinguished zero element.  phase is kept
    in (-pi, pi].
    """

    log_magnitude: float
    phase: float

    @classmethod
    def from_complex(cls, z: complex) -> "LogComplex":
        z = complex(z)
        if z == 0:
            return cls(float("-inf"), 0.0)
        return cls(math.log(abs(z)), _wrap_phase(math.atan2(z.imag, z.real)))

    @classmethod
    def from_log(cls, log_magnitude: float, phase: float) -> "LogComplex":
        if log_magnitude == float("-inf"):
            return cls(float("-inf"), 0.0)
        return cls(float(log_magnitude), _wrap_phase(phase))

    def to_complex(self) -> complex:
        """Plain complex value; overflows to inf beyond double range."""
        if self.log_magnitude == float("-inf"):
            return 0j
        return complex(math.e ** min(self.log_magnitude, 709.0), 0) * complex(
            math.cos(self.phase), math.sin(self.phase)
        )

    def scaled(self, ref_log: float) -> complex:
        """exp(log_magnitude - ref_log + i*phase): the value in units of e^ref_log."""
        if self.log_magnitude == float("-inf"):
            return 0j
        m = self.log_magnitude - ref_log
        return math.exp(m) * complex(math.cos(self.phase), math.sin(self.phase))

    @property
    def log_abs_squared(self) -> float:
        return 2.0 * self.log_magnitude


def _wrap_phase(p: float) -> float:
    p = math.remainder(p, 2.0 * math.pi)
    if p <= -math.pi:
        p += 2.0 * math.pi
    return p


def _spin_matrix(idx: np.ndarray, n: int) -> np.ndarray:
    """Spins (+1 for bit 0) for each configuration index, shape (len(idx), n)."""
    return 1 - 2 * ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)


def _config_chunks(n: int):
    total = 1 << n
    step = min(total, 1 << _CHUNK_BITS)
    for start in range(0, total, step):
        yield np.arange(start, min(start + step, total), dtype=np.int64)


def _kahan_add(total: complex, comp: complex, term: complex) -> tuple[complex, complex]:
    y = term - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


def _weighted_sums(model: IsingModel, observable=None, cap: int = BRUTE_FORCE_CAP):
    """Sum of weights (and optionally observable-weighted sum) over all configs.

    Returns (Z, obs_sum, weight_scale) where weight_scale = sum |w| tracks
    conditioning.  Chunked with compensated cross-chunk summation in a fixed
    partition order.
    """
    n = model.n_spins
    if n > cap:
        raise CapExceededError(f"{n} spins exceeds enumeration cap {cap}")
    z_total, z_comp = 0j, 0j
    o_total, o_comp = 0j, 0j
    scale = 0.0
    for idx in _config_chunks(n):
        s = _spin_matrix(idx, n).astype(np.float64)
        expo = np.zeros(len(idx), dtype=np.complex128)
        for b in model.bonds:
            expo += b.coupling * (s[:, b.i] * s[:, b.j])
        for f in model.fields:
            expo += f.field * s[:, f.i]
        w = np.exp(-expo)
        z_total, z_comp = _kahan_add(z_total, z_comp, complex(np.sum(w)))
        scale += float(np.sum(np.abs(w)))
        if observable is not None:
            o = observable(s)
            o_total, o_comp = _kahan_add(o_total, o_comp, complex(np.sum(o * w)))
    return z_total, o_total, scale


def brute_force_Z(model: IsingModel, cap: int = BRUTE_FORCE_CAP) -> complex:
    """Exact Z = sum_s exp(-sum K ss - sum H s) over all 2^N configurations."""
    z, _, _ = _weighted_sums(model, cap=cap)
    return z


def brute_force_Z_with_scale(
    model: IsingModel, cap: int = BRUTE_FORCE_CAP
) -> tuple[complex, float]:
    """Z together with sum |w(s)|, the scale against which |Z| ~ 0 is judged."""
    z, _, scale = _weighted_sums(model, cap=cap)
    return z, scale


def correlation(model: IsingModel, i: int, j: int, cap: int = BRUTE_FORCE_CAP) -> complex:
    """Exact <s_i s_j> = (1/Z) sum_s s_i s_j w(s).

    Raises IllConditionedError when |Z| is negligible against the total
    weight scale (the working point sits at a partition-function zero).
    """
    n = model.n_spins
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError("spin index out of range")
    if i == j:
        return 1.0 + 0j
    z, num, scale = _weighted_sums(model, observable=lambda s: s[:, i] * s[:, j], cap=cap)
    if abs(z) <= 1e-12 * scale:
        raise IllConditionedError(
            f"|Z| = {abs(z):.3e} is below tolerance at this point; correlation undefined"
        )
    return num / z


def _ring_energy(n_circ: int) -> np.ndarray:
    """sum_i s_i s_{i+1 mod n} for each ring configuration (int array, 2^n)."""
    dim = 1 << n_circ
    idx = np.arange(dim, dtype=np.int64)
    s = _spin_matrix(idx, n_circ).astype(np.int64)
    e = np.zeros(dim, dtype=np.int64)
    for i in range(n_circ):
        e += s[:, i] * s[:, (i + 1) % n_circ]
    return e


def _row_magnetization(n_circ: int) -> np.ndarray:
    dim = 1 << n_circ
    idx = np.arange(dim, dtype=np.int64)
    return (_spin_matrix(idx, n_circ).astype(np.int64)).sum(axis=1)


def transfer_matrix_Z_grid(
    n_circ: int,
    l_len: int,
    Kx: np.ndarray,
    Ky: np.ndarray,
    H: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Cylinder Z for arrays of parameter points, as (log_magnitude, phase).

    Row-to-row contraction with a per-site factorized inter-row kernel
    (O(L * n * 2^n) per point) and per-row rescaling, so 7x7 magnitudes never
    overflow.  The ring energy for n_circ = 2 counts both (0,1) and (1,0),
    matching the merged double bond of build_cylinder.
    """
    if n_circ < 2:
        raise ValueError("cylinder circumference must be >= 2")
    if n_circ > TRANSFER_CIRC_CAP:
        raise CapExceededError(f"n_circ {n_circ} exceeds transfer cap {TRANSFER_CIRC_CAP}")
    if l_len < 1:
        raise ValueError("cylinder length must be >= 1")
    Kx = np.asarray(Kx, dtype=np.complex128).ravel()
    Ky = np.asarray(Ky, dtype=np.complex128).ravel()
    H = np.asarray(H, dtype=np.complex128).ravel()
    npts = max(Kx.size, Ky.size, H.size)
    Kx, Ky, H = (np.broadcast_to(a, (npts,)) for a in (Kx, Ky, H))

    dim = 1 << n_circ
    ring = _ring_energy(n_circ).astype(np.float64)
    mag = _row_magnetization(n_circ).astype(np.float64)
    row_w = np.exp(-(Kx[:, None] * ring[None, :] + H[:, None] * mag[None, :]))

    v = row_w.copy()
    log_acc = np.zeros(npts, dtype=np.float64)
    em, ep = np.exp(-Ky), np.exp(Ky)
    for _ in range(l_len - 1):
        for site in range(n_circ):
            va = v.reshape(npts, -1, 2, 1 << site)
            a = va[:, :, 0, :].copy()
            b = va[:, :, 1, :]
            va[:, :, 0, :] = em[:, None, None] * a + ep[:, None, None] * b
            va[:, :, 1, :] = ep[:, None, None] * a + em[:, None, None] * b
        v *= row_w
        m = np.max(np.abs(v), axis=1)
        safe = np.where(m > 0, m, 1.0)
        v /= safe[:, None]
        with np.errstate(divide="ignore"):
            log_acc += np.log(m)

    z = v.sum(axis=1)
    with np.errstate(divide="ignore"):
        logmag = log_acc + np.log(np.abs(z))
    phase = np.angle(z)
    return logmag, phase


def transfer_matrix_Z(
    n_circ: int, l_len: int, Kx: complex, Ky: complex, H: complex = 0j
) -> LogComplex:
    """Cylinder partition function via the row-to-row transfer operator."""
    logmag, phase = transfer_matrix_Z_grid(
        n_circ, l_len, np.array([Kx]), np.array([Ky]), np.array([H])
    )
    return LogComplex.from_log(float(logmag[0]), float(phase[0]))


@dataclass(frozen=True)
class DensityOfStates:
    """Configuration counts g(b, m) by bond-energy index and magnetization.

    b in [0, B] indexes the bond energy via E_bond = 2b - B; the second table
    axis is v = (m + N) / 2 in [0, N].  The partition function follows as

        Z(K, H) = e^{K B} e^{H N} * sum_{b,v} g[b, v] x^b z^v

    with x = exp(-2K) and z = exp(-2H).
    """

    n_spins: int
    bond_count: int
    table: np.ndarray  # (B+1, N+1) uint64

    def total(self) -> int:
        return int(self.table.sum())

    def evaluate(self, K: complex, H: complex = 0j) -> LogComplex:
        """Z(K, H) by overflow-safe log-sum-exp over table entries."""
        b_idx, v_idx = np.nonzero(self.table)
        g = self.table[b_idx, v_idx].astype(np.float64)
        terms = np.log(g) - 2.0 * K * b_idx - 2.0 * H * v_idx
        m = float(np.max(terms.real))
        s = complex(np.sum(np.exp(terms - m)))
        if s == 0:
            return LogComplex.from_log(float("-inf"), 0.0)
        offset = K * self.bond_count + H * self.n_spins
        return LogComplex.from_log(
            m + math.log(abs(s)) + offset.real,
            math.atan2(s.imag, s.real) + offset.imag,
        )

    def fisher_coefficients(self, H: complex = 0j) -> np.ndarray:
        """Coefficients c_b with Z(K, H) = e^{K B} * sum_b c_b x^b, x = e^{-2K}."""
        m = 2.0 * np.arange(self.n_spins + 1) - self.n_spins
        z_pow = np.exp(-complex(H) * m)
        return self.table.astype(np.float64) @ z_pow.astype(np.complex128)

    def lee_yang_coefficients(self, K: complex) -> np.ndarray:
        """Coefficients c_v with Z(K, H) = e^{H N} * sum_v c_v z^v, z = e^{-2H}."""
        e = 2.0 * np.arange(self.bond_count + 1) - self.bond_count
        x_pow = np.exp(-complex(K) * e)
        return self.table.T.astype(np.float64) @ x_pow.astype(np.complex128)

    def to_json(self) -> str:
        entries = [
            [int(b), int(v), int(self.table[b, v])]
            for b, v in zip(*np.nonzero(self.table))
        ]
        return json.dumps(
            {"n_spins": self.n_spins, "bond_count": self.bond_count, "entries": entries},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "DensityOfStates":
        d = json.loads(text)
        table = np.zeros((d["bond_count"] + 1, d["n_spins"] + 1), dtype=np.uint64)
        for b, v, g in d["entries"]:
            table[b, v] = g
        return cls(d["n_spins"], d["bond_count"], table)


def _check_exact_counts(counts: np.ndarray, n_spins: int) -> np.ndarray:
    if float(counts.max(initial=0.0)) >= 2.0**53:
        raise OverflowError("density-of-states counts exceed exact float64 range")
    if float(counts.sum()) != float(2**n_spins):
        raise AssertionError("density-of-states table does not sum to 2^N")
    return counts.astype(np.uint64)


def _dos_enumerate(model: IsingModel) -> DensityOfStates:
    n, B = model.n_spins, model.bond_count
    if n > DOS_ENUMERATION_CAP:
        raise CapExceededError(f"{n} spins exceeds density-of-states cap {DOS_ENUMERATION_CAP}")
    counts = np.zeros((B + 1) * (n + 1), dtype=np.float64)
    for idx in _config_chunks(n):
        bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
        mismatch = np.zeros(len(idx), dtype=np.int64)
        for bd in model.bonds:
            mismatch += bits[:, bd.i] ^ bits[:, bd.j]
        b = B - mismatch  # (B + sum ss)/2 with sum ss = B - 2*mismatch
        v = n - bits.sum(axis=1)  # (m + N)/2
        np.add.at(counts, b * (n + 1) + v, 1.0)
    table = _check_exact_counts(counts.reshape(B + 1, n + 1), n)
    return DensityOfStates(n, B, table)


def _dos_cylinder_transfer(n_circ: int, l_len: int) -> DensityOfStates:
    if n_circ > DOS_TRANSFER_CIRC_CAP:
        raise CapExceededError(
            f"n_circ {n_circ} exceeds density-of-states transfer cap {DOS_TRANSFER_CIRC_CAP}"
        )
    n_tot = n_circ * l_len
    B = 2 * n_circ * l_len - n_circ
    dim = 1 << n_circ
    ring_b = (n_circ + _ring_energy(n_circ)) // 2  # per-row aligned-bond count
    ups = (_row_magnetization(n_circ) + n_circ) // 2

    # state[s, b, v]: weight of partial cylinders ending in row config s
    state = np.zeros((dim, B + 1, n_tot + 1), dtype=np.float64)
    for a in range(dim):
        state[a, ring_b[a], ups[a]] = 1.0
    flip = np.arange(dim)[:, None] ^ (1 << np.arange(n_circ))[None, :]
    for _ in range(l_len - 1):
        for site in range(n_circ):
            partner = state[flip[:, site]]
            shifted = np.zeros_like(state)
            shifted[:, 1:, :] = state[:, :-1, :]  # aligned y-bond: b += 1
            state = shifted + partner  # anti-aligned partner: b += 0
        new_state = np.zeros_like(state)
        for a in range(dim):
            db, dv = int(ring_b[a]), int(ups[a])
            new_state[a, db:, dv:] = state[a, : B + 1 - db, : n_tot + 1 - dv]
        state = new_state
    table = _check_exact_counts(state.sum(axis=0), n_tot)
    return DensityOfStates(n_tot, B, table)


def cached_density_of_states(model: IsingModel, cache_dir: str | None = None) -> DensityOfStates:
    """density_of_states with a JSON file cache keyed by the model's content hash."""
    if cache_dir is None:
        return density_of_states(model)
    import os

    path = os.path.join(cache_dir, f"dos_{model.content_hash()}.json")
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return DensityOfStates.from_json(fh.read())
    dos = density_of_states(model)
    os.makedirs(cache_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dos.to_json())
    return dos


def density_of_states(model: IsingModel) -> DensityOfStates:
    """Exact g(b, m) table for a model with one shared coupling symbol.

    Cylinder-tagged models go through the polynomial-valued transfer matrix;
    everything else is enumerated directly.  Fields must be absent or
    homogeneous (the table resolves the field dependence only through the
    total magnetization).  Bond-free models are allowed (B = 0, Lee-Yang use).
    """
    if model.bonds:
        model.homogeneous_coupling()
    if model.fields:
        h0 = model.fields[0].field
        if len(model.fields) != model.n_spins or any(f.field != h0 for f in model.fields):
            raise ValueError("density of states requires absent or homogeneous fields")
    lat = model.lattice_info()
    if lat.get("kind") == "cylinder" and lat["n_circ"] >= 3:
        return _dos_cylinder_transfer(lat["n_circ"], lat["l_len"])
    return _dos_enumerate(model)
