"""Dense statevector execution of gadget circuits.

Three interchangeable backends produce the return amplitude/probability:

* run_full      -- every qubit in one register, ancilla projections deferred
                   to the final overlap (exact because ancillas are single-use)
* run_streamed  -- physical register only; each gadget attaches, uses,
                   projects, and discards its ancilla in turn
* run_effective -- the diagonal identity: applies exp(-K ss), exp(-H s)
                   directly as non-unitary elementwise factors (overlap * 2^N = Z)

Amplitude layout is little-endian: qubit q owns bit q of the basis index, and
bit 0 means spin up (s = +1).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, Gate, QubitRole
from .errors import CapExceededError
from .model import IsingModel

MEMORY_QUBIT_CAP = 26

_SQRT_HALF = 1.0 / math.sqrt(2.0)

_INIT_AMPLITUDES = {
    QubitRole.PHYSICAL: (_SQRT_HALF, _SQRT_HALF),  # |+>
    QubitRole.ANCILLA_X: (_SQRT_HALF, _SQRT_HALF),  # |+>
    QubitRole.ANCILLA_Z: (1.0, 0.0),  # |up>
}


class StateVector:
    """Dense complex amplitudes over 2^n basis states; single-writer."""

    __slots__ = ("n_qubits", "amp")

    def __init__(self, n_qubits: int, amp: np.ndarray | None = None):
        self.n_qubits = n_qubits
        if amp is None:
            amp = np.zeros(1 << n_qubits, dtype=np.complex128)
            amp[0] = 1.0
        self.amp = amp

    @classmethod
    def product_state(cls, roles: tuple[QubitRole, ...]) -> "StateVector":
        n = len(roles)
        amp = np.zeros(1 << n, dtype=np.complex128)
        n_x = sum(1 for r in roles if r is not QubitRole.ANCILLA_Z)
        sel = tuple(
            0 if roles[n - 1 - ax] is QubitRole.ANCILLA_Z else slice(None) for ax in range(n)
        )
        amp.reshape((2,) * n)[sel] = 2.0 ** (-n_x / 2.0)
        return cls(n, amp)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amp.copy())

    def norm_squared(self) -> float:
        return float(np.vdot(self.amp, self.amp).real)

    def overlap_with_product(self, roles: tuple[QubitRole, ...]) -> complex:
        """<psi0|psi> for the product initial state defined by the roles."""
        n = self.n_qubits
        n_x = sum(1 for r in roles if r is not QubitRole.ANCILLA_Z)
        sel = tuple(
            0 if roles[n - 1 - ax] is QubitRole.ANCILLA_Z else slice(None) for ax in range(n)
        )
        return complex(self.amp.reshape((2,) * n)[sel].sum() * 2.0 ** (-n_x / 2.0))


def _axis_view(amp: np.ndarray, n: int, qubits: tuple[int, ...]) -> np.ndarray:
    """View with the given qubits moved to the leading axes (bit q -> axis)."""
    a = amp.reshape((2,) * n)
    return np.moveaxis(a, [n - 1 - q for q in qubits], range(len(qubits)))


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate in place.  zz/zrot are diagonal phase passes; xx/xrot
    mix amplitude pairs along the qubit axes."""
    n, th = state.n_qubits, gate.angle
    for q in gate.qubits:
        if not 0 <= q < n:
            raise ValueError(f"gate qubit {q} out of range for {n} qubits")
    if gate.kind == "zz":
        v = _axis_view(state.amp, n, gate.qubits)
        pm, pp = np.exp(-1j * th), np.exp(1j * th)
        v[0, 0] *= pm
        v[1, 1] *= pm
        v[0, 1] *= pp
        v[1, 0] *= pp
    elif gate.kind == "zrot":
        v = _axis_view(state.amp, n, gate.qubits)
        v[0] *= np.exp(-1j * th)
        v[1] *= np.exp(1j * th)
    elif gate.kind == "xx":
        v = _axis_view(state.amp, n, gate.qubits)
        c, s = math.cos(th), math.sin(th)
        n00 = c * v[0, 0] - 1j * s * v[1, 1]
        n11 = c * v[1, 1] - 1j * s * v[0, 0]
        n01 = c * v[0, 1] - 1j * s * v[1, 0]
        n10 = c * v[1, 0] - 1j * s * v[0, 1]
        v[0, 0], v[1, 1], v[0, 1], v[1, 0] = n00, n11, n01, n10
    elif gate.kind == "xrot":
        v = _axis_view(state.amp, n, gate.qubits)
        c, s = math.cos(th), math.sin(th)
        n0 = c * v[0] - 1j * s * v[1]
        n1 = c * v[1] - 1j * s * v[0]
        v[0], v[1] = n0, n1
    else:  # pragma: no cover - Gate.__post_init__ rejects unknown kinds
        raise ValueError(f"unknown gate kind {gate.kind!r}")
    return state


def _hadamard(state: StateVector, q: int) -> None:
    v = _axis_view(state.amp, state.n_qubits, (q,))
    n0 = (v[0] + v[1]) * _SQRT_HALF
    n1 = (v[0] - v[1]) * _SQRT_HALF
    v[0], v[1] = n0, n1


@dataclass(frozen=True)
class OverlapResult:
    """Return amplitude <psi0|U|psi0> and its probability."""

    amplitude: complex

    @property
    def probability(self) -> float:
        return abs(self.amplitude) ** 2


def run_full(circuit: Circuit, cap: int = MEMORY_QUBIT_CAP) -> OverlapResult:
    """Evolve the full register (physical + ancillas) and overlap with |psi0>.

    The single ancilla projections of all gadgets are deferred to this final
    overlap, which is exact by the single-use-ancilla invariant.
    """
    if circuit.n_qubits > cap:
        raise CapExceededError(f"{circuit.n_qubits} qubits exceeds full-register cap {cap}")
    state = StateVector.product_state(circuit.roles)
    for gate in circuit.gates:
        apply_gate(state, gate)
    return OverlapResult(state.overlap_with_product(circuit.roles))


def final_state(circuit: Circuit, cap: int = MEMORY_QUBIT_CAP) -> StateVector:
    """Full-register state after all gates (for sampling and inspection)."""
    if circuit.n_qubits > cap:
        raise CapExceededError(f"{circuit.n_qubits} qubits exceeds full-register cap {cap}")
    state = StateVector.product_state(circuit.roles)
    for gate in circuit.gates:
        apply_gate(state, gate)
    return state


def run_streamed(circuit: Circuit) -> OverlapResult:
    """Evaluate keeping only the physical register plus one ancilla workspace.

    Per gadget: attach a fresh ancilla in its initial state, apply the gadget
    gates, project onto the initial state, and contract it out.  Nothing is
    renormalized; the accumulated amplitude is the measured joint amplitude
    and matches run_full exactly.
    """
    n_phys = circuit.n_physical
    if any(r is not QubitRole.PHYSICAL for r in circuit.roles[:n_phys]):
        raise ValueError("streamed backend expects physical qubits at indices 0..n_phys-1")
    phys_roles = circuit.roles[:n_phys]
    state = StateVector.product_state(phys_roles)
    half = 1 << n_phys
    span_of = {g.span[0]: g for g in circuit.gadgets}
    idx = 0
    while idx < len(circuit.gates):
        gadget = span_of.get(idx)
        if gadget is None:
            apply_gate(state, circuit.gates[idx])
            idx += 1
            continue
        c0, c1 = _INIT_AMPLITUDES[circuit.roles[gadget.ancilla]]
        ext = StateVector(n_phys + 1, np.empty(2 * half, dtype=np.complex128))
        ext.amp[:half] = c0 * state.amp
        ext.amp[half:] = c1 * state.amp
        for k in range(*gadget.span):
            g = circuit.gates[k]
            qubits = tuple(n_phys if q == gadget.ancilla else q for q in g.qubits)
            apply_gate(ext, Gate(g.kind, qubits, g.angle))
        state.amp = np.conj(c0) * ext.amp[:half] + np.conj(c1) * ext.amp[half:]
        idx = gadget.span[1]
    return OverlapResult(state.overlap_with_product(phys_roles))


def run_effective(model: IsingModel, cap: int = MEMORY_QUBIT_CAP) -> OverlapResult:
    """Apply exp(-K ss) / exp(-H s) as diagonal factors on the physical register.

    The returned amplitude times 2^N equals Z exactly; the "probability" is
    |Z|^2 / 2^(2N), which exceeds 1 whenever the non-unitary weights do (this
    backend is an oracle identity, not a physical circuit).
    """
    n = model.n_spins
    if n > cap:
        raise CapExceededError(f"{n} spins exceeds effective-backend cap {cap}")
    idx = np.arange(1 << n, dtype=np.int64)
    expo = np.zeros(1 << n, dtype=np.complex128)
    for b in model.bonds:
        si = 1 - 2 * ((idx >> b.i) & 1)
        sj = 1 - 2 * ((idx >> b.j) & 1)
        expo += b.coupling * (si * sj)
    for f in model.fields:
        expo += f.field * (1 - 2 * ((idx >> f.i) & 1))
    amplitude = complex(np.exp(-expo).sum()) * 2.0 ** (-n)
    return OverlapResult(amplitude)


def measurement_basis(roles: tuple[QubitRole, ...]) -> tuple[str, ...]:
    """Per-qubit measurement axis: x for physical and x-ancillas, z for z-ancillas."""
    return tuple("z" if r is QubitRole.ANCILLA_Z else "x" for r in roles)


def dump_state(state: StateVector, path: str) -> None:
    """Debug dump: an 8-byte little-endian qubit count, then 2^n complex doubles."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", state.n_qubits))
        fh.write(np.ascontiguousarray(state.amp, dtype="<c16").tobytes())


def load_state(path: str) -> StateVector:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        amp = np.frombuffer(fh.read(), dtype="<c16").astype(np.complex128)
    if amp.size != 1 << n:
        raise ValueError(f"state file holds {amp.size} amplitudes, expected 2^{n}")
    return StateVector(int(n), amp)


def sample_shots(
    circuit_or_state,
    n_shots: int,
    seed,
    basis: tuple[str, ...] | None = None,
    roles: tuple[QubitRole, ...] | None = None,
) -> tuple[int, float]:
    """Sample projective measurements and count the all-initial-state outcome.

    Accepts a Circuit (executed with the full backend) or a prepared
    StateVector plus roles.  Returns (success_count, success_count / n_shots);
    deterministic for a given seed.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    if isinstance(circuit_or_state, Circuit):
        roles = circuit_or_state.roles
        state = final_state(circuit_or_state)
    else:
        if roles is None:
            raise ValueError("roles are required when passing a raw state")
        state = circuit_or_state.copy()
    if basis is None:
        basis = measurement_basis(roles)
    if len(basis) != state.n_qubits:
        raise ValueError("basis length must match qubit count")
    for q, axis in enumerate(basis):
        if axis == "x":
            _hadamard(state, q)
    p = np.abs(state.amp) ** 2
    total = p.sum()
    if not math.isfinite(total) or total <= 0:
        raise ValueError("state has no probability mass to sample")
    cdf = np.cumsum(p / total)
    cdf[-1] = 1.0
    rng = np.random.default_rng(seed)
    outcomes = np.searchsorted(cdf, rng.random(n_shots), side="right")
    success = int(np.count_nonzero(outcomes == 0))
    return success, success / n_shots
