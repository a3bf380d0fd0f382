"""Grid evaluators connecting models/backends to complex-plane scans.

Every evaluator maps a scan-plane point to ln of the scanned quantity (|Z|^2
for oracle backends, the return probability L for protocol backends) and
offers a vectorized `evaluate_grid`.  Plane conventions:

* Fisher planes: "x" scans x = e^{-2K} and strips the e^{K B} prefactor (the
  scanned quantity is the reduced polynomial |sum_b c_b x^b|^2, which shares
  its zeros with Z); "K" scans the coupling itself with |Z|^2 absolute.
* Lee-Yang planes: "z" scans z = e^{-2H} (reduced), "H" the field (absolute).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import compile_general, compile_kicked
from .model import IsingModel
from .oracle import DensityOfStates, LogComplex, transfer_matrix_Z_grid
from .statevector import run_effective, run_full, run_streamed


def _poly_log_abs(coeffs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """ln |sum_k c_k w^k| elementwise, stable for |w| above and below 1.

    For |w| > 1 the reversed polynomial is evaluated at 1/w so Horner never
    feeds on growing powers.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    scale = float(np.max(np.abs(c)))
    c = c / scale
    w = np.asarray(w, dtype=np.complex128)
    out = np.empty(w.shape, dtype=np.float64)
    absw = np.abs(w)
    small = absw <= 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(small):
            p = np.zeros(np.count_nonzero(small), dtype=np.complex128)
            ws = w[small]
            for k in range(len(c) - 1, -1, -1):
                p = p * ws + c[k]
            out[small] = np.log(np.abs(p))
        if np.any(~small):
            wi = 1.0 / w[~small]
            p = np.zeros(np.count_nonzero(~small), dtype=np.complex128)
            for k in range(len(c)):
                p = p * wi + c[k]
            out[~small] = np.log(np.abs(p)) + (len(c) - 1) * np.log(absw[~small])
    return out + math.log(scale)


def _poly_eval_scaled(coeffs: np.ndarray, w: complex) -> complex:
    """Normalized complex polynomial value (for Newton refinement)."""
    c = np.asarray(coeffs, dtype=np.complex128)
    c = c / np.max(np.abs(c))
    p = 0j
    for k in range(len(c) - 1, -1, -1):
        p = p * w + c[k]
    return p


class DosFisherEvaluator:
    """log |Z|^2-style values from a density-of-states polynomial, Fisher planes.

    Planes: "x" scans x = e^{-2K} directly, "K" the coupling (absolute |Z|^2),
    "tanh_k" the view w = tanh K, i.e. x = (1-w)/(1+w) (prefactor-stripped,
    like the x plane).
    """

    def __init__(self, dos: DensityOfStates, fixed_h: complex = 0j, plane: str = "x"):
        if plane not in ("x", "K", "tanh_k"):
            raise ValueError("Fisher plane must be 'x', 'K' or 'tanh_k'")
        self.dos = dos
        self.fixed_h = complex(fixed_h)
        self.plane = plane
        self.coeffs = dos.fisher_coefficients(H=self.fixed_h)

    def _to_x(self, w):
        if self.plane == "x":
            return w
        if self.plane == "K":
            return np.exp(-2.0 * w)
        return (1.0 - w) / (1.0 + w)

    def evaluate_grid(self, mesh: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            x = self._to_x(mesh)
            values = 2.0 * _poly_log_abs(self.coeffs, x)
            if self.plane == "K":
                values += 2.0 * self.dos.bond_count * mesh.real
        return values

    def __call__(self, w: complex) -> float:
        return float(self.evaluate_grid(np.array([[w]]))[0, 0])

    def newton_z(self):
        """Complex reduced-Z evaluator in the scan plane for refine_newton."""
        return lambda w: _poly_eval_scaled(self.coeffs, complex(np.asarray(self._to_x(w))))


class DosLeeYangEvaluator:
    """Lee-Yang planes from a density-of-states polynomial at fixed coupling."""

    def __init__(self, dos: DensityOfStates, fixed_k: complex, plane: str = "z"):
        if plane not in ("z", "H"):
            raise ValueError("Lee-Yang plane must be 'z' or 'H'")
        self.dos = dos
        self.fixed_k = complex(fixed_k)
        self.plane = plane
        self.coeffs = dos.lee_yang_coefficients(K=self.fixed_k)

    def evaluate_grid(self, mesh: np.ndarray) -> np.ndarray:
        if self.plane == "z":
            return 2.0 * _poly_log_abs(self.coeffs, mesh)
        z = np.exp(-2.0 * mesh)
        return 2.0 * (_poly_log_abs(self.coeffs, z) + self.dos.n_spins * mesh.real)

    def __call__(self, w: complex) -> float:
        return float(self.evaluate_grid(np.array([[w]]))[0, 0])

    def newton_z(self):
        if self.plane == "z":
            return lambda w: _poly_eval_scaled(self.coeffs, w)
        return lambda w: _poly_eval_scaled(self.coeffs, np.exp(-2.0 * w))


class TransferFisherEvaluator:
    """Fisher planes via the row-to-row transfer oracle (isotropic Kx = Ky)."""

    def __init__(self, n_circ: int, l_len: int, fixed_h: complex = 0j, plane: str = "x"):
        if plane not in ("x", "K"):
            raise ValueError("Fisher plane must be 'x' or 'K'")
        self.n_circ, self.l_len = n_circ, l_len
        self.fixed_h = complex(fixed_h)
        self.plane = plane
        self.bond_count = 2 * n_circ * l_len - n_circ

    def evaluate_grid(self, mesh: np.ndarray) -> np.ndarray:
        if self.plane == "x":
            with np.errstate(divide="ignore", invalid="ignore"):
                K = -np.log(mesh) / 2.0
        else:
            K = mesh
        flatK = K.ravel()
        ok = np.isfinite(flatK)
        logmag = np.full(flatK.shape, np.nan)
        if np.any(ok):
            lm, _ = transfer_matrix_Z_grid(
                self.n_circ,
                self.l_len,
                flatK[ok],
                flatK[ok],
                np.full(np.count_nonzero(ok), self.fixed_h),
            )
            logmag[ok] = lm
        logmag = logmag.reshape(mesh.shape)
        if self.plane == "x":
            return 2.0 * (logmag - self.bond_count * K.real)
        return 2.0 * logmag

    def __call__(self, w: complex) -> float:
        return float(self.evaluate_grid(np.array([[w]]))[0, 0])


class KickedProbabilityEvaluator:
    """True return probability L of the kicked protocol over the complex K plane.

    At each scan point the isotropic cylinder (Kx = Ky = K) is addressed with
    the exact-map kick field tanh(H) = -e^{+2K}; the value is
    ln L = ln|sinh(2H)^{N(L-1)} / 2^{N(L+1)}| + ln|Z|^2 - 2 C with
    C = N L |K^R| + N(L-1) |H^R| the gadget normalization.
    """

    def __init__(self, n_circ: int, l_len: int):
        self.n_circ, self.l_len = n_circ, l_len

    def evaluate_grid(self, mesh: np.ndarray) -> np.ndarray:
        n, L = self.n_circ, self.l_len
        K = mesh.ravel()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            H = np.arctanh(-np.exp(2.0 * K))
            sinh2h = np.abs(np.sinh(2.0 * H))
            logmag, _ = transfer_matrix_Z_grid(n, L, K, K, np.zeros_like(K))
            logL = (
                n * (L - 1) * np.log(sinh2h)
                - n * (L + 1) * math.log(2.0)
                + 2.0 * logmag
                - 2.0 * (n * L * np.abs(K.real) + n * (L - 1) * np.abs(H.real))
            )
        logL = np.where(np.isfinite(H) & np.isfinite(logL), logL, np.nan)
        return logL.reshape(mesh.shape)

    def __call__(self, w: complex) -> float:
        return float(self.evaluate_grid(np.array([[w]]))[0, 0])


class KickedFieldPlaneEvaluator:
    """ln L of the kicked protocol over the complex kick-field plane.

    The ring coupling stays fixed; each scan point H sets the inter-row
    coupling through the exact map Ky = ln(-tanh H)/2.
    """

    def __init__(self, n_circ: int, l_len: int, fixed_k: complex):
        self.n_circ, self.l_len = n_circ, l_len
        self.fixed_k = complex(fixed_k)

    def evaluate_grid(self, mesh: np.ndarray) -> np.ndarray:
        n, L = self.n_circ, self.l_len
        H = mesh.ravel()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = -np.tanh(H)
            ky = np.log(t) / 2.0
            sinh2h = np.abs(np.sinh(2.0 * H))
            logmag, _ = transfer_matrix_Z_grid(
                n, L, np.full_like(H, self.fixed_k), ky, np.zeros_like(H)
            )
            logL = (
                n * (L - 1) * np.log(sinh2h)
                - n * (L + 1) * math.log(2.0)
                + 2.0 * logmag
                - 2.0 * (n * L * abs(self.fixed_k.real) + n * (L - 1) * np.abs(H.real))
            )
        logL = np.where(np.isfinite(logL), logL, np.nan)
        return logL.reshape(mesh.shape)

    def __call__(self, w: complex) -> float:
        return float(self.evaluate_grid(np.array([[w]]))[0, 0])


class GeneralCircuitEvaluator:
    """ln L of the compiled general-scheme circuit, one compile per point.

    model_factory maps a scan point to an IsingModel.  Pointwise and slow;
    meant for small cross-check windows rather than bulk scans.
    """

    def __init__(self, model_factory, backend: str = "streamed"):
        if backend not in ("full", "streamed", "effective"):
            raise ValueError(f"unknown circuit backend {backend!r}")
        self.model_factory = model_factory
        self.backend = backend

    def __call__(self, w: complex) -> float:
        model = self.model_factory(w)
        if self.backend == "effective":
            amp = run_effective(model).amplitude
            if amp == 0:
                return float("-inf")
            return 2.0 * math.log(abs(amp))
        circ = compile_general(model)
        res = run_full(circ) if self.backend == "full" else run_streamed(circ)
        if res.amplitude == 0:
            return float("-inf")
        return 2.0 * math.log(abs(res.amplitude))


class ScaledZEvaluator:
    """Adapter giving refine_newton a complex Z from a LogComplex-valued function.

    The first evaluation fixes a reference magnitude so later values stay in
    double range; Newton steps are invariant under this constant rescaling.
    """

    def __init__(self, log_z_fn):
        self.log_z_fn = log_z_fn
        self._ref: float | None = None

    def __call__(self, w: complex) -> complex:
        lz: LogComplex = self.log_z_fn(w)
        if self._ref is None:
            self._ref = lz.log_magnitude if math.isfinite(lz.log_magnitude) else 0.0
        return lz.scaled(self._ref)


@dataclass(frozen=True)
class KickedCalibration:
    """Result of equating the kicked protocol against the exact oracle."""

    tanh_sign: float
    two_power_formula: str
    two_power_matches_nominal: bool
    tanh_sign_matches_nominal: bool
    max_rel_error: float
    samples: int

    def summary(self) -> str:
        lines = [
            f"kicked calibration over {self.samples} random instances:",
            f"  coupling map: tanh(H) = {self.tanh_sign:+.0f} * e^(2 Ky), i.e. "
            f"e^(-2 Ky) = {self.tanh_sign:+.0f} * tanh(H) up to the Ky <-> -Ky "
            "symmetry of field-free cylinders"
            + ("  (matches the nominal map)" if self.tanh_sign_matches_nominal
               else "  (nominal map carries sign +1; deviation reported)"),
            f"  power of two: {self.two_power_formula}"
            + ("  (matches the nominal exponent)" if self.two_power_matches_nominal
               else "  (deviates from the nominal exponent)"),
            f"  max relative error of the calibrated relation: {self.max_rel_error:.3e}",
        ]
        return "\n".join(lines)


def calibrate_kicked_relation(
    sizes=((2, 2), (3, 2), (2, 3)), n_draws: int = 6, seed: int = 11
) -> KickedCalibration:
    """Re-derive the constants relating P_kicked to |Z(K, Ky)|^2.

    For each random complex (K, H) the simulated circuit probability is
    compared against |sinh(2H)^{N(L-1)}| * |Z(K, Ky)|^2 / 2^E for both signs
    of the coupling map; the winning sign and the integer exponent E are
    reported along with the worst relative error of the calibrated relation.
    """
    rng = np.random.default_rng(seed)
    errors = {1.0: [], -1.0: []}
    exponents = []
    samples = 0
    for (n, L) in sizes:
        for _ in range(n_draws):
            K = complex(rng.normal(0, 0.35), rng.normal(0, 0.35))
            H = complex(rng.normal(0, 0.35), rng.normal(0, 0.35))
            if abs(np.tanh(H)) < 0.05 or abs(np.sinh(2 * H)) < 0.05:
                H += 0.3
            circ = compile_kicked(n, L, K, H)
            res = run_streamed(circ)
            if res.probability == 0:
                continue
            log_p = 2.0 * (math.log(abs(res.amplitude)) + circ.log_prefactor)
            samples += 1
            for sign in (1.0, -1.0):
                t = sign * np.tanh(H)
                ky = np.log(t) / 2.0
                logmag, _ = transfer_matrix_Z_grid(
                    n, L, np.array([K]), np.array([ky]), np.array([0j])
                )
                predicted = (
                    n * (L - 1) * math.log(abs(np.sinh(2 * H)))
                    - n * (L + 1) * math.log(2.0)
                    + 2.0 * float(logmag[0])
                )
                errors[sign].append(abs(math.expm1(predicted - log_p)))
                if sign == -1.0:
                    # exponent implied by the measurement, in units of ln 2
                    e = (
                        n * (L - 1) * math.log(abs(np.sinh(2 * H)))
                        + 2.0 * float(logmag[0])
                        - log_p
                    ) / math.log(2.0)
                    exponents.append((n, L, e))
    best_sign = min(errors, key=lambda s: max(errors[s]))
    nominal_ok = all(abs(e - n * (L + 1)) < 1e-6 for (n, L, e) in exponents)
    return KickedCalibration(
        tanh_sign=best_sign,
        two_power_formula="N*(L+1)",
        two_power_matches_nominal=nominal_ok,
        tanh_sign_matches_nominal=best_sign == 1.0,
        max_rel_error=max(errors[best_sign]),
        samples=samples,
    )


def kicked_true_L(n_circ: int, l_len: int, K: complex) -> float:
    """Scalar convenience: the kicked protocol's true L at isotropic coupling K."""
    ev = KickedProbabilityEvaluator(n_circ, l_len)
    return float(ev(complex(K)))


def general_log_z2_from_circuit(model: IsingModel, backend: str = "full") -> float:
    """ln |Z|^2 recovered from a compiled general-scheme circuit: 2C + ln L."""
    circ = compile_general(model)
    res = run_full(circ) if backend == "full" else run_streamed(circ)
    return 2.0 * (math.log(abs(res.amplitude)) + circ.log_prefactor)
