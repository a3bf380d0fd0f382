"""Locating Fisher and Lee-Yang zeroes.

Three cooperating routes: dense complex-plane scans with local-minima
detection, complex Newton refinement with numerical derivatives (so any
backend can be refined), and exact polynomial root-finding on
density-of-states coefficients via two independent finders (Aberth-Ehrlich
and companion-matrix eigenvalues).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .oracle import DensityOfStates

POLY_DEGREE_CAP = 256


@dataclass(frozen=True)
class GridSpec:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int
    plane_tag: str = "K"

    def __post_init__(self):
        if self.n_re < 2 or self.n_im < 2:
            raise ValueError("grid resolution must be at least 2x2")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("grid window is empty")

    def re_points(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.n_re)

    def im_points(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.n_im)

    def mesh(self) -> np.ndarray:
        re = self.re_points()
        im = self.im_points()
        return re[None, :] + 1j * im[:, None]  # shape (n_im, n_re)

    def cell_size(self) -> tuple[float, float]:
        return (
            (self.re_max - self.re_min) / (self.n_re - 1),
            (self.im_max - self.im_min) / (self.n_im - 1),
        )

    def contains(self, w: complex) -> bool:
        return self.re_min <= w.real <= self.re_max and self.im_min <= w.imag <= self.im_max

    def nearest_cell(self, w: complex) -> tuple[int, int]:
        dre, dim = self.cell_size()
        ix = int(round((w.real - self.re_min) / dre))
        iy = int(round((w.imag - self.im_min) / dim))
        return (min(max(iy, 0), self.n_im - 1), min(max(ix, 0), self.n_re - 1))


@dataclass(frozen=True)
class ScanGrid:
    spec: GridSpec
    values: np.ndarray  # (n_im, n_re) log-scale; -inf for exact zeros, NaN for failures

    @property
    def plane_tag(self) -> str:
        return self.spec.plane_tag

    def point(self, iy: int, ix: int) -> complex:
        return complex(self.spec.re_points()[ix], self.spec.im_points()[iy])


def scan(evaluator, spec: GridSpec, threads: int | None = None) -> ScanGrid:
    """Dense evaluation of a log-scale evaluator over the grid.

    The evaluator maps one complex point to ln of the scanned quantity
    (|Z|^2 or L); an `evaluate_grid(points)` attribute, when present, is used
    as a vectorized fast path.  Failures at single points are recorded as NaN
    and the scan continues.  Results are deterministic regardless of the
    thread count.
    """
    mesh = spec.mesh()
    if hasattr(evaluator, "evaluate_grid"):
        values = np.asarray(evaluator.evaluate_grid(mesh), dtype=np.float64)
        if values.shape != mesh.shape:
            raise ValueError("evaluate_grid returned a wrong shape")
        return ScanGrid(spec, values)

    values = np.full(mesh.shape, np.nan, dtype=np.float64)

    def eval_row(iy: int) -> None:
        for ix in range(spec.n_re):
            try:
                values[iy, ix] = float(evaluator(complex(mesh[iy, ix])))
            except Exception:
                values[iy, ix] = np.nan

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(eval_row, range(spec.n_im)))
    else:
        for iy in range(spec.n_im):
            eval_row(iy)
    return ScanGrid(spec, values)


@dataclass(frozen=True)
class MinimumCandidate:
    iy: int
    ix: int
    location: complex
    value: float


def find_minima(grid: ScanGrid, rel_threshold: float = 1e-2) -> list[MinimumCandidate]:
    """Strict 8-neighborhood local minima on interior cells.

    Values are log-scale, so the linear-scale threshold `value <=
    rel_threshold * median` becomes value <= median + ln(rel_threshold).
    """
    v = grid.values
    finite = v[np.isfinite(v)]
    cutoff = np.inf
    if finite.size and rel_threshold is not None:
        cutoff = float(np.median(finite)) + math.log(rel_threshold)
    padded = np.full((v.shape[0] + 2, v.shape[1] + 2), np.inf)
    padded[1:-1, 1:-1] = np.where(np.isnan(v), np.inf, v)
    center = padded[1:-1, 1:-1]
    is_min = np.ones(v.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nb = padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
            is_min &= center < nb
    is_min &= center <= cutoff
    is_min[0, :] = is_min[-1, :] = False
    is_min[:, 0] = is_min[:, -1] = False
    re = grid.spec.re_points()
    im = grid.spec.im_points()
    return [
        MinimumCandidate(int(iy), int(ix), complex(re[ix], im[iy]), float(v[iy, ix]))
        for iy, ix in zip(*np.nonzero(is_min))
    ]


@dataclass(frozen=True)
class ZeroEstimate:
    location: complex
    residual: float  # ln |f| at the location (relative to the evaluator's scale)
    method: str  # "grid-minimum" | "newton" | "polynomial"
    iterations: int = 0


def refine_newton(
    evaluator_z,
    z0: complex,
    step_scale: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> ZeroEstimate:
    """Complex Newton iteration on a complex-Z evaluator.

    The derivative is taken by central differences with step 1e-6 * scale, so
    any backend returning a (possibly rescaled) complex Z can be refined.
    Multiple roots make plain Newton steps shrink geometrically; a stable step
    ratio r triggers one accelerated step scaled by 1/(1-r), after which plain
    iteration resumes.  Converges when |dz| < tol; raises ConvergenceError
    otherwise.
    """
    scale = step_scale if step_scale is not None else max(1.0, abs(z0))
    h = 1e-6 * scale
    z = complex(z0)
    prev_step = None
    ratio_streak = 0
    last_ratio = 0.0
    for it in range(max_iter):
        f = complex(evaluator_z(z))
        if f == 0:
            return ZeroEstimate(z, float("-inf"), "newton", it)
        df = (complex(evaluator_z(z + h)) - complex(evaluator_z(z - h))) / (2.0 * h)
        if abs(df) * scale < 1e-300 or not np.isfinite(abs(df)):
            raise ConvergenceError(f"derivative underflow at {z:.6g}")
        dz = f / df
        if prev_step is not None and abs(prev_step) > 0:
            r = abs(dz) / abs(prev_step)
            if 0.4 < r < 0.97 and abs(r - last_ratio) < 0.05:
                ratio_streak += 1
            else:
                ratio_streak = 0
            last_ratio = r
            if ratio_streak >= 3:
                dz = dz / (1.0 - r)  # multiplicity-accelerated step
                ratio_streak = 0
        prev_step = dz
        z -= dz
        if abs(dz) < tol:
            fz = complex(evaluator_z(z))
            residual = math.log(abs(fz)) if fz != 0 else float("-inf")
            return ZeroEstimate(z, residual, "newton", it + 1)
    raise ConvergenceError(f"Newton did not converge from {z0:.6g} in {max_iter} iterations")


def _horner_with_derivative(c: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.full_like(z, c[-1])
    dp = np.zeros_like(z)
    for k in range(len(c) - 2, -1, -1):
        dp = dp * z + p
        p = p * z + c[k]
    return p, dp


def _poly_backward_scale(c: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sum_k |c_k| |z|^k, the backward-error scale for residual acceptance."""
    s = np.zeros(z.shape, dtype=np.float64)
    az = np.abs(z)
    for k in range(len(c) - 1, -1, -1):
        s = s * az + abs(c[k])
    return s


def aberth_roots(
    coeffs: np.ndarray, tol: float = 1e-12, max_iter: int = 200
) -> np.ndarray:
    """All roots of sum_k coeffs[k] x^k by the Aberth-Ehrlich iteration.

    Initial guesses sit on a circle sized from the coefficient magnitudes;
    converged roots are frozen so clustered (multiple) roots cannot keep the
    rest oscillating.  If the step criterion is never met, roots whose
    residuals are at backward-error level are still accepted -- a multiple
    root can only be located to eps^(1/m) no matter the iteration.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    c = c / np.max(np.abs(c))
    d = len(c) - 1
    if d < 1:
        return np.zeros(0, dtype=np.complex128)
    if d == 1:
        return np.array([-c[0] / c[1]])
    radius = (abs(c[0]) / abs(c[d])) ** (1.0 / d)
    radius = min(max(radius, 1e-6), 1.0 + float(np.max(np.abs(c[:-1]) / abs(c[d]))))
    angles = 2.0 * np.pi * (np.arange(d) + 0.25) / d
    z = radius * np.exp(1j * angles)
    frozen = np.zeros(d, dtype=bool)
    for _ in range(max_iter):
        p, dp = _horner_with_derivative(c, z)
        dp = np.where(dp == 0, 1e-300, dp)
        w = p / dp
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = np.sum(1.0 / diff, axis=1)
        delta = np.where(frozen, 0.0, w / (1.0 - w * s))
        z = z - delta
        frozen |= np.abs(delta) <= tol * (1.0 + np.abs(z))
        if np.all(frozen):
            for _ in range(2):  # Newton polish
                p, dp = _horner_with_derivative(c, z)
                dp = np.where(dp == 0, 1e-300, dp)
                z = z - p / dp
            return z
    p, _ = _horner_with_derivative(c, z)
    if np.all(np.abs(p) <= 1e-10 * _poly_backward_scale(c, z)):
        return z
    raise ConvergenceError(f"Aberth iteration did not converge in {max_iter} steps")


def companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Independent second finder: companion-matrix eigenvalues (numpy.roots)."""
    c = np.asarray(coeffs, dtype=np.complex128)
    return np.roots(c[::-1] / np.max(np.abs(c)))


def _deflate_exact_units(c: np.ndarray) -> tuple[np.ndarray, list[complex]]:
    """Split off roots at exactly +-1 detected by exact coefficient sums.

    Integer-valued density-of-states coefficients give P(+-1) as exact float
    sums, and the 2D-Ising polynomials carry genuinely multiple roots at
    x = -1 (K on the i pi/2 lattice).  Deflating them exactly keeps the
    iterative finders on well-separated roots.
    """
    roots: list[complex] = []
    c = c.copy()
    for unit in (1.0, -1.0):
        while len(c) > 1:
            signs = unit ** np.arange(len(c))
            total = complex(math.fsum((c * signs).real), math.fsum((c * signs).imag))
            if total != 0:
                break
            # synthetic division by (x - unit), exact for integer-valued inputs
            out = np.empty(len(c) - 1, dtype=np.complex128)
            acc = 0j
            for k in range(len(c) - 1, 0, -1):
                acc = c[k] + unit * acc
                out[k - 1] = acc
            c = out
            roots.append(complex(unit))
    return c, roots


def roots_of_polynomial(coeffs, method: str = "aberth") -> np.ndarray:
    """Roots (with multiplicity) of a low-to-high coefficient polynomial.

    Trailing zero coefficients become exact roots at the origin and exact
    roots at +-1 are deflated first; the root count equals the polynomial
    degree.  Output is sorted by (re, im).
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    if len(c) - 1 > POLY_DEGREE_CAP:
        raise ValueError(f"degree {len(c) - 1} exceeds cap {POLY_DEGREE_CAP}")
    lead, trail = nz[-1], nz[0]
    stripped, unit_roots = _deflate_exact_units(c[trail : lead + 1])
    if len(stripped) == 1:
        finite = np.zeros(0, dtype=np.complex128)
    elif method == "aberth":
        finite = aberth_roots(stripped)
    elif method == "companion":
        finite = companion_roots(stripped)
    else:
        raise ValueError(f"unknown root-finding method {method!r}")
    out = np.concatenate(
        [np.zeros(trail, dtype=np.complex128), np.array(unit_roots, dtype=np.complex128), finite]
    )
    return out[np.lexsort((out.imag, out.real))]


def polynomial_roots(
    dos: DensityOfStates,
    which: str = "fisher",
    fixed_other_param: complex = 0j,
    method: str = "aberth",
) -> np.ndarray:
    """Roots of Z as a polynomial in x = e^{-2K} (fisher, fixed H) or
    z = e^{-2H} (lee_yang, fixed K)."""
    if which == "fisher":
        coeffs = dos.fisher_coefficients(H=fixed_other_param)
    elif which == "lee_yang":
        coeffs = dos.lee_yang_coefficients(K=fixed_other_param)
    else:
        raise ValueError(f"unknown zero family {which!r}")
    return roots_of_polynomial(coeffs, method=method)


def map_roots(roots, window: GridSpec, variable: str = "K") -> list[complex]:
    """All logarithm preimages K = -ln(x)/2 (or H = -ln(z)/2) inside the window.

    The branch lattice has imaginary period pi.  Roots at the origin have no
    finite preimage and are skipped (count them in the caller's report).
    """
    if variable not in ("K", "H"):
        raise ValueError("variable must be 'K' or 'H'")
    out: list[complex] = []
    for x in np.asarray(roots, dtype=np.complex128):
        if x == 0:
            continue
        base = -(math.log(abs(x)) + 1j * math.atan2(x.imag, x.real)) / 2.0
        if not (window.re_min <= base.real <= window.re_max):
            continue
        k_lo = math.ceil((window.im_min - base.imag) / math.pi)
        k_hi = math.floor((window.im_max - base.imag) / math.pi)
        for k in range(k_lo, k_hi + 1):
            out.append(base + 1j * math.pi * k)
    out.sort(key=lambda w: (w.real, w.imag))
    return out


RESCALE_VARIABLES = ("x", "tanh_k", "sinh_2k")


def rescale_from_x(x, variable: str):
    """Map x = e^{-2K} roots into a rescaled Fisher variable."""
    x = np.asarray(x, dtype=np.complex128)
    if variable == "x":
        return x
    if variable == "tanh_k":
        return (1.0 - x) / (1.0 + x)
    if variable == "sinh_2k":
        return (1.0 - x * x) / (2.0 * x)
    raise ValueError(f"unknown rescale variable {variable!r}")


def unit_circle_distance(x_roots, variable: str = "sinh_2k") -> np.ndarray:
    """| |u| - 1 | for each nonzero root in the rescaled variable u."""
    x = np.asarray(x_roots, dtype=np.complex128)
    x = x[x != 0]
    u = rescale_from_x(x, variable)
    return np.abs(np.abs(u) - 1.0)
