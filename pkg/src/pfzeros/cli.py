"""Command-line front end: reproducible scans, zero searches, verification,
noise studies, correlation reports, and resource counts.

Every output embeds the fully resolved run configuration; re-running from an
embedded config (--rerun-from) reproduces the bytes exactly, independent of
the worker-pool size.  Exit codes: 0 success, 2 config error, 3 tolerance
violation (verify), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .circuits import compile_general, compile_kicked, kick_field_for_ky, resource_counts
from .correlations import KickedSetup, corr_cross_row, corr_norm_ratio, corr_same_row, probe_sign_table
from .errors import PfzError
from .evaluators import (
    DosFisherEvaluator,
    DosLeeYangEvaluator,
    GeneralCircuitEvaluator,
    KickedFieldPlaneEvaluator,
    KickedProbabilityEvaluator,
    calibrate_kicked_relation,
)
from .model import IsingModel, build_chain, build_cylinder, from_edge_list, model_from_json
from .noise import detectability, noisy_scan
from .oracle import brute_force_Z, correlation, density_of_states
from .statevector import run_effective, run_full, run_streamed
from .zeros import (
    GridSpec,
    find_minima,
    map_roots,
    polynomial_roots,
    refine_newton,
    scan,
    unit_circle_distance,
)

FORMAT_VERSION = 1
ENV_THREADS = "PFZEROS_THREADS"

TASKS = ("scan", "zeros", "verify", "noise", "corr", "counts")
PLANES = ("x", "K", "tanhK", "z", "H", "kickH")
BACKENDS = ("oracle", "kicked", "effective", "full", "streamed")

DEFAULT_WINDOWS = {
    "x": (-1.7, 1.7, -1.68, 1.72),
    "K": (-0.62, 0.63, -1.45, 1.47),
    "tanhK": (-2.1, 2.1, -2.08, 2.12),
    "z": (-1.6, 1.6, -1.58, 1.62),
    "H": (-0.8, 0.8, -0.02, 3.16),
    "kickH": (-1.2, 1.2, -1.18, 1.22),
}

RESCALE_VARIABLE = "sinh_2k"  # empirically validated unit-circle variable


@dataclass
class RunConfig:
    model: str
    task: str
    backend: str = "oracle"
    plane: str | None = None
    window: tuple[float, float, float, float] | None = None
    res: tuple[int, int] = (100, 100)
    fixed_k: tuple[float, float] = (-0.3, 0.0)
    fixed_h: tuple[float, float] = (0.0, 0.0)
    shots: int = 5000
    seed: int = 1234
    out: str = "pfzeros_out"
    threads: int = 1
    png: bool = False
    sites: str = "0,0;1,1"
    delta: float = 0.01
    cut: str | None = None
    draws: int = 5
    inject_error: bool = False

    def resolved_plane(self) -> str:
        if self.plane is not None:
            return self.plane
        return "K"

    def resolved_window(self) -> tuple[float, float, float, float]:
        if self.window is not None:
            return self.window
        return DEFAULT_WINDOWS[self.resolved_plane()]

    def grid_spec(self) -> GridSpec:
        w = self.resolved_window()
        return GridSpec(w[0], w[1], w[2], w[3], self.res[0], self.res[1], self.resolved_plane())

    def to_dict(self) -> dict:
        """Resolved config as embedded in outputs.

        The destination path and worker-pool size are execution details, not
        part of the reproducible run definition, and are omitted so reruns
        stay byte-identical.
        """
        d = asdict(self)
        d["plane"] = self.resolved_plane()
        d["window"] = list(self.resolved_window())
        d["res"] = list(self.res)
        d["fixed_k"] = list(self.fixed_k)
        d["fixed_h"] = list(self.fixed_h)
        del d["out"]
        del d["threads"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        for key in ("window",):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        for key in ("res", "fixed_k", "fixed_h"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _parse_complex_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) == 1:
        return (float(parts[0]), 0.0)
    if len(parts) == 2:
        return (float(parts[0]), float(parts[1]))
    raise argparse.ArgumentTypeError(f"expected 're' or 're,im', got {text!r}")


def _parse_window(text: str) -> tuple[float, float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("window must be re0,re1,im0,im1")
    return tuple(parts)  # type: ignore[return-value]


def _parse_res(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("resolution must be NxM")
    return (int(parts[0]), int(parts[1]))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pfzeros",
        description="Complex partition-function zeroes of Ising models via "
        "simulated measurement protocols.",
    )
    p.add_argument("--model", help="cylinder:NxL | chain:N[:periodic] | path to model JSON")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--backend", choices=BACKENDS, default="oracle")
    p.add_argument("--plane", choices=PLANES, help="scan plane (x/K Fisher, z/H Lee-Yang)")
    p.add_argument("--window", type=_parse_window, help="re0,re1,im0,im1")
    p.add_argument("--res", type=_parse_res, default=(100, 100), help="grid resolution NxM")
    p.add_argument("--fixed-k", type=_parse_complex_pair, default=(-0.3, 0.0),
                   help="fixed coupling for Lee-Yang planes / corr runs (re[,im])")
    p.add_argument("--fixed-h", type=_parse_complex_pair, default=(0.0, 0.0),
                   help="fixed field for Fisher planes (re[,im])")
    p.add_argument("--shots", type=int, default=5000)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default="pfzeros_out", help="output path prefix")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker pool size (default: ${ENV_THREADS} or CPU count)")
    p.add_argument("--png", action="store_true", help="also write a heatmap PNG")
    p.add_argument("--sites", default="0,0;1,1", help="corr sites 'i,m;k,n'")
    p.add_argument("--delta", type=float, default=0.01, help="corr probe strength")
    p.add_argument("--cut", default=None, help="noise task: 'im=<value>' row cut CSV")
    p.add_argument("--draws", type=int, default=5, help="verify: random draws per model")
    p.add_argument("--inject-error", action="store_true",
                   help="verify: force a mismatch (self-test of the failure path)")
    p.add_argument("--rerun-from", default=None,
                   help="re-execute the config embedded in an existing output file")
    p.add_argument("--version", action="version", version=f"pfzeros {__version__}")
    return p


def resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get(ENV_THREADS)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parse_model(spec: str, fixed_k: complex, fixed_h: complex) -> IsingModel:
    if spec.startswith("cylinder:"):
        dims = spec.split(":")[1].lower().split("x")
        n, l = int(dims[0]), int(dims[1])
        return build_cylinder(n, l, fixed_k, fixed_k, fixed_h, merge_duplicate_bonds=n == 2)
    if spec.startswith("chain:"):
        parts = spec.split(":")
        return build_chain(int(parts[1]), periodic="periodic" in parts[2:], K=fixed_k, H=fixed_h)
    with open(spec, encoding="utf-8") as fh:
        return model_from_json(fh.read())


def _model_dims(model: IsingModel) -> tuple[int, int] | None:
    lat = model.lattice_info()
    if lat.get("kind") == "cylinder":
        return int(lat["n_circ"]), int(lat["l_len"])
    return None


def _is_fisher(plane: str) -> bool:
    return plane in ("x", "K", "tanhK")


def _rebuild_with(model: IsingModel, coupling: complex, field_value: complex) -> IsingModel:
    bonds = [(b.i, b.j, coupling) for b in model.bonds]
    fields = [] if field_value == 0 else [(i, field_value) for i in range(model.n_spins)]
    return from_edge_list(model.n_spins, bonds, fields, model.lattice_info() or None)


def make_evaluator(cfg: RunConfig, model: IsingModel):
    plane = cfg.resolved_plane()
    fixed_k = complex(*cfg.fixed_k)
    fixed_h = complex(*cfg.fixed_h)
    if plane == "kickH":
        dims = _model_dims(model)
        if dims is None:
            raise ValueError("the kick-field plane needs a cylinder model")
        return KickedFieldPlaneEvaluator(dims[0], dims[1], fixed_k)
    if cfg.backend == "oracle":
        dos = density_of_states(model)
        if _is_fisher(plane):
            return DosFisherEvaluator(dos, fixed_h, "tanh_k" if plane == "tanhK" else plane)
        return DosLeeYangEvaluator(dos, fixed_k, plane)
    if cfg.backend == "kicked":
        dims = _model_dims(model)
        if dims is None or plane != "K":
            raise ValueError("kicked backend needs a cylinder model and plane K")
        return KickedProbabilityEvaluator(*dims)
    # circuit backends compile the general scheme per grid point
    if _is_fisher(plane):
        def factory(w: complex) -> IsingModel:
            if plane == "K":
                k = w
            elif plane == "tanhK":
                k = cmath.atanh(w)
            else:
                k = -cmath.log(w) / 2.0
            return _rebuild_with(model, k, fixed_h)
    else:
        def factory(w: complex) -> IsingModel:
            h = w if plane == "H" else -cmath.log(w) / 2.0
            return _rebuild_with(model, fixed_k, h)
    return GeneralCircuitEvaluator(factory, cfg.backend)


def _meta_line(cfg: RunConfig) -> str:
    blob = json.dumps(
        {"format_version": FORMAT_VERSION, "config": cfg.to_dict()},
        sort_keys=True,
        separators=(",", ":"),
    )
    return f"# pfzeros config={blob}"


def write_grid_csv(path: str, cfg: RunConfig, spec: GridSpec, values: np.ndarray,
                   extra_columns: dict[str, np.ndarray] | None = None) -> None:
    re = spec.re_points()
    im = spec.im_points()
    cols = {"value": values}
    if extra_columns:
        cols.update(extra_columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_meta_line(cfg) + "\n")
        fh.write("re,im," + ",".join(cols) + "\n")
        for iy in range(spec.n_im):
            for ix in range(spec.n_re):
                row = ",".join(repr(float(c[iy, ix])) for c in cols.values())
                fh.write(f"{float(re[ix])!r},{float(im[iy])!r},{row}\n")


def write_json(path: str, cfg: RunConfig, payload: dict) -> None:
    doc = {"format_version": FORMAT_VERSION, "config": cfg.to_dict(), **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def maybe_png(path: str, spec: GridSpec, values: np.ndarray, enabled: bool) -> None:
    if not enabled:
        return
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:  # PNG output is never load-bearing
        print("matplotlib not available; skipping PNG", file=sys.stderr)
        return
    fig, ax = plt.subplots(figsize=(6, 5))
    disp = np.where(np.isfinite(values), values, np.nan)
    imshow = ax.imshow(
        disp,
        origin="lower",
        extent=(spec.re_min, spec.re_max, spec.im_min, spec.im_max),
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(imshow, ax=ax, label="log value")
    ax.set_xlabel(f"Re({spec.plane_tag})")
    ax.set_ylabel(f"Im({spec.plane_tag})")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_scan(cfg: RunConfig) -> int:
    model = parse_model(cfg.model, complex(*cfg.fixed_k), complex(*cfg.fixed_h))
    spec = cfg.grid_spec()
    evaluator = make_evaluator(cfg, model)
    grid = scan(evaluator, spec, threads=resolve_threads(cfg.threads))
    write_grid_csv(cfg.out + ".csv", cfg, spec, grid.values)
    write_json(cfg.out + ".json", cfg, {
        "task": "scan",
        "plane": spec.plane_tag,
        "value_kind": "ln L" if cfg.backend in ("kicked", "effective", "full", "streamed")
        else "ln |Z|^2 (prefactor-stripped in x/z planes)",
        "finite_cells": int(np.isfinite(grid.values).sum()),
    })
    maybe_png(cfg.out + ".png", spec, grid.values, cfg.png)
    return 0


def cmd_zeros(cfg: RunConfig) -> int:
    model = parse_model(cfg.model, complex(*cfg.fixed_k), complex(*cfg.fixed_h))
    spec = cfg.grid_spec()
    plane = spec.plane_tag
    evaluator = make_evaluator(cfg, model)
    grid = scan(evaluator, spec, threads=resolve_threads(cfg.threads))
    write_grid_csv(cfg.out + ".csv", cfg, spec, grid.values)
    minima = find_minima(grid, rel_threshold=None)

    dos = density_of_states(model)
    which = "fisher" if _is_fisher(plane) else "lee_yang"
    fixed = complex(*cfg.fixed_h) if which == "fisher" else complex(*cfg.fixed_k)
    roots = polynomial_roots(dos, which, fixed)
    roots_companion = polynomial_roots(dos, which, fixed, method="companion")
    if plane == "kickH":
        raise ValueError("zeros task does not support the kick-field plane; scan it instead")
    if plane in ("K", "H"):
        in_window = map_roots(roots, spec, plane)
    elif plane == "tanhK":
        # roots at x = -1 (K on the i pi/2 lattice) have no finite tanh view
        with np.errstate(divide="ignore", invalid="ignore"):
            views = (1.0 - np.asarray(roots)) / (1.0 + np.asarray(roots))
        in_window = sorted(
            (
                complex(v)
                for r, v in zip(roots, views)
                if r != 0 and np.isfinite(v) and spec.contains(complex(v))
            ),
            key=lambda w: (w.real, w.imag),
        )
    else:
        in_window = sorted(
            (complex(r) for r in roots if r != 0 and spec.contains(complex(r))),
            key=lambda w: (w.real, w.imag),
        )

    oracle_ev = DosFisherEvaluator(dos, fixed, "tanh_k" if plane == "tanhK" else plane) \
        if which == "fisher" else DosLeeYangEvaluator(dos, fixed, plane)
    newton_eval = oracle_ev.newton_z()
    scale = max(spec.re_max - spec.re_min, spec.im_max - spec.im_min)
    refined, failures = [], []
    for cand in minima:
        try:
            est = refine_newton(newton_eval, cand.location, step_scale=scale)
            refined.append(est)
        except PfzError as exc:
            failures.append({"location": cand.location, "error": str(exc)})

    dre, dim = spec.cell_size()
    matches = []
    for root in in_window:
        cells = [
            max(abs(root.real - c.location.real) / dre, abs(root.imag - c.location.imag) / dim)
            for c in minima
        ]
        best = int(np.argmin(cells)) if cells else None
        newton_dist = min((abs(root - r.location) for r in refined), default=math.inf)
        matches.append({
            "root": root,
            "minimum_cell_distance": float(min(cells)) if cells else math.inf,
            "minimum": minima[best].location if best is not None else None,
            "newton_distance": newton_dist,
        })

    payload = {
        "task": "zeros",
        "plane": plane,
        "zero_family": which,
        "n_minima": len(minima),
        "minima": [{"location": c.location, "value": c.value} for c in minima],
        "refined": [
            {"location": r.location, "residual": r.residual, "iterations": r.iterations,
             "method": r.method}
            for r in refined
        ],
        "refine_failures": failures,
        "polynomial_roots": [complex(r) for r in roots],
        "companion_max_disagreement": _root_multiset_distance(roots, roots_companion),
        "roots_in_window": [complex(r) for r in in_window],
        "matches": matches,
        "origin_root_multiplicity": int(np.sum(np.asarray(roots) == 0)),
    }
    if which == "fisher":
        payload["rescale_variable"] = RESCALE_VARIABLE
        payload["mean_unit_circle_distance"] = float(
            np.mean(unit_circle_distance(roots, RESCALE_VARIABLE))
        )
    write_json(cfg.out + ".json", cfg, payload)
    maybe_png(cfg.out + ".png", spec, grid.values, cfg.png)
    return 0


def _root_multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.optimize import linear_sum_assignment

    if len(a) != len(b):
        return math.inf
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def _verify_models() -> list[tuple[str, IsingModel]]:
    plaq = from_edge_list(4, [(0, 1, 0j), (2, 3, 0j), (0, 2, 0j), (1, 3, 0j)])
    return [
        ("2-spin", from_edge_list(2, [(0, 1, 0j)])),
        ("open-4-chain", build_chain(4, K=0j)),
        ("2x2-plaquette", plaq),
        ("3x2-cylinder", build_cylinder(3, 2, 0j, 0j)),
    ]


def cmd_verify(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    worst = {"general": 0.0, "streamed": 0.0, "effective": 0.0, "kicked": 0.0}
    for name, skeleton in _verify_models():
        for _ in range(cfg.draws):
            k = complex(rng.normal(0, 0.4), rng.normal(0, 0.4))
            h = complex(rng.normal(0, 0.3), rng.normal(0, 0.3))
            bonds = [(b.i, b.j, k) for b in skeleton.bonds]
            fields = [(i, h) for i in range(skeleton.n_spins)]
            model = from_edge_list(skeleton.n_spins, bonds, fields)
            z = brute_force_Z(model)
            circ = compile_general(model)
            full = run_full(circ)
            streamed = run_streamed(circ)
            eff = run_effective(model)
            z2 = abs(z) ** 2
            general_err = abs(math.exp(2 * circ.log_prefactor) * full.probability - z2) / z2
            if cfg.inject_error:
                general_err += 1e-6
            streamed_err = abs(full.amplitude - streamed.amplitude)
            eff_err = abs(eff.amplitude * 2**model.n_spins - z) / abs(z)
            worst["general"] = max(worst["general"], general_err)
            worst["streamed"] = max(worst["streamed"], streamed_err)
            worst["effective"] = max(worst["effective"], eff_err)
            rows.append((name, k, h, general_err, streamed_err, eff_err))

    cal = calibrate_kicked_relation(seed=cfg.seed)
    worst["kicked"] = cal.max_rel_error

    tolerances = {"general": 1e-10, "streamed": 1e-12, "effective": 1e-12, "kicked": 1e-8}
    print(f"{'model':<14} {'K':<22} {'H':<22} {'general':>10} {'streamed':>10} {'effective':>10}")
    for name, k, h, ge, se, ee in rows:
        print(f"{name:<14} {k:<22.4f} {h:<22.4f} {ge:>10.2e} {se:>10.2e} {ee:>10.2e}")
    print()
    print(cal.summary())
    print()
    ok = True
    for key, tol in tolerances.items():
        status = "PASS" if worst[key] <= tol else "FAIL"
        ok &= worst[key] <= tol
        print(f"verify {key:<10} worst {worst[key]:.3e}  tolerance {tol:.0e}  {status}")
    write_json(cfg.out + ".json", cfg, {
        "task": "verify",
        "worst_errors": worst,
        "tolerances": tolerances,
        "kicked_calibration": {
            "tanh_sign": cal.tanh_sign,
            "two_power_formula": cal.two_power_formula,
            "two_power_matches_nominal": cal.two_power_matches_nominal,
            "tanh_sign_matches_nominal": cal.tanh_sign_matches_nominal,
            "max_rel_error": cal.max_rel_error,
        },
        "passed": ok,
    })
    return 0 if ok else 3


def cmd_noise(cfg: RunConfig) -> int:
    model = parse_model(cfg.model, complex(*cfg.fixed_k), complex(*cfg.fixed_h))
    dims = _model_dims(model)
    if dims is None:
        raise ValueError("noise task needs a cylinder model (kicked protocol map)")
    spec = cfg.grid_spec()
    if spec.plane_tag != "K":
        raise ValueError("noise task scans the complex K plane")
    evaluator = KickedProbabilityEvaluator(*dims)
    grid = scan(evaluator, spec, threads=resolve_threads(cfg.threads))
    noisy = noisy_scan(grid, cfg.shots, cfg.seed, threads=resolve_threads(cfg.threads))

    dos = density_of_states(model)
    roots = polynomial_roots(dos, "fisher", complex(*cfg.fixed_h))
    zeros_in_window = map_roots(roots, spec, "K")
    report = detectability(noisy, zeros_in_window)

    write_grid_csv(cfg.out + "_true.csv", cfg, spec, grid.values)
    write_grid_csv(cfg.out + "_noisy.csv", cfg, spec, np.log(
        np.where(noisy.estimates > 0, noisy.estimates, np.nan)
    ), extra_columns={"estimate": noisy.estimates})
    if cfg.cut:
        key, _, val = cfg.cut.partition("=")
        if key != "im":
            raise ValueError("cut must be 'im=<value>'")
        iy = int(np.argmin(np.abs(spec.im_points() - float(val))))
        with open(cfg.out + "_cut.csv", "w", encoding="utf-8") as fh:
            fh.write(_meta_line(cfg) + "\n")
            fh.write("re,true_L,estimate\n")
            re = spec.re_points()
            for ix in range(spec.n_re):
                true_l = math.exp(grid.values[iy, ix]) if np.isfinite(grid.values[iy, ix]) else 0.0
                fh.write(f"{float(re[ix])!r},{float(true_l)!r},{float(noisy.estimates[iy, ix])!r}\n")
    write_json(cfg.out + "_report.json", cfg, {
        "task": "noise",
        "n_shots": cfg.shots,
        "seed": cfg.seed,
        "zeros_in_window": zeros_in_window,
        "detections": [
            {"zero": d.zero, "cell": list(d.cell), "nearest_minimum":
             list(d.nearest_minimum) if d.nearest_minimum else None,
             "distance_cells": d.distance_cells}
            for d in report.detections
        ],
        "fraction_within_radius": report.fraction_within(),
        "radius_cells": report.radius_cells,
    })
    maybe_png(cfg.out + ".png", spec, np.log(np.where(noisy.estimates > 0, noisy.estimates, np.nan)),
              cfg.png)
    return 0


def cmd_corr(cfg: RunConfig) -> int:
    model = parse_model(cfg.model, complex(*cfg.fixed_k), complex(*cfg.fixed_h))
    dims = _model_dims(model)
    if dims is None:
        raise ValueError("corr task needs a cylinder model")
    try:
        (i, m), (k, n) = [tuple(int(v) for v in s.split(",")) for s in cfg.sites.split(";")]
    except ValueError as exc:
        raise ValueError("sites must be 'i,m;k,n'") from exc
    setup = KickedSetup(dims[0], dims[1], complex(*cfg.fixed_k), complex(*cfg.fixed_k))
    backend = "oracle" if cfg.backend == "oracle" else "kicked" if cfg.backend == "kicked" \
        else cfg.backend
    if m == n:
        est = corr_same_row(setup, i, k, m, delta=cfg.delta, backend=backend)
    else:
        est = corr_cross_row(setup, (i, m), (k, n), delta=cfg.delta, backend=backend)
    base = setup.base_model()
    sa, sb = setup.site(i, m), setup.site(k, n)
    norm2 = corr_norm_ratio(base, sa, sb)
    oracle_value = correlation(base, sa, sb) if base.n_spins <= 20 else None
    payload = {
        "task": "corr",
        "sites": [[i, m], [k, n]],
        "method": est.method,
        "delta": est.delta,
        "backend": est.backend,
        "raw": est.raw,
        "extrapolated": est.extrapolated,
        "value": est.value,
        "norm_ratio": norm2,
        "probe_signs": probe_sign_table(),
    }
    if oracle_value is not None:
        payload["oracle"] = oracle_value
        payload["abs_error_vs_oracle"] = abs(est.value - oracle_value)
    write_json(cfg.out + ".json", cfg, payload)
    print(f"corr sites ({i},{m})x({k},{n}) value {est.value:.8f}"
          + (f"  oracle {oracle_value:.8f}" if oracle_value is not None else ""))
    return 0


def cmd_counts(cfg: RunConfig) -> int:
    table = []
    print(f"{'N':>3} {'L':>3} {'general qubits':>15} {'kicked qubits':>14} {'gates':>6}")
    for n in (3, 4, 5):
        for l in (1, 2, 3):
            general = resource_counts(compile_general(build_cylinder(n, l, -0.2, -0.2)))
            kicked = resource_counts(compile_kicked(n, l, -0.2, kick_field_for_ky(-0.2) if l > 1 else 0.1))
            row = {
                "n_circ": n, "l_len": l,
                "general": asdict(general) | {"n_qubits": general.n_qubits},
                "kicked": asdict(kicked) | {"n_qubits": kicked.n_qubits},
                "formula_general_qubits": 3 * n * l - n,
                "formula_kicked_qubits": 2 * n * l,
                "formula_gates": 6 * n * l - 3 * n,
            }
            table.append(row)
            print(f"{n:>3} {l:>3} {general.n_qubits:>15} {kicked.n_qubits:>14} "
                  f"{general.n_gates:>6}")
    model = None
    if cfg.model:
        model = parse_model(cfg.model, complex(*cfg.fixed_k), complex(*cfg.fixed_h))
        own = resource_counts(compile_general(model))
        print(f"model {cfg.model}: general scheme {own.n_qubits} qubits, {own.n_gates} gates")
    write_json(cfg.out + ".json", cfg, {
        "task": "counts",
        "table": table,
        "model_counts": asdict(resource_counts(compile_general(model))) if model else None,
    })
    return 0


def _load_embedded_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first.startswith("# pfzeros config="):
            doc = json.loads(first.split("config=", 1)[1])
        else:
            fh.seek(0)
            doc = json.load(fh)
    return RunConfig.from_dict(doc["config"])


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.rerun_from:
            cfg = _load_embedded_config(args.rerun_from)
            cfg.out = args.out
            if args.threads is not None:
                cfg.threads = args.threads
        else:
            if not args.task:
                parser.error("--task is required (or --rerun-from)")
            if not args.model and args.task not in ("verify", "counts"):
                parser.error(f"--task {args.task} requires --model")
            cfg = RunConfig(
                model=args.model or "",
                task=args.task,
                backend=args.backend,
                plane=args.plane,
                window=args.window,
                res=args.res,
                fixed_k=args.fixed_k,
                fixed_h=args.fixed_h,
                shots=args.shots,
                seed=args.seed,
                out=args.out,
                threads=resolve_threads(args.threads),
                png=args.png,
                sites=args.sites,
                delta=args.delta,
                cut=args.cut,
                draws=args.draws,
                inject_error=args.inject_error,
            )
        handler = {
            "scan": cmd_scan,
            "zeros": cmd_zeros,
            "verify": cmd_verify,
            "noise": cmd_noise,
            "corr": cmd_corr,
            "counts": cmd_counts,
        }[cfg.task]
        return handler(cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PfzError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
