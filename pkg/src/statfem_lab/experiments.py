"""End-to-end convergence experiments and their CSV/manifest outputs."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .errors import StatfemError
from .exact import ExactPrior1D
from .fem import assemble_system
from .fields import reference_grid
from .forcing import ForcingModel
from .mesh import build_mesh
from .metrics import wasserstein2_empirical_1d, wasserstein2_gaussian_fields
from .posterior import condition, equispaced_sensors, generate_sensor_data
from .prior import StatfemPrior, assemble_forcing_covariance
from .rates import RateReport, dyadic_log_ratio, fit_loglog_slope, smooth_lr
from .sampling import RNG_ALGORITHM, max_functional, sample_field

log = logging.getLogger(__name__)


class ExperimentError(StatfemError):
    """A numerical failure tagged with the (h, epsilon) where it happened."""


# -- mesh ladders ----------------------------------------------------------------


def _width_constant(dim: int) -> float:
    return 1.0 if dim == 1 else math.sqrt(2.0)


def _thin_log_uniform(cands: list[int], count: int) -> list[int]:
    # repeatedly drop the interior point sitting in the tightest log-spaced cluster
    c = list(cands)
    while len(c) > count:
        logs = np.log(c)
        gaps = logs[2:] - logs[:-2]
        del c[1 + int(np.argmin(gaps))]
    return c


def mesh_ladder(cfg: ExperimentConfig):
    """Cells-per-side for every mesh the experiment needs.

    Fit experiments return a list ordered by decreasing h. Dyadic ones
    return ``(base, all_meshes)`` where each base ``n`` has ``2n`` and ``4n``
    available.
    """
    c = _width_constant(cfg.dim)
    ladder = cfg.h_ladder.strip()
    if ladder.startswith("geom:"):
        if cfg.dyadic:
            raise ValueError("2D experiments need a dyadic ladder")
        try:
            h_min, h_max, count = ladder[5:].split(":")
            h_min, h_max, count = float(h_min), float(h_max), int(count)
        except ValueError:
            raise ValueError("expected geom:H_MIN:H_MAX:COUNT") from None
        if not 0 < h_min < h_max:
            raise ValueError("need 0 < H_MIN < H_MAX")
        lo = max(2, math.ceil(c / h_max - 1e-9))
        hi = math.floor(c / h_min + 1e-9)
        # a mesh whose nodes contain the whole reference grid sees no
        # interpolation error there and would fall off the fitted line
        cands = [n for n in range(lo, hi + 1) if n % (cfg.grid_n - 1) != 0]
        if len(cands) < max(count, 2):
            raise ValueError(f"only {len(cands)} meshes fit in [{h_min}, {h_max}], asked for {count}")
        return _thin_log_uniform(cands, count)
    if ladder.startswith("dyadic:"):
        if not cfg.dyadic:
            raise ValueError("dyadic ladders are for 2D experiments")
        try:
            h_min, h_max = (float(x) for x in ladder[7:].split(":"))
        except ValueError:
            raise ValueError("expected dyadic:H_MIN:H_MAX") from None
        finest = math.floor(c / h_min + 1e-9)
        base = list(range(max(2, math.ceil(c / h_max - 1e-9)), finest // 4 + 1))
        if not base:
            raise ValueError("no base mesh has both halvings within the ladder")
        return base, sorted(set(base) | {2 * n for n in base} | {4 * n for n in base})
    try:
        hs = [float(x) for x in ladder.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"cannot parse h_ladder {ladder!r}") from None
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("explicit h_ladder must be strictly decreasing")
    ns = []
    for h in hs:
        n = round(c / h)
        if n < 2 or abs(c / h - n) > 1e-6 * n:
            raise ValueError(f"h={h} is not realizable by a uniform mesh")
        ns.append(n)
    if not cfg.dyadic:
        if len(ns) < 2:
            raise ValueError("need at least two meshes")
        return ns
    have = set(ns)
    base = [n for n in ns if 2 * n in have and 4 * n in have]
    if not base:
        raise ValueError("ladder must contain h, h/2 and h/4 for some h")
    return base, sorted(have)


# -- execution helpers -------------------------------------------------------------


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("STATFEM_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _tagged(fn, **coords):
    try:
        return fn()
    except (StatfemError, np.linalg.LinAlgError) as exc:
        where = ", ".join(f"{k}={v:.6g}" for k, v in coords.items() if v is not None)
        raise ExperimentError(f"{exc} (at {where})") from exc


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: list[RateReport]
    files: dict = field(default_factory=dict)


def _statfem_prior(cfg, model, n):
    mesh = build_mesh(cfg.dim, n)
    fem = assemble_system(mesh)
    return StatfemPrior(fem, assemble_forcing_covariance(fem, model, cfg.kf_mode), model)


def _sensors(cfg, eps):
    per_axis = cfg.sensors if cfg.dim == 1 else round(math.sqrt(cfg.sensors))
    return equispaced_sensors(cfg.dim, per_axis, eps, cfg.sensor_lo, cfg.sensor_hi)


# -- 1D experiments with an exact reference ------------------------------------------


def _run_fit_1d(cfg: ExperimentConfig, threads: int) -> list[RateReport]:
    model = ForcingModel(cfg.sigma_f, cfg.l_f)
    grid, w = reference_grid(1, cfg.grid_n)
    ns = mesh_ladder(cfg)
    hs = np.array([1.0 / n for n in ns])
    exact = ExactPrior1D(model)
    exact_field = _tagged(lambda: exact.on_grid(grid, w))

    def build(n):
        return _tagged(lambda: _statfem_prior(cfg, model, n).on_grid(grid, w), h=1.0 / n)

    priors = _pmap(build, ns, threads)
    is_max = cfg.experiment.startswith("max-")
    cases = [(None, exact_field, priors)]
    if cfg.has_posterior:
        cases = []
        for eps in cfg.epsilons:
            sensors = _sensors(cfg, eps)
            # one trajectory and one noise draw shared by every noise level
            v = generate_sensor_data(exact, sensors, cfg.seed)
            sensors = sensors.with_values(v)
            post_exact = _tagged(lambda: condition(exact_field, sensors), epsilon=eps)
            post = _pmap(
                lambda ip: _tagged(lambda: condition(ip[1], sensors), h=hs[ip[0]], epsilon=eps),
                list(enumerate(priors)),
                threads,
            )
            cases.append((eps, post_exact, post))

    reports = []
    for e_idx, (eps, ref, fields) in enumerate(cases):
        if is_max:
            ref_max = max_functional(sample_field(ref, cfg.n_samples, (cfg.seed, e_idx, 0)))

            def dist(i, f=fields, ref_max=ref_max, e_idx=e_idx):
                batch = sample_field(f[i], cfg.n_samples, (cfg.seed, e_idx, i + 1))
                return wasserstein2_empirical_1d(ref_max, max_functional(batch))
        else:

            def dist(i, f=fields, ref=ref):
                return wasserstein2_gaussian_fields(ref, f[i])

        ds = np.array(_pmap(lambda i: _tagged(lambda: dist(i), h=hs[i], epsilon=eps), range(len(ns)), threads))
        slope, intercept = fit_loglog_slope(hs, ds)
        reports.append(RateReport(cfg.experiment, hs, ds, slope, intercept, epsilon=eps))
        log.info("%s eps=%s slope=%.4f intercept=%.4f", cfg.experiment, eps, slope, intercept)
    return reports


# -- 2D self-convergence experiments ------------------------------------------------


def _run_dyadic_2d(cfg: ExperimentConfig, threads: int) -> list[RateReport]:
    model = ForcingModel(cfg.sigma_f, cfg.l_f)
    grid, w = reference_grid(2, cfg.grid_n)
    base, _ = mesh_ladder(cfg)
    pairs = sorted(set(base) | {2 * n for n in base})  # W(eta_n, eta_2n) needed

    sensor_sets = [None]
    if cfg.has_posterior:
        fine_n = round(1.0 / cfg.fine_h)
        source = _tagged(lambda: _statfem_prior(cfg, model, fine_n), h=math.sqrt(2) / fine_n)
        sensor_sets = []
        for eps in cfg.epsilons:
            s = _sensors(cfg, eps)
            sensor_sets.append(s.with_values(generate_sensor_data(source, s, cfg.seed)))

    uses = {}
    for n in pairs:
        uses[n] = uses.get(n, 0) + 1
        uses[2 * n] = uses.get(2 * n, 0) + 1
    field_cache: dict = {}
    remaining = dict(uses)

    def fields_for(n):
        if n not in field_cache:
            prior = _tagged(lambda: _statfem_prior(cfg, model, n).on_grid(grid, w), h=math.sqrt(2) / n)
            if sensor_sets[0] is None:
                field_cache[n] = [prior]
            else:
                field_cache[n] = [
                    _tagged(lambda: condition(prior, s), h=math.sqrt(2) / n, epsilon=s.epsilon)
                    for s in sensor_sets
                ]
        return field_cache[n]

    self_dist = {k: {} for k in range(len(sensor_sets))}
    for n in pairs:
        coarse, fine = fields_for(n), fields_for(2 * n)
        for k, s in enumerate(sensor_sets):
            eps = None if s is None else s.epsilon
            self_dist[k][n] = _tagged(
                lambda: wasserstein2_gaussian_fields(coarse[k], fine[k]), h=math.sqrt(2) / n, epsilon=eps
            )
        for m in (n, 2 * n):
            remaining[m] -= 1
            if remaining[m] == 0:
                field_cache.pop(m, None)
        log.info("%s W(h=%.4f, h/2) done", cfg.experiment, math.sqrt(2) / n)

    reports = []
    for k, s in enumerate(sensor_sets):
        d = self_dist[k]
        hs = np.array([math.sqrt(2) / n for n in pairs])
        ds = np.array([d[n] for n in pairs])
        slope, intercept = fit_loglog_slope(hs, ds)
        h_lr = np.array([math.sqrt(2) / n for n in base])
        ratios = np.array([d[n] / d[2 * n] for n in base])
        lr = [(h, dyadic_log_ratio(d[n], d[2 * n])) for h, n in zip(h_lr, base)]
        h_kept, smoothed = smooth_lr(h_lr, ratios, cfg.lr_cutoff_h)
        reports.append(
            RateReport(
                cfg.experiment,
                hs,
                ds,
                slope,
                intercept,
                epsilon=None if s is None else s.epsilon,
                lr_sequence=lr,
                smoothed_lr=list(zip(h_kept.tolist(), smoothed.tolist())),
            )
        )
    return reports


# -- outputs -----------------------------------------------------------------------


def _fmt(x) -> str:
    return "" if x is None else f"{float(x):.11e}"


def emit_csv(reports: Sequence[RateReport], path, kind: str = "distances") -> Path:
    """Write one of the result tables; an empty report list gives a header-only file."""
    path = Path(path)
    headers = {
        "distances": ["experiment", "epsilon", "h", "wasserstein"],
        "rates": ["experiment", "epsilon", "slope", "intercept", "final_smoothed_lr"],
        "lr": ["experiment", "epsilon", "h", "lr", "smoothed_lr"],
    }
    if kind not in headers:
        raise ValueError(f"unknown table kind {kind!r}")
    rows = []
    for r in reports:
        if kind == "distances":
            rows += [[r.experiment, _fmt(r.epsilon), _fmt(h), _fmt(d)] for h, d in zip(r.h_values, r.distances)]
        elif kind == "rates":
            rows.append([r.experiment, _fmt(r.epsilon), _fmt(r.slope), _fmt(r.intercept), _fmt(r.final_smoothed_lr)])
        else:
            smooth = dict(r.smoothed_lr or [])
            rows += [[r.experiment, _fmt(r.epsilon), _fmt(h), _fmt(v), _fmt(smooth.get(h))] for h, v in (r.lr_sequence or [])]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(headers[kind])
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_manifest(cfg: ExperimentConfig, path) -> Path:
    manifest = {
        "config": cfg.to_dict(),
        "config_sha256": cfg.config_hash(),
        "rng_algorithm": RNG_ALGORITHM,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "statfem_lab_version": __version__,
    }
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run_experiment(cfg: ExperimentConfig, output_dir=None, threads: Optional[int] = None) -> ExperimentResult:
    """Run one experiment and write distances.csv, rates.csv, lr.csv and manifest.json."""
    threads = n_threads() if threads is None else threads
    runner = _run_dyadic_2d if cfg.dyadic else _run_fit_1d
    reports = runner(cfg, threads)
    result = ExperimentResult(cfg, reports)
    out = output_dir or cfg.output_dir
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        result.files["distances"] = emit_csv(reports, out / "distances.csv", "distances")
        result.files["rates"] = emit_csv(reports, out / "rates.csv", "rates")
        if cfg.dyadic:
            result.files["lr"] = emit_csv(reports, out / "lr.csv", "lr")
        result.files["manifest"] = write_manifest(cfg, out / "manifest.json")
    return result
