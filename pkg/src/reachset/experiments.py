"""Benchmark experiments: bound sensitivity, closed-loop verification, bound calculator.

Every trial draws from its own generator seeded with ``seed ^ trial``, and
records are sorted before they are written, so output files do not depend on
the number of worker threads. Wall-clock timings live in a separate sidecar
file because they are the one non-reproducible quantity.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import bounds as bd
from .domains import (BallSet, BetaRadial, RectangleSet, UniformVolume, boundary_coverage_constant,
                      boundary_density_constant, input_set_from_dict, sampling_from_dict, with_seed)
from .errors import DomainError, InfeasibleError
from .estimators import gotube_ball, randup
from .geometry import HullEstimate, convex_hull, hausdorff_hulls, hull_distances
from .maps import ClosedLoop, Scaling, map_from_dict
from .specfun import CapIntersectionQuery, ball_volume, cap_intersection_terms

log = logging.getLogger(__name__)

EXPERIMENTS = ("sensitivity", "nn-verify", "bounds-calc")
COVERAGE_TOL = 1e-9
GROUND_TRUTH_SEED_OFFSET = 1 << 63


class ConfigError(DomainError):
    """The experiment configuration is malformed."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    trials: int = 100
    M: list = field(default_factory=lambda: [1000])
    # a number, or "auto(delta)" for the smallest eps certified at that delta
    eps: object = 0.0
    ground_truth_M: int = 100_000
    truth_points: int = 10_000
    threads: int = 1
    output: str | None = None
    input_set: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=lambda: {"kind": "uniform"})
    map: dict = field(default_factory=dict)
    sensitivity: dict = field(default_factory=dict)
    horizons: list = field(default_factory=lambda: [4])
    estimators: list = field(default_factory=lambda: ["randup", "gotube"])
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if not isinstance(self.M, list) or not self.M:
            raise ConfigError("M must be a nonempty list")
        if any(int(m) != m or m < 1 for m in self.M) or sorted(self.M) != self.M:
            raise ConfigError(f"M values must be positive integers in ascending order, got {self.M}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**63:
            raise ConfigError(f"seed must be a nonnegative integer below 2**63, got {self.seed}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.eps_delta()  # validates the eps field

    def eps_delta(self):
        """The delta of an ``auto(delta)`` eps, else None."""
        if isinstance(self.eps, str):
            text = self.eps.strip()
            if text == "auto":
                return 1e-3
            if text.startswith("auto(") and text.endswith(")"):
                try:
                    delta = float(text[5:-1])
                except ValueError:
                    raise ConfigError(f"cannot parse eps {self.eps!r}") from None
                if not 0 < delta < 1:
                    raise ConfigError(f"auto eps needs delta in (0, 1), got {delta}")
                return delta
            raise ConfigError(f"eps must be a number or 'auto(delta)', got {self.eps!r}")
        if not float(self.eps) >= 0:
            raise ConfigError(f"eps must be nonnegative, got {self.eps}")
        return None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' key")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = tomli.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid config file {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    estimator: str
    trial: int
    M: int
    eps: float
    hausdorff_error: float
    covered: bool
    elapsed_s: float
    seed: int
    # experiment-specific grid coordinates
    L: float | None = None
    alpha: float | None = None
    horizon: int | None = None
    within_eps: bool | None = None


def _trial_seed(seed: int, trial: int) -> int:
    return int(seed) ^ int(trial)


def _pool_map(fn, tasks, threads):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, c) if not isinstance(rec, dict) else rec[c]) for c in columns])
    return buf.getvalue()


def _summarise(records, keys):
    groups: dict = {}
    for rec in records:
        groups.setdefault(tuple(getattr(rec, k) for k in keys), []).append(rec)
    rows = []
    for key in sorted(groups, key=lambda k: tuple((v is None, v) for v in k)):
        recs = groups[key]
        errs = [r.hausdorff_error for r in recs]
        row = dict(zip(keys, key))
        row.update(
            trials=len(recs),
            eps=recs[0].eps,
            mean_dH=statistics.fmean(errs),
            median_dH=statistics.median(errs),
            std_dH=statistics.stdev(errs) if len(errs) > 1 else 0.0,
            covered_fraction=sum(r.covered for r in recs) / len(recs),
        )
        if recs[0].within_eps is not None:
            row["within_eps_fraction"] = sum(bool(r.within_eps) for r in recs) / len(recs)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# sensitivity


def ellipse_truth(L: float, input_set: BallSet, n_points: int) -> np.ndarray:
    """Dense boundary of the image of a disc under (x1, x2) -> (L x1, x2)."""
    t = np.arange(n_points) * (2.0 * np.pi / n_points)
    circle = np.asarray(input_set.center) + input_set.radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    return Scaling(L)(circle)


def beta_radial_p0(input_set: BallSet, alpha: float, L: float):
    """p0 as a function of eps, evaluated at the boundary distance eps / (2L)."""
    spec = BetaRadial(alpha)

    def p0(eps):
        return boundary_density_constant(input_set, spec, min(eps / (2.0 * L), input_set.radius))
    return p0


def theoretical_eps(input_set: BallSet, L: float, alpha: float, M: int, delta: float) -> float:
    return bd.eps_for_delta(p=input_set.dim, r=input_set.r_convexity,
                            p0_of_eps=beta_radial_p0(input_set, alpha, L),
                            covering=bd.Circle2D(input_set.radius), L=L, M=M, delta_target=delta)


SENSITIVITY_COLUMNS = ("experiment", "estimator", "L", "alpha", "M", "trial", "seed",
                       "eps_theoretical", "d_H_empirical", "within_eps", "covered")


@dataclass(frozen=True)
class SensitivityRow:
    experiment: str
    estimator: str
    L: float
    alpha: float
    M: int
    trial: int
    seed: int
    eps_theoretical: float
    d_H_empirical: float
    within_eps: bool
    covered: bool


@dataclass
class ExperimentOutput:
    records: list
    summary: list
    csv_text: str
    timing: list = field(default_factory=list)
    sidecar: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def write(self, out_path) -> None:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(self.csv_text)
        summary_cols = list(self.summary[0]) if self.summary else []
        Path(f"{out}.summary.csv").write_text(records_to_csv(self.summary, summary_cols))
        if self.timing:
            Path(f"{out}.timing.csv").write_text(records_to_csv(self.timing, list(self.timing[0])))
        if self.sidecar:
            Path(f"{out}.bounds.json").write_text(json.dumps(self.sidecar, indent=2, sort_keys=True) + "\n")


def run_sensitivity(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentOutput:
    """ε-RandUP on the plane scaling map over a grid of Lipschitz constants and Beta-radial skews."""
    if cfg.experiment != "sensitivity":
        raise ConfigError(f"expected a sensitivity config, got {cfg.experiment!r}")
    threads = threads or cfg.threads
    input_set = input_set_from_dict(cfg.input_set or {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0})
    if not isinstance(input_set, BallSet) or input_set.dim != 2:
        raise ConfigError("the sensitivity experiment needs a 2-D ball input set")
    Ls = [float(v) for v in cfg.sensitivity.get("L", [1.0, 2.0, 4.0])]
    alphas = [float(v) for v in cfg.sensitivity.get("alpha", [1.0, 2.0, 4.0, 8.0])]
    delta = cfg.eps_delta()

    cells = []
    truths = {}
    for L in Ls:
        pts = ellipse_truth(L, input_set, cfg.truth_points)
        truths[L] = (pts, convex_hull(pts))
        for alpha in alphas:
            for M in cfg.M:
                if delta is None:
                    eps = float(cfg.eps)
                else:
                    try:
                        eps = theoretical_eps(input_set, L, alpha, M, delta)
                    except (InfeasibleError, DomainError) as exc:
                        log.warning("bound infeasible for L=%s alpha=%s M=%s: %s", L, alpha, M, exc)
                        eps = math.nan
                cells.append((L, alpha, M, eps))

    tasks = [(cell, trial) for cell in cells for trial in range(cfg.trials)]

    def run(task):
        (L, alpha, M, eps), trial = task
        seed = _trial_seed(cfg.seed, trial)
        pts, truth = truths[L]
        res = randup(Scaling(L), input_set, BetaRadial(alpha, seed), M, 0.0 if math.isnan(eps) else eps)
        d_h = hausdorff_hulls(res.hull.padded(0.0), truth)
        covered = (not math.isnan(eps)) and bool(np.all(hull_distances(pts, res.hull) <= COVERAGE_TOL))
        row = SensitivityRow("sensitivity", "randup", L, alpha, M, trial, seed, eps, d_h,
                             (not math.isnan(eps)) and d_h <= eps, covered)
        timing = {"L": L, "alpha": alpha, "M": M, "trial": trial, "elapsed_s": res.elapsed}
        return row, timing

    results = _pool_map(run, tasks, threads)
    rows = sorted((r for r, _ in results), key=lambda r: (r.L, r.alpha, r.M, r.trial))
    timing = sorted((t for _, t in results), key=lambda t: (t["L"], t["alpha"], t["M"], t["trial"]))
    records = [TrialRecord("sensitivity", r.estimator, r.trial, r.M, r.eps_theoretical, r.d_H_empirical,
                           r.covered, t["elapsed_s"], r.seed, L=r.L, alpha=r.alpha, within_eps=r.within_eps)
               for r, t in zip(rows, timing)]
    summary = _summarise(records, ("L", "alpha", "M"))
    for row in summary:
        row["eps_theoretical"] = row.pop("eps")
    return ExperimentOutput(records, summary, records_to_csv(rows, SENSITIVITY_COLUMNS), timing)


# ---------------------------------------------------------------------------
# closed-loop verification


NN_COLUMNS = ("experiment", "estimator", "horizon", "M", "trial", "seed", "eps", "d_H", "covered")


@dataclass(frozen=True)
class NNRow:
    experiment: str
    estimator: str
    horizon: int
    M: int
    trial: int
    seed: int
    eps: float
    d_H: float
    covered: bool


DEFAULT_SYSTEM = {
    "kind": "closed_loop",
    "A": [[1.0, 1.0], [0.0, 1.0]],
    "B": [[0.5], [1.0]],
    "controller": {"K": [0.4, 1.0], "lo": -1.0, "hi": 1.0},
}
DEFAULT_X0 = {"kind": "rectangle", "lo": [2.5, -0.25], "hi": [3.0, 0.25]}


def _closed_loop(cfg, weights, notes):
    spec = dict(DEFAULT_SYSTEM)
    spec.update(cfg.map or {})
    if weights is not None and not Path(weights).exists():
        msg = f"weights file {weights} not found; using the constructed saturated controller"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
        weights = None
    f = map_from_dict(spec, weights=weights)
    if not isinstance(f, ClosedLoop):
        raise ConfigError("nn-verify needs a closed_loop map")
    return f


def nn_bounds_sidecar(input_set: RectangleSet, settings: dict) -> dict:
    eps = float(settings.get("eps", 0.02))
    L = float(settings.get("L", 1.0))
    delta = float(settings.get("delta", 1e-4))
    half_width = eps / (2.0 * L)
    lam = boundary_coverage_constant(input_set, half_width)
    spec = bd.BoundSpec(eps, L, bd.RectBoundary2D(input_set.surface_measure), bd.DirectLambda(lam))
    m_min = bd.min_samples(spec, delta)
    return {"eps": eps, "L": L, "delta": delta, "perimeter": input_set.surface_measure,
            "D": bd.covering_bound(spec.covering, spec.scale), "Lambda": lam, "M_min": m_min,
            "delta_at_M_min": bd.delta_m(spec, m_min), "sampling": "uniform boundary"}


def ground_truth_hull(f, input_set, sampling, M, seed) -> HullEstimate:
    return randup(f, input_set, with_seed(sampling, seed), M, 0.0).hull


def run_nn_verify(cfg: ExperimentConfig, weights=None, threads: int | None = None,
                  ground_truth_cache: dict | None = None) -> ExperimentOutput:
    """ε-RandUP against the outer-ball baseline on a ReLU-controlled linear system."""
    if cfg.experiment != "nn-verify":
        raise ConfigError(f"expected an nn-verify config, got {cfg.experiment!r}")
    threads = threads or cfg.threads
    notes: list = []
    system = _closed_loop(cfg, weights, notes)
    input_set = input_set_from_dict(cfg.input_set or DEFAULT_X0)
    sampling = sampling_from_dict(cfg.sampling)
    eps = float(cfg.eps) if cfg.eps_delta() is None else 0.0
    for name in cfg.estimators:
        if name not in ("randup", "gotube"):
            raise ConfigError(f"unknown estimator {name!r}")

    cache = {} if ground_truth_cache is None else ground_truth_cache
    truths = {}
    for h in cfg.horizons:
        key = (h, cfg.ground_truth_M, cfg.seed)
        if key not in cache:
            cache[key] = ground_truth_hull(system.with_horizon(h), input_set, sampling,
                                           cfg.ground_truth_M, cfg.seed ^ GROUND_TRUTH_SEED_OFFSET)
        truths[h] = cache[key]

    tasks = [(h, name, M, trial) for h in cfg.horizons for name in cfg.estimators
             for M in cfg.M for trial in range(cfg.trials)]

    def run(task):
        h, name, M, trial = task
        seed = _trial_seed(cfg.seed, trial)
        f = system.with_horizon(h)
        truth = truths[h]
        spec = with_seed(sampling, seed)
        if name == "randup":
            res = randup(f, input_set, spec, M, eps)
            d_h = hausdorff_hulls(res.hull.padded(0.0), truth)
            covered = bool(np.all(hull_distances(truth.vertices, res.hull) <= COVERAGE_TOL))
        else:
            res = gotube_ball(f, input_set, spec, M, eps)
            unpadded = HullEstimate(res.ball.center[None, :], res.ball.radius - eps)
            d_h = hausdorff_hulls(unpadded, truth)
            covered = bool(np.all(np.linalg.norm(truth.vertices - res.ball.center, axis=1)
                                  <= res.ball.radius + COVERAGE_TOL))
        row = NNRow("nn-verify", name, h, M, trial, seed, eps, d_h, covered)
        return row, {"horizon": h, "estimator": name, "M": M, "trial": trial, "elapsed_s": res.elapsed}

    results = _pool_map(run, tasks, threads)
    order = lambda r: (r.horizon, r.estimator, r.M, r.trial)  # noqa: E731
    rows = sorted((r for r, _ in results), key=order)
    timing = sorted((t for _, t in results), key=lambda t: (t["horizon"], t["estimator"], t["M"], t["trial"]))
    records = [TrialRecord("nn-verify", r.estimator, r.trial, r.M, r.eps, r.d_H, r.covered, t["elapsed_s"],
                           r.seed, horizon=r.horizon) for r, t in zip(rows, timing)]
    summary = _summarise(records, ("horizon", "estimator", "M"))
    sidecar = nn_bounds_sidecar(input_set, cfg.bounds) if isinstance(input_set, RectangleSet) else {}
    if notes:
        sidecar["warnings"] = notes
    return ExperimentOutput(records, summary, records_to_csv(rows, NN_COLUMNS), timing, sidecar, notes)


# ---------------------------------------------------------------------------
# bound calculator


def _covering_from(d: dict, input_set):
    kind = d.get("kind")
    if kind == "circle":
        return bd.Circle2D(float(d.get("radius", getattr(input_set, "radius", 1.0))))
    if kind == "rect_boundary":
        if "perimeter" in d:
            return bd.RectBoundary2D(float(d["perimeter"]))
        if isinstance(input_set, RectangleSet):
            return bd.RectBoundary2D(input_set.surface_measure)
        raise ConfigError("rect_boundary covering needs a perimeter or a rectangle input set")
    if kind == "general":
        return bd.GeneralBall(float(d["d_sup"]), int(d["n"]))
    raise ConfigError(f"unknown covering kind {kind!r}")


def run_bounds_calc(cfg: ExperimentConfig) -> dict:
    """Evaluate D, Lambda, delta_M, the minimal M and the certified eps for one bound setting.

    The ``[bounds]`` table takes ``eps``, ``L``, optional ``M`` and ``delta``,
    a ``covering`` table and a ``lambda`` table whose ``kind`` is ``direct``,
    ``rect_boundary``, ``lens`` or ``beta_radial``.
    """
    b = cfg.bounds
    try:
        eps, L = float(b["eps"]), float(b["L"])
        covering_cfg, lambda_cfg = b["covering"], b["lambda"]
    except KeyError as exc:
        raise ConfigError(f"[bounds] is missing {exc}") from None
    input_set = input_set_from_dict(cfg.input_set) if cfg.input_set else None
    covering = _covering_from(covering_cfg, input_set)
    scale = eps / (2.0 * L)
    out: dict = {"eps": eps, "L": L, "scale": scale, "covering": {"kind": covering_cfg["kind"], **asdict(covering)}}

    kind = lambda_cfg.get("kind")
    p0_of_eps = None
    if kind == "direct":
        source = bd.DirectLambda(float(lambda_cfg["value"]))
    elif kind == "rect_boundary":
        if not isinstance(input_set, RectangleSet):
            raise ConfigError("rect_boundary lambda needs a rectangle input set")
        source = bd.DirectLambda(boundary_coverage_constant(input_set, scale))
    elif kind in ("lens", "beta_radial"):
        if kind == "beta_radial":
            if not isinstance(input_set, BallSet):
                raise ConfigError("beta_radial lambda needs a ball input set")
            alpha = float(lambda_cfg.get("alpha", 1.0))
            p, r = input_set.dim, input_set.r_convexity
            p0_of_eps = beta_radial_p0(input_set, alpha, L)
            p0 = p0_of_eps(eps)
            out["alpha"] = alpha
        else:
            p, r, p0 = int(lambda_cfg["p"]), float(lambda_cfg["r"]), float(lambda_cfg.get("p0", 1.0))
            p0_of_eps = lambda _eps, p0=p0: p0  # noqa: E731
        terms = cap_intersection_terms(CapIntersectionQuery(p, scale, r))
        out["cap"] = {"p": p, "rho": scale, "r": r, "p0": p0, "c1": terms.c1, "c2": terms.c2,
                      "small_cap_volume": terms.small_cap, "large_cap_volume": terms.large_cap,
                      "lens_volume": terms.volume, "clamped": terms.clamped,
                      "offset_ball_volume": ball_volume(p, r)}
        source = bd.LensLambda(p, r, p0)
    else:
        raise ConfigError(f"unknown lambda kind {kind!r}")

    spec = bd.BoundSpec(eps, L, covering, source)
    out["D"] = bd.covering_bound(covering, scale)
    out["Lambda"] = bd.coverage_lambda(spec)
    M = b.get("M")
    delta = b.get("delta")
    if M is not None:
        out["M"] = int(M)
        out["delta_M"] = bd.delta_m(spec, int(M))
    if delta is not None:
        out["delta"] = float(delta)
        out["M_min"] = bd.min_samples(spec, float(delta))
        out["delta_at_M_min"] = bd.delta_m(spec, out["M_min"])
    if M is not None and delta is not None and p0_of_eps is not None:
        out["eps_guaranteed"] = bd.eps_for_delta(p, r, p0_of_eps, covering, L, int(M), float(delta))
    return out


def bounds_json(result: dict) -> str:
    return json.dumps(result, indent=2, sort_keys=True) + "\n"
