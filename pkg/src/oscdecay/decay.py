"""lambda-sweeps, log-log exponent fits, comparison with the predicted
exponents, and the van der Corput kernel-bound check."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .norms import WITNESS_SPEC, NormEstimate, ascent_norm, witness_grid, witness_ratio
from .operator import kernel_K_batch
from .phase import DEFAULT_CUTOFF, CutoffSpec, PhaseParams, ipow
from .quad import DEFAULT_SPEC, QuadratureSpec

ESTIMATORS = ("witness", "ascent")


class SweepFailure(RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


def geometric_schedule(lo: float, hi: float, n: int) -> list[float]:
    """n points from lo to hi with a constant ratio; integer ratios are kept exact."""
    if n < 2:
        raise ValueError("need at least 2 points")
    ratio = (hi / lo) ** (1.0 / (n - 1))
    if abs(ratio - round(ratio)) < 1e-12:
        ratio = float(round(ratio))
    pts = [lo * ratio ** i for i in range(n)]
    pts[-1] = float(hi)
    return pts


@dataclass(frozen=True)
class DecaySweepConfig:
    params: PhaseParams
    p: float | None = None
    lambda_min: float = 2.0 ** 6
    lambda_max: float = 2.0 ** 14
    num_lambdas: int = 9
    estimator: str = "witness"
    spec: QuadratureSpec = WITNESS_SPEC
    cells: int = 4
    ascent_iters: int = 50
    ascent_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lambda_min < 1:
            raise ValueError("lambda_min must be >= 1")
        if not self.lambda_max > self.lambda_min:
            raise ValueError("lambda_max must exceed lambda_min")
        if self.num_lambdas < 4:
            raise ValueError("num_lambdas must be >= 4")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.cells < 2:
            raise ValueError("cells must be >= 2")
        if self.p is not None and self.p < 1:
            raise ValueError("p must be >= 1")

    @property
    def exponent_p(self) -> float:
        return self.params.p if self.p is None else self.p

    def lambdas(self) -> list[float]:
        return geometric_schedule(self.lambda_min, self.lambda_max, self.num_lambdas)


@dataclass
class SweepRow:
    lam: float
    estimate: NormEstimate | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.estimate is not None and self.estimate.converged


@dataclass
class SweepResult:
    config: DecaySweepConfig
    rows: list

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.rows)

    def table(self, only_ok: bool = True):
        return [(r.lam, r.estimate.value) for r in self.rows
                if r.estimate is not None and (r.ok or not only_ok)]


def estimate_norm(config: DecaySweepConfig, lam: float) -> NormEstimate:
    """One point of a sweep with the configured estimator."""
    P = config.params
    p = config.exponent_p
    grid = witness_grid(P, lam, cells=config.cells, shell_cells=2 * config.cells)
    if config.estimator == "witness":
        return witness_ratio(P, lam, p, grid=grid, spec=config.spec)
    return ascent_norm(P, lam, int(p), grid, max_iter=config.ascent_iters, tol=config.ascent_tol,
                       seed=config.seed, f0="chi")


def _safe_point(args):
    estimator, config, lam = args
    try:
        return SweepRow(lam, estimator(config, lam))
    except Exception as exc:  # recorded per point; the sweep decides what is fatal
        return SweepRow(lam, None, f"{type(exc).__name__}: {exc}")


def run_sweep(config: DecaySweepConfig, jobs: int = 1, estimator=None) -> SweepResult:
    """Evaluate the estimator at every lambda of the schedule.

    ``estimator(config, lam) -> NormEstimate`` overrides the configured one
    (test hook).  Raises SweepFailure if more than a third of the points fail.
    """
    est = estimate_norm if estimator is None else estimator
    tasks = [(est, config, lam) for lam in config.lambdas()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_safe_point, tasks))
    else:
        rows = [_safe_point(t) for t in tasks]
    res = SweepResult(config, rows)
    if 3 * res.n_failed > len(rows):
        raise SweepFailure(f"{res.n_failed} of {len(rows)} sweep points failed", res)
    return res


@dataclass
class DecayFitResult:
    slope: float
    intercept: float
    r_squared: float
    table: list = field(default_factory=list)


def fit_exponent(table) -> DecayFitResult:
    """Least squares of ln N against ln lambda.

    ``table`` holds (lambda, value) pairs; values may be NormEstimates.
    """
    lam = np.array([r[0] for r in table], dtype=float)
    val = np.array([r[1].value if isinstance(r[1], NormEstimate) else r[1] for r in table], dtype=float)
    if lam.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(val <= 0) or np.any(lam <= 0):
        raise ValueError("log-log fit needs positive lambdas and values")
    xl, yl = np.log(lam), np.log(val)
    xm, ym = xl.mean(), yl.mean()
    sxx = np.sum((xl - xm) ** 2)
    if sxx == 0:
        raise ValueError("lambdas must not all coincide")
    slope = float(np.sum((xl - xm) * (yl - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((yl - (slope * xl + intercept)) ** 2))
    ss_tot = float(np.sum((yl - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFitResult(slope, intercept, r2, list(zip(lam.tolist(), val.tolist())))


@dataclass
class TheoryReport:
    params: tuple
    p: float
    delta_pred: float
    delta_low: float
    empirical_delta: float
    slope: float
    r_squared: float
    sharp: bool
    tol_slope: float
    sharp_equality: bool | None
    upper_consistent: bool
    lower_consistent: bool
    passed: bool

    def to_dict(self):
        return asdict(self)


def compare_with_theory(fit: DecayFitResult, params: PhaseParams, tol_slope: float | None = None,
                        p: float | None = None) -> TheoryReport:
    """Set the fitted decay rate -slope against delta_pred and delta_low.

    Sharp case (l <= n): pass iff |-slope - delta_pred| <= tol.
    Otherwise only the one-sided checks are made: a lower estimate cannot
    decay slower than the bound allows (-slope >= delta_pred - tol), and the
    witness certifies -slope <= delta_low + tol.
    """
    delta = params.delta_pred
    pp = params.p if p is None else p
    low = params.delta_low(pp)
    tol = 0.02 * (1.0 + delta) if tol_slope is None else tol_slope
    emp = -fit.slope
    upper = emp >= delta - tol
    lower = emp <= low + tol
    if params.sharp and pp == params.p:
        eq = abs(emp - delta) <= tol
        passed = eq
    else:
        eq = None
        passed = upper and lower
    return TheoryReport(params.as_tuple(), pp, delta, low, emp, fit.slope, fit.r_squared, params.sharp,
                        tol, eq, bool(upper), bool(lower), bool(passed))


# --- van der Corput ------------------------------------------------------------

def sample_support_tuples(M: int, seed: int = 0, radius: float = 1.0):
    """M tuples (u, v, x, y) with (u, v) and (x, y) uniform in the disk of ``radius``."""
    rng = np.random.default_rng(seed)

    def disk():
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, M))
        th = rng.uniform(0.0, 2.0 * math.pi, M)
        return r * np.cos(th), r * np.sin(th)

    x, y = disk()
    u, v = disk()
    return u, v, x, y


def vdc_statistic(params: PhaseParams, lam: float, u, v, x, y, spec: QuadratureSpec = DEFAULT_SPEC,
                  cutoff: CutoffSpec = DEFAULT_CUTOFF):
    """R = |K| (1 + lam |x^m - u^m|)^{1/k} per tuple, plus the convergence mask."""
    res = kernel_K_batch(params, lam, u, v, x, y, spec, cutoff)
    dx = np.abs(ipow(np.asarray(x, dtype=float), params.m) - ipow(np.asarray(u, dtype=float), params.m))
    R = np.abs(res.values) * (1.0 + lam * dx) ** (1.0 / params.k)
    return R, res.converged


@dataclass
class VdcReport:
    params: tuple
    lambdas: list
    max_R: list
    quantiles: dict
    n_failed: list
    growth: float
    factor: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def vdc_check(params: PhaseParams, lambdas, M: int = 200, spec: QuadratureSpec = DEFAULT_SPEC,
              seed: int = 0, factor: float = 2.0, cutoff: CutoffSpec = DEFAULT_CUTOFF, tuples=None) -> VdcReport:
    """Trend check of |K| (1 + lam |x^m - u^m|)^{1/k} over a lambda list.

    The same M tuples are used for every lambda.  Passes when
    max_R(largest lambda) <= factor * max_R(smallest lambda).
    """
    lams = sorted(float(l) for l in lambdas)
    u, v, x, y = sample_support_tuples(M, seed) if tuples is None else tuples
    max_R, n_failed = [], []
    quantiles = {"q50": [], "q90": [], "q99": []}
    for lam in lams:
        R, ok = vdc_statistic(params, lam, u, v, x, y, spec, cutoff)
        good = R[ok]
        n_failed.append(int(np.count_nonzero(~ok)))
        max_R.append(float(good.max()) if good.size else float("nan"))
        for q, key in ((0.5, "q50"), (0.9, "q90"), (0.99, "q99")):
            quantiles[key].append(float(np.quantile(good, q)) if good.size else float("nan"))
    growth = max_R[-1] / max_R[0]
    return VdcReport(params.as_tuple(), lams, max_R, quantiles, n_failed, growth, factor,
                     bool(growth <= factor))


# --- output ------------------------------------------------------------------

def write_sweep_csv(result: SweepResult, path) -> None:
    """Columns: lambda, estimate, kind, converged."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "estimate", "kind", "converged"])
        for r in result.rows:
            if r.estimate is None:
                w.writerow([repr(r.lam), "nan", "failed", "false"])
            else:
                w.writerow([repr(r.lam), repr(r.estimate.value), r.estimate.kind,
                            "true" if r.estimate.converged else "false"])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        return [(float(r["lambda"]), float(r["estimate"]), r["kind"], r["converged"] == "true")
                for r in csv.DictReader(fh)]


def sweep_report(result: SweepResult, tol_slope: float | None = None) -> dict:
    """JSON-ready summary: delta_pred, delta_low, slope, r2 and pass flags."""
    cfg = result.config
    table = result.table()
    fit = fit_exponent(table)
    th = compare_with_theory(fit, cfg.params, tol_slope, cfg.p)
    return {
        "delta_pred": th.delta_pred,
        "delta_low": th.delta_low,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r2": fit.r_squared,
        "empirical_delta": th.empirical_delta,
        "sharp": th.sharp,
        "tol_slope": th.tol_slope,
        "pass": {
            "sharp_equality": th.sharp_equality,
            "upper_consistent": th.upper_consistent,
            "lower_consistent": th.lower_consistent,
            "overall": th.passed,
        },
        "n_failed": result.n_failed,
        "failures": [{"lambda": r.lam, "error": r.error} for r in result.rows if r.error],
    }


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
