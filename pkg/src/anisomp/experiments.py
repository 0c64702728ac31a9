"""Seeded Monte-Carlo harness verifying the CLTs against the kernel theory.

Every runner draws per-trial RNG streams keyed by (master_seed, trial_index),
so results are bit-reproducible regardless of the worker count, and every
predicted value in a report names the theory operation that produced it.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.special import kolmogorov, ndtr

from .clt_theory import TestFunction, linear_stat_covariance, resolvent_covariance
from .errors import BudgetExceeded, DegenerateVariance
from .estimators import estimate_population_eigenvalue, estimate_spike_strength, sphericity_test
from .matrix_models import sample_ensemble, y_statistic, z_statistic
from .mp_law import support_structure
from .populations import EntryDistribution, Population, PopulationModel

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "SphericityCell",
    "run_clt_check",
    "run_linear_stat_check",
    "run_coverage",
    "run_sphericity_frequencies",
    "rigidity_diagnostic",
    "normality_test",
    "reproduce",
    "REPRODUCIBLE_NAMES",
]

DEFAULT_BUDGET = 4e12  # sum over trials of n * N * trial cost proxy


@dataclass(frozen=True)
class SphericityCell:
    """One table cell: a rank-one deviation and a test-vector strategy."""

    label: str
    pair: str  # "e1,e2" | "pm" | "e1,e"
    x: float
    a: float


@dataclass(eq=False)
class ExperimentConfig:
    """Shared configuration for all runners; unused fields stay at defaults."""

    name: str
    model: PopulationModel
    distribution: EntryDistribution
    N: int
    trial_count: int
    master_seed: int
    mode: str = ""
    E: float | None = None
    eta: float | None = None
    w_points: tuple[complex, ...] = ()
    vectors: tuple[tuple[str, np.ndarray], ...] = ()
    functions: tuple[TestFunction, ...] = ()
    sigma_grid: tuple[float, ...] = ()
    cells: tuple[SphericityCell, ...] = ()
    alpha: float = 2.0
    omega: float = 0.05
    e_margin: float = 1.0
    kappa_mode: str | None = None
    workers: int = 1
    out_dir: str | None = None
    budget: float = DEFAULT_BUDGET

    @property
    def n(self) -> int:
        return self.model.n

    def summary(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "n": self.n,
            "N": self.N,
            "trial_count": self.trial_count,
            "master_seed": self.master_seed,
            "distribution": self.distribution.kind,
            "E": self.E,
            "eta": self.eta,
            "alpha": self.alpha,
            "omega": self.omega,
            "sigma_grid": list(self.sigma_grid),
            "vectors": [label for label, _ in self.vectors],
            "functions": [f.to_dict() for f in self.functions],
        }


@dataclass(eq=False)
class ExperimentReport:
    """Monte-Carlo summary: moments, predictions, normality, frequencies."""

    name: str
    master_seed: int
    trial_count: int
    config: dict
    stats: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    normality: dict = field(default_factory=dict)
    frequencies: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    raw: dict = field(default_factory=dict)

    def reconcile_counts(self) -> bool:
        for rec in self.frequencies.values():
            count = rec["frequency"] * rec["trials"]
            if abs(count - round(count)) > 1e-9:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "master_seed": self.master_seed,
            "trial_count": self.trial_count,
            "config": self.config,
            "stats": self.stats,
            "predicted": self.predicted,
            "normality": self.normality,
            "frequencies": self.frequencies,
            "wall_clock": self.wall_clock,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def write_trials_csv(self, path) -> None:
        labels = sorted(self.raw)
        rows = max((len(self.raw[k]) for k in labels), default=0)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial"] + labels)
            for i in range(rows):
                writer.writerow(
                    [i] + [self.raw[k][i] if i < len(self.raw[k]) else "" for k in labels]
                )

    def write_cells_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cell", "frequency", "trials"])
            for label, rec in sorted(self.frequencies.items()):
                writer.writerow([label, rec["frequency"], rec["trials"]])

    def write(self, out_dir) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        base = os.path.join(out_dir, f"{self.name}_{self.master_seed}")
        paths = [base + ".json", base + ".csv"]
        self.write_json(paths[0])
        self.write_trials_csv(paths[1])
        if self.frequencies:
            paths.append(base + "_cells.csv")
            self.write_cells_csv(paths[2])
        return paths


# ---------------------------------------------------------------------------
# deterministic per-trial RNG streams


def trial_seed(master_seed: int, trial_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial_index]).generate_state(1)[0])


def _map_trials(fn, n_trials: int, workers: int) -> list:
    if workers <= 1:
        return [fn(k) for k in range(n_trials)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        chunk = max(1, n_trials // (workers * 4))
        return list(ex.map(fn, range(n_trials), chunksize=chunk))


def _check_budget(cfg: ExperimentConfig, per_trial_cost: float | None = None) -> None:
    cost = per_trial_cost if per_trial_cost is not None else cfg.n * cfg.N
    if cost * cfg.trial_count > cfg.budget:
        raise BudgetExceeded(
            f"{cfg.name}: {cfg.trial_count} trials of size {cfg.n}x{cfg.N} exceed the budget"
        )


def _require_distributional(cfg: ExperimentConfig) -> None:
    if cfg.trial_count < 30:
        raise ValueError("distributional assertions require at least 30 trials")


def normality_test(samples) -> tuple[float, float]:
    """Kolmogorov-Smirnov distance against the moment-fitted normal.

    Returns (sqrt(n) * D, asymptotic p-value).  Fitting mean/variance first
    makes the p-value conservative under the null.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) < 30:
        raise ValueError("normality test requires at least 30 samples")
    mu = float(np.mean(x))
    var = float(np.var(x))
    if var <= (1e-12 * (abs(mu) + 1.0)) ** 2:
        raise DegenerateVariance("samples are (numerically) constant")
    cdf = ndtr((x - mu) / math.sqrt(var))
    k = len(x)
    grid = np.arange(1, k + 1) / k
    d = float(np.max(np.maximum(np.abs(cdf - grid), np.abs(cdf - (grid - 1.0 / k)))))
    stat = math.sqrt(k) * d
    return stat, float(kolmogorov(stat))


def _moment_summary(samples: np.ndarray) -> dict:
    x = np.asarray(samples, dtype=float)
    k = len(x)
    var = float(np.var(x, ddof=1))
    return {
        "mean": float(np.mean(x)),
        "variance": var,
        "se_mean": math.sqrt(var / k),
        "se_variance": var * math.sqrt(2.0 / max(k - 1, 1)),
        "count": k,
    }


# ---------------------------------------------------------------------------
# CLT for the resolvent process


def _clt_trial(k: int, cfg: ExperimentConfig) -> dict:
    ens = sample_ensemble(cfg.model, cfg.N, cfg.distribution, trial_seed(cfg.master_seed, k))
    out = {}
    if cfg.mode == "outside":
        for label, v in cfg.vectors:
            out[label] = complex(y_statistic(ens, v, cfg.E, 0.0, 1.0j))
    else:
        for label, v in cfg.vectors:
            for idx, w in enumerate(cfg.w_points):
                out[f"{label}|w{idx}"] = complex(
                    y_statistic(ens, v, cfg.E, cfg.eta, w)
                )
    return out


def run_clt_check(cfg: ExperimentConfig) -> ExperimentReport:
    """Verify the resolvent CLT: mean zero, kernel covariance, normality."""
    _require_distributional(cfg)
    _check_budget(cfg)
    t0 = time.time()
    rows = _map_trials(partial(_clt_trial, cfg=cfg), cfg.trial_count, cfg.workers)
    report = ExperimentReport(
        name=cfg.name,
        master_seed=cfg.master_seed,
        trial_count=cfg.trial_count,
        config=cfg.summary(),
    )
    pop = Population(cfg.model, cfg.N)
    labels = sorted(rows[0])
    samples = {lab: np.array([r[lab] for r in rows]) for lab in labels}

    if cfg.mode == "outside":
        for (label, v) in cfg.vectors:
            x = samples[label].real
            report.raw[label] = x.tolist()
            report.stats[label] = _moment_summary(x)
            pred = resolvent_covariance(
                "outside", pop, v, v, kappa=cfg.distribution.kappa4, E=cfg.E
            )
            report.predicted[label] = {
                "value": float(np.real(pred)),
                "source": "anisomp.clt_theory.resolvent_covariance[outside]",
            }
            stat, p = normality_test(x)
            report.normality[label] = {"statistic": stat, "p_value": p}
        # cross covariance for the first pair of directions
        if len(cfg.vectors) >= 2:
            (la, va), (lb, vb) = cfg.vectors[0], cfg.vectors[1]
            xa, xb = samples[la].real, samples[lb].real
            emp = float(np.mean(xa * xb) - np.mean(xa) * np.mean(xb))
            pred = resolvent_covariance(
                "outside", pop, va, vb, kappa=cfg.distribution.kappa4, E=cfg.E
            )
            report.stats[f"cov[{la},{lb}]"] = {"value": emp}
            report.predicted[f"cov[{la},{lb}]"] = {
                "value": float(np.real(pred)),
                "source": "anisomp.clt_theory.resolvent_covariance[outside]",
            }
    else:
        for (label, v) in cfg.vectors:
            for i, wi in enumerate(cfg.w_points):
                for j, wj in enumerate(cfg.w_points):
                    if j < i:
                        continue
                    yi = samples[f"{label}|w{i}"]
                    yj = samples[f"{label}|w{j}"]
                    emp = complex(np.mean(yi * yj) - np.mean(yi) * np.mean(yj))
                    key = f"cov[{label},w{i},w{j}]"
                    se = float(np.std(np.real(yi * yj)) + np.std(np.imag(yi * yj)))
                    report.stats[key] = {
                        "value_re": emp.real,
                        "value_im": emp.imag,
                        "se": se / math.sqrt(cfg.trial_count),
                    }
                    pred = resolvent_covariance(
                        "local", pop, v, v, E=cfg.E, w1=wi, w2=wj
                    )
                    report.predicted[key] = {
                        "value_re": float(np.real(pred)),
                        "value_im": float(np.imag(pred)),
                        "source": "anisomp.clt_theory.resolvent_covariance[local]",
                    }
        for lab in labels:
            report.raw[lab + ".re"] = samples[lab].real.tolist()
            report.raw[lab + ".im"] = samples[lab].imag.tolist()
            report.stats[lab] = {
                "mean_re": float(np.mean(samples[lab].real)),
                "mean_im": float(np.mean(samples[lab].imag)),
                "variance_re": float(np.var(samples[lab].real, ddof=1)),
                "variance_im": float(np.var(samples[lab].imag, ddof=1)),
            }
    report.wall_clock = time.time() - t0
    return report


# ---------------------------------------------------------------------------
# CLT for linear eigenvector statistics


def _linear_trial(k: int, cfg: ExperimentConfig, eta: float, E: float) -> dict:
    ens = sample_ensemble(cfg.model, cfg.N, cfg.distribution, trial_seed(cfg.master_seed, k))
    out = {}
    for vl, v in cfg.vectors:
        for fi, f in enumerate(cfg.functions):
            out[f"{vl}|f{fi}"] = z_statistic(ens, v, f, E, eta)
    return out


def run_linear_stat_check(cfg: ExperimentConfig) -> ExperimentReport:
    """Verify the linear-statistic CLT against the covariance formulas."""
    _require_distributional(cfg)
    _check_budget(cfg)
    t0 = time.time()
    if cfg.mode == "global":
        eta, E = 1.0, 0.0
    else:
        eta = cfg.eta if cfg.eta is not None else cfg.N ** (-0.5)
        E = cfg.E
    rows = _map_trials(
        partial(_linear_trial, cfg=cfg, eta=eta, E=E), cfg.trial_count, cfg.workers
    )
    report = ExperimentReport(
        name=cfg.name,
        master_seed=cfg.master_seed,
        trial_count=cfg.trial_count,
        config=cfg.summary(),
    )
    pop = Population(cfg.model, cfg.N)
    for vl, v in cfg.vectors:
        for fi, f in enumerate(cfg.functions):
            lab = f"{vl}|f{fi}"
            x = np.array([r[lab] for r in rows])
            report.raw[lab] = x.tolist()
            report.stats[lab] = _moment_summary(x)
            pred = linear_stat_covariance(
                cfg.mode, f, f, v, v, E, eta, pop, cfg.distribution.kappa4
            )
            report.predicted[lab] = {
                "value": pred.value,
                "error_estimate": pred.error_estimate,
                "source": f"anisomp.clt_theory.linear_stat_covariance[{cfg.mode}]",
            }
            stat, p = normality_test(x)
            report.normality[lab] = {"statistic": stat, "p_value": p}
    report.wall_clock = time.time() - t0
    return report


# ---------------------------------------------------------------------------
# coverage of the spike/population estimators


def _coverage_trial(
    k: int, cfg: ExperimentConfig, sigma: float, method: str, kappa_mode: str
) -> dict:
    n = cfg.n
    if method == "population":
        base = np.concatenate([[sigma], np.ones(n // 2 - 1), 2.0 * np.ones(n - n // 2)])
        model = PopulationModel.from_diagonal(base)
    else:
        model = PopulationModel.spiked(n, (sigma - 1.0,))
    ens = sample_ensemble(model, cfg.N, cfg.distribution, trial_seed(cfg.master_seed, k))
    e1 = np.zeros(n)
    e1[0] = 1.0
    if method == "population":
        est = estimate_population_eigenvalue(
            ens, e1, cfg.E, alpha=cfg.alpha, kappa_mode=kappa_mode, min_gap=0.5
        )
    else:
        est = estimate_spike_strength(
            ens, e1, cfg.E, alpha=cfg.alpha, kappa_mode=kappa_mode
        )
    return {"point": est.point, "halfwidth": est.halfwidth, "covered": est.covers(sigma)}


def run_coverage(cfg: ExperimentConfig) -> ExperimentReport:
    """Sweep the spiked strength over a grid; report coverage and bias.

    ``cfg.mode`` selects the estimator: "spike" (closed-form null transform)
    or "population" (plug-in transform, two-level diagonal background).
    """
    _require_distributional(cfg)
    _check_budget(cfg)
    t0 = time.time()
    method = cfg.mode or "spike"
    kappa_mode = cfg.kappa_mode or (
        "gaussian" if cfg.distribution.kind == "gaussian" else "pooled"
    )
    report = ExperimentReport(
        name=cfg.name,
        master_seed=cfg.master_seed,
        trial_count=cfg.trial_count,
        config=cfg.summary(),
    )
    for sigma in cfg.sigma_grid:
        rows = _map_trials(
            partial(
                _coverage_trial, cfg=cfg, sigma=sigma, method=method, kappa_mode=kappa_mode
            ),
            cfg.trial_count,
            cfg.workers,
        )
        points = np.array([r["point"] for r in rows])
        halfwidths = np.array([r["halfwidth"] for r in rows])
        covered = np.array([r["covered"] for r in rows], dtype=bool)
        key = f"sigma={sigma:g}"
        report.raw[f"point[{key}]"] = points.tolist()
        report.raw[f"covered[{key}]"] = covered.astype(int).tolist()
        report.stats[key] = {
            **_moment_summary(points),
            "mean_halfwidth": float(np.mean(halfwidths)),
            "target": sigma,
        }
        report.frequencies[f"coverage[{key}]"] = {
            "count": int(np.sum(covered)),
            "trials": len(covered),
            "frequency": float(np.mean(covered)),
        }
        report.predicted[key] = {
            "value": sigma,
            "source": f"anisomp.estimators.estimate_{'spike_strength' if method == 'spike' else 'population_eigenvalue'}",
        }
    report.wall_clock = time.time() - t0
    return report


# ---------------------------------------------------------------------------
# sphericity tables


def _pair_vectors(pair: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    e1 = np.zeros(n)
    e1[0] = 1.0
    e2 = np.zeros(n)
    e2[1] = 1.0
    if pair == "e1,e2":
        return e1, e2
    if pair == "pm":
        return (e1 + e2) / math.sqrt(2.0), (e1 - e2) / math.sqrt(2.0)
    if pair == "e1,e":
        return e1, np.full(n, 1.0 / math.sqrt(n))
    raise ValueError(f"unknown test-vector pair {pair!r}")


def spike_direction(n: int, x: float) -> np.ndarray:
    """Unit vector (x, r, ..., r) with r = sqrt((1 - x^2)/(n - 1))."""
    r = math.sqrt((1.0 - x**2) / (n - 1))
    v = np.full(n, r)
    v[0] = x
    return v


def _sphericity_trial(k: int, cfg: ExperimentConfig, cell: SphericityCell) -> dict:
    n = cfg.n
    if cell.a == 0.0:
        model = PopulationModel.identity(n)
    else:
        model = PopulationModel.spiked(n, (cell.a,), spike_direction(n, cell.x)[:, None])
    rng = np.random.default_rng(trial_seed(cfg.master_seed, k))
    X = cfg.distribution.sample(rng, (n, cfg.N)) / math.sqrt(cfg.N)
    raw = model.sqrt_apply(X)
    u, v = _pair_vectors(cell.pair, n)
    verdict = sphericity_test(raw, u, v, E_margin=cfg.e_margin, omega=cfg.omega)
    miss = (not verdict.reject) if cell.a != 0.0 else verdict.reject
    return {"reject": verdict.reject, "miss": miss}


def run_sphericity_frequencies(cfg: ExperimentConfig) -> ExperimentReport:
    """Misestimation frequency per (deviation, test-vector strategy) cell."""
    _require_distributional(cfg)
    _check_budget(cfg)
    t0 = time.time()
    report = ExperimentReport(
        name=cfg.name,
        master_seed=cfg.master_seed,
        trial_count=cfg.trial_count,
        config=cfg.summary(),
    )
    for cell in cfg.cells:
        rows = _map_trials(
            partial(_sphericity_trial, cfg=cfg, cell=cell), cfg.trial_count, cfg.workers
        )
        miss = np.array([r["miss"] for r in rows], dtype=bool)
        rej = np.array([r["reject"] for r in rows], dtype=bool)
        report.raw[f"miss[{cell.label}]"] = miss.astype(int).tolist()
        report.frequencies[cell.label] = {
            "count": int(np.sum(miss)),
            "trials": len(miss),
            "frequency": float(np.mean(miss)),
        }
        report.frequencies[cell.label + "|reject"] = {
            "count": int(np.sum(rej)),
            "trials": len(rej),
            "frequency": float(np.mean(rej)),
        }
        report.predicted[cell.label] = {
            "value": 0.0 if cell.pair != "pm" else math.nan,
            "source": "anisomp.estimators.sphericity_test",
        }
    report.wall_clock = time.time() - t0
    return report


# ---------------------------------------------------------------------------
# rigidity diagnostics


def _rigidity_trial(k: int, cfg: ExperimentConfig, N: int, d: float) -> dict:
    n = int(round(d * N))
    model = PopulationModel.identity(n)
    ens = sample_ensemble(model, N, cfg.distribution, trial_seed(cfg.master_seed, 1000 * N + k))
    pop = Population(model, N)
    struct = support_structure(pop.spectrum, N)
    gammas = np.asarray(struct.classical_locations)
    K = min(len(gammas), n)
    lam = ens.eigenvalues[:K]
    dev = np.abs(lam - gammas[:K])
    lo, hi = K // 4, 3 * K // 4
    return {
        "median_bulk": float(np.median(dev[lo:hi])),
        "edge_dev": float(dev[0]),
    }


def rigidity_diagnostic(
    cfg: ExperimentConfig, sizes: tuple[int, ...] = (250, 500, 1000), d: float = 0.5
) -> ExperimentReport:
    """Median |lambda_j - gamma_j| over the middle bulk at increasing N."""
    t0 = time.time()
    report = ExperimentReport(
        name=cfg.name,
        master_seed=cfg.master_seed,
        trial_count=cfg.trial_count,
        config=cfg.summary(),
    )
    for N in sizes:
        rows = _map_trials(
            partial(_rigidity_trial, cfg=cfg, N=N, d=d), cfg.trial_count, cfg.workers
        )
        med = float(np.median([r["median_bulk"] for r in rows]))
        edge = float(np.median([r["edge_dev"] for r in rows]))
        report.stats[f"N={N}"] = {"median_bulk": med, "edge_dev": edge}
        report.predicted[f"N={N}"] = {
            "value": med,
            "source": "anisomp.mp_law.support_structure",
        }
    report.wall_clock = time.time() - t0
    return report


# ---------------------------------------------------------------------------
# reproduction presets


@dataclass(frozen=True)
class BandResult:
    description: str
    passed: bool
    observed: float
    bound: str


REPRODUCIBLE_NAMES = ("table1", "table2", "figure1", "figure2")


def reproduce(
    name: str,
    seed: int = 1,
    full: bool = False,
    trials: int | None = None,
    out_dir: str | None = None,
    workers: int = 1,
) -> tuple[list[ExperimentReport], list[BandResult]]:
    """Run one reproduction preset and evaluate its acceptance bands."""
    if name not in REPRODUCIBLE_NAMES:
        raise ValueError(f"unknown reproduction {name!r}; choose from {REPRODUCIBLE_NAMES}")
    if name == "table1":
        reports, bands = _reproduce_table1(seed, full, trials, workers)
    elif name == "table2":
        reports, bands = _reproduce_table2(seed, full, trials, workers)
    elif name == "figure1":
        reports, bands = _reproduce_figure1(seed, full, trials, workers)
    else:
        reports, bands = _reproduce_figure2(seed, full, trials, workers)
    if out_dir:
        for rep in reports:
            rep.write(out_dir)
    return reports, bands


def _table_cells_1(n: int, a: float, xs: tuple[float, ...]) -> tuple[SphericityCell, ...]:
    cells = []
    for pair in ("e1,e2", "pm", "e1,e"):
        for x in xs:
            cells.append(SphericityCell(label=f"{pair}|x={x:g}", pair=pair, x=x, a=a))
    return tuple(cells)


def _reproduce_table1(seed, full, trials, workers):
    n, N = 500, 1000
    t = trials or (1000 if full else 200)
    xs = (1.0 / math.sqrt(n), 0.2, 0.5)
    cfg = ExperimentConfig(
        name="table1",
        model=PopulationModel.identity(n),
        distribution=EntryDistribution.gaussian(),
        N=N,
        trial_count=t,
        master_seed=seed,
        cells=_table_cells_1(n, 1.0, xs),
        omega=0.05,
        e_margin=1.0,
        workers=workers,
    )
    rep = run_sphericity_frequencies(cfg)
    f = {k: v["frequency"] for k, v in rep.frequencies.items()}
    bands = [
        BandResult(f"(e1,e) x={x:g} miss <= 0.05", f[f"e1,e|x={x:g}"] <= 0.05, f[f"e1,e|x={x:g}"], "<= 0.05")
        for x in xs
    ]
    key = f"e1,e2|x={xs[0]:g}"
    bands.append(BandResult("(e1,e2) x=n^-1/2 miss >= 0.85", f[key] >= 0.85, f[key], ">= 0.85"))
    key = "e1,e2|x=0.5"
    bands.append(BandResult("(e1,e2) x=0.5 miss <= 0.05", f[key] <= 0.05, f[key], "<= 0.05"))
    return [rep], bands


def _reproduce_table2(seed, full, trials, workers):
    n, N = 500, 1000
    t = trials or (1000 if full else 200)
    a_grid = (0.1, 0.25, 1.0)
    cells = []
    for pair in ("e1,e2", "e1,e"):
        for a in a_grid:
            cells.append(SphericityCell(label=f"{pair}|a={a:g}", pair=pair, x=0.2, a=a))
    cfg = ExperimentConfig(
        name="table2",
        model=PopulationModel.identity(n),
        distribution=EntryDistribution.gaussian(),
        N=N,
        trial_count=t,
        master_seed=seed,
        cells=tuple(cells),
        omega=0.05,
        e_margin=1.0,
        workers=workers,
    )
    rep = run_sphericity_frequencies(cfg)
    f = {k: v["frequency"] for k, v in rep.frequencies.items()}
    seq = [f[f"e1,e|a={a:g}"] for a in a_grid]
    bands = [
        BandResult("(e1,e) a=0.25 miss <= 0.10", f["e1,e|a=0.25"] <= 0.10, f["e1,e|a=0.25"], "<= 0.10"),
        BandResult(
            "(e1,e) miss nonincreasing in a within 0.1",
            all(seq[i + 1] <= seq[i] + 0.1 for i in range(len(seq) - 1)),
            max(seq[i + 1] - seq[i] for i in range(len(seq) - 1)),
            "<= 0.1",
        ),
    ]
    return [rep], bands


def _reproduce_figure1(seed, full, trials, workers):
    n = 2000 if full else 500
    N = 2 * n
    t = trials or 500
    reports, bands = [], []
    floor = 0.93 if full else 0.90
    for dist in (EntryDistribution.gaussian(), EntryDistribution.rademacher()):
        cfg = ExperimentConfig(
            name=f"figure1_{dist.kind}",
            model=PopulationModel.identity(n),  # rebuilt per sigma inside the runner
            distribution=dist,
            N=N,
            trial_count=t,
            master_seed=seed,
            mode="spike",
            E=4.0,
            sigma_grid=(1.1, 1.3, 1.5),
            alpha=2.0,
            workers=workers,
        )
        rep = run_coverage(cfg)
        reports.append(rep)
        for sigma in cfg.sigma_grid:
            freq = rep.frequencies[f"coverage[sigma={sigma:g}]"]["frequency"]
            bands.append(
                BandResult(
                    f"{dist.kind} coverage sigma={sigma:g} >= {floor}",
                    freq >= floor,
                    freq,
                    f">= {floor}",
                )
            )
            st = rep.stats[f"sigma={sigma:g}"]
            bias_ok = abs(st["mean"] - sigma) <= 2.0 * st["mean_halfwidth"]
            bands.append(
                BandResult(
                    f"{dist.kind} bias sigma={sigma:g} <= 2 halfwidths",
                    bias_ok,
                    abs(st["mean"] - sigma),
                    f"<= {2.0 * st['mean_halfwidth']:.4f}",
                )
            )
    return reports, bands


def _reproduce_figure2(seed, full, trials, workers):
    n = 2000 if full else 500
    N = 2 * n
    t = trials or 200
    cfg = ExperimentConfig(
        name="figure2",
        model=PopulationModel.identity(n),  # rebuilt per sigma inside the runner
        distribution=EntryDistribution.gaussian(),
        N=N,
        trial_count=t,
        master_seed=seed,
        mode="population",
        E=6.0,
        sigma_grid=(0.5, 1.0, 1.5),
        alpha=2.0,
        workers=workers,
    )
    rep = run_coverage(cfg)
    bands = []
    for sigma in cfg.sigma_grid:
        st = rep.stats[f"sigma={sigma:g}"]
        bias_ok = abs(st["mean"] - sigma) <= 2.0 * st["mean_halfwidth"]
        bands.append(
            BandResult(
                f"population-estimator bias sigma={sigma:g} <= 2 halfwidths",
                bias_ok,
                abs(st["mean"] - sigma),
                f"<= {2.0 * st['mean_halfwidth']:.4f}",
            )
        )
    return [rep], bands
