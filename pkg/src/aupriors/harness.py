"""Experiment harness: replication loops, frequentist metrics, CSV output.

Replications are independent tasks over rep-index batches; every
replication owns a counter-based stream keyed by (base seed, flavor, area
count, rep index), so any single replication is reproducible in isolation
and results are identical for any worker count.  Metric accumulation is a
reduction in rep order, never completion order.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateSample, RunAborted
from .gibbs import FLAVORS, GibbsConfig, balanced_stats, run_chain_batch
from .models import get_model
from .models.ner import NerModel, generate_ner

_log = logging.getLogger(__name__)

SCENARIOS = {"i": (1.0, 1.0, 1.0, 1.0), "ii": (1.0, 1.0, 0.5, 4.0)}
FIGURE_M_GRID = (10, 32, 100, 316, 1000)
FIGURE_IDS = ("bias", "bias-beta", "mse", "coverage")
INTERVAL_KIND = "equal-tailed"  # credible-interval convention, recorded here

_FLAVOR_CODE = {"au": 1, "jeffreys": 2, "dg": 3}
_REP_BATCH = 125          # lock-step chains per task; fixed so results do
                          # not depend on the worker count
_FAILURE_FRACTION = 1e-3  # abort threshold for per-replication failures


def _rep_batch(flavor: str, m: int) -> int:
    # latent-effect chains at large area counts pre-draw (chunk x m) blocks
    # per lane; smaller batches keep that under control.  Batch size never
    # affects values: lanes are independent.
    if flavor == "dg" and m > 256:
        return 50
    return _REP_BATCH


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "ner-balanced"
    flavors: tuple[str, ...] = ("au",)
    scenario: str = "i"                  # "i", "ii", or "custom"
    theta_true: Optional[tuple[float, ...]] = None   # required for "custom"
    m_list: tuple[int, ...] = (10,)
    n: int = 5
    reps: int = 2000
    chain: int = 2000
    warmup: int = 100
    dg_chain: int = 20000
    dg_warmup: int = 1000
    seed: int = 42
    workers: Optional[int] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("need at least one replication")
        if any(m < 1 for m in self.m_list):
            raise ValueError("area counts must be positive")
        unknown = [f for f in self.flavors if f not in FLAVORS]
        if unknown:
            raise ValueError(f"unknown prior flavors {unknown}")
        if self.scenario not in SCENARIOS and self.theta_true is None:
            raise ValueError(
                f"scenario must be one of {tuple(SCENARIOS)} or supply theta_true"
            )

    def true_theta(self) -> np.ndarray:
        if self.theta_true is not None:
            return np.asarray(self.theta_true, dtype=float)
        return np.asarray(SCENARIOS[self.scenario], dtype=float)

    def scenario_label(self) -> str:
        return self.scenario if self.theta_true is None else "custom"


@dataclass(frozen=True)
class MetricsRecord:
    model: str
    prior: str
    scenario: str
    m: int
    n: int
    parameter: str
    abs_bias: float
    mse: float
    coverage95: float
    reps: int
    seed: int


def replication_stream(base_seed: int, flavor: str, m: int,
                       rep: int) -> np.random.Generator:
    """Counter-based stream for one replication, reproducible in isolation."""
    seq = np.random.SeedSequence((base_seed, _FLAVOR_CODE[flavor], m, rep))
    return np.random.Generator(np.random.Philox(seq))


def _ner_batch(cfg: ExperimentConfig, flavor: str, m: int,
               rep_lo: int, rep_hi: int):
    """Run replications [rep_lo, rep_hi) of one (flavor, m) cell in lock step."""
    theta = cfg.true_theta()
    model = NerModel.balanced_design(m, cfg.n, p=theta.size - 2, seed=0)
    gens, stats = [], []
    for rep in range(rep_lo, rep_hi):
        rng = replication_stream(cfg.seed, flavor, m, rep)
        data = generate_ner(model, theta, rng)
        gens.append(rng)
        stats.append(balanced_stats(data))
    if flavor == "dg":
        gibbs_cfg = GibbsConfig(n_draws=cfg.dg_chain, warmup=cfg.dg_warmup,
                                flavor=flavor)
    else:
        gibbs_cfg = GibbsConfig(n_draws=cfg.chain, warmup=cfg.warmup,
                                flavor=flavor)
    draws, failed, fail_msg = run_chain_batch(stats, gens, gibbs_cfg)
    estimates = draws.mean(axis=1)
    lower, upper = np.quantile(draws, [0.025, 0.975], axis=1, method="linear")
    covers = (lower <= theta) & (theta <= upper)
    failures = [(rep_lo + b, fail_msg[b]) for b in np.nonzero(failed)[0]]
    return rep_lo, estimates, covers.astype(float), failures


def _closed_form_batch(cfg: ExperimentConfig, flavor: str, m: int,
                       rep_lo: int, rep_hi: int):
    """Exact-posterior replications for the closed-form catalog models.

    ``m`` doubles as the cell key in the stream id; the sample size is
    cfg.n throughout.
    """
    theta = cfg.true_theta()
    model = get_model(cfg.model, n=cfg.n)
    d = theta.size
    estimates = np.empty((rep_hi - rep_lo, d))
    covers = np.empty((rep_hi - rep_lo, d))
    failures = []
    for k, rep in enumerate(range(rep_lo, rep_hi)):
        rng = replication_stream(cfg.seed, flavor, m, rep)
        if cfg.model.startswith("linreg"):
            data = model.generate(theta, rng)
        else:
            data = model.generate(theta, cfg.n, rng)
        try:
            estimates[k] = model.posterior_mean(data)
            interval = model.credible_interval(data)
            covers[k] = (interval[:, 0] <= theta) & (theta <= interval[:, 1])
        except DegenerateSample as exc:
            estimates[k] = np.nan
            covers[k] = np.nan
            failures.append((rep, str(exc)))
    return rep_lo, estimates, covers, failures


def _run_cell_batch(args):
    cfg_dict, flavor, m, rep_lo, rep_hi = args
    cfg = ExperimentConfig(**cfg_dict)
    if cfg.model == "ner-balanced":
        return _ner_batch(cfg, flavor, m, rep_lo, rep_hi)
    return _closed_form_batch(cfg, flavor, m, rep_lo, rep_hi)


def _parameter_names(cfg: ExperimentConfig) -> tuple[str, ...]:
    theta = cfg.true_theta()
    if cfg.model == "ner-balanced":
        p = theta.size - 2
        return tuple(f"beta{j + 1}" for j in range(p)) + ("tau2", "sigma2")
    return tuple(get_model(cfg.model, n=cfg.n).param_names)


def _validate(cfg: ExperimentConfig):
    if cfg.model == "ner":
        raise ValueError(
            "the unbalanced grouped model has no sampler; simulate ner-balanced"
        )
    if cfg.model != "ner-balanced":
        extra = [f for f in cfg.flavors if f != "au"]
        if extra:
            raise ValueError(
                f"model '{cfg.model}' only supports its own catalog prior "
                f"(flavor 'au'), got {extra}"
            )
        names = _parameter_names(cfg)
        if cfg.theta_true is None or len(cfg.theta_true) != len(names):
            raise ValueError(
                f"model '{cfg.model}' needs an explicit theta_true of length "
                f"{len(names)}"
            )


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """All (flavor, m) cells of one experiment; deterministic given the seed.

    Per-replication failures are excluded when they stay under 0.1% of the
    replication count; otherwise the run aborts.
    """
    _validate(cfg)
    theta = cfg.true_theta()
    names = _parameter_names(cfg)
    workers = cfg.workers or max(1, min(os.cpu_count() or 1, 8))
    tasks = []
    cfg_dict = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    for flavor in cfg.flavors:
        for m in cfg.m_list:
            step = _rep_batch(flavor, m)
            for lo in range(0, cfg.reps, step):
                tasks.append((cfg_dict, flavor, m, lo, min(lo + step, cfg.reps)))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_cell_batch, tasks))
    else:
        outputs = [_run_cell_batch(t) for t in tasks]

    records = []
    cursor = 0
    for flavor in cfg.flavors:
        for m in cfg.m_list:
            chunks = []
            while cursor < len(tasks) and tasks[cursor][1] == flavor \
                    and tasks[cursor][2] == m:
                chunks.append(outputs[cursor])
                cursor += 1
            chunks.sort(key=lambda c: c[0])
            estimates = np.concatenate([c[1] for c in chunks], axis=0)
            covers = np.concatenate([c[2] for c in chunks], axis=0)
            failures = [f for c in chunks for f in c[3]]
            for rep, message in failures:
                _log.warning("replication %d of cell (%s, m=%d) failed: %s",
                             rep, flavor, m, message)
            if len(failures) >= _FAILURE_FRACTION * cfg.reps:
                raise RunAborted(
                    f"{len(failures)} failed replications in cell "
                    f"(flavor={flavor}, m={m}): {failures[:5]}"
                )
            ok = np.isfinite(estimates).all(axis=1)
            est = estimates[ok]
            cov = covers[ok]
            for k, name in enumerate(names):
                records.append(MetricsRecord(
                    model=cfg.model, prior=flavor,
                    scenario=cfg.scenario_label(), m=m, n=cfg.n,
                    parameter=name,
                    abs_bias=float(abs(est[:, k].mean() - theta[k])),
                    mse=float(np.mean((est[:, k] - theta[k]) ** 2)),
                    coverage95=float(cov[:, k].mean()),
                    reps=int(ok.sum()), seed=cfg.seed,
                ))
    if cfg.out:
        emit_csv(records, cfg.out)
    return records


CSV_HEADER = "model,prior,scenario,m,n,parameter,abs_bias,mse,coverage95,reps,seed"


def emit_csv(records: Sequence[MetricsRecord], path) -> str:
    """UTF-8 CSV with fixed 6-decimal metric columns, rows sorted by
    (prior, m, parameter)."""
    if not records:
        raise ValueError("no records to write")
    rows = sorted(records, key=lambda r: (r.prior, r.m, r.parameter))
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.model},{r.prior},{r.scenario},{r.m},{r.n},{r.parameter},"
            f"{r.abs_bias:.6f},{r.mse:.6f},{r.coverage95:.6f},{r.reps},{r.seed}"
        )
    path = str(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def parse_csv(path) -> list[MetricsRecord]:
    """Inverse of :func:`emit_csv` at the emitted 6-decimal precision."""
    records = []
    with open(str(path), encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            (model, prior, scenario, m, n, parameter,
             abs_bias, mse, cov, reps, seed) = line.strip().split(",")
            records.append(MetricsRecord(
                model=model, prior=prior, scenario=scenario, m=int(m),
                n=int(n), parameter=parameter, abs_bias=float(abs_bias),
                mse=float(mse), coverage95=float(cov), reps=int(reps),
                seed=int(seed),
            ))
    return records


def reproduce_figure(figure: str, scenario: str, reps: int, seed: int, out,
                     chain: int = 2000, warmup: int = 100,
                     dg_chain: int = 20000, dg_warmup: int = 1000,
                     workers: Optional[int] = None) -> list[MetricsRecord]:
    """Metric grid behind one simulation figure: all three priors over the
    full area-count grid.

    The CSV carries bias, MSE and coverage for every parameter; the figure
    id names which slice to read (variance components for 'bias',
    coefficients for 'bias-beta', everything for 'mse'/'coverage').
    """
    if figure not in FIGURE_IDS:
        raise ValueError(f"figure must be one of {FIGURE_IDS}")
    if reps < 100:
        raise ValueError("figure reproduction needs at least 100 replications")
    cfg = ExperimentConfig(model="ner-balanced", flavors=("au", "jeffreys", "dg"),
                           scenario=scenario, m_list=FIGURE_M_GRID, n=5,
                           reps=reps, chain=chain, warmup=warmup,
                           dg_chain=dg_chain, dg_warmup=dg_warmup,
                           seed=seed, workers=workers, out=str(out) if out else None)
    return run_experiment(cfg)
