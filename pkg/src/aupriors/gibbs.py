"""Gibbs samplers for the balanced grouped model, plus chain summaries.

Three prior flavors share the module: the bias-cancelling prior and the
variance-component Jeffreys prior run a blocked sampler in the
(beta, rho, sigma^2) parameterization with rho = sigma^2/(sigma^2 + n tau^2);
the hierarchical inverse-gamma prior runs a latent-effect sampler over
(beta, v, tau^2, sigma^2).

Chains are a pure function of (data, config, stream).  Randomness is
consumed in fixed per-chunk blocks (normals, then gamma variates, then any
live truncated-gamma draws in iteration order), which lets the experiment
harness run many replications in lock-step batches while every replication
remains bit-reproducible in isolation with its own stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special as sc

from .errors import MassUnderflow, NonFiniteDraw, ProprietyViolation
from .models.ner import NerDataset, propriety_gate

CHUNK = 256  # iterations per pre-drawn randomness block; fixed contract

FLAVORS = ("au", "jeffreys", "dg")


@dataclass(frozen=True)
class GibbsConfig:
    """Chain length, warmup, flavor, and hierarchical-prior hyperparameters."""

    n_draws: int = 2000
    warmup: int = 100
    seed: Optional[int] = None
    flavor: str = "au"
    a_tau: float = 5.0
    b_tau: float = 5.0
    a_sigma: float = 5.0
    b_sigma: float = 5.0

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be one of {FLAVORS}")
        if not (self.n_draws >= 1 and self.warmup >= 0):
            raise ValueError("need n_draws >= 1 and warmup >= 0")
        for name in ("a_tau", "b_tau", "a_sigma", "b_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Chain:
    """Post-warmup draws in the original (beta, tau^2, sigma^2) coordinates."""

    draws: np.ndarray
    warmup: int
    seed: Optional[int]
    param_names: tuple[str, ...]


@dataclass(frozen=True)
class ChainSummary:
    mean: np.ndarray
    lower: np.ndarray   # 2.5% empirical quantile, linear interpolation
    upper: np.ndarray   # 97.5%
    ess: np.ndarray


# -- random variates ---------------------------------------------------------

def sample_inverse_gamma(shape: float, scale: float,
                         rng: np.random.Generator) -> float:
    """One draw with density proportional to x^(-shape-1) exp(-scale/x)."""
    if not (shape > 0 and scale > 0):
        raise ValueError("inverse gamma needs positive shape and scale")
    return scale / rng.standard_gamma(shape)


def sample_truncated_gamma01(shape: float, rate: float,
                             rng: np.random.Generator) -> float:
    """Gamma(shape, rate) conditioned on (0, 1).

    Rejection from the untruncated gamma when the interval holds mass above
    0.1 (cheap, few expected tries); otherwise inversion of the regularized
    incomplete gamma, which stays robust in the thin-tail regime that
    dominates at large area counts.
    """
    if not (shape > 0 and rate > 0):
        raise ValueError("truncated gamma needs positive shape and rate")
    mass = float(sc.gammainc(shape, rate))
    if mass < 1e-300:
        raise MassUnderflow(
            f"P(X in (0,1)) underflows for shape={shape}, rate={rate}"
        )
    if mass > 0.1:
        while True:
            draw = rng.standard_gamma(shape) / rate
            if draw < 1.0:
                return max(draw, np.nextafter(0.0, 1.0))
    u = rng.random()
    draw = float(sc.gammaincinv(shape, u * mass)) / rate
    # inversion can land on the closed endpoints in float arithmetic
    draw = min(max(draw, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))
    return draw


# -- small-matrix Cholesky solves (batch-broadcastable, fixed op order) ------

def _solve_lower(L, b):
    p = b.shape[-1]
    out = []
    for i in range(p):
        acc = b[..., i]
        for j in range(i):
            acc = acc - L[..., i, j] * out[j]
        out.append(acc / L[..., i, i])
    return np.stack(out, axis=-1)


def _solve_upper_t(L, b):
    p = b.shape[-1]
    out = [None] * p
    for i in reversed(range(p)):
        acc = b[..., i]
        for j in range(i + 1, p):
            acc = acc - L[..., j, i] * out[j]
        out[i] = acc / L[..., i, i]
    return np.stack(out, axis=-1)


def _spd_solve(L, b):
    return _solve_upper_t(L, _solve_lower(L, b))


# -- sufficient statistics ----------------------------------------------------

@dataclass(frozen=True)
class BalancedStats:
    """Per-dataset quantities the balanced samplers touch each iteration."""

    m: int
    n: int
    p: int
    gram: np.ndarray       # X'X over all units
    xty: np.ndarray
    yty: float
    area_x_sums: np.ndarray   # (m, p): column sums of each area block
    area_y_sums: np.ndarray   # (m,)
    gram_sums: np.ndarray     # area_x_sums' area_x_sums
    xty_sums: np.ndarray      # area_x_sums' area_y_sums


def balanced_stats(data: NerDataset) -> BalancedStats:
    if not data.balanced:
        raise ValueError("balanced sampler statistics need equal area sizes")
    X = np.concatenate(data.x, axis=0)
    y = np.concatenate(data.y, axis=0)
    S = np.stack([xi.sum(axis=0) for xi in data.x])
    t = np.array([yi.sum() for yi in data.y])
    return BalancedStats(
        m=data.m, n=data.n_units[0], p=data.p,
        gram=X.T @ X, xty=X.T @ y, yty=float(np.einsum("i,i->", y, y)),
        area_x_sums=S, area_y_sums=t,
        gram_sums=S.T @ S, xty_sums=S.T @ t,
    )


def _stack_stats(stats_list: Sequence[BalancedStats]):
    s0 = stats_list[0]
    return dict(
        gram=np.stack([s.gram for s in stats_list]),
        xty=np.stack([s.xty for s in stats_list]),
        yty=np.array([s.yty for s in stats_list]),
        S=np.stack([s.area_x_sums for s in stats_list]),
        t=np.stack([s.area_y_sums for s in stats_list]),
        gram_sums=np.stack([s.gram_sums for s in stats_list]),
        xty_sums=np.stack([s.xty_sums for s in stats_list]),
        m=s0.m, n=s0.n, p=s0.p,
    )


def _init_point(arrs):
    """Least-squares start shared by all flavors; deterministic."""
    L = np.linalg.cholesky(arrs["gram"])
    beta = _spd_solve(L, arrs["xty"])
    gb = np.einsum("...pq,...q->...p", arrs["gram"], beta)
    rss = arrs["yty"] - 2.0 * np.einsum("...p,...p->...", beta, arrs["xty"]) \
        + np.einsum("...p,...p->...", beta, gb)
    sigma2 = rss / (arrs["m"] * arrs["n"])
    return beta, np.maximum(sigma2, 1e-300)


def _rss(arrs, beta):
    gb = np.einsum("...pq,...q->...p", arrs["gram"], beta)
    return arrs["yty"] - 2.0 * np.einsum("...p,...p->...", beta, arrs["xty"]) \
        + np.einsum("...p,...p->...", beta, gb)


# -- kernels -------------------------------------------------------------------

def _ratio_flavor_shapes(flavor: str, m: int, n: int):
    # prior (sigma^2)^-a (sigma^2 + n tau^2)^-b with (a, b) = (2, 2) or (1, 1)
    if flavor == "au":
        return 0.5 * m + 1.0, 0.5 * n * m + 2.0
    if flavor == "jeffreys":
        return 0.5 * m, 0.5 * n * m
    raise ValueError(f"not a ratio-parameterization flavor: {flavor}")


def _ratio_kernel(arrs, gens, n_draws, warmup, a_rho, a_sig):
    """Blocked (beta, rho, sigma^2) sampler, vectorized over chains.

    Returns draws (B, n_draws, p + 2) in original coordinates, plus a lane
    failure mask and messages.  Lanes that trip a guard keep running on
    placeholder values so healthy lanes are untouched, and are reported as
    failed at the end.
    """
    B = len(gens)
    m, n, p = arrs["m"], arrs["n"], arrs["p"]
    beta, sigma2 = _init_point(arrs)
    rho = np.full(B, 0.5)
    total = warmup + n_draws
    draws = np.empty((B, n_draws, p + 2))
    failed = np.zeros(B, dtype=bool)
    fail_msg: dict[int, str] = {}
    kept = 0
    done = 0
    while done < total:
        c = min(CHUNK, total - done)
        znorm = np.stack([g.standard_normal((c, p)) for g in gens])
        gsig = np.stack([g.standard_gamma(a_sig, c) for g in gens])
        for j in range(c):
            lam = 1.0 - rho
            inv_s2 = 1.0 / sigma2
            prec = (arrs["gram"] - (lam / n)[:, None, None] * arrs["gram_sums"]) \
                * inv_s2[:, None, None]
            rhs = (arrs["xty"] - (lam / n)[:, None] * arrs["xty_sums"]) \
                * inv_s2[:, None]
            L = np.linalg.cholesky(prec)
            beta = _spd_solve(L, rhs) + _solve_upper_t(L, znorm[:, j, :])
            resid_sums = arrs["t"] - np.einsum("bmp,bp->bm", arrs["S"], beta)
            q = np.einsum("bm,bm->b", resid_sums, resid_sums)
            rate = q / (2.0 * n * sigma2)
            for b in range(B):
                if failed[b]:
                    continue
                try:
                    rho[b] = sample_truncated_gamma01(a_rho, float(rate[b]), gens[b])
                except (MassUnderflow, ValueError) as exc:
                    failed[b] = True
                    fail_msg[b] = f"iteration {done + j}: {exc}"
            scale = 0.5 * (_rss(arrs, beta) - ((1.0 - rho) / n) * q)
            bad = ~(scale > 0.0) & ~failed
            if np.any(bad):
                for b in np.nonzero(bad)[0]:
                    failed[b] = True
                    fail_msg[b] = (
                        f"iteration {done + j}: nonpositive variance scale "
                        f"{scale[b]!r} (beta={beta[b]!r}, rho={rho[b]!r})"
                    )
            scale = np.where(failed, 1.0, scale)
            rho = np.where(failed, 0.5, rho)
            sigma2 = scale / gsig[:, j]
            if done + j >= warmup:
                draws[:, kept, :p] = beta
                draws[:, kept, p] = sigma2 * (1.0 - rho) / (n * rho)
                draws[:, kept, p + 1] = sigma2
                kept += 1
        done += c
    nonfinite = ~np.isfinite(draws).all(axis=(1, 2))
    for b in np.nonzero(nonfinite & ~failed)[0]:
        failed[b] = True
        fail_msg[b] = "non-finite value in recorded draws"
    draws[failed] = np.nan
    return draws, failed, fail_msg


def _dg_kernel(arrs, gens, n_draws, warmup, a_tau, b_tau, a_sig, b_sig):
    """Latent-effect sampler for the hierarchical inverse-gamma prior."""
    B = len(gens)
    m, n, p = arrs["m"], arrs["n"], arrs["p"]
    beta, sigma2 = _init_point(arrs)
    tau2 = np.ones(B)
    v = np.zeros((B, m))
    L_gram = np.linalg.cholesky(arrs["gram"])
    a_tau_post = a_tau + 0.5 * m
    a_sig_post = a_sig + 0.5 * n * m
    total = warmup + n_draws
    draws = np.empty((B, n_draws, p + 2))
    kept = 0
    done = 0
    while done < total:
        c = min(CHUNK, total - done)
        zbeta = np.stack([g.standard_normal((c, p)) for g in gens])
        zv = np.stack([g.standard_normal((c, m)) for g in gens])
        gtau = np.stack([g.standard_gamma(a_tau_post, c) for g in gens])
        gsig = np.stack([g.standard_gamma(a_sig_post, c) for g in gens])
        for j in range(c):
            rhs = arrs["xty"] - np.einsum("bmp,bm->bp", arrs["S"], v)
            mean = _spd_solve(L_gram, rhs)
            beta = mean + np.sqrt(sigma2)[:, None] * _solve_upper_t(L_gram, zbeta[:, j, :])
            resid_sums = arrs["t"] - np.einsum("bmp,bp->bm", arrs["S"], beta)
            prec = n / sigma2 + 1.0 / tau2
            v = (resid_sums / sigma2[:, None]) / prec[:, None] \
                + np.sqrt(1.0 / prec)[:, None] * zv[:, j, :]
            vsq = np.einsum("bm,bm->b", v, v)
            tau2 = (b_tau + 0.5 * vsq) / gtau[:, j]
            ssq = _rss(arrs, beta) - 2.0 * np.einsum("bm,bm->b", v, resid_sums) \
                + n * vsq
            sigma2 = (b_sig + 0.5 * ssq) / gsig[:, j]
            if done + j >= warmup:
                draws[:, kept, :p] = beta
                draws[:, kept, p] = tau2
                draws[:, kept, p + 1] = sigma2
                kept += 1
        done += c
    failed = ~np.isfinite(draws).all(axis=(1, 2))
    fail_msg = {int(b): "non-finite value in recorded draws"
                for b in np.nonzero(failed)[0]}
    draws[failed] = np.nan
    return draws, failed, fail_msg


def run_chain_batch(stats_list: Sequence[BalancedStats],
                    gens: Sequence[np.random.Generator],
                    cfg: GibbsConfig):
    """Run one chain per (stats, generator) pair in lock step.

    Every lane's draws are bit-identical to a solo :func:`gibbs_ner` run
    with the same data and stream; batching only amortizes array overhead.
    """
    if len(stats_list) != len(gens):
        raise ValueError("need one generator per dataset")
    arrs = _stack_stats(stats_list)
    if cfg.flavor == "dg":
        return _dg_kernel(arrs, list(gens), cfg.n_draws, cfg.warmup,
                          cfg.a_tau, cfg.b_tau, cfg.a_sigma, cfg.b_sigma)
    a_rho, a_sig = _ratio_flavor_shapes(cfg.flavor, arrs["m"], arrs["n"])
    return _ratio_kernel(arrs, list(gens), cfg.n_draws, cfg.warmup, a_rho, a_sig)


def gibbs_ner(data: NerDataset, cfg: GibbsConfig,
              rng: np.random.Generator | None = None) -> Chain:
    """Posterior chain for one balanced grouped dataset.

    Improper flavors require the aggregate propriety conditions; the
    hierarchical flavor is proper by construction and skips the gate.
    """
    if not data.balanced:
        raise ValueError("only balanced designs are supported by the sampler")
    if cfg.flavor in ("au", "jeffreys") and not propriety_gate(data):
        raise ProprietyViolation(
            "data fail the aggregate rank conditions; posterior would be improper"
        )
    if rng is None:
        rng = np.random.Generator(np.random.Philox(cfg.seed))
    stats = balanced_stats(data)
    if cfg.flavor == "dg":
        # flat coefficient prior: a rank-deficient design gives an improper
        # posterior even with proper variance priors
        if np.linalg.eigvalsh(stats.gram)[0] <= 1e-10 * np.linalg.eigvalsh(stats.gram)[-1]:
            raise ProprietyViolation(
                "design matrix is rank deficient; coefficient posterior improper"
            )
    draws, failed, fail_msg = run_chain_batch([stats], [rng], cfg)
    if failed[0]:
        raise NonFiniteDraw(fail_msg[0])
    names = tuple(f"beta{j + 1}" for j in range(stats.p)) + ("tau2", "sigma2")
    return Chain(draws=draws[0], warmup=cfg.warmup, seed=cfg.seed,
                 param_names=names)


# -- summaries -----------------------------------------------------------------

def effective_sample_size(x: np.ndarray) -> float:
    """Initial-monotone-sequence estimator on one chain component.

    A constant chain reports the nominal size (all autocovariances vanish;
    documented convention).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    centered = x - x.mean()
    var0 = float(centered @ centered) / n
    # rounding residue of a constant chain is not signal
    if var0 <= 64.0 * np.finfo(float).eps ** 2 * (1.0 + float(x.mean()) ** 2):
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    pair_sums = []
    j = 0
    while 2 * j + 1 < n:
        g = acov[2 * j] + acov[2 * j + 1]
        if g <= 0.0:
            break
        pair_sums.append(g)
        j += 1
    running = np.minimum.accumulate(pair_sums) if pair_sums else []
    var_mean = -acov[0] + 2.0 * float(np.sum(running))
    if var_mean <= 0.0:
        return float(n)
    return float(n * acov[0] / var_mean)


def summarize(chain: Chain) -> ChainSummary:
    """Means, equal-tailed 95% interval (type-7 quantiles), and ESS."""
    draws = chain.draws
    if draws.shape[0] < 100:
        raise ValueError("need at least 100 post-warmup draws to summarize")
    lower, upper = np.quantile(draws, [0.025, 0.975], axis=0, method="linear")
    ess = np.array([effective_sample_size(draws[:, k])
                    for k in range(draws.shape[1])])
    return ChainSummary(mean=draws.mean(axis=0), lower=lower, upper=upper, ess=ess)
