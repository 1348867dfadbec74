"""Pairwise preference model: Elo-scale Bradley-Terry with per-rater noise.

The probability that method A beats method B is the base-10 logistic of
their Elo difference on the 400-point scale.  A rater answers from that
model with probability (1 - noise) and flips a fair coin otherwise.
Fitting is batch MAP over all answers; uncertainty comes from a Laplace
(Gaussian) approximation at the MAP, with the translation gauge direction
projected out of the Elo covariance.

Golden questions (original vs heavily degraded) enter the likelihood as
comparisons with a fixed Elo gap, so golden mistakes inform the rater's
noise without perturbing method scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import linalg, optimize, stats
from scipy.special import expit, gammaln
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .domain import Comparison, EloEstimate, EloFit, FitterSettings, Priors
from .errors import FitConvergenceError, SingularCurvatureError, UnknownMethodError, UnknownRaterError
from .validation import check_finite, check_probability

ELO_SCALE = 400.0
#: Natural-log slope of the base-10 logistic per Elo point.
_C = math.log(10.0) / ELO_SCALE

# Exponent clamp keeps 10**x inside float range for absurd Elo gaps.
_MAX_EXP = 300.0


def win_probability(elo_a: float, elo_b: float) -> float:
    """P(A preferred over B) under the Elo model.

    A 400-point advantage gives 10:1 odds; equal scores give 1/2.
    """
    check_finite("elo_a", elo_a)
    check_finite("elo_b", elo_b)
    x = (elo_b - elo_a) / ELO_SCALE
    x = min(max(x, -_MAX_EXP), _MAX_EXP)
    return 1.0 / (1.0 + 10.0 ** x)


def observed_choice_probability(p_model: float, noise: float) -> float:
    """Probability the rater's recorded choice matches the model's pick.

    noise=0 reproduces the model; noise=1 is a fair coin.
    """
    check_probability("p_model", p_model)
    check_probability("noise", noise)
    return noise / 2.0 + (1.0 - noise) * p_model


@dataclass
class ModelParams:
    """Point in parameter space: one Elo per method, one noise per rater."""

    methods: list[str]
    raters: list[str]
    elos: np.ndarray
    noises: np.ndarray

    def __post_init__(self):
        self.elos = np.asarray(self.elos, dtype=float)
        self.noises = np.asarray(self.noises, dtype=float)
        if self.elos.shape != (len(self.methods),):
            raise ValueError("elos must have one entry per method")
        if self.noises.shape != (len(self.raters),):
            raise ValueError("noises must have one entry per rater")
        if not np.all(np.isfinite(self.elos)):
            raise ValueError("elos must be finite")
        if np.any((self.noises < 0) | (self.noises > 1)):
            raise ValueError("noises must be in [0, 1]")


@dataclass
class _Compiled:
    """Comparisons flattened to index arrays for vectorized evaluation."""

    methods: list[str]
    raters: list[str]
    win_idx: np.ndarray
    lose_idx: np.ndarray
    rater_idx: np.ndarray
    golden_correct: np.ndarray
    golden_rater_idx: np.ndarray
    n_answers: int
    answers_per_method: np.ndarray = field(default=None)  # type: ignore[assignment]

    @property
    def n_methods(self) -> int:
        return len(self.methods)

    @property
    def n_raters(self) -> int:
        return len(self.raters)


def _compile(
    comparisons: Sequence[Comparison],
    methods: Sequence[str] | None = None,
    raters: Sequence[str] | None = None,
) -> _Compiled:
    if methods is None:
        seen: set[str] = set()
        for c in comparisons:
            if not c.golden:
                seen.update((c.left, c.right))
        methods = sorted(seen)
    if raters is None:
        raters = sorted({c.rater for c in comparisons})
    m_index = {m: i for i, m in enumerate(methods)}
    r_index = {r: i for i, r in enumerate(raters)}

    win, lose, rat = [], [], []
    g_ok, g_rat = [], []
    for c in comparisons:
        if c.rater not in r_index:
            raise UnknownRaterError(f"unknown rater {c.rater!r}")
        if c.golden:
            # Normalized golden: left is the original, so "left" is correct.
            g_ok.append(c.choice == "left")
            g_rat.append(r_index[c.rater])
            continue
        try:
            win.append(m_index[c.winner])
            lose.append(m_index[c.loser])
        except KeyError as exc:
            raise UnknownMethodError(f"unknown method {exc.args[0]!r}") from None
        rat.append(r_index[c.rater])

    per_method = np.zeros(len(methods), dtype=int)
    for idx in win:
        per_method[idx] += 1
    for idx in lose:
        per_method[idx] += 1

    return _Compiled(
        methods=list(methods),
        raters=list(raters),
        win_idx=np.asarray(win, dtype=int),
        lose_idx=np.asarray(lose, dtype=int),
        rater_idx=np.asarray(rat, dtype=int),
        golden_correct=np.asarray(g_ok, dtype=bool),
        golden_rater_idx=np.asarray(g_rat, dtype=int),
        n_answers=len(comparisons),
        answers_per_method=per_method,
    )


def _golden_p_model(compiled: _Compiled, golden_gap: float) -> np.ndarray:
    p_hi = expit(_C * golden_gap)
    return np.where(compiled.golden_correct, p_hi, 1.0 - p_hi)


def _nlp(x_elos: np.ndarray, x_noises: np.ndarray, compiled: _Compiled,
         priors: Priors, golden_gap: float) -> float:
    d = x_elos[compiled.win_idx] - x_elos[compiled.lose_idx]
    p = expit(_C * d)
    eps = x_noises[compiled.rater_idx]
    p_obs = eps / 2.0 + (1.0 - eps) * p
    total = -np.log(p_obs).sum() if p_obs.size else 0.0

    if compiled.golden_correct.size:
        pg = _golden_p_model(compiled, golden_gap)
        eps_g = x_noises[compiled.golden_rater_idx]
        pg_obs = eps_g / 2.0 + (1.0 - eps_g) * pg
        total += -np.log(pg_obs).sum()

    mu, sd = priors.elo_mean, priors.elo_sd
    total += float(((x_elos - mu) ** 2 / (2.0 * sd * sd)).sum())
    total += compiled.n_methods * math.log(sd * math.sqrt(2.0 * math.pi))

    a, b = priors.noise_alpha, priors.noise_beta
    if compiled.n_raters:
        log_norm = gammaln(a + b) - gammaln(a) - gammaln(b)
        total += -compiled.n_raters * float(log_norm)
        with np.errstate(divide="ignore"):
            if a != 1.0:
                total += float((-(a - 1.0) * np.log(x_noises)).sum())
            if b != 1.0:
                total += float((-(b - 1.0) * np.log1p(-x_noises)).sum())
    return float(total)


def _grad(x_elos: np.ndarray, x_noises: np.ndarray, compiled: _Compiled,
          priors: Priors, golden_gap: float) -> np.ndarray:
    g_e = np.zeros(compiled.n_methods)
    g_n = np.zeros(compiled.n_raters)

    if compiled.win_idx.size:
        d = x_elos[compiled.win_idx] - x_elos[compiled.lose_idx]
        p = expit(_C * d)
        eps = x_noises[compiled.rater_idx]
        p_obs = eps / 2.0 + (1.0 - eps) * p
        coef = -(1.0 - eps) * _C * p * (1.0 - p) / p_obs
        np.add.at(g_e, compiled.win_idx, coef)
        np.add.at(g_e, compiled.lose_idx, -coef)
        np.add.at(g_n, compiled.rater_idx, (p - 0.5) / p_obs)

    if compiled.golden_correct.size:
        pg = _golden_p_model(compiled, golden_gap)
        eps_g = x_noises[compiled.golden_rater_idx]
        pg_obs = eps_g / 2.0 + (1.0 - eps_g) * pg
        np.add.at(g_n, compiled.golden_rater_idx, (pg - 0.5) / pg_obs)

    g_e += (x_elos - priors.elo_mean) / (priors.elo_sd ** 2)

    a, b = priors.noise_alpha, priors.noise_beta
    if compiled.n_raters:
        with np.errstate(divide="ignore"):
            if a != 1.0:
                g_n += -(a - 1.0) / x_noises
            if b != 1.0:
                g_n += (b - 1.0) / (1.0 - x_noises)
    return np.concatenate([g_e, g_n])


def _hessian(x_elos: np.ndarray, x_noises: np.ndarray, compiled: _Compiled,
             priors: Priors, golden_gap: float) -> np.ndarray:
    m, r = compiled.n_methods, compiled.n_raters
    h = np.zeros((m + r, m + r))

    if compiled.win_idx.size:
        w, lo, ri = compiled.win_idx, compiled.lose_idx, compiled.rater_idx
        d = x_elos[w] - x_elos[lo]
        p = expit(_C * d)
        s = p * (1.0 - p)
        eps = x_noises[ri]
        q = eps / 2.0 + (1.0 - eps) * p
        # d²(-ln q)/dd² with d the winner-loser Elo gap
        f2 = (1.0 - eps) * _C * _C * s * ((1.0 - eps) * s - (1.0 - 2.0 * p) * q) / (q * q)
        np.add.at(h, (w, w), f2)
        np.add.at(h, (lo, lo), f2)
        np.add.at(h, (w, lo), -f2)
        np.add.at(h, (lo, w), -f2)
        cross = _C * s * (q + (1.0 - eps) * (0.5 - p)) / (q * q)
        np.add.at(h, (w, m + ri), cross)
        np.add.at(h, (m + ri, w), cross)
        np.add.at(h, (lo, m + ri), -cross)
        np.add.at(h, (m + ri, lo), -cross)
        np.add.at(h, (m + ri, m + ri), (p - 0.5) ** 2 / (q * q))

    if compiled.golden_correct.size:
        gri = compiled.golden_rater_idx
        pg = _golden_p_model(compiled, golden_gap)
        eps_g = x_noises[gri]
        qg = eps_g / 2.0 + (1.0 - eps_g) * pg
        np.add.at(h, (m + gri, m + gri), (pg - 0.5) ** 2 / (qg * qg))

    h[np.arange(m), np.arange(m)] += 1.0 / priors.elo_sd ** 2

    a, b = priors.noise_alpha, priors.noise_beta
    if r:
        diag = np.zeros(r)
        with np.errstate(divide="ignore"):
            if a != 1.0:
                diag += (a - 1.0) / x_noises ** 2
            if b != 1.0:
                diag += (b - 1.0) / (1.0 - x_noises) ** 2
        h[np.arange(m, m + r), np.arange(m, m + r)] += diag
    return h


def negative_log_posterior(
    params: ModelParams,
    comparisons: Sequence[Comparison],
    priors: Priors | None = None,
    golden_gap: float = 800.0,
) -> float:
    """Negative log of (likelihood x priors); the quantity fit_map minimizes.

    Additive over answers; with no answers it reduces to the prior term.
    """
    priors = priors or Priors()
    compiled = _compile(comparisons, params.methods, params.raters)
    return _nlp(params.elos, params.noises, compiled, priors, golden_gap)


def log_posterior_gradient(
    params: ModelParams,
    comparisons: Sequence[Comparison],
    priors: Priors | None = None,
    golden_gap: float = 800.0,
) -> np.ndarray:
    """Gradient of :func:`negative_log_posterior`, elos first then noises."""
    priors = priors or Priors()
    compiled = _compile(comparisons, params.methods, params.raters)
    return _grad(params.elos, params.noises, compiled, priors, golden_gap)


def _connected_components(compiled: _Compiled) -> list[list[str]]:
    parent = list(range(compiled.n_methods))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for w, lo in zip(compiled.win_idx, compiled.lose_idx):
        a, b = find(int(w)), find(int(lo))
        if a != b:
            parent[a] = b
    groups: dict[int, list[str]] = {}
    for i, name in enumerate(compiled.methods):
        groups.setdefault(find(i), []).append(name)
    return sorted(groups.values(), key=lambda g: g[0])


def _z_value(level: float) -> float:
    return float(stats.norm.ppf(0.5 + level / 2.0))


def _laplace_elo_cov(
    x_elos: np.ndarray,
    x_noises: np.ndarray,
    compiled: _Compiled,
    priors: Priors,
    golden_gap: float,
    noise_bounds: tuple[float, float] | None,
) -> np.ndarray:
    """Posterior covariance of the centered Elos (gauge projected out)."""
    m, r = compiled.n_methods, compiled.n_raters
    h = _hessian(x_elos, x_noises, compiled, priors, golden_gap)

    free = np.ones(m + r, dtype=bool)
    if noise_bounds is not None and r:
        lb, ub = noise_bounds
        at_bound = (x_noises <= lb + 1e-9) | (x_noises >= ub - 1e-9)
        free[m:] = ~at_bound
    h_free = h[np.ix_(free, free)]

    try:
        cho = linalg.cho_factor(h_free)
        cov_free = linalg.cho_solve(cho, np.eye(h_free.shape[0]))
    except linalg.LinAlgError:
        # Name the methods involved in (near-)null curvature directions.
        eigvals, eigvecs = linalg.eigh(h_free)
        null = eigvecs[:, eigvals < 1e-10]
        free_idx = np.flatnonzero(free)
        bad: set[str] = set()
        for col in null.T:
            for row, weight in zip(free_idx, col):
                if row < m and abs(weight) > 1e-3:
                    bad.add(compiled.methods[row])
        if not bad:
            bad = set(compiled.methods)
        raise SingularCurvatureError(
            f"posterior curvature is singular; unconstrained methods: {sorted(bad)}",
            sorted(bad),
        ) from None

    cov = np.zeros((m + r, m + r))
    idx = np.flatnonzero(free)
    cov[np.ix_(idx, idx)] = cov_free

    cov_elo = cov[:m, :m]
    center = np.eye(m) - np.full((m, m), 1.0 / m)
    return center @ cov_elo @ center


def _laplace_elo_sds(
    x_elos: np.ndarray,
    x_noises: np.ndarray,
    compiled: _Compiled,
    priors: Priors,
    golden_gap: float,
    noise_bounds: tuple[float, float] | None,
) -> np.ndarray:
    """Posterior sd of each centered Elo (gauge direction projected out)."""
    projected = _laplace_elo_cov(x_elos, x_noises, compiled, priors,
                                 golden_gap, noise_bounds)
    return np.sqrt(np.clip(np.diag(projected), 0.0, None))


def fit_map(
    comparisons: Sequence[Comparison],
    priors: Priors | None = None,
    settings: FitterSettings | None = None,
    *,
    methods: Sequence[str] | None = None,
    raters: Sequence[str] | None = None,
    fixed_noise: float | None = None,
    warm_start: EloFit | None = None,
    config_fingerprint: str = "",
) -> EloFit:
    """Batch MAP fit of Elo scores and rater noises.

    Deterministic and answer-order independent.  Raises
    :class:`FitConvergenceError` if the projected gradient infinity-norm
    cannot be driven below ``settings.gtol``.
    """
    priors = priors or Priors()
    settings = settings or FitterSettings()
    compiled = _compile(comparisons, methods, raters)
    m, r = compiled.n_methods, compiled.n_raters
    if m == 0:
        raise ValueError("nothing to fit: no methods given and no non-golden answers")

    warnings: list[str] = []
    silent = [compiled.methods[i] for i in range(m) if compiled.answers_per_method[i] == 0]
    if silent:
        warnings.append(f"no answers for methods (elo pinned at prior mean): {silent}")
    components = _connected_components(compiled)
    if len(components) > 1:
        labels = "; ".join(",".join(c) for c in components)
        warnings.append(f"comparison graph is disconnected: [{labels}]")

    noise_mean = priors.noise_alpha / (priors.noise_alpha + priors.noise_beta)
    noise_ub = min(settings.noise_max, 1.0 - 1e-9)
    x0_e = np.full(m, priors.elo_mean)
    x0_n = np.full(r, min(noise_mean, noise_ub))
    if warm_start is not None:
        prev_e = {e.method: e.elo for e in warm_start.estimates}
        for i, name in enumerate(compiled.methods):
            if name in prev_e:
                x0_e[i] = prev_e[name]
        for j, name in enumerate(compiled.raters):
            if name in warm_start.rater_noise:
                x0_n[j] = min(max(warm_start.rater_noise[name], 0.0), noise_ub)

    fit_noise = fixed_noise is None
    if not fit_noise:
        fixed = np.full(r, check_probability("fixed_noise", fixed_noise))

    def split(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if fit_noise:
            return x[:m], x[m:]
        return x, fixed

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        xe, xn = split(x)
        f = _nlp(xe, xn, compiled, priors, settings.golden_gap)
        g = _grad(xe, xn, compiled, priors, settings.golden_gap)
        return f, (g if fit_noise else g[:m])

    x0 = np.concatenate([x0_e, x0_n]) if fit_noise else x0_e
    bounds = None
    if fit_noise and r:
        bounds = [(None, None)] * m + [(0.0, noise_ub)] * r

    result = optimize.minimize(
        objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": settings.max_iter, "maxfun": 4 * settings.max_iter,
                 "ftol": 1e-14, "gtol": settings.gtol * 0.1},
    )
    x = result.x
    n_iter = int(result.nit)

    lb_arr = np.zeros(r)
    ub_arr = np.full(r, noise_ub)

    def projected_grad(x: np.ndarray) -> np.ndarray:
        xe, xn = split(x)
        g = _grad(xe, xn, compiled, priors, settings.golden_gap)
        if not fit_noise:
            return g[:m]
        gn = g[m:].copy()
        gn[(xn <= lb_arr + 1e-12) & (gn > 0)] = 0.0
        gn[(xn >= ub_arr - 1e-12) & (gn < 0)] = 0.0
        return np.concatenate([g[:m], gn])

    # Newton polish: L-BFGS-B stops near the optimum; a few damped Newton
    # steps on the free coordinates drive the gradient to tolerance.
    for _ in range(50):
        g = projected_grad(x)
        gnorm = float(np.abs(g).max()) if g.size else 0.0
        if gnorm <= settings.gtol:
            break
        xe, xn = split(x)
        h = _hessian(xe, xn, compiled, priors, settings.golden_gap)
        if not fit_noise:
            h = h[:m, :m]
        free = np.abs(g) > 0  # bound-active coords have zeroed gradients
        free |= np.arange(len(g)) < m
        try:
            step = np.zeros_like(x)
            cho = linalg.cho_factor(h[np.ix_(free, free)])
            step[free] = -linalg.cho_solve(cho, g[free])
        except linalg.LinAlgError:
            break
        f0, _ = objective(x)
        # Near the optimum the predicted decrease sinks below the float
        # resolution of f, so the Armijo test needs a rounding allowance.
        f_slack = 1e-12 * (1.0 + abs(f0))
        alpha = 1.0
        for _ in range(40):
            x_try = x + alpha * step
            if fit_noise and r:
                x_try[m:] = np.clip(x_try[m:], 0.0, noise_ub)
            f_try, _ = objective(x_try)
            if f_try <= f0 + 1e-4 * alpha * float(g @ step) + f_slack:
                break
            alpha *= 0.5
        else:
            break
        x = x_try
        n_iter += 1

    g = projected_grad(x)
    grad_norm = float(np.abs(g).max()) if g.size else 0.0
    if grad_norm > settings.gtol:
        raise FitConvergenceError(
            f"fit did not converge: projected gradient inf-norm {grad_norm:.3e} "
            f"> tolerance {settings.gtol:.1e} after {n_iter} iterations",
            grad_norm=grad_norm, n_iter=n_iter,
        )

    xe, xn = split(x)
    nlp_value = _nlp(xe, xn, compiled, priors, settings.golden_gap)
    noise_bounds = (0.0, noise_ub) if fit_noise else None
    cov = _laplace_elo_cov(xe, xn, compiled, priors, settings.golden_gap,
                           noise_bounds)
    sds = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    z = _z_value(settings.interval_level)
    estimates = [
        EloEstimate(method=name, elo=float(xe[i]),
                    p99_low=float(xe[i] - z * sds[i]),
                    p99_high=float(xe[i] + z * sds[i]))
        for i, name in enumerate(compiled.methods)
    ]
    return EloFit(
        estimates=estimates,
        rater_noise={name: float(xn[j]) for j, name in enumerate(compiled.raters)},
        log_posterior=-nlp_value,
        config_fingerprint=config_fingerprint,
        interval_level=settings.interval_level,
        n_answers=compiled.n_answers,
        converged=True,
        n_iter=n_iter,
        grad_norm=grad_norm,
        warnings=warnings,
        elo_cov=[[float(v) for v in row] for row in cov],
    )


def credible_intervals(
    fit: EloFit,
    comparisons: Sequence[Comparison],
    priors: Priors | None = None,
    level: float = 0.99,
    golden_gap: float = 800.0,
    noise_max: float = 1.0,
) -> list[EloEstimate]:
    """Central credible intervals at ``level`` from the Laplace approximation.

    Recomputes curvature at the fitted point; interval half-width is
    z * posterior sd of the centered Elo.
    """
    priors = priors or Priors()
    methods = [e.method for e in fit.estimates]
    raters = sorted(fit.rater_noise)
    compiled = _compile(comparisons, methods, raters)
    xe = np.array([e.elo for e in fit.estimates])
    xn = np.array([fit.rater_noise[rr] for rr in raters])
    sds = _laplace_elo_sds(xe, xn, compiled, priors, golden_gap,
                           (0.0, min(noise_max, 1.0 - 1e-9)))
    z = _z_value(level)
    return [
        EloEstimate(method=name, elo=float(xe[i]),
                    p99_low=float(xe[i] - z * sds[i]),
                    p99_high=float(xe[i] + z * sds[i]))
        for i, name in enumerate(methods)
    ]


def posterior_sd(estimate: EloEstimate, level: float = 0.99) -> float:
    """Invert an interval back to the Laplace posterior sd."""
    return estimate.half_width / _z_value(level)


def sample_posterior(
    comparisons: Sequence[Comparison],
    priors: Priors | None = None,
    settings: FitterSettings | None = None,
    *,
    methods: Sequence[str] | None = None,
    n_samples: int = 20_000,
    burn_in: int = 4_000,
    seed: int = 0,
) -> tuple[list[str], np.ndarray]:
    """Random-walk Metropolis sampler over the posterior, for cross-checking
    the Laplace intervals.  Returns (method names, Elo samples) with shape
    (n_samples, n_methods).  Seed-controlled and deterministic.
    """
    priors = priors or Priors()
    settings = settings or FitterSettings()
    fit = fit_map(comparisons, priors, settings, methods=methods)
    methods = [e.method for e in fit.estimates]
    raters = sorted(fit.rater_noise)
    compiled = _compile(comparisons, methods, raters)
    m, r = compiled.n_methods, compiled.n_raters
    noise_ub = min(settings.noise_max, 1.0 - 1e-9)

    x = np.concatenate([
        np.array([e.elo for e in fit.estimates]),
        np.array([fit.rater_noise[rr] for rr in raters]),
    ])
    sds = _laplace_elo_sds(x[:m], x[m:], compiled, priors, settings.golden_gap,
                           (0.0, noise_ub))
    scale = np.concatenate([np.maximum(sds, 1.0), np.full(r, 0.02)])
    scale *= 2.4 / math.sqrt(m + r)

    rng = np.random.default_rng(seed)
    current = _nlp(x[:m], x[m:], compiled, priors, settings.golden_gap)
    out = np.empty((n_samples, m))
    kept = 0
    total = n_samples + burn_in
    for step in range(total):
        prop = x + rng.normal(0.0, scale)
        if r and (np.any(prop[m:] < 0.0) or np.any(prop[m:] > noise_ub)):
            pass  # zero prior density outside bounds: reject
        else:
            cand = _nlp(prop[:m], prop[m:], compiled, priors, settings.golden_gap)
            if cand <= current or rng.random() < math.exp(current - cand):
                x, current = prop, cand
        if step >= burn_in:
            out[kept] = x[:m]
            kept += 1
    return methods, out


class EloModel(BaseEstimator):
    """Estimator wrapper around the batch MAP fit.

    Follows the sklearn conventions: constructor stores hyperparameters,
    ``fit`` consumes a sequence of :class:`~pairelo.domain.Comparison`
    records and exposes fitted state through trailing-underscore
    attributes, ``get_params``/``set_params`` work for composition.

    >>> model = EloModel().fit(comparisons)
    >>> model.predict_proba([("jpegli-q95-yuv444", "mozjpeg-q95-yuv444")])
    """

    def __init__(
        self,
        priors: Priors | None = None,
        gtol: float = 1e-6,
        max_iter: int = 10_000,
        golden_gap: float = 800.0,
        noise_max: float = 1.0,
        interval_level: float = 0.99,
        fixed_noise: float | None = None,
        methods: Sequence[str] | None = None,
    ):
        self.priors = priors
        self.gtol = gtol
        self.max_iter = max_iter
        self.golden_gap = golden_gap
        self.noise_max = noise_max
        self.interval_level = interval_level
        self.fixed_noise = fixed_noise
        self.methods = methods

    def _settings(self) -> FitterSettings:
        return FitterSettings(
            gtol=self.gtol, max_iter=self.max_iter, golden_gap=self.golden_gap,
            noise_max=self.noise_max, interval_level=self.interval_level,
        )

    def fit(self, X: Iterable[Comparison | dict[str, Any]], y: Any = None) -> "EloModel":
        comparisons = [c if isinstance(c, Comparison) else Comparison.from_dict(c) for c in X]
        self.fit_ = fit_map(
            comparisons,
            priors=self.priors or Priors(),
            settings=self._settings(),
            methods=self.methods,
            fixed_noise=self.fixed_noise,
        )
        self.elos_ = {e.method: e.elo for e in self.fit_.estimates}
        self.noises_ = dict(self.fit_.rater_noise)
        self.estimates_ = list(self.fit_.estimates)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "fit_"):
            raise NotFittedError("EloModel is not fitted; call fit() first")

    def predict_proba(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        """P(first method preferred over second) for each pair."""
        self._check_fitted()
        return np.array([win_probability(self.elos_[a], self.elos_[b]) for a, b in pairs])

    def predict(self, pairs: Sequence[tuple[str, str]]) -> list[str]:
        """The method the model expects raters to prefer, per pair."""
        probs = self.predict_proba(pairs)
        return [a if p >= 0.5 else b for (a, b), p in zip(pairs, probs)]
