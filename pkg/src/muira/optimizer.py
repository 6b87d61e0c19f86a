"""
Degree-distribution search for MU-IRA codes.

For every repetition number q <= q_max and combiner size alpha the largest
rate with an open EXIT tunnel at the design noise level is found by
bisection on S = sum lambda_i / i (the rate is increasing in S). At each
rate target, differential evolution searches the part of the lambda simplex with
exactly that S for the widest tunnel. The best (q, alpha) pair wins and is
re-checked by threshold bisection.
"""

import logging

import numpy as np
from scipy import optimize
from tqdm import tqdm

from muira.config import ExitConfig, OptimizerConfig
from muira.exceptions import ConfigError, InfeasibleError
from muira.exit_analysis import (
    decoder_exit_curve,
    decoding_threshold,
    operating_grid,
    sigma_to_ebn0,
    tunnel_gap,
)
from muira.models import CandidateRecord, CodeParams, DegreeDistribution, OptimizationResult
from muira.seeding import Component, derive_seed

logger = logging.getLogger(__name__)

WEIGHT_CUTOFF = 1e-3
VERIFY_SLACK_DB = 0.05


def rate_from_s(s: float, q: int, alpha: int) -> float:
    return alpha * s / (alpha * q * s + 1.0)


def simplex_point(weights: np.ndarray, inverse_degrees: np.ndarray, target_s: float | None) -> np.ndarray:
    """Map raw weights onto the simplex, then onto the slice sum(lambda/d) = target_s.

    The slice is reached by mixing with the vertex on the far side of the
    target (the largest degree lowers S, the smallest raises it).
    """
    w = np.where(weights < WEIGHT_CUTOFF, 0.0, weights)
    lam = np.full_like(w, 1.0 / w.size) if w.sum() <= 0 else w / w.sum()
    if target_s is None:
        return lam
    s = float(lam @ inverse_degrees)
    vertex = int(np.argmin(inverse_degrees)) if s > target_s else int(np.argmax(inverse_degrees))
    s_vertex = inverse_degrees[vertex]
    if s != s_vertex:
        t = (s - target_s) / (s - s_vertex)
        lam = (1.0 - t) * lam
        lam[vertex] += t
    return lam


def to_params(lam: np.ndarray, degrees: list[int], q: int, alpha: int, q_max: int) -> CodeParams:
    fractions = {d: float(f) for d, f in zip(degrees, lam, strict=True) if f > 0.0}
    return CodeParams(q=q, alpha=alpha, lambda_=DegreeDistribution.normalized(fractions), q_max=q_max)


class _PairSearch:
    """Rate bisection for one (q, alpha) pair."""

    def __init__(self, config: OptimizerConfig, exit_config: ExitConfig, q: int, alpha: int):
        self.config = config
        self.exit_config = exit_config
        self.q = q
        self.alpha = alpha
        self.degrees = config.degree_set
        self.inverse = 1.0 / np.asarray(self.degrees, dtype=np.float64)
        self.log: list[CandidateRecord] = []
        self.grid = operating_grid(
            config.K, config.M, config.sigma_n, config.sigma_n, exit_config.grid_points
        )

    def gap(self, lam: np.ndarray) -> float:
        params = to_params(lam, self.degrees, self.q, self.alpha, self.config.q_max)
        curve = decoder_exit_curve(params, self.grid, self.exit_config)
        return tunnel_gap(curve, self.config.K, self.config.M, self.config.sigma_n, self.exit_config)

    def best_at(self, target_s: float, step: int, x0: np.ndarray | None) -> tuple[np.ndarray, float, int]:
        """Widest-tunnel lambda with sum(lambda/d) = target_s."""
        n = len(self.degrees)
        if n == 1 or target_s >= self.inverse.max() or target_s <= self.inverse.min():
            # the slice is a single vertex
            lam = np.zeros(n)
            lam[int(np.argmax(self.inverse) if target_s >= self.inverse.max() else np.argmin(self.inverse))] = 1.0
            return lam, self.gap(lam), 1

        best = {"gap": -np.inf, "evals": 0}

        def objective(w):
            best["evals"] += 1
            g = self.gap(simplex_point(w, self.inverse, target_s))
            best["gap"] = max(best["gap"], g)
            return -g

        def enough(xk, convergence=None):
            return best["gap"] >= self.config.margin

        seed = np.random.default_rng(derive_seed(self.config.seed, Component.OPTIMIZER, self.q, self.alpha, step))
        result = optimize.differential_evolution(
            objective,
            bounds=[(0.0, 1.0)] * n,
            popsize=self.config.popsize,
            maxiter=self.config.maxiter,
            seed=seed,
            polish=False,
            callback=enough,
            x0=x0,
        )
        lam = simplex_point(result.x, self.inverse, target_s)
        return lam, -float(result.fun), best["evals"]

    def record(self, target_s, lam, gap, evals):
        feasible = gap >= self.config.margin
        rate = rate_from_s(float(lam @ self.inverse), self.q, self.alpha)
        self.log.append(
            CandidateRecord(
                q=self.q,
                alpha=self.alpha,
                target_rate=rate_from_s(target_s, self.q, self.alpha),
                rate=rate,
                gap=gap,
                feasible=feasible,
                evaluations=evals,
            )
        )
        logger.debug(
            f"q={self.q} alpha={self.alpha}: R={rate:.4f} gap={gap:+.5f} "
            f"({'open' if feasible else 'closed'}, {evals} evaluations)"
        )
        return feasible

    def run(self) -> tuple[np.ndarray, float, bool]:
        """Largest feasible rate, or the widest-gap candidate if none is feasible."""
        lo, hi = float(self.inverse.min()), float(self.inverse.max())

        lam, gap, evals = self.best_at(hi, 0, None)
        if self.record(hi, lam, gap, evals):
            return lam, gap, True
        feasible = None
        widest = (lam, gap)

        step = 1
        while rate_from_s(hi, self.q, self.alpha) - rate_from_s(lo, self.q, self.alpha) > self.config.rate_tolerance:
            mid = (lo + hi) / 2.0
            x0 = (feasible or widest)[0] if len(self.degrees) > 1 else None
            lam, gap, evals = self.best_at(mid, step, x0)
            if self.record(mid, lam, gap, evals):
                lo, feasible = mid, (lam, gap)
            else:
                hi = mid
            if gap > widest[1]:
                widest = (lam, gap)
            step += 1
        if feasible is not None:
            return feasible[0], feasible[1], True
        return widest[0], widest[1], False


def optimize_degree_distribution(config: OptimizerConfig, *, progress: bool = False) -> OptimizationResult:
    """Highest-rate code with an open tunnel at ``config.sigma_n``.

    When no pair is feasible, the candidate with the widest (least negative)
    gap is returned with ``feasible = False``.
    """
    exit_config = config.exit.model_copy(update={"exit_model": config.exit_model})
    pairs = [(q, a) for q in range(1, config.q_max + 1) for a in config.alpha_range]
    if not pairs:
        raise ConfigError("no (q, alpha) pairs to search", field="alpha_range")

    log: list[CandidateRecord] = []
    feasible_best = None
    fallback = None
    for q, alpha in tqdm(pairs, desc="(q, alpha)", disable=not progress):
        search = _PairSearch(config, exit_config, q, alpha)
        lam, gap, feasible = search.run()
        log.extend(search.log)
        params = to_params(lam, config.degree_set, q, alpha, config.q_max)
        if feasible and (feasible_best is None or params.rate > feasible_best[0].rate):
            feasible_best = (params, gap)
        if fallback is None or gap > fallback[1]:
            fallback = (params, gap)
        logger.info(f"q={q} alpha={alpha}: best R={params.rate:.4f} ({'feasible' if feasible else 'infeasible'})")

    params, gap = feasible_best or fallback
    feasible = feasible_best is not None
    rate = params.rate
    design_ebn0 = sigma_to_ebn0(config.sigma_n, rate)

    verified = None
    if feasible and config.verify:
        try:
            report = decoding_threshold(
                params,
                config.K,
                config.M,
                (design_ebn0 - 10.0, design_ebn0 + 10.0),
                config=exit_config,
            )
        except InfeasibleError as e:
            logger.warning(f"Threshold verification failed: {e}")
            feasible = False
        else:
            verified = report.threshold_db
            if verified > design_ebn0 + VERIFY_SLACK_DB:
                logger.warning(
                    f"Verified threshold {verified:.2f} dB exceeds the design point {design_ebn0:.2f} dB"
                )
                feasible = False
    if not feasible:
        logger.warning(f"No feasible code found; returning the best candidate (gap {gap:+.5f})")

    return OptimizationResult(
        params=params,
        rate=rate,
        sum_rate=config.K * rate,
        feasible=feasible,
        gap=gap,
        design_sigma_n=config.sigma_n,
        design_ebn0_db=design_ebn0,
        verified_threshold_db=verified,
        log=log,
    )
