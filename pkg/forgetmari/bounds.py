"""
Bounds linking marginal information to detectability and perplexity gaps.

A ``DetectionGame`` draws a uniform position t, a label Z with P[Z=1] = π,
and a token from ``pr[t]`` when Z=1 or ``pd[t]`` when Z=0. Three guarantees are
evaluated here and checked against exact or Monte-Carlo oracles:

* detection accuracy: ``acc ≤ 1 − H₂⁻¹(H₂(π) − I)``;
* self-perplexity gap along a path u, scaled by the pathwise floor γ;
* neighborhood gap for paths U drawn from p^u, holding up to a tail term.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as rng_streams
from .const import BOUNDARY_CLAMP, EXACT_TOL
from .exceptions import DegenerateGamma, DomainError, ShapeMismatch, SupportMismatch
from .infomath import (
    binary_entropy,
    binary_entropy_inv,
    js_divergence,
    kl_pointwise_coeff,
    mix,
    weighted_js_divergence,
)
from .langmodel import PositionMarginals, sequence_score

_LOGGER = logging.getLogger(__name__)

MIXTURE_TOL = 1e-9
SIGMA_SLACK = 3.0


@dataclass(frozen=True)
class DetectionGame:
    pr: PositionMarginals
    pd: PositionMarginals
    pi: float = 0.5
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.pr.per_t.shape != self.pd.per_t.shape:
            raise ShapeMismatch(
                f"pr and pd shapes differ: {self.pr.per_t.shape} vs {self.pd.per_t.shape}"
            )
        if not 0.0 < self.pi < 1.0:
            raise DomainError(f"pi must lie in (0, 1), got {self.pi}")
        if self.alpha is not None:
            if not 0.0 < self.alpha < 1.0:
                raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
            if self._raw_pu().min() < -MIXTURE_TOL:
                raise DomainError(f"pd is not a mixture of pr at alpha={self.alpha}")

    @classmethod
    def from_marginals(
        cls, pr: PositionMarginals, pu: PositionMarginals, alpha: float, pi: float = 0.5
    ) -> "DetectionGame":
        if pr.per_t.shape != pu.per_t.shape:
            raise ShapeMismatch(f"marginal shapes differ: {pr.per_t.shape} vs {pu.per_t.shape}")
        pd = PositionMarginals(mix(pr.per_t, pu.per_t, alpha), "union", pr.batch_size)
        return cls(pr=pr, pd=pd, pi=pi, alpha=alpha)

    def _raw_pu(self) -> np.ndarray:
        return (self.pd.per_t - self.alpha * self.pr.per_t) / (1.0 - self.alpha)

    @property
    def pu(self) -> PositionMarginals:
        """p^u recovered from the mixture; needs ``alpha``."""
        if self.alpha is None:
            raise DomainError("recovering pu needs the mixture weight alpha")
        pu = np.clip(self._raw_pu(), 0.0, None)
        return PositionMarginals(pu / pu.sum(axis=1, keepdims=True), "unlearn")

    @property
    def T(self) -> int:
        return self.pr.T


@dataclass
class BoundReport:
    mari: float
    pi: float
    bayes_accuracy_exact: float
    accuracy_bound: float
    gamma: float
    alpha: float
    M: float
    C: float
    epsilon: float
    self_gap_bound: float
    neighborhood_gap_bound: float
    tail_probability: float
    self_gap: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CampaignResult:
    name: str
    instances: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    details: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, slack: float, holds: bool, detail: Optional[dict] = None) -> None:
        self.instances += 1
        self.violations += 0 if holds else 1
        self.worst_slack = min(self.worst_slack, slack)
        if detail is not None and not holds:
            self.details.append(detail)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "instances": self.instances,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
            "passed": self.passed,
            "details": self.details,
        }


# ============================================================
# Detection accuracy
# ============================================================


def accuracy_bound(mari: float, pi: float = 0.5) -> float:
    """1 − H₂⁻¹(H₂(π) − I): best accuracy any detector can reach given I nats."""
    if not 0.0 < pi < 1.0:
        raise DomainError(f"pi must lie in (0, 1), got {pi}")
    h_pi = binary_entropy(pi)
    if mari < -BOUNDARY_CLAMP or mari > h_pi + BOUNDARY_CLAMP:
        raise DomainError(f"mari must lie in [0, H2(pi)={h_pi}], got {mari}")
    return 1.0 - binary_entropy_inv(max(h_pi - mari, 0.0))


def bayes_accuracy_exact(game: DetectionGame) -> float:
    """Exact Bayes-optimal accuracy by enumerating every (t, x)."""
    joint = np.maximum((1.0 - game.pi) * game.pd.per_t, game.pi * game.pr.per_t)
    return math.fsum(joint.ravel()) / game.T


def game_mutual_information(game: DetectionGame) -> float:
    """I(X; Z) of the game, averaged over positions."""
    mi = np.atleast_1d(weighted_js_divergence(game.pd.per_t, game.pr.per_t, game.pi))
    return math.fsum(mi) / mi.size


def _tokenwise_js(game: DetectionGame) -> float:
    js = np.atleast_1d(js_divergence(game.pd.per_t, game.pr.per_t))
    return math.fsum(js) / js.size


def tight_game(p_star: float, pi: float = 0.5) -> DetectionGame:
    """Single-position game whose posteriors P(Z=1|x) take only p* and 1 − p*.

    Its Bayes accuracy is exactly 1 − p* and meets ``accuracy_bound``.
    """
    if not 0.0 < pi < 1.0:
        raise DomainError(f"pi must lie in (0, 1), got {pi}")
    if not 0.0 <= p_star <= min(pi, 1.0 - pi):
        raise DomainError(f"p_star must lie in [0, min(pi, 1-pi)], got {p_star}")
    if p_star == 0.5:
        q = 0.5
    else:
        q = (1.0 - p_star - pi) / (1.0 - 2.0 * p_star)
    pr = np.array([q * p_star, (1.0 - q) * (1.0 - p_star)]) / pi
    pd = np.array([q * (1.0 - p_star), (1.0 - q) * p_star]) / (1.0 - pi)
    return DetectionGame(
        pr=PositionMarginals((pr / pr.sum())[None, :], "retain"),
        pd=PositionMarginals((pd / pd.sum())[None, :], "union"),
        pi=pi,
    )


# ============================================================
# Perplexity gaps
# ============================================================


def _check_path(pr: PositionMarginals, u_path: Sequence[int]) -> np.ndarray:
    u = np.asarray(u_path, dtype=np.int64)
    if u.ndim != 1 or u.size != pr.T:
        raise ShapeMismatch(f"path must have one token per position ({pr.T}), got {u.size}")
    if u.min() < 0 or u.max() >= pr.vocab_size:
        raise DomainError("path holds a token outside the vocabulary")
    return u


def pathwise_gamma(pr: PositionMarginals, pu: PositionMarginals, u_path: Sequence[int]) -> float:
    """γ = min_t min{p^u_t(u_t), p^r_t(u_t)}."""
    u = _check_path(pr, u_path)
    t = np.arange(u.size)
    return float(np.minimum(pu.per_t[t, u], pr.per_t[t, u]).min())


def self_gap_bound(mari: float, gamma: float, alpha: float) -> float:
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if mari < -BOUNDARY_CLAMP:
        raise DomainError(f"mari must be non-negative, got {mari}")
    return 2.0 * math.sqrt(2.0) / (gamma * (1.0 - alpha)) * math.sqrt(max(mari, 0.0))


def _log_ratio(pr: PositionMarginals, pu: PositionMarginals) -> np.ndarray:
    """ln(p^r/p^u) on the support of p^u, 0 elsewhere."""
    if pr.per_t.shape != pu.per_t.shape:
        raise ShapeMismatch(f"marginal shapes differ: {pr.per_t.shape} vs {pu.per_t.shape}")
    support = pu.per_t > 0
    if np.any(support & (pr.per_t <= 0)):
        raise SupportMismatch("pr vanishes where pu has mass; the ratio cap M is infinite")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(support, np.log(pr.per_t) - np.log(pu.per_t), 0.0)


def instance_M(pr: PositionMarginals, pu: PositionMarginals) -> float:
    """Largest likelihood ratio in either direction over the support of p^u."""
    return float(math.exp(np.abs(_log_ratio(pr, pu)).max()))


def instance_C(pr: PositionMarginals, pu: PositionMarginals) -> float:
    """Largest squared log-ratio over the support of p^u."""
    return float((_log_ratio(pr, pu) ** 2).max())


def _tail(T: int, epsilon: float, C: float) -> float:
    if C == 0.0:
        return 0.0
    return 2.0 * math.exp(-T * epsilon**2 / (2.0 * C))


def neighborhood_gap_bound(
    mari: float,
    M: float,
    alpha: float,
    epsilon: float,
    T: int,
    pr: PositionMarginals,
    pu: PositionMarginals,
) -> tuple[float, float, float]:
    """(bound, tail_probability, C) for paths U with U_t ~ p^u_t.

    ``M = 1`` means p^r = p^u on the support; the coefficient takes its
    limit value 1 there.
    """
    if M < 1.0:
        raise DomainError(f"M must be at least 1, got {M}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if epsilon < 0 or T < 1 or mari < -BOUNDARY_CLAMP:
        raise DomainError("epsilon and mari must be non-negative and T positive")
    coeff = kl_pointwise_coeff(M) if M > 1.0 else 1.0
    C = instance_C(pr, pu)
    bound = coeff * (math.sqrt(2.0) / (1.0 - alpha)) * math.sqrt(max(mari, 0.0)) + epsilon
    return bound, _tail(T, epsilon, C), C


def _require_alpha(game: DetectionGame) -> float:
    if game.alpha is None:
        raise DomainError("perplexity-gap bounds need the game's mixture weight alpha")
    return game.alpha


def verify_thm1_empirical(game: DetectionGame, u_path: Sequence[int]) -> dict:
    """Measured self gap |S(u,u) − S(u,r)| against its γ-scaled bound."""
    alpha = _require_alpha(game)
    pu = game.pu
    gamma = pathwise_gamma(game.pr, pu, u_path)
    if gamma <= 0.0:
        raise DegenerateGamma("the pathwise probability floor is zero")
    gap = sequence_score(pu.per_t, u_path) - sequence_score(game.pr.per_t, u_path)
    bound = self_gap_bound(_tokenwise_js(game), gamma, alpha)
    return {"gap": gap, "bound": bound, "gamma": gamma, "holds": abs(gap) <= bound + EXACT_TOL}


def sample_paths(pu: PositionMarginals, n_draws: int, gen: np.random.Generator) -> np.ndarray:
    """(n_draws, T) paths with U_t ~ p^u_t independently across t."""
    cdf = np.cumsum(pu.per_t, axis=1)
    draws = gen.random((n_draws, pu.T, 1))
    idx = (draws >= cdf[None, :, :]).sum(axis=2)
    return np.minimum(idx, pu.vocab_size - 1)


def verify_thm2_empirical(
    game: DetectionGame, n_draws: int, epsilon: float, seed: int = 0
) -> dict:
    """Monte-Carlo frequency of neighborhood gaps exceeding the bound."""
    alpha = _require_alpha(game)
    if n_draws < 1:
        raise DomainError(f"n_draws must be positive, got {n_draws}")
    pr, pu = game.pr, game.pu
    M = instance_M(pr, pu)
    bound, tail, C = neighborhood_gap_bound(_tokenwise_js(game), M, alpha, epsilon, game.T, pr, pu)

    log_ratio = _log_ratio(pr, pu)
    paths = sample_paths(pu, n_draws, rng_streams.stream(seed, "bounds", "thm2"))
    gaps = np.abs(log_ratio[np.arange(game.T)[None, :], paths].mean(axis=1))
    violation_rate = float(np.count_nonzero(gaps > bound + EXACT_TOL)) / n_draws

    budget = min(max(tail, 0.0), 1.0)
    sigma = math.sqrt(budget * (1.0 - budget) / n_draws)
    return {
        "violation_rate": violation_rate,
        "tail_bound": tail,
        "bound": bound,
        "max_gap": float(gaps.max()),
        "M": M,
        "C": C,
        "holds": violation_rate <= budget + SIGMA_SLACK * sigma,
    }


def evaluate_bounds(game: DetectionGame, u_path: Sequence[int], epsilon: float) -> BoundReport:
    """Every bound of a game at once.

    ``mari`` is the game's mutual information at its prior π; the perplexity
    bounds use the equal-prior value.
    """
    alpha = _require_alpha(game)
    pr, pu = game.pr, game.pu
    mari = game_mutual_information(game)
    js = _tokenwise_js(game)
    gamma = pathwise_gamma(pr, pu, u_path)
    if gamma <= 0.0:
        raise DegenerateGamma("the pathwise probability floor is zero")
    M = instance_M(pr, pu)
    nbhd, tail, C = neighborhood_gap_bound(js, M, alpha, epsilon, game.T, pr, pu)
    return BoundReport(
        mari=mari,
        pi=game.pi,
        bayes_accuracy_exact=bayes_accuracy_exact(game),
        accuracy_bound=accuracy_bound(min(mari, binary_entropy(game.pi)), game.pi),
        gamma=gamma,
        alpha=alpha,
        M=M,
        C=C,
        epsilon=epsilon,
        self_gap_bound=self_gap_bound(js, gamma, alpha),
        neighborhood_gap_bound=nbhd,
        tail_probability=tail,
        self_gap=sequence_score(pu.per_t, u_path) - sequence_score(pr.per_t, u_path),
    )


# ============================================================
# Random instances and campaigns
# ============================================================


def random_marginals(
    gen: np.random.Generator,
    T: int,
    V: int,
    concentration: float = 1.0,
    source_tag: str = "retain",
) -> PositionMarginals:
    """Dirichlet-distributed per-position marginals, strictly positive."""
    per_t = gen.dirichlet(np.full(V, concentration), size=T)
    per_t = np.maximum(per_t, 1e-300)
    return PositionMarginals(per_t / per_t.sum(axis=1, keepdims=True), source_tag)


def random_game(
    gen: np.random.Generator,
    T: int,
    V: int,
    pi: Optional[float] = None,
    alpha: Optional[float] = None,
    concentration: float = 1.0,
) -> DetectionGame:
    pr = random_marginals(gen, T, V, concentration, "retain")
    pu = random_marginals(gen, T, V, concentration, "unlearn")
    alpha = float(gen.uniform(0.05, 0.95)) if alpha is None else alpha
    pi = float(gen.uniform(0.05, 0.95)) if pi is None else pi
    return DetectionGame.from_marginals(pr, pu, alpha, pi)


def capped_game(gen: np.random.Generator, T: int, V: int, M: float = 4.0) -> DetectionGame:
    """Game whose p^u/p^r ratios stay within [1/M, M]."""
    pr = random_marginals(gen, T, V, 1.0, "retain")
    half = math.sqrt(M)
    weights = pr.per_t * np.exp(gen.uniform(-math.log(half), math.log(half), size=(T, V)))
    pu = PositionMarginals(weights / weights.sum(axis=1, keepdims=True), "unlearn")
    return DetectionGame.from_marginals(pr, pu, float(gen.uniform(0.1, 0.9)))


def near_degenerate_game(gen: np.random.Generator, T: int, V: int, floor: float = 1e-8):
    """Game plus a path through a token p^u nearly rules out at every position."""
    pr = random_marginals(gen, T, V, 1.0, "retain")
    pu = gen.dirichlet(np.ones(V), size=T)
    pu[:, 0] = floor
    pu[:, 1:] *= (1.0 - floor) / pu[:, 1:].sum(axis=1, keepdims=True)
    game = DetectionGame.from_marginals(
        pr, PositionMarginals(pu, "unlearn"), float(gen.uniform(0.1, 0.9))
    )
    return game, np.zeros(T, dtype=np.int64)


def prop1_campaign(
    n_instances: int = 1000, seed: int = 0, max_T: int = 6, max_V: int = 8
) -> CampaignResult:
    """Exact accuracy never exceeds the information bound."""
    gen = rng_streams.stream(seed, "bounds", "prop1")
    result = CampaignResult("accuracy")
    for i in range(n_instances):
        game = random_game(gen, int(gen.integers(1, max_T + 1)), int(gen.integers(2, max_V + 1)))
        mari = min(game_mutual_information(game), binary_entropy(game.pi))
        acc, bound = bayes_accuracy_exact(game), accuracy_bound(mari, game.pi)
        detail = {"instance": i, "acc": acc, "bound": bound}
        result.record(bound - acc, acc <= bound + EXACT_TOL, detail)
    _LOGGER.info(f"accuracy campaign: {result.violations}/{result.instances} violations")
    return result


def thm1_campaign(
    n_instances: int = 1000, seed: int = 0, max_T: int = 6, max_V: int = 8
) -> CampaignResult:
    """Self gaps stay under their bound, including near-zero-γ paths."""
    gen = rng_streams.stream(seed, "bounds", "thm1")
    result = CampaignResult("self_gap")
    for i in range(n_instances):
        T, V = int(gen.integers(1, max_T + 1)), int(gen.integers(2, max_V + 1))
        if i % 10 == 9:
            game, path = near_degenerate_game(gen, T, V)
        else:
            game = random_game(gen, T, V, pi=0.5)
            path = sample_paths(game.pu, 1, gen)[0]
        out = verify_thm1_empirical(game, path)
        result.record(out["bound"] - abs(out["gap"]), out["holds"], {"instance": i, **out})
    _LOGGER.info(f"self-gap campaign: {result.violations}/{result.instances} violations")
    return result


def thm2_campaign(
    n_instances: int = 100,
    seed: int = 0,
    T: int = 64,
    V: int = 8,
    n_draws: int = 10_000,
    epsilon: float = 0.3,
    M: float = 4.0,
) -> CampaignResult:
    """Neighborhood-gap violation rates stay within the tail budget."""
    gen = rng_streams.stream(seed, "bounds", "thm2-instances")
    result = CampaignResult("neighborhood_gap")
    for i in range(n_instances):
        game = capped_game(gen, T, V, M)
        out = verify_thm2_empirical(game, n_draws, epsilon, seed=seed + i)
        budget = min(max(out["tail_bound"], 0.0), 1.0)
        result.record(budget - out["violation_rate"], out["holds"], {"instance": i, **out})
    _LOGGER.info(f"neighborhood-gap campaign: {result.violations}/{result.instances} violations")
    return result
