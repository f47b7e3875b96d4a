"""Threshold rejection sampling over a learned preference model.

Proposals are uniform draws; any proposal whose predicted score falls below
the threshold gets a short greedy hill climb (Gaussian coordinate
perturbations, keeping only strictly improving moves) before it is finally
accepted or rejected.  An exhausted proposal budget raises BudgetExhausted
carrying the partial result, so an infeasible threshold terminates
deterministically instead of looping forever.
"""

from dataclasses import dataclass

import numpy as np

from gmsynth.errors import BudgetExhausted, GmsError
from gmsynth.gpr import cross_covariance
from gmsynth.materials import MaterialParams, SCORE_MAX, SCORE_MIN
from gmsynth.seeding import derive_rng


@dataclass(frozen=True)
class RecommendationConfig:
    """Threshold, output size, budget and hill-climb settings."""

    tau: float
    count: int
    budget: int = 10_000
    hillclimb_steps: int = 10
    hillclimb_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not (SCORE_MIN <= self.tau <= SCORE_MAX):
            raise GmsError(f"threshold {self.tau} outside [{SCORE_MIN}, {SCORE_MAX}]")
        if self.count < 1:
            raise GmsError("count must be at least 1")
        if self.budget < 1:
            raise GmsError("budget must be at least 1")
        if self.hillclimb_steps < 0:
            raise GmsError("hillclimb_steps must be nonnegative")
        if self.hillclimb_sigma <= 0:
            raise GmsError("hillclimb_sigma must be positive")


@dataclass(frozen=True)
class RecommendationSet:
    """Accepted materials with their predicted scores and sampler telemetry."""

    items: tuple  # of (MaterialParams, predicted score)
    acceptance_rate: float
    hillclimb_invocations: int


def generate_gallery(count, m, seed):
    """Uniform gallery of ``count`` materials, deterministic given seed."""
    if count < 1:
        raise GmsError("count must be at least 1")
    rng = derive_rng(seed, "material-space/uniform")
    return [MaterialParams(rng.random(m)) for _ in range(count)]


def _predict_score(model, vector):
    # mean-only path: skips the variance solve the sampler never needs.
    # Arithmetic is kept identical to predict() so accepted items re-score
    # to the exact same float; negative means clamp to 0 (score domain).
    ks = cross_covariance(model.training_inputs, vector[None, :], model.kernel)
    return max(float((ks.T @ model.weights)[0]), 0.0)


def recommend(model, config):
    """Draw ``config.count`` materials whose predicted score clears tau."""
    rng = derive_rng(config.seed, "recommender/proposals")
    m = model.m
    total_budget = config.budget * config.count
    items = []
    proposals = 0
    hillclimb_invocations = 0

    while len(items) < config.count and proposals < total_budget:
        proposals += 1
        x = rng.random(m)
        score = _predict_score(model, x)
        if score < config.tau and config.hillclimb_steps > 0:
            hillclimb_invocations += 1
            for _ in range(config.hillclimb_steps):
                candidate = np.clip(x + rng.normal(0.0, config.hillclimb_sigma, size=m), 0.0, 1.0)
                cand_score = _predict_score(model, candidate)
                if cand_score > score:
                    x, score = candidate, cand_score
        if score >= config.tau:
            items.append((MaterialParams(x), score))

    acceptance_rate = len(items) / proposals if proposals else 0.0
    if len(items) < config.count:
        raise BudgetExhausted(
            f"budget of {total_budget} proposals exhausted with "
            f"{len(items)}/{config.count} accepted",
            items=tuple(items),
            acceptance_rate=acceptance_rate,
            hillclimb_invocations=hillclimb_invocations,
        )
    return RecommendationSet(
        items=tuple(items),
        acceptance_rate=acceptance_rate,
        hillclimb_invocations=hillclimb_invocations,
    )


def threshold_sweep(model, taus, count, budget=10_000, hillclimb_steps=10, seed=0):
    """Acceptance statistics per threshold, one independent run each.

    Every run restarts from the same seed root so rows are comparable.
    Budget exhaustion becomes a flagged row instead of an error.
    Returns rows of dicts with tau, acceptance_rate, mean_predicted_score,
    and exhausted.
    """
    taus = [float(t) for t in taus]
    if sorted(taus) != taus:
        raise GmsError("thresholds must be sorted ascending")
    rows = []
    for tau in taus:
        config = RecommendationConfig(
            tau=tau, count=count, budget=budget, hillclimb_steps=hillclimb_steps, seed=seed
        )
        try:
            result = recommend(model, config)
            exhausted = False
        except BudgetExhausted as exc:
            result = exc
            exhausted = True
        scores = [score for _, score in result.items]
        rows.append(
            {
                "tau": tau,
                "acceptance_rate": result.acceptance_rate,
                "mean_predicted_score": float(np.mean(scores)) if scores else float("nan"),
                "exhausted": exhausted,
            }
        )
    return rows
