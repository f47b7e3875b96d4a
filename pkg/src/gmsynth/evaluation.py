"""Divergence-based evaluation of learned preference functions.

Predicted and ground-truth scores over a held-out sample set are clamped
at zero, normalized into discrete distributions, and compared with the
Jensen-Shannon divergence (natural log, so the ceiling is ln 2).  The
experiment runner sweeps oracle scenarios, training-set sizes and the two
hyperparameter optimizers, and reports one JSD and wall time per cell.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from gmsynth.errors import AllZeroScores, DimensionMismatch, GmsError
from gmsynth.gpr import FitConfig, fit_gradient_ascent, fit_rprop, predict_batch
from gmsynth.materials import (
    default_glassy_user,
    default_translucent_user,
    oracle_score,
)
from gmsynth.seeding import derive_rng

LN2 = float(np.log(2.0))

OPTIMIZERS = {"rprop": fit_rprop, "gradient-ascent": fit_gradient_ascent}


@dataclass(frozen=True)
class DiscreteDistribution:
    """Nonnegative weights summing to one over an explicit support."""

    weights: np.ndarray
    support: tuple = ()

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise GmsError("weights must form a non-empty vector")
        if np.any(w < 0):
            raise GmsError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise GmsError("weights must sum to 1 within 1e-9")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", tuple(self.support))


def normalize(scores, support=()):
    """Clamp negatives to zero and normalize into a distribution."""
    s = np.asarray(scores, dtype=np.float64)
    s = np.clip(s, 0.0, None)
    total = float(s.sum())
    if total <= 0.0:
        raise AllZeroScores("cannot normalize: all scores are zero")
    return DiscreteDistribution(weights=s / total, support=support)


def jsd(p, q):
    """Jensen-Shannon divergence (natural log) between two distributions."""
    pw = p.weights if isinstance(p, DiscreteDistribution) else np.asarray(p, dtype=np.float64)
    qw = q.weights if isinstance(q, DiscreteDistribution) else np.asarray(q, dtype=np.float64)
    if pw.shape != qw.shape:
        raise DimensionMismatch("distributions live on different supports")
    if (
        isinstance(p, DiscreteDistribution)
        and isinstance(q, DiscreteDistribution)
        and p.support
        and q.support
        and p.support != q.support
    ):
        raise DimensionMismatch("distributions live on different supports")
    mix = 0.5 * (pw + qw)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(pw > 0, pw * np.log(pw / mix), 0.0)
        right = np.where(qw > 0, qw * np.log(qw / mix), 0.0)
    return float(0.5 * np.sum(left) + 0.5 * np.sum(right))


def evaluate_jsd(model, heldout_inputs, heldout_truth):
    """JSD between model predictions and ground truth on held-out samples."""
    predicted, _ = predict_batch(model, heldout_inputs)
    return jsd(normalize(predicted), normalize(heldout_truth))


@dataclass(frozen=True)
class OracleScenario:
    """A named ground-truth user plus the sampling seed for its dataset."""

    name: str
    m: int
    user: object
    seed: int = 0


@dataclass(frozen=True)
class ReportRow:
    scene: str
    m: int
    n: int
    optimizer: str
    jsd: float
    seconds: float
    status: str = "ok"


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)

    def to_csv(self):
        lines = ["scene,m,n,optimizer,jsd,seconds,status"]
        for r in self.rows:
            lines.append(
                f"{r.scene},{r.m},{r.n},{r.optimizer},{repr(r.jsd)},{repr(r.seconds)},{r.status}"
            )
        return "\n".join(lines) + "\n"


def default_scenarios(ms=(19, 38), seed=0):
    scenarios = []
    for m in ms:
        scenarios.append(OracleScenario(f"glassy-m{m}", m, default_glassy_user(m, seed), seed))
        scenarios.append(
            OracleScenario(f"translucent-m{m}", m, default_translucent_user(m, seed), seed)
        )
    return scenarios


def scenario_dataset(scenario, total=1000):
    """Uniform materials scored by the scenario's oracle, fixed order."""
    rng = derive_rng(scenario.seed, f"eval/dataset/{scenario.name}")
    X = rng.random((total, scenario.m))
    return X, oracle_score(scenario.user, X)


def run_table2(
    oracles=None,
    ms=(19, 38),
    ns=(150, 250, 500),
    optimizers=("rprop", "gradient-ascent"),
    total=1000,
    max_iters=200,
    seed=0,
):
    """Cross-validated optimizer comparison over oracle scenarios.

    Per cell: fit on the first n samples, predict the held-out remainder,
    normalize both score vectors over it, record JSD and wall time.  Fit
    failures become flagged rows rather than aborting the sweep.
    """
    scenarios = oracles if oracles is not None else default_scenarios(ms, seed)
    report = ExperimentReport()
    for scenario in scenarios:
        X, truth = scenario_dataset(scenario, total)
        for n in ns:
            if n >= total:
                raise GmsError(f"n={n} leaves no held-out samples out of {total}")
            for name in optimizers:
                fit = OPTIMIZERS[name]
                start = time.perf_counter()
                try:
                    model = fit(X[:n], truth[:n], config=FitConfig(max_iters=max_iters))
                    value = evaluate_jsd(model, X[n:], truth[n:])
                    status = "ok"
                except GmsError as exc:
                    value, status = float("nan"), f"failed: {exc}"
                elapsed = time.perf_counter() - start
                report.rows.append(
                    ReportRow(scenario.name, scenario.m, n, name, value, elapsed, status)
                )
    return report
