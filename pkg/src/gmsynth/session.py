"""Session state and the end-to-end synthesis pipeline.

A session accumulates scored gallery items over any number of rounds,
owns at most one fitted preference model and one latent model at a time,
and tracks fit generations so downstream artifacts (grids, previews) can
report which model revision they came from.  Fitted models are immutable;
a refit replaces the reference and bumps the generation.

``run_gms`` is the scripted pipeline: fit preferences, embed the samples
scoring above the threshold, draw recommendations, pick the strongest one
as the variant-generation seed, and build the color-coded grids.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from gmsynth.decoder import DecoderNetwork
from gmsynth.errors import GmsError, NotFitted
from gmsynth.gplvm import (
    DEFAULT_Z,
    GplvmConfig,
    fit_gplvm,
    latent_from_document,
    latent_to_document,
)
from gmsynth.gpr import (
    FitConfig,
    fit_gradient_ascent,
    fit_rprop,
    model_from_document,
    model_to_document,
)
from gmsynth.latentmaps import (
    PREFERENCE_RESOLUTION,
    SIMILARITY_RESOLUTION,
    LatentGrid,
    build_latent_grid,
)
from gmsynth.materials import MaterialParams, PreferenceSample, SCORE_MAX, SCORE_MIN
from gmsynth.recommend import RecommendationConfig, RecommendationSet, recommend
from gmsynth.seeding import derive_rng, resolve_root

SESSION_HEADER = "gms-session v1"
DEFAULT_TAU = 4.0


@dataclass
class SessionConfig:
    tau: float = DEFAULT_TAU
    recommend_count: int = 50
    z: int = DEFAULT_Z
    r_preference: int = PREFERENCE_RESOLUTION
    r_similarity: int = SIMILARITY_RESOLUTION
    seed: int = 0


@dataclass
class Session:
    """Mutable workspace for one user's scoring and synthesis rounds."""

    id: str
    m: int = 19
    config: SessionConfig = field(default_factory=SessionConfig)
    items: list = field(default_factory=list)  # gallery materials, id = index
    scores: dict = field(default_factory=dict)  # item id -> score
    sample_revision: int = 0
    preference_model: object = None
    preference_generation: int = 0
    preference_fitted_revision: int = -1
    latent_model: object = None
    latent_generation: int = 0
    latent_fitted_revision: int = -1
    decoder: DecoderNetwork = None
    gallery_rounds: int = 0

    def add_gallery(self, count):
        """Append a new round of uniform gallery items; returns (id, params)."""
        rng = derive_rng(
            self.config.seed, f"session/gallery/round-{self.gallery_rounds}"
        )
        self.gallery_rounds += 1
        new = []
        for _ in range(count):
            item = MaterialParams(rng.random(self.m))
            self.items.append(item)
            new.append((len(self.items) - 1, item))
        return new

    def set_score(self, item_id, score):
        """Score or re-score one gallery item (updates, never duplicates)."""
        if not (0 <= item_id < len(self.items)):
            raise GmsError(f"unknown gallery item {item_id}")
        if not (SCORE_MIN <= score <= SCORE_MAX):
            raise GmsError(f"score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")
        self.scores[int(item_id)] = float(score)
        self.sample_revision += 1

    def add_sample(self, sample):
        """Register an externally scored material as a gallery item."""
        self.items.append(sample.params)
        self.scores[len(self.items) - 1] = sample.score
        self.sample_revision += 1
        return len(self.items) - 1

    def samples(self):
        return [
            PreferenceSample(self.items[i], s) for i, s in sorted(self.scores.items())
        ]

    def scored_matrix(self):
        ids = sorted(self.scores)
        X = np.stack([self.items[i].values for i in ids])
        U = np.array([self.scores[i] for i in ids])
        return X, U

    def fit_preference(self, optimizer="rprop", max_iters=200):
        if len(self.scores) < 2:
            raise GmsError("need at least 2 scored samples to fit preferences")
        X, U = self.scored_matrix()
        fit = fit_rprop if optimizer == "rprop" else fit_gradient_ascent
        model = fit(X, U, config=FitConfig(max_iters=max_iters))
        self.preference_model = model
        self.preference_generation += 1
        self.preference_fitted_revision = self.sample_revision
        return model

    def high_scoring(self, tau):
        """Materials scoring strictly above tau, best first, capped at z."""
        ranked = sorted(
            ((s, i) for i, s in self.scores.items() if s > tau),
            key=lambda t: (-t[0], t[1]),
        )
        return [self.items[i] for _, i in ranked[: self.config.z]]

    def fit_latent(self, tau=None, max_iters=200):
        tau = self.config.tau if tau is None else tau
        rows = self.high_scoring(tau)
        if len(rows) < 2:
            raise GmsError(
                f"latent embedding needs at least 2 samples scoring above "
                f"tau={tau}, have {len(rows)}"
            )
        model = fit_gplvm(
            np.stack([r.values for r in rows]), GplvmConfig(max_iters=max_iters)
        )
        self.latent_model = model
        self.latent_generation += 1
        self.latent_fitted_revision = self.sample_revision
        return model

    def require_preference(self):
        if self.preference_model is None:
            raise NotFitted("preference model is not fitted")
        return self.preference_model

    def require_latent(self):
        if self.latent_model is None:
            raise NotFitted("latent model is not fitted")
        return self.latent_model

    def require_decoder(self):
        if self.decoder is None:
            raise NotFitted("no decoder network loaded")
        return self.decoder


@dataclass(frozen=True)
class GmsRun:
    """Artifacts of one full pipeline pass."""

    recommendations: RecommendationSet
    grids: LatentGrid
    chosen: MaterialParams
    chosen_score: float
    preference_generation: int
    latent_generation: int


def run_gms(session, tau=None, r=None, count=None, max_iters=200):
    """Score-to-grids pipeline over the session's accumulated samples."""
    cfg = session.config
    tau = cfg.tau if tau is None else float(tau)
    r_pref = cfg.r_preference if r is None else int(r)
    count = cfg.recommend_count if count is None else int(count)
    session.require_decoder()

    pref = session.fit_preference(max_iters=max_iters)
    lat = session.fit_latent(tau=tau, max_iters=max_iters)
    recs = recommend(
        pref,
        RecommendationConfig(tau=tau, count=count, seed=cfg.seed),
    )
    best_idx = max(range(len(recs.items)), key=lambda i: (recs.items[i][1], -i))
    chosen, chosen_score = recs.items[best_idx]
    grids = build_latent_grid(
        pref, lat, session.decoder, chosen,
        r_preference=r_pref, r_similarity=cfg.r_similarity,
    )
    return GmsRun(
        recommendations=recs,
        grids=grids,
        chosen=chosen,
        chosen_score=chosen_score,
        preference_generation=session.preference_generation,
        latent_generation=session.latent_generation,
    )


# ---------------------------------------------------------------------------
# Versioned session documents.  Decoder weights stay external (binary blob);
# factorizations are always recomputed on load.


def session_to_document(session):
    return {
        "header": SESSION_HEADER,
        "id": session.id,
        "m": session.m,
        "config": {
            "tau": session.config.tau,
            "recommend_count": session.config.recommend_count,
            "z": session.config.z,
            "r_preference": session.config.r_preference,
            "r_similarity": session.config.r_similarity,
            "seed": session.config.seed,
        },
        "items": [[float(v) for v in item.values] for item in session.items],
        "scores": {str(i): float(s) for i, s in sorted(session.scores.items())},
        "gallery_rounds": session.gallery_rounds,
        "sample_revision": session.sample_revision,
        "preference_model": (
            model_to_document(session.preference_model) if session.preference_model else None
        ),
        "preference_generation": session.preference_generation,
        "latent_model": (
            latent_to_document(session.latent_model) if session.latent_model else None
        ),
        "latent_generation": session.latent_generation,
    }


def session_from_document(doc, session_id=None):
    if doc.get("header") != SESSION_HEADER:
        raise GmsError(f"expected header '{SESSION_HEADER}', got {doc.get('header')!r}")
    cfg = doc.get("config", {})
    session = Session(
        id=session_id or doc["id"],
        m=int(doc["m"]),
        config=SessionConfig(
            tau=float(cfg.get("tau", DEFAULT_TAU)),
            recommend_count=int(cfg.get("recommend_count", 50)),
            z=int(cfg.get("z", DEFAULT_Z)),
            r_preference=int(cfg.get("r_preference", PREFERENCE_RESOLUTION)),
            r_similarity=int(cfg.get("r_similarity", SIMILARITY_RESOLUTION)),
            seed=int(cfg.get("seed", 0)),
        ),
    )
    session.items = [MaterialParams(np.asarray(v)) for v in doc["items"]]
    session.scores = {int(k): float(v) for k, v in doc.get("scores", {}).items()}
    session.gallery_rounds = int(doc.get("gallery_rounds", 0))
    session.sample_revision = int(doc.get("sample_revision", 0))
    if doc.get("preference_model"):
        session.preference_model = model_from_document(doc["preference_model"])
        session.preference_generation = int(doc.get("preference_generation", 1))
        session.preference_fitted_revision = session.sample_revision
    if doc.get("latent_model"):
        session.latent_model = latent_from_document(doc["latent_model"])
        session.latent_generation = int(doc.get("latent_generation", 1))
        session.latent_fitted_revision = session.sample_revision
    return session


def export_session(path, session):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(session_to_document(session), fh, indent=1)


def import_session(path):
    with open(path, "r", encoding="utf-8") as fh:
        return session_from_document(json.load(fh))
