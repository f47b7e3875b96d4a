"""Labeled RNG derivation from a single seed root.

Every stochastic step in the library draws from a generator derived as
``derive_rng(root, "some-label")``.  Labels are hashed into the spawn key
of a ``SeedSequence`` so that adding a new consumer never perturbs the
streams of existing ones.
"""

import hashlib
import os

import numpy as np

SEED_ENV_VAR = "GMS_SEED"


def resolve_root(seed=None):
    """Return the effective seed root: env override, explicit value, or 0."""
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return 0 if seed is None else int(seed)


def derive_rng(root, label):
    """Derive a deterministic Generator from (root, label)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return np.random.default_rng(np.random.SeedSequence(int(root), spawn_key=words))
