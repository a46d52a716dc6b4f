"""Shared generators for the test suite."""

import warnings
from itertools import product

import numpy as np

from oscdecay.numop import CutoffSpec, GridSpec, ResolutionWarning, build_operator
from oscdecay.polycore import HomogeneousPolynomial


def random_mixed_polynomial(rng, n, d, max_terms=3):
    keys = [(a, b) for k in range(1, d)
            for a in product(range(d + 1), repeat=n) if sum(a) == k
            for b in product(range(d + 1), repeat=n) if sum(b) == d - k]
    idx = rng.choice(len(keys), size=min(len(keys), int(rng.integers(1, max_terms + 1))), replace=False)
    return HomogeneousPolynomial(n, d, {keys[i]: int(rng.integers(1, 4)) * int(rng.choice([-1, 1]))
                                        for i in idx})


def random_operator(seed, max_side=1024):
    """Small random operator: random phase, cutoff kind, damping and grids."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    S = random_mixed_polynomial(rng, n, int(rng.integers(2, 7)))
    top = max_side if n == 1 else int(np.sqrt(max_side))
    N = int(rng.integers(8, top - 1))
    kind = str(rng.choice(["smooth_bump", "flat_top", "cosine_taper"]))
    cutoff = CutoffSpec(kind, plateau=0.0 if kind == "smooth_bump" else 0.5)
    sigma = float(rng.choice([0.0, 0.0, 0.3, -0.2]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        return build_operator(S, float(rng.uniform(0, 30)), (sigma, 0.0), cutoff,
                              GridSpec(n, 1.0, N), GridSpec(n, 1.0, N + int(rng.integers(0, 3))))


def dense_l2_norm(T):
    """Largest singular value of the quadrature-scaled kernel matrix."""
    K = T.dense() * np.sqrt(T.out_volume / T.in_volume)
    return float(np.linalg.svd(K, compute_uv=False)[0])
