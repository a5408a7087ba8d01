"""Hutchinson diagonal-Hessian estimator with momentum and clipping.

For a Rademacher vector z, E[z * Hz] = diag(H), so a single matrix-free
probe z * hvp(z) is an unbiased diagonal estimate. The running estimate is

    D <- beta_t * D + (1 - beta_t) * z * (H_J z)

over fresh probes and fresh batches J; it is initialized as the average of
m warm-up probes at the starting point. The preconditioner actually applied
is the clipped view max(alpha, |D|) (elementwise), which is positive
definite; the unclipped D carries the momentum. beta_t is either a constant
in [0, 1] or the running-average schedule 1 - 1/(t + t0 + 1) with t counting
updates from 0 and t0 the warm-up count, which keeps D the plain average of
all t0 + t + 1 probes seen so far.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidWarmupError
from .rng import rademacher

BETA_AVERAGING = "avg"


@dataclass
class PrecondState:
    """Unclipped running estimate plus its schedule parameters."""

    diag: np.ndarray
    alpha: float
    beta: float | str
    t: int = 0
    t0: int = 0
    batch_size: int = 0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"clipping floor alpha must be positive, got {self.alpha}")
        if isinstance(self.beta, str):
            if self.beta != BETA_AVERAGING:
                raise ValueError(f"beta must be a number in [0, 1] or 'avg', got {self.beta!r}")
        elif not 0.0 <= float(self.beta) <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.t < 0 or self.t0 < 0:
            raise ValueError("step counters must be nonnegative")


def hutchinson_probe(hvp, z):
    """z * hvp(z): exact diag(H) in expectation, and exactly for diagonal H."""
    return z * hvp(z)


def hutchinson_sample(hvp, rng, d):
    """Probe with a fresh Rademacher vector from the given stream."""
    return hutchinson_probe(hvp, rademacher(rng, d))


def precond_init(hvp, rng, m, d, *, alpha, beta, batch_size=0):
    """Average m warm-up probes (each hvp call is expected to draw its own
    independent batch) into the initial diagonal estimate."""
    if m < 1:
        raise InvalidWarmupError(f"warm-up needs at least one sample, got m={m}")
    acc = np.zeros(d, dtype=np.float64)
    for _ in range(m):
        acc += hutchinson_sample(hvp, rng, d)
    return PrecondState(diag=acc / m, alpha=alpha, beta=beta, t=0, t0=m, batch_size=batch_size)


def beta_schedule(state):
    """Momentum weight for the next update."""
    if state.beta == BETA_AVERAGING:
        return 1.0 - 1.0 / (state.t + state.t0 + 1)
    return float(state.beta)


def precond_update(state, hvp, rng):
    """One momentum step on a fresh probe; advances the step counter."""
    b = beta_schedule(state)
    sample = hutchinson_sample(hvp, rng, state.diag.shape[0])
    state.diag = b * state.diag + (1.0 - b) * sample
    state.t += 1
    return state


def precond_clip(state):
    """Clipped view max(alpha, |D|); leaves the momentum carrier untouched."""
    return np.maximum(state.alpha, np.abs(state.diag))


def apply_inverse(dhat, g):
    """Elementwise g / dhat (entries are >= alpha > 0 by construction)."""
    return g / dhat
