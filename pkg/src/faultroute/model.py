"""Core model of a two-route network whose density sensors drop out at random.

Traffic of constant demand ``eta`` is split between two parallel links by a
logit rule applied to the *observed* densities.  Each link's sensor is either
healthy or down; a down sensor reports density zero.  The joint sensor status
is one of four modes:

    1: both sensors healthy          2: link-1 sensor down
    3: link-2 sensor down            4: both sensors down

and switches according to a continuous-time Markov chain with rate matrix
``rates[s][s']`` (diagonal zero).  Between switches the densities follow

    dx_k/dt = eta * mu_k(s, x) - f_k(x_k),

with outflow ``f_k(x) = F_k * (1 - exp(-x))`` and logit split
``mu_k = exp(-beta * obs_k) / sum_j exp(-beta * obs_j)``.

Throughout the package, length-4 arrays are indexed 0..3 for modes 1..4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ErgodicityError, NumericsError, ParameterError

MODES = (1, 2, 3, 4)

CAPACITY_TOL = 1e-12
PROB_SUM_TOL = 1e-9
BALANCE_TOL = 1e-10


@dataclass(frozen=True)
class NetworkParams:
    """Link capacities, routing sensitivity, and demand.

    Capacities are normalized: ``F1 + F2 == 1`` is required (not rescaled).
    """

    F1: float
    F2: float
    beta: float
    eta: float

    def __post_init__(self):
        if self.F1 < 0.0 or self.F2 < 0.0:
            raise ParameterError(f"capacities must be nonnegative, got ({self.F1}, {self.F2})")
        if abs(self.F1 + self.F2 - 1.0) > CAPACITY_TOL:
            raise ParameterError(
                f"capacities must sum to 1 (got {self.F1 + self.F2!r}); inputs are rejected, not rescaled"
            )
        if not self.beta > 0.0:
            raise ParameterError(f"routing sensitivity beta must be positive, got {self.beta}")
        if self.eta < 0.0:
            raise ParameterError(f"demand eta must be nonnegative, got {self.eta}")

    def capacity(self, k: int) -> float:
        if k == 1:
            return self.F1
        if k == 2:
            return self.F2
        raise ParameterError(f"link index must be 1 or 2, got {k}")


def fault_map(s: int, x: tuple[float, float]) -> tuple[float, float]:
    """Observed densities in mode ``s``: a down sensor reads zero."""
    if s == 1:
        return (x[0], x[1])
    if s == 2:
        return (0.0, x[1])
    if s == 3:
        return (x[0], 0.0)
    if s == 4:
        return (0.0, 0.0)
    raise ParameterError(f"mode must be in {MODES}, got {s}")


def flow(params: NetworkParams, k: int, x_k: float) -> float:
    """Outflow of link ``k`` at density ``x_k``: ``F_k * (1 - exp(-x_k))``."""
    if x_k < 0.0:
        raise ParameterError(f"density must be nonnegative, got {x_k}")
    return params.capacity(k) * -math.expm1(-x_k)


def routing_fraction(params: NetworkParams, s: int, x: tuple[float, float]) -> tuple[float, float]:
    """Logit demand split based on the mode-``s`` observed densities.

    Computed from the observation gap so large ``beta * x`` never overflows;
    ``mu2`` is returned as ``1 - mu1`` so the pair sums to 1 exactly.
    """
    o1, o2 = fault_map(s, x)
    gap = params.beta * (o1 - o2)
    if gap >= 0.0:
        e = math.exp(-gap)
        mu1 = e / (1.0 + e)
    else:
        e = math.exp(gap)
        mu1 = 1.0 / (1.0 + e)
    return mu1, 1.0 - mu1


def vector_field(params: NetworkParams, s: int, x: tuple[float, float]) -> tuple[float, float]:
    """Density drift ``(eta * mu_k - f_k)`` for both links in mode ``s``."""
    mu1, mu2 = routing_fraction(params, s, x)
    return (
        params.eta * mu1 - flow(params, 1, x[0]),
        params.eta * mu2 - flow(params, 2, x[1]),
    )


def validate_rate_matrix(rates, require_irreducible: bool = True) -> np.ndarray:
    """Check a 4x4 switching-rate matrix and return it as a float array.

    Off-diagonal entries must be nonnegative and the diagonal exactly zero.
    With ``require_irreducible`` the directed graph of positive rates must be
    strongly connected, which guarantees a unique stationary distribution.
    """
    arr = np.asarray(rates, dtype=float)
    if arr.shape != (4, 4):
        raise ParameterError(f"rate matrix must be 4x4, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("rate matrix entries must be finite")
    if np.any(np.diag(arr) != 0.0):
        raise ParameterError("rate matrix diagonal must be zero")
    off = arr[~np.eye(4, dtype=bool)]
    if np.any(off < 0.0):
        raise ParameterError("off-diagonal rates must be nonnegative")
    if require_irreducible and not _strongly_connected(arr > 0.0):
        raise ErgodicityError("rate matrix is reducible: mode graph is not strongly connected")
    return arr


def _strongly_connected(adj: np.ndarray) -> bool:
    reach = adj | np.eye(4, dtype=bool)
    for _ in range(2):  # (A | I)^4 via two squarings covers paths of length <= 4
        reach = reach @ reach
    return bool(reach.all())


def generator_matrix(rates: np.ndarray) -> np.ndarray:
    """Rate matrix with the diagonal set to minus the row sums."""
    q = np.array(rates, dtype=float)
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def stationary_distribution(rates) -> np.ndarray:
    """Unique stationary mode distribution of an irreducible rate matrix.

    Solves the flow-balance equations with one of them replaced by the
    normalization row; the tiny fixed dimension makes a dense solve exact
    for practical purposes.
    """
    arr = validate_rate_matrix(rates, require_irreducible=True)
    q = generator_matrix(arr)
    a = q.T.copy()
    a[3, :] = 1.0
    b = np.array([0.0, 0.0, 0.0, 1.0])
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"stationary solve failed: {exc}") from exc
    residual = np.abs(q.T @ p).max()
    if residual >= BALANCE_TOL:
        raise NumericsError(f"stationary balance residual {residual:.3e} exceeds {BALANCE_TOL:.0e}")
    if np.any(p < -1e-12):
        raise NumericsError(f"stationary solve produced negative probability: {p}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def validate_mode_probs(probs, tol: float = PROB_SUM_TOL) -> np.ndarray:
    """Check 4 mode probabilities (nonnegative, summing to 1 within ``tol``)."""
    p = np.asarray(probs, dtype=float)
    if p.shape != (4,):
        raise ParameterError(f"mode distribution must have 4 entries, got shape {p.shape}")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise ParameterError(f"mode probabilities must be finite and nonnegative: {p}")
    if abs(p.sum() - 1.0) > tol:
        raise ParameterError(f"mode probabilities must sum to 1 within {tol:.0e}, got {p.sum()!r}")
    return p / p.sum()
