"""Stability certificates and throughput bounds for the fault-prone network.

Two complementary tests drive everything here:

* a *necessary* test built on the congestion floor of each link (the density
  below which even worst-case routing keeps the link filling up), which gives
  an upper bound on the sustainable demand;
* a *sufficient* test that searches for a threshold pair ``theta`` at which
  the stationary-mode-averaged worst-link drift is negative, which certifies
  boundedness of the densities and gives a lower bound.

The sufficient test is backed by an explicit Lyapunov certificate: a switched
quadratic of the above-threshold excess whose generator drift is bounded by
``-c * |x| + d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CertificateError, ErgodicityError, MonotonicityError, NumericsError, ParameterError
from .model import (
    NetworkParams,
    flow,
    generator_matrix,
    routing_fraction,
    validate_mode_probs,
    validate_rate_matrix,
    vector_field,
)

X_CAP = 50.0
FLOOR_X_TOL = 1e-12
STRICT_DRIFT = 1e-9  # a witness must beat this margin, not just 0
Z_FLOOR = 1e-9
GRID_N = 200
GOLDEN_SWEEPS = 3
GOLDEN_ITERS = 50
BISECT_TOL = 1e-4

_INEQUALITY_NAMES = ("necessary1", "necessary2", "necessary3")


@dataclass(frozen=True)
class NecessaryReport:
    """Outcome of the three demand inequalities, with slack = rhs - lhs."""

    holds: bool
    inequality_holds: tuple[bool, bool, bool]
    slacks: tuple[float, float, float]
    floors: tuple[float, float]

    def first_violated(self) -> str | None:
        for name, ok in zip(_INEQUALITY_NAMES, self.inequality_holds):
            if not ok:
                return name
        return None


@dataclass(frozen=True)
class ThetaWitness:
    """Threshold pair certifying negative averaged drift."""

    theta: tuple[float, float]
    drift: float


@dataclass(frozen=True)
class StabilityVerdict:
    necessary: NecessaryReport
    sufficient_holds: bool
    witness: ThetaWitness | None
    classification: str  # certified-stable | certified-unstable | indeterminate

    def to_dict(self) -> dict:
        return {
            "necessary": {"holds": self.necessary.holds, "slacks": list(self.necessary.slacks)},
            "sufficient": {
                "holds": self.sufficient_holds,
                "theta": list(self.witness.theta) if self.witness else None,
                "drift": self.witness.drift if self.witness else None,
            },
            "classification": self.classification,
            "violated": self.necessary.first_violated(),
        }


@dataclass(frozen=True)
class ThroughputBounds:
    """Certified-demand interval: stable below ``lower``, unstable above ``upper``."""

    lower: float
    upper: float
    lower_witness: ThetaWitness | None
    upper_violation: str | None

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_witness": {
                "theta": list(self.lower_witness.theta),
                "drift": self.lower_witness.drift,
            }
            if self.lower_witness
            else None,
            "upper_violation": self.upper_violation,
        }


@dataclass(frozen=True)
class LyapunovCertificate:
    a: np.ndarray  # mode offsets, a[0] normalized to 1
    D: np.ndarray  # worst-link drift at theta per mode
    c: float
    d: float
    theta: tuple[float, float]
    system_residual: float


@dataclass(frozen=True)
class InvariantSetReport:
    samples: int
    outside: int
    counterexamples: list
    passed: bool


def solve_congestion_floor(params: NetworkParams, k: int) -> float:
    """Density at which worst-case routed inflow balances outflow on link ``k``.

    The inflow side ``eta * e^{-beta x} / (1 + e^{-beta x})`` is strictly
    decreasing and the outflow side strictly increasing, so the root is
    unique; bisection is exact enough.  Returns 0 when demand is zero and
    ``inf`` when the link has no capacity (the balance never closes).
    """
    eta, beta = params.eta, params.beta
    cap = params.capacity(k)
    if eta == 0.0:
        return 0.0
    if cap == 0.0:
        return math.inf

    def gap(x: float) -> float:
        e = math.exp(-beta * x)
        return eta * e / (1.0 + e) - cap * -math.expm1(-x)

    hi = X_CAP
    while gap(hi) > 0.0:  # tiny beta flattens the inflow side; widen until bracketed
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    lo = 0.0
    while hi - lo > FLOOR_X_TOL:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def congestion_floors(params: NetworkParams) -> tuple[float, float]:
    return solve_congestion_floor(params, 1), solve_congestion_floor(params, 2)


def necessary_condition(params: NetworkParams, probs) -> NecessaryReport:
    """Evaluate the three demand inequalities that any stable setting satisfies.

    The first two compare the fault-boosted share of demand against each
    link's capacity on the invariant set above the congestion floors; an
    infinite floor enters in limit form (``e^{-beta * inf} = 0``).  The third
    is plain ``eta < 1``.
    """
    p = validate_mode_probs(probs)
    eta = params.eta
    x1, x2 = congestion_floors(params)
    e1 = math.exp(-params.beta * x1) if math.isfinite(x1) else 0.0
    e2 = math.exp(-params.beta * x2) if math.isfinite(x2) else 0.0
    lhs1 = eta * (p[1] / (e2 + 1.0) + 0.5 * p[3])
    lhs2 = eta * (p[2] / (e1 + 1.0) + 0.5 * p[3])
    slacks = (params.F1 - lhs1, params.F2 - lhs2, 1.0 - eta)
    holds = (slacks[0] >= 0.0, slacks[1] >= 0.0, eta < 1.0)
    return NecessaryReport(all(holds), holds, slacks, (x1, x2))


def sufficient_value(params: NetworkParams, probs, theta: tuple[float, float]) -> float:
    """Mode-averaged worst-link drift at the threshold pair ``theta``.

    For each mode the drift of the faster-growing link is taken, using the
    routing seen through that mode's sensor faults; the average over the
    stationary mode distribution being negative certifies stability.
    """
    p = validate_mode_probs(probs)
    t1, t2 = theta
    if t1 < 0.0 or t2 < 0.0:
        raise ParameterError(f"theta must be nonnegative, got {theta}")
    f1 = flow(params, 1, t1)
    f2 = flow(params, 2, t2)
    eta = params.eta
    total = 0.0
    for s, ps in zip((1, 2, 3, 4), p):
        mu1, mu2 = routing_fraction(params, s, (t1, t2))
        total += ps * max(eta * mu1 - f1, eta * mu2 - f2)
    return total


def _drift_on_grid(params: NetworkParams, p: np.ndarray, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Vectorized drift over the outer grid of ``z = exp(-theta)`` values."""
    eta, beta = params.eta, params.beta
    w1 = np.maximum(z1**beta, 1e-300)[:, None]
    w2 = np.maximum(z2**beta, 1e-300)[None, :]
    f1 = (params.F1 * (1.0 - z1))[:, None]
    f2 = (params.F2 * (1.0 - z2))[None, :]

    mu1_s1 = w1 / (w1 + w2)
    mu1_s2 = 1.0 / (1.0 + w2)
    mu1_s3 = w1 / (w1 + 1.0)

    def term(mu1):
        return np.maximum(eta * mu1 - f1, eta * (1.0 - mu1) - f2)

    return (
        p[0] * term(mu1_s1)
        + p[1] * term(mu1_s2)
        + p[2] * term(mu1_s3)
        + p[3] * term(np.full((1, 1), 0.5))
    )


def _golden_min(fun, lo: float, hi: float, iters: int) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc < fd else (d, fd)


def sufficient_search(
    params: NetworkParams,
    probs,
    n_grid: int = GRID_N,
    z_floor: float = Z_FLOOR,
    refine: bool = True,
) -> ThetaWitness | None:
    """Search for a threshold pair with strictly negative averaged drift.

    Works in ``z = exp(-theta)`` coordinates on a log-uniform grid over
    ``(0, 1]^2``, then polishes the best cell with coordinate-wise
    golden-section descent.  Deterministic; returns ``None`` when no
    candidate beats the strictness margin (a valid outcome, not an error).
    """
    p = validate_mode_probs(probs)
    zs = np.logspace(math.log10(z_floor), 0.0, n_grid)
    values = _drift_on_grid(params, p, zs, zs)
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    best = (float(values[i, j]), float(zs[i]), float(zs[j]))

    if refine:
        z1, z2 = best[1], best[2]

        def bracket(idx: int) -> tuple[float, float]:
            lo = zs[idx - 1] if idx > 0 else z_floor
            hi = zs[idx + 1] if idx + 1 < n_grid else 1.0
            return lo, hi

        lo1, hi1 = bracket(i)
        lo2, hi2 = bracket(j)
        value = best[0]
        for _ in range(GOLDEN_SWEEPS):
            z1, value = _golden_min(
                lambda z: _scalar_drift(params, p, z, z2), lo1, hi1, GOLDEN_ITERS
            )
            z2, value = _golden_min(
                lambda z: _scalar_drift(params, p, z1, z), lo2, hi2, GOLDEN_ITERS
            )
        if value < best[0]:
            best = (value, z1, z2)

    drift, z1, z2 = best
    if drift < -STRICT_DRIFT:
        return ThetaWitness((-math.log(z1), -math.log(z2)), drift)
    return None


def _scalar_drift(params: NetworkParams, p: np.ndarray, z1: float, z2: float) -> float:
    return sufficient_value(params, p, (-math.log(z1), -math.log(z2)))


def stability_verdict(params: NetworkParams, probs, **search_kwargs) -> StabilityVerdict:
    """Combine both tests into a three-way classification.

    A failed necessary test certifies instability outright; a found witness
    certifies stability; the remaining gap is reported as indeterminate,
    never coerced either way.
    """
    necessary = necessary_condition(params, probs)
    if not necessary.holds:
        return StabilityVerdict(necessary, False, None, "certified-unstable")
    witness = sufficient_search(params, probs, **search_kwargs)
    if witness is not None:
        return StabilityVerdict(necessary, True, witness, "certified-stable")
    return StabilityVerdict(necessary, False, None, "indeterminate")


def _bisect_predicate(predicate, pre_grid: int, tol: float, label: str):
    """Bisection for the flip point of a monotone predicate on [0, 1].

    Probes a coarse grid first; any true-after-false pattern is reported as a
    monotonicity violation instead of being silently bisected over.
    Returns (largest eta seen true, smallest eta seen false, and the
    evaluation records at those points).
    """
    etas = np.linspace(0.0, 1.0, pre_grid)
    results = [(float(e), predicate(float(e))) for e in etas]
    first_false = next((k for k, (_, ok) in enumerate(results) if not ok), None)
    if first_false is not None:
        for e, ok in results[first_false + 1 :]:
            if ok:
                raise MonotonicityError(
                    f"{label} predicate is non-monotone: true at eta={e} after false at "
                    f"eta={results[first_false][0]}",
                    (results[first_false][0], e),
                )
    if first_false == 0:
        return 0.0, 0.0
    if first_false is None:
        return 1.0, 1.0
    lo = results[first_false - 1][0]
    hi = results[first_false][0]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def throughput_bounds(
    params: NetworkParams,
    probs,
    tol: float = BISECT_TOL,
    pre_grid: int = 11,
    **search_kwargs,
) -> ThroughputBounds:
    """Bracket the maximal sustainable demand for fixed capacities and faults.

    ``lower`` is the largest demand at which the sufficient search certifies
    stability, ``upper`` the smallest at which the necessary test fails; the
    demand stored in ``params`` is ignored.  Both predicates are monotone in
    the demand; violations raise rather than returning garbage bounds.
    """
    p = validate_mode_probs(probs)

    def stable_at(eta: float) -> bool:
        return sufficient_search(replace(params, eta=eta), p, **search_kwargs) is not None

    def necessary_fails_at(eta: float) -> bool:
        return not necessary_condition(replace(params, eta=eta), p).holds

    lower, _ = _bisect_predicate(stable_at, pre_grid, tol, "sufficient")
    _, upper = _bisect_predicate(lambda e: not necessary_fails_at(e), pre_grid, tol, "necessary")

    witness = None
    if lower > 0.0:
        witness = sufficient_search(replace(params, eta=max(0.0, lower - tol)), p, **search_kwargs)
    violation = necessary_condition(replace(params, eta=min(1.0, upper + tol)), p).first_violated()
    if violation is None:
        violation = necessary_condition(replace(params, eta=1.0), p).first_violated()
    if lower > upper:
        raise NumericsError(f"bound inversion: lower {lower} > upper {upper}")
    return ThroughputBounds(lower, upper, witness, violation)


def necessary_upper_bound(params: NetworkParams, probs, tol: float = BISECT_TOL, pre_grid: int = 11) -> float:
    """Smallest demand at which the necessary test fails (demand in ``params`` ignored)."""
    p = validate_mode_probs(probs)
    _, upper = _bisect_predicate(
        lambda e: necessary_condition(replace(params, eta=e), p).holds, pre_grid, tol, "necessary"
    )
    return upper


def mode_drift_maxima(params: NetworkParams, theta: tuple[float, float]) -> np.ndarray:
    """Per-mode worst-link drift at ``theta`` (the summands of the averaged drift)."""
    f1 = flow(params, 1, theta[0])
    f2 = flow(params, 2, theta[1])
    out = np.empty(4)
    for s in (1, 2, 3, 4):
        mu1, mu2 = routing_fraction(params, s, theta)
        out[s - 1] = max(params.eta * mu1 - f1, params.eta * mu2 - f2)
    return out


def _excess_rates(params: NetworkParams, s: int, x: tuple[float, float], theta: tuple[float, float]):
    """Growth rates of the above-threshold excess (x_k - theta_k)_+."""
    mu1, mu2 = routing_fraction(params, s, x)
    g = (params.eta * mu1 - flow(params, 1, x[0]), params.eta * mu2 - flow(params, 2, x[1]))
    rates = []
    for k in (0, 1):
        if x[k] > theta[k]:
            rates.append(g[k])
        elif x[k] == theta[k]:
            rates.append(max(g[k], 0.0))
        else:
            rates.append(0.0)
    return rates[0], rates[1]


def generator_value(
    params: NetworkParams,
    rates: np.ndarray,
    a: np.ndarray,
    theta: tuple[float, float],
    s: int,
    x: tuple[float, float],
) -> float:
    """Generator applied to the switched quadratic Lyapunov function at (s, x)."""
    d1, d2 = _excess_rates(params, s, x, theta)
    w = max(x[0] - theta[0], 0.0) + max(x[1] - theta[1], 0.0)
    i = s - 1
    jump = sum(rates[i][j] * (a[j] - a[i]) for j in range(4) if j != i)
    return (d1 + d2 + jump) * w + a[i] * (d1 + d2)


def lyapunov_certificate(
    params: NetworkParams,
    probs,
    rates,
    theta: ThetaWitness | tuple[float, float],
    grid_n: int = 65,
    margin: float = 1.1,
) -> LyapunovCertificate:
    """Build the drift certificate ``LV <= -c|x| + d`` for a valid witness.

    The mode offsets ``a`` solve the 4x4 system whose first three rows are
    the generator rows and whose fourth row pins ``a_1 = 1``; the right-hand
    side re-centers each mode's worst-link drift at the stationary average.
    ``c`` is a quarter of the negated averaged drift.  ``d`` is estimated by
    sampling: the offset term maximum plus ``c * |theta|`` (the below-threshold
    region contributes exactly that), floored by the sampled remainder max,
    with a 10% margin; only finiteness of ``d`` matters for the certificate.
    """
    p = validate_mode_probs(probs)
    rmat = validate_rate_matrix(rates, require_irreducible=False)
    th = theta.theta if isinstance(theta, ThetaWitness) else (float(theta[0]), float(theta[1]))

    drift_max = mode_drift_maxima(params, th)
    dbar = float(p @ drift_max)
    c = -0.25 * dbar
    if c <= 0.0:
        raise CertificateError(f"averaged drift {dbar:.3e} is not negative; theta is not a witness")

    q = generator_matrix(rmat)
    m = q.copy()
    m[3, :] = np.array([1.0, 0.0, 0.0, 0.0])
    rhs = np.array([dbar - drift_max[0], dbar - drift_max[1], dbar - drift_max[2], 1.0])
    try:
        a = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise ErgodicityError(f"offset system is singular (reducible rates?): {exc}") from exc
    residual = float(np.abs(m @ a - rhs).max())
    if residual >= 1e-10:
        raise NumericsError(f"offset system residual {residual:.3e} exceeds 1e-10")

    span = max(5.0, th[0], th[1]) + 5.0
    xs = np.linspace(0.0, span, grid_n)
    xs = np.unique(np.concatenate([xs, [th[0], th[1], th[0] + 1e-9, th[1] + 1e-9]]))
    offset_term = 0.0
    remainder = 0.0
    for s in (1, 2, 3, 4):
        for x1 in xs:
            for x2 in xs:
                d1, d2 = _excess_rates(params, s, (x1, x2), th)
                offset_term = max(offset_term, a[s - 1] * (d1 + d2))
                lv = generator_value(params, rmat, a, th, s, (x1, x2))
                remainder = max(remainder, lv + c * (x1 + x2))
    d = max(margin * offset_term + c * (th[0] + th[1]), margin * remainder)
    return LyapunovCertificate(a, drift_max, c, d, th, residual)


def invariant_set_check(
    params: NetworkParams,
    floors: tuple[float, float],
    samples: int,
    seed: int = 0,
) -> InvariantSetReport:
    """Sample states below the congestion floors and confirm inward drift.

    For every sampled coordinate sitting under its floor, the corresponding
    vector-field component must be strictly positive; counterexamples are
    collected rather than raised.
    """
    if not (math.isfinite(floors[0]) and math.isfinite(floors[1])):
        raise ParameterError("invariant-set check requires finite floors")
    rng = np.random.default_rng(seed)
    hi1 = 1.5 * floors[0] + 1.0
    hi2 = 1.5 * floors[1] + 1.0
    outside = 0
    bad = []
    for _ in range(samples):
        x = (rng.random() * hi1, rng.random() * hi2)
        s = int(rng.integers(1, 5))
        below1 = x[0] < floors[0]
        below2 = x[1] < floors[1]
        if not (below1 or below2):
            continue
        outside += 1
        g1, g2 = vector_field(params, s, x)
        if (below1 and g1 <= 0.0) or (below2 and g2 <= 0.0):
            bad.append((s, x, (g1, g2)))
    return InvariantSetReport(samples, outside, bad, not bad)
