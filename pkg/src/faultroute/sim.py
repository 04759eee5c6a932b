"""Event-driven simulation of the mode-switching flow network.

The mode chain jumps at exponential times; between jumps the two densities
follow the smooth per-mode field, integrated with classical fixed-step RK4
(the final sub-step of each segment is shortened to land exactly on the next
event).  All randomness comes from one seeded 64-bit generator
(``numpy.random.PCG64``) with a fixed draw order -- holding time first, then
the jump target -- so trajectories are reproducible across refactors;
replication ``i`` of a batch uses ``seed ^ i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericsError, ParameterError
from .model import NetworkParams, validate_rate_matrix
from .stability import congestion_floors

GENERATOR_NAME = "numpy.random.PCG64"
_TIME_EPS = 1e-12


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    step: float = 1e-2
    seed: int = 0
    x0: tuple[float, float] | None = None  # default: congestion floors if finite, else origin
    s0: int = 1
    sample_interval: float = 1.0
    divergence_cap: float = 1e3

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if not 0.0 < self.step <= self.sample_interval:
            raise ParameterError(
                f"need 0 < step <= sample_interval, got step={self.step}, "
                f"sample_interval={self.sample_interval}"
            )
        if self.s0 not in (1, 2, 3, 4):
            raise ParameterError(f"initial mode must be in 1..4, got {self.s0}")
        if self.x0 is not None and (self.x0[0] < 0.0 or self.x0[1] < 0.0):
            raise ParameterError(f"initial densities must be nonnegative, got {self.x0}")


@dataclass(frozen=True)
class Trajectory:
    """Sampled hybrid path with running statistics.

    ``avg_abs`` is the running time average of ``x1 + x2``.  The jump log
    (``jump_times``, ``jump_modes``) records every mode switch, which is
    enough to reconstruct exact per-mode occupation times.
    """

    t: np.ndarray
    mode: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    avg_abs: np.ndarray
    mode_occupancy: np.ndarray
    jump_times: np.ndarray
    jump_modes: np.ndarray
    elapsed: float
    diverged: bool
    diverged_at: float | None
    seed: int
    initial_mode: int = 1

    def _ols_slope(self, series: np.ndarray) -> float:
        n = len(self.t)
        if n < 4:
            return math.nan
        half = n // 2
        tt, yy = self.t[half:], series[half:]
        tt = tt - tt.mean()
        denom = float(tt @ tt)
        if denom == 0.0:
            return math.nan
        return float(tt @ (yy - yy.mean())) / denom

    def avg_slope(self) -> float:
        """Least-squares slope of ``avg_abs`` over the trailing half of the samples."""
        return self._ols_slope(self.avg_abs)

    def growth_slope(self) -> float:
        """Least-squares slope of the raw total density over the trailing half."""
        return self._ols_slope(self.x1 + self.x2)

    def summary(self) -> dict:
        return {
            "samples": int(len(self.t)),
            "elapsed": self.elapsed,
            "diverged": self.diverged,
            "diverged_at": self.diverged_at,
            "final_x": [float(self.x1[-1]), float(self.x2[-1])],
            "final_avg_abs": float(self.avg_abs[-1]),
            "avg_slope": self.avg_slope(),
            "growth_slope": self.growth_slope(),
            "mode_occupancy": [float(v) for v in self.mode_occupancy],
            "jumps": int(len(self.jump_times)),
            "seed": self.seed,
            "generator": GENERATOR_NAME,
        }


def _rhs(params: NetworkParams, s: int, x1: float, x2: float) -> tuple[float, float]:
    if s == 1:
        o1, o2 = x1, x2
    elif s == 2:
        o1, o2 = 0.0, x2
    elif s == 3:
        o1, o2 = x1, 0.0
    else:
        o1 = o2 = 0.0
    gap = params.beta * (o1 - o2)
    if gap >= 0.0:
        e = math.exp(-gap)
        mu1 = e / (1.0 + e)
    else:
        e = math.exp(gap)
        mu1 = 1.0 / (1.0 + e)
    eta = params.eta
    return (
        eta * mu1 - params.F1 * -math.expm1(-x1),
        eta * (1.0 - mu1) - params.F2 * -math.expm1(-x2),
    )


def _rk4_step(params: NetworkParams, s: int, x1: float, x2: float, h: float) -> tuple[float, float]:
    a1, a2 = _rhs(params, s, x1, x2)
    b1, b2 = _rhs(params, s, x1 + 0.5 * h * a1, x2 + 0.5 * h * a2)
    c1, c2 = _rhs(params, s, x1 + 0.5 * h * b1, x2 + 0.5 * h * b2)
    d1, d2 = _rhs(params, s, x1 + h * c1, x2 + h * c2)
    return (
        x1 + h * (a1 + 2.0 * b1 + 2.0 * c1 + d1) / 6.0,
        x2 + h * (a2 + 2.0 * b2 + 2.0 * c2 + d2) / 6.0,
    )


def integrate_mode(
    params: NetworkParams, s: int, x0: tuple[float, float], duration: float, step: float
) -> tuple[float, float]:
    """Integrate the frozen-mode field over ``duration`` with fixed-step RK4."""
    x1, x2 = float(x0[0]), float(x0[1])
    remaining = float(duration)
    while remaining > _TIME_EPS:
        h = min(step, remaining)
        x1, x2 = _rk4_step(params, s, x1, x2, h)
        x1 = max(x1, 0.0)
        x2 = max(x2, 0.0)
        remaining -= h
    return x1, x2


def simulate(params: NetworkParams, rates, cfg: SimConfig) -> Trajectory:
    """Run one trajectory; deterministic given the config and seed.

    The rate matrix is shape/sign-checked but need not be irreducible: a mode
    with zero total outflow rate simply never jumps (useful for frozen-mode
    integration tests).  Densities are clamped at zero after each step (the
    field points inward there, so clamping only absorbs rounding) and the run
    stops early once ``x1 + x2`` exceeds the divergence cap.
    """
    rmat = validate_rate_matrix(rates, require_irreducible=False)
    row_rate = rmat.sum(axis=1)
    rng = np.random.default_rng(cfg.seed)

    if cfg.x0 is not None:
        x1, x2 = float(cfg.x0[0]), float(cfg.x0[1])
    else:
        floors = congestion_floors(params)
        if math.isfinite(floors[0]) and math.isfinite(floors[1]):
            x1, x2 = floors
        else:
            x1, x2 = 0.0, 0.0
    if x1 + x2 >= cfg.divergence_cap:
        raise ParameterError(
            f"divergence cap {cfg.divergence_cap} must exceed the initial total density {x1 + x2}"
        )

    s = cfg.s0
    t = 0.0
    integral = 0.0
    occupancy = [0.0, 0.0, 0.0, 0.0]
    times = [0.0]
    modes = [s]
    xs1 = [x1]
    xs2 = [x2]
    avg = [x1 + x2]
    jump_times: list[float] = []
    jump_modes: list[int] = []
    diverged = False
    diverged_at: float | None = None

    def draw_jump(from_mode: int, now: float) -> tuple[float, int]:
        rate = row_rate[from_mode - 1]
        if rate <= 0.0:
            return math.inf, from_mode
        u = rng.random()
        tau = -math.log1p(-u) / rate
        v = rng.random()
        target = v * rate
        acc = 0.0
        nxt = from_mode
        for j in range(4):
            if j == from_mode - 1 or rmat[from_mode - 1][j] == 0.0:
                continue
            acc += rmat[from_mode - 1][j]
            nxt = j + 1
            if target <= acc:
                break
        return now + tau, nxt

    t_jump, s_next = draw_jump(s, t)
    k_sample = 1
    next_sample = cfg.sample_interval

    while t < cfg.horizon - _TIME_EPS and not diverged:
        t_event = min(t_jump, next_sample, cfg.horizon)
        while t < t_event - _TIME_EPS:
            h = min(cfg.step, t_event - t)
            n1, n2 = _rk4_step(params, s, x1, x2, h)
            if not (math.isfinite(n1) and math.isfinite(n2)):
                raise NumericsError(f"non-finite state at t={t + h:.6g}, mode={s}: ({n1}, {n2})")
            n1 = max(n1, 0.0)
            n2 = max(n2, 0.0)
            integral += 0.5 * (x1 + x2 + n1 + n2) * h
            occupancy[s - 1] += h
            x1, x2 = n1, n2
            t += h
            if x1 + x2 > cfg.divergence_cap:
                diverged = True
                diverged_at = t
                times.append(t)
                modes.append(s)
                xs1.append(x1)
                xs2.append(x2)
                avg.append(integral / t)
                break
        if diverged:
            break
        t = t_event
        if t_event == next_sample:
            times.append(t)
            modes.append(s)
            xs1.append(x1)
            xs2.append(x2)
            avg.append(integral / t)
            k_sample += 1
            next_sample = k_sample * cfg.sample_interval
        if t_event == t_jump:
            s = s_next
            jump_times.append(t)
            jump_modes.append(s)
            t_jump, s_next = draw_jump(s, t)

    if not diverged and times[-1] < t - _TIME_EPS:
        times.append(t)
        modes.append(s)
        xs1.append(x1)
        xs2.append(x2)
        avg.append(integral / t)

    occ = np.asarray(occupancy)
    total = occ.sum()
    return Trajectory(
        t=np.asarray(times),
        mode=np.asarray(modes, dtype=int),
        x1=np.asarray(xs1),
        x2=np.asarray(xs2),
        avg_abs=np.asarray(avg),
        mode_occupancy=occ / total if total > 0 else occ,
        jump_times=np.asarray(jump_times),
        jump_modes=np.asarray(jump_modes, dtype=int),
        elapsed=t,
        diverged=diverged,
        diverged_at=diverged_at,
        seed=cfg.seed,
        initial_mode=cfg.s0,
    )


def occupancy_batches(traj: Trajectory, n_batches: int) -> np.ndarray:
    """Exact per-mode occupation fractions over equal time batches.

    Reconstructed from the jump log, so batch boundaries need not align with
    sample times.  Rows sum to 1; used for batch-means error bars.
    """
    edges = np.linspace(0.0, traj.elapsed, n_batches + 1)
    starts = np.concatenate([[0.0], traj.jump_times])
    modes = np.concatenate([[traj.initial_mode], traj.jump_modes]).astype(int)
    ends = np.concatenate([traj.jump_times, [traj.elapsed]])
    out = np.zeros((n_batches, 4))
    for b in range(n_batches):
        lo, hi = edges[b], edges[b + 1]
        overlap = np.minimum(ends, hi) - np.maximum(starts, lo)
        overlap = np.clip(overlap, 0.0, None)
        for m in range(4):
            out[b, m] = overlap[modes == m + 1].sum()
        out[b] /= hi - lo
    return out


@dataclass(frozen=True)
class ProbeResult:
    verdict: str  # empirically-stable | empirically-unstable | inconclusive
    replications: int
    n_diverged: int
    median_avg_slope: float
    median_growth_slope: float
    run_stats: list[dict]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "replications": self.replications,
            "n_diverged": self.n_diverged,
            "median_avg_slope": self.median_avg_slope,
            "median_growth_slope": self.median_growth_slope,
            "runs": self.run_stats,
        }


def stability_probe(
    params: NetworkParams,
    rates,
    cfg: SimConfig,
    replications: int,
    slope_threshold: float = 1e-4,
) -> ProbeResult:
    """Heuristic empirical classification from independent replications.

    Stable: nothing diverged and the median trailing slope of the running
    average stays under the threshold.  Unstable: a majority diverged or the
    median slope exceeds ten times the threshold.  Anything else is reported
    as inconclusive -- this is a proxy probe, not a certificate.
    """
    if replications < 1:
        raise ParameterError("need at least one replication")
    runs = [simulate(params, rates, replace(cfg, seed=cfg.seed ^ i)) for i in range(replications)]
    n_div = sum(r.diverged for r in runs)
    med_avg = float(np.nanmedian([r.avg_slope() for r in runs]))
    med_growth = float(np.nanmedian([r.growth_slope() for r in runs]))
    if n_div == 0 and med_avg < slope_threshold:
        verdict = "empirically-stable"
    elif n_div > replications // 2 or med_avg > 10.0 * slope_threshold:
        verdict = "empirically-unstable"
    else:
        verdict = "inconclusive"
    return ProbeResult(verdict, replications, n_div, med_avg, med_growth, [r.summary() for r in runs])


@dataclass(frozen=True)
class ScanResult:
    etas: list[float]
    probes: list[ProbeResult]
    largest_stable: float | None
    smallest_unstable: float | None

    def to_dict(self) -> dict:
        return {
            "rows": [{"eta": e, **p.to_dict()} for e, p in zip(self.etas, self.probes)],
            "transition_window": [self.largest_stable, self.smallest_unstable],
        }


def throughput_scan(
    params: NetworkParams,
    rates,
    cfg: SimConfig,
    eta_grid,
    replications: int = 3,
    slope_threshold: float = 1e-4,
) -> ScanResult:
    """Probe a sorted demand grid and report the empirical transition window."""
    etas = [float(e) for e in eta_grid]
    if etas != sorted(etas):
        raise ParameterError("eta grid must be sorted ascending")
    if etas and not (0.0 <= etas[0] and etas[-1] <= 1.2):
        raise ParameterError("eta grid must lie within [0, 1.2]")
    probes = [
        stability_probe(replace(params, eta=e), rates, cfg, replications, slope_threshold)
        for e in etas
    ]
    stable = [e for e, p in zip(etas, probes) if p.verdict == "empirically-stable"]
    unstable = [e for e, p in zip(etas, probes) if p.verdict == "empirically-unstable"]
    return ScanResult(
        etas,
        probes,
        max(stable) if stable else None,
        min(unstable) if unstable else None,
    )
