"""Time integration, relaxation-time estimation and limit-cycle detection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .model import STATE_DIM, SZ, State, SystemParams

CSV_COLUMNS = ["t", "Sx", "Sy", "Sz", "Re_a", "Im_a", "Re_b", "Im_b", "photon_n"]


class IntegrationBlowUpError(RuntimeError):
    """The state became non-finite; ``last_valid_time`` is the last good sample."""

    def __init__(self, last_valid_time: float):
        super().__init__(f"integration blew up after t = {last_valid_time:g} us")
        self.last_valid_time = last_valid_time


class StepSizeUnderflowError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"adaptive step size underflow at t = {t:g} us")
        self.t = t


class TrajectoryTooShortError(RuntimeError):
    """Raised by detect_cycle when the horizon covers too few oscillation
    periods; rerun with a larger t_end."""


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"          # "rk4" (fixed step) or "rk45" (adaptive)
    dt: float = 1e-3             # step (rk4) or initial step (rk45), us
    t_end: float = 2000.0        # horizon, us
    sample_every: int = 100      # output decimation (per step / accepted step)
    abs_tol: float = 1e-9        # rk45 only
    rel_tol: float = 1e-9        # rk45 only

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be > 0")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray            # ascending, us
    states: np.ndarray           # shape (n, 7)
    params: SystemParams
    step_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states length mismatch")
        if len(self.times) < 1:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory contains non-finite states")

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def sz(self) -> np.ndarray:
        return self.states[:, SZ]

    @property
    def photon_n(self) -> np.ndarray:
        return self.states[:, 3] ** 2 + self.states[:, 4] ** 2

    def final_state(self) -> State:
        return State.from_array(self.states[-1])

    def state_at(self, i: int) -> State:
        return State.from_array(self.states[i])

    def write_csv(self, path) -> None:
        """One row per retained sample; '.' decimals, mandatory header."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_COLUMNS)
            nph = self.photon_n
            for i in range(self.n_samples):
                row = [repr(float(self.times[i]))]
                row += [repr(float(v)) for v in self.states[i]]
                row.append(repr(float(nph[i])))
                w.writerow(row)


def integrate(p: SystemParams, s0: State, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the vector field from ``s0`` over ``cfg.t_end``.

    Fixed RK4 is deterministic and bit-reproducible for identical inputs;
    the adaptive mode keeps the local error per step within the tolerances.
    """
    y0 = s0.as_array() if isinstance(s0, State) else np.asarray(s0, float)
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")
    c = p.c_array()
    if cfg.method == "rk4":
        n_steps = int(round(cfg.t_end / cfg.dt))
        if n_steps < 1:
            raise ValueError("t_end shorter than one step")
        n_cap = n_steps // cfg.sample_every + 2
        times = np.empty(n_cap)
        states = np.empty((n_cap, STATE_DIM))
        status, n, t_last = _kernels.rk4_kernel(
            y0, c, cfg.dt, n_steps, cfg.sample_every, times, states)
        stats = {"method": "rk4", "accepted": n_steps, "rejected": 0,
                 "dt": cfg.dt}
        if status == _kernels.STATUS_BLOWUP:
            raise IntegrationBlowUpError(t_last)
        return Trajectory(times[:n], states[:n], p, stats)

    cap = 2_000_000 // max(1, cfg.sample_every) + 16
    cap = min(cap, 2_000_000)
    times = np.empty(cap)
    states = np.empty((cap, STATE_DIM))
    status, n, t_last, n_acc, n_rej = _kernels.rk45_kernel(
        y0, c, cfg.t_end, cfg.dt, cfg.rel_tol, cfg.abs_tol,
        cfg.sample_every, times, states)
    stats = {"method": "rk45", "accepted": n_acc, "rejected": n_rej,
             "rtol": cfg.rel_tol, "atol": cfg.abs_tol}
    if status == _kernels.STATUS_BLOWUP:
        raise IntegrationBlowUpError(t_last)
    if status == _kernels.STATUS_UNDERFLOW:
        raise StepSizeUnderflowError(t_last)
    if status == _kernels.STATUS_OVERFLOW:
        raise RuntimeError("sample buffer exhausted; increase sample_every")
    return Trajectory(times[:n], states[:n], p, stats)


def relaxation_time(tr: Trajectory, target, band: float = 0.01) -> Optional[float]:
    """Smallest time after which the distance to ``target`` stays within
    band*|target| for the rest of the trajectory.

    Returns None when the final 10% of the trajectory does not sit inside
    the band (non-convergence).  A trajectory that never leaves the band
    has relaxation time 0.
    """
    y = _target_array(target)
    d = np.sqrt(((tr.states - y) ** 2).sum(axis=1))
    thr = band * float(np.linalg.norm(y))
    outside = d > thr
    t10 = tr.times[-1] - 0.1 * (tr.times[-1] - tr.times[0])
    if np.any(outside & (tr.times >= t10)):
        return None
    if not outside.any():
        return 0.0
    i_last = int(np.max(np.nonzero(outside)[0]))
    return float(tr.times[i_last + 1])


def _target_array(target) -> np.ndarray:
    if isinstance(target, State):
        return target.as_array()
    if hasattr(target, "state"):  # FixedPoint
        return target.state.as_array()
    return np.asarray(target, dtype=float)


@dataclass
class CycleReport:
    verdict: str                      # converged | limit_cycle | undecided
    late_amplitude: float             # peak-to-peak of Sz over the window
    dominant_period: Optional[float]  # us
    attractor: object = None          # FixedPoint, filled in by callers

    def to_dict(self) -> dict:
        return {"verdict": self.verdict,
                "late_amplitude": self.late_amplitude,
                "dominant_period": self.dominant_period}


def dominant_period(times: np.ndarray, values: np.ndarray) -> Optional[float]:
    """Mean interval between upward crossings of the de-meaned signal."""
    x = values - values.mean()
    up = np.nonzero((x[:-1] < 0.0) & (x[1:] >= 0.0))[0]
    if len(up) < 3:
        return None
    return float(np.mean(np.diff(times[up])))


def detect_cycle(tr: Trajectory, window: float = 0.25,
                 converged_amp: float = 1e-4, amp_ratio: float = 0.9,
                 min_periods: int = 20) -> CycleReport:
    """Classify the tail of a trajectory.

    converged   : tail peak-to-peak Sz amplitude < converged_amp * N
    limit_cycle : amplitude non-decaying (second tail half >= amp_ratio of
                  the first) and a dominant period found from zero crossings
    undecided   : anything else

    The trajectory must cover at least ``min_periods`` dominant periods,
    otherwise TrajectoryTooShortError asks for a longer t_end.
    """
    if not 0.0 < window <= 1.0:
        raise ValueError("window must be in (0, 1]")
    t0 = tr.times[-1] - window * (tr.times[-1] - tr.times[0])
    mask = tr.times >= t0
    tt = tr.times[mask]
    sz = tr.sz[mask]
    if len(sz) < 8:
        raise TrajectoryTooShortError(
            "tail window holds too few samples; increase t_end or sampling")
    amp = float(np.ptp(sz))
    n = tr.params.n_atoms
    if amp < converged_amp * n:
        return CycleReport("converged", amp, None)
    period = dominant_period(tt, sz)
    period_est = period if period is not None \
        else dominant_period(tr.times, tr.sz)
    if period_est is not None:
        span = tr.times[-1] - tr.times[0]
        if span < min_periods * period_est:
            raise TrajectoryTooShortError(
                f"trajectory spans {span / period_est:.1f} periods "
                f"(< {min_periods}); increase t_end")
    half = len(sz) // 2
    a1 = float(np.ptp(sz[:half]))
    a2 = float(np.ptp(sz[half:]))
    if period is not None and a1 > 0 and a2 >= amp_ratio * a1:
        return CycleReport("limit_cycle", amp, period)
    return CycleReport("undecided", amp, period)


def read_trajectory_csv(path, params: SystemParams) -> Trajectory:
    """Inverse of Trajectory.write_csv (photon_n column is redundant)."""
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header: {header}")
        rows = [[float(v) for v in row] for row in r]
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        raise ValueError("empty trajectory CSV")
    return Trajectory(arr[:, 0], arr[:, 1:8], params, {"source": str(path)})
