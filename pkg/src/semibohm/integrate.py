"""Adaptive Dormand-Prince 5(4) integration of dx/dt = v(x, t).

Each lane (trajectory) carries its own time and step size, so an ensemble is
advanced as one vectorised loop without lanes sharing step decisions; the
result for a lane does not depend on which other lanes are present.
Besides the usual error control the step is capped so that a lane moves at
most ``cap_fraction * length_scale`` per step; without the cap the controller
can step straight over the narrow velocity spikes of an interference field.
A NaN velocity marks a flagged (node) region: the step is rejected and
shrunk, and a lane whose step underflows there is reported as a node
encounter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Dormand & Prince (1980) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension (Shampine 1986), x(t0 + s h) = x0 + h * sum_i k_i * poly_i(s)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float, x: float):
        super().__init__(f"{message} at t={t:.12g}, x={x:.12g}")
        self.t = t
        self.x = x


class NodeEncounter(IntegrationError):
    pass


class StepUnderflow(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    length_scale: float | None = None
    speed_floor: float = 0.0
    cap_fraction: float = 1.0 / 40.0
    first_step: float | None = None
    min_step: float = 1e-14
    max_steps: int = 5_000_000

    def step_cap(self, v: np.ndarray) -> np.ndarray:
        if self.length_scale is None:
            return np.full(np.shape(v), np.inf)
        speed = np.maximum(np.abs(v), self.speed_floor)
        with np.errstate(divide="ignore"):
            return np.where(speed > 0, self.cap_fraction * self.length_scale / speed, np.inf)


@dataclass
class Trajectory:
    """Accepted steps of one integration plus their dense-output polynomials."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    step_flag: np.ndarray
    meta: dict = field(default_factory=dict)
    _coeffs: np.ndarray | None = field(default=None, repr=False)

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.v])

    def dense(self, times) -> np.ndarray:
        """Position at arbitrary times inside the integrated span."""
        times = np.asarray(times, dtype=float)
        if np.any(times < self.t[0] - 1e-12 * max(1.0, abs(self.t[0]))) or np.any(times > self.t[-1] + 1e-12 * max(1.0, abs(self.t[-1]))):
            raise ValueError("dense output requested outside the integrated span")
        idx = np.clip(np.searchsorted(self.t, times, side="right") - 1, 0, len(self.t) - 2)
        t0, h = self.t[idx], self.t[idx + 1] - self.t[idx]
        s = np.where(h > 0, (times - t0) / np.where(h > 0, h, 1.0), 0.0)
        powers = np.stack([s, s**2, s**3, s**4], axis=-1)
        q = self._coeffs[idx]  # (n, 4) already multiplied by h and summed over stages
        return self.x[idx] + np.sum(q * powers, axis=-1)

    def resample(self, times, velocity: Callable) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        xs = self.dense(times)
        vs = np.asarray(velocity(xs, times), dtype=float)
        return Trajectory(times, xs, vs, np.zeros(len(times), dtype=int), dict(self.meta))


@dataclass
class EnsembleResult:
    x: np.ndarray
    failed: np.ndarray
    failures: list
    steps: np.ndarray
    rejected: np.ndarray


def _stages(velocity, t, x, h, k1):
    ks = [k1]
    for i in range(1, 7):
        dx = np.zeros_like(x)
        for j, a in enumerate(_A[i]):
            if a:
                dx = dx + a * ks[j]
        ks.append(np.asarray(velocity(x + h * dx, t + _C[i] * h), dtype=float))
    return np.stack(ks)  # (7, n)


def _initial_step(velocity, t0, x0, v0, direction_span, opts):
    if opts.first_step is not None:
        return np.full_like(x0, opts.first_step)
    scale = opts.atol + opts.rtol * np.abs(x0)
    d0 = np.abs(x0) / scale
    d1 = np.abs(v0) / scale
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h0 = np.minimum(h0, np.abs(direction_span))
    return np.minimum(h0, opts.step_cap(v0))


def _advance(velocity, t0, x0, t1, opts, record=False):
    """Core per-lane loop. Returns final positions, failures and optional step record."""
    x = np.array(x0, dtype=float, copy=True)
    n = x.shape[0]
    t = np.full(n, float(t0))
    v = np.asarray(velocity(x, t), dtype=float)
    failed = ~np.isfinite(v)
    failures = [("node", float(t0), float(xi)) for xi in x[failed]]
    h = _initial_step(velocity, t0, x, np.nan_to_num(v), t1 - t0, opts)
    done = failed | (t >= t1)
    steps = np.zeros(n, dtype=int)
    rejected = np.zeros(n, dtype=int)
    min_h = np.full(n, np.inf)
    rec_t, rec_x, rec_v, rec_q, rec_flag = [t[:1].copy()], [x[:1].copy()], [v[:1].copy()], [], []
    iterations = 0
    last_rejected = 0
    while not np.all(done):
        iterations += 1
        if iterations > opts.max_steps:
            raise StepUnderflow("maximum step count exceeded", float(t[0]), float(x[0]))
        act = np.flatnonzero(~done)
        ta, xa, va = t[act], x[act], v[act]
        ha = np.minimum(h[act], t1 - ta)
        ha = np.minimum(ha, opts.step_cap(va))
        ks = _stages(velocity, ta, xa, ha, va)
        finite = np.all(np.isfinite(ks), axis=0)
        ks_safe = np.where(np.isfinite(ks), ks, 0.0)
        x_new = xa + ha * (_B @ ks_safe)
        err_vec = ha * (_E @ ks_safe)
        scale = opts.atol + opts.rtol * np.maximum(np.abs(xa), np.abs(x_new))
        err = np.abs(err_vec) / scale
        accept = finite & (err <= 1.0)
        with np.errstate(divide="ignore"):
            factor = np.where(err == 0, 5.0, 0.9 * err ** (-0.2))
        factor = np.clip(factor, 0.2, 5.0)
        factor = np.where(finite, factor, 0.25)
        factor = np.where(accept, factor, np.minimum(factor, 1.0))
        new_h = ha * factor

        acc = act[accept]
        if record and accept[0]:
            q = (ha[0] * (ks_safe[:, 0] @ _P))
            rec_q.append(q)
        t[acc] = ta[accept] + ha[accept]
        x[acc] = x_new[accept]
        v[acc] = ks_safe[6, accept]  # FSAL: stage 7 is v at the new point
        steps[acc] += 1
        min_h[acc] = np.minimum(min_h[acc], ha[accept])
        rej = act[~accept]
        rejected[rej] += 1
        h[act] = new_h
        if record and accept[0]:
            rec_t.append(t[:1].copy())
            rec_x.append(x[:1].copy())
            rec_v.append(v[:1].copy())
            # 1 when this step needed at least one retry
            rec_flag.append(int(rejected[0] > last_rejected))
            last_rejected = int(rejected[0])
        # lanes that finished
        finished = act[accept & (t[act] >= t1 - 1e-14 * max(1.0, abs(t1)))]
        t[finished] = t1
        done[finished] = True
        # underflow
        tiny = act[(~accept) & (new_h < opts.min_step * max(1.0, abs(t1)))]
        for i in tiny:
            kind = "node" if not finite[np.searchsorted(act, i)] else "underflow"
            failures.append((kind, float(t[i]), float(x[i])))
            failed[i] = True
            done[i] = True
    result = EnsembleResult(x, failed, failures, steps, rejected)
    if record:
        trace = (
            np.concatenate(rec_t),
            np.concatenate(rec_x),
            np.concatenate(rec_v),
            np.array([0] + rec_flag, dtype=int),
            np.array(rec_q) if rec_q else np.zeros((0, 4)),
            min_h[0],
        )
        return result, trace
    return result


def integrate_trajectory(velocity: Callable, x0: float, t0: float, t1: float, options: IntegratorOptions = IntegratorOptions(), sample_times=None) -> Trajectory:
    """Integrate one trajectory; ``velocity(x, t)`` must accept arrays.

    Raises :class:`NodeEncounter` if the start point or the path enters a
    flagged (NaN) region, :class:`StepUnderflow` if the step collapses.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    result, trace = _advance(velocity, t0, np.array([float(x0)]), t1, options, record=True)
    if result.failed[0]:
        kind, tf, xf = result.failures[0]
        cls = NodeEncounter if kind == "node" else StepUnderflow
        raise cls("trajectory entered a flagged region" if kind == "node" else "step size underflow", tf, xf)
    ts, xs, vs, flags, q, min_h = trace
    traj = Trajectory(
        ts,
        xs,
        vs,
        flags,
        meta={"steps": int(result.steps[0]), "rejected": int(result.rejected[0]), "min_step": float(min_h)},
        _coeffs=q,
    )
    if sample_times is not None:
        out = traj.resample(sample_times, velocity)
        out._coeffs = None
        return out
    return traj


def integrate_ensemble(velocity: Callable, x0, t0: float, t1: float, options: IntegratorOptions = IntegratorOptions()) -> EnsembleResult:
    """Advance many independent trajectories to ``t1``; failures are recorded, not raised."""
    if not t1 >= t0:
        raise ValueError("t1 must not precede t0")
    x0 = np.asarray(x0, dtype=float)
    if t1 == t0:
        v = np.asarray(velocity(x0, np.full_like(x0, t0)), dtype=float)
        failed = ~np.isfinite(v)
        return EnsembleResult(x0.copy(), failed, [("node", t0, float(x)) for x in x0[failed]], np.zeros(len(x0), int), np.zeros(len(x0), int))
    return _advance(velocity, t0, x0, t1, options)


def peak_speed(traj: Trajectory, velocity: Callable, refine: int = 64) -> tuple[float, float]:
    """Largest |v| along a trajectory, refining around every sampled local maximum.

    Returns (time, velocity) of the extreme value. Uses the dense output, so
    the trajectory must carry its step polynomials.
    """
    from scipy.optimize import minimize_scalar

    speed = np.abs(traj.v)
    best_t, best_v = float(traj.t[np.argmax(speed)]), float(traj.v[np.argmax(speed)])
    interior = np.flatnonzero((speed[1:-1] >= speed[:-2]) & (speed[1:-1] >= speed[2:])) + 1
    for i in interior:
        lo, hi = traj.t[i - 1], traj.t[i + 1]

        def neg(tt):
            return -abs(float(velocity(traj.dense(np.array([tt])), np.array([tt]))[0]))

        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": (hi - lo) * 1e-10})
        # bounded Brent can miss a very sharp peak: also scan the bracket
        grid = np.linspace(lo, hi, refine)
        vals = np.abs(np.asarray(velocity(traj.dense(grid), grid), dtype=float))
        j = int(np.argmax(vals))
        cand = [(-res.fun, res.x), (vals[j], grid[j])]
        for val, tt in cand:
            if val > abs(best_v):
                best_t = float(tt)
                best_v = float(velocity(traj.dense(np.array([tt])), np.array([tt]))[0])
    return best_t, best_v
