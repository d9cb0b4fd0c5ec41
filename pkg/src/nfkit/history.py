"""Functional state of a delayed system: cubic-Hermite history segments.

A HistorySegment stores (t_i, y_i, y'_i) knots on an increasing time
grid covering at least [t_end - tau_max, t_end] and answers point
queries by piecewise cubic Hermite interpolation. Knot derivatives come
from the vector field itself while integrating, which keeps the
interpolant at the same fourth order as the RK4 stepper.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


class HistorySegment:
    """Cubic Hermite interpolant over strictly increasing time stamps."""

    def __init__(self, times, values, derivatives=None, extrapolation_slack=0.0):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise DomainError("history needs at least two time stamps")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("history time stamps must be strictly increasing")
        if self.values.shape[0] != self.times.shape[0]:
            raise DomainError("one value row per time stamp required")
        if derivatives is None:
            derivatives = np.gradient(self.values, self.times, axis=0)
        self.derivatives = np.asarray(derivatives, dtype=float)
        if self.derivatives.shape != self.values.shape:
            raise DomainError("derivative shape must match value shape")
        # queries may overrun the last knot by this much (one solver step)
        self.extrapolation_slack = float(extrapolation_slack)

    @classmethod
    def from_function(cls, fn, t0, t1, n, dim=None):
        """Sample a callable t -> state on n+1 uniform knots of [t0, t1]."""
        ts = np.linspace(t0, t1, n + 1)
        vals = np.asarray([np.asarray(fn(t), dtype=float) for t in ts])
        return cls(ts, vals)

    @classmethod
    def constant(cls, value, t0, t1):
        value = np.asarray(value, dtype=float)
        ts = np.array([t0, t1])
        vals = np.stack([value, value])
        return cls(ts, vals, derivatives=np.zeros_like(vals))

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        if t < self.times[0] or t > self.times[-1] + self.extrapolation_slack:
            raise DomainError(
                f"history query t={t} outside covered window "
                f"[{self.times[0]}, {self.times[-1]}]"
            )
        if t >= self.times[-1]:
            i = len(self.times) - 2
        else:
            i = int(np.searchsorted(self.times, t, side="right")) - 1
            i = max(i, 0)
        h = self.times[i + 1] - self.times[i]
        s = (t - self.times[i]) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h01 = 3 * s2 - 2 * s3
        h10 = s3 - 2 * s2 + s
        h11 = s3 - s2
        return (
            h00 * self.values[i]
            + h01 * self.values[i + 1]
            + h * (h10 * self.derivatives[i] + h11 * self.derivatives[i + 1])
        )

    def eval_many(self, ts) -> np.ndarray:
        """Vectorised interpolation; returns shape (len(ts), state_dim)."""
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < self.times[0]) or np.any(ts > self.times[-1] + self.extrapolation_slack):
            raise DomainError("history query outside covered window")
        i = np.searchsorted(self.times, ts, side="right") - 1
        i = np.clip(i, 0, len(self.times) - 2)
        h = (self.times[i + 1] - self.times[i])[:, None]
        s = ((ts - self.times[i]) / (self.times[i + 1] - self.times[i]))[:, None]
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h01 = 3 * s2 - 2 * s3
        h10 = s3 - 2 * s2 + s
        h11 = s3 - s2
        return (
            h00 * self.values[i]
            + h01 * self.values[i + 1]
            + h * (h10 * self.derivatives[i] + h11 * self.derivatives[i + 1])
        )


class ComposedHistory:
    """Initial segment glued to a trajectory segment at t0.

    The solution of a delayed system generically has a derivative jump
    where the prescribed history ends, so the two pieces must keep their
    own knot derivatives; a single merged Hermite segment would smear
    the kink into both neighbouring intervals.
    """

    def __init__(self, init: HistorySegment, times, values, derivatives):
        self.init = init
        self.traj = HistorySegment(times, values, derivatives)

    @property
    def t_split(self) -> float:
        return float(self.traj.times[0])

    def __call__(self, t: float) -> np.ndarray:
        return self.init(t) if t <= self.t_split else self.traj(t)

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        out = np.empty((len(ts), self.traj.values.shape[1]))
        m = ts <= self.t_split
        if m.any():
            out[m] = self.init.eval_many(ts[m])
        if (~m).any():
            out[~m] = self.traj.eval_many(ts[~m])
        return out


class HistoryRing:
    """Fixed-step append-only history used inside the solvers.

    Stores the last `capacity` knots (capacity >= ceil(tau_max/dt) + 4)
    plus the pre-0 segment; bracket lookup is O(1) thanks to the uniform
    step. Interpolation matches HistorySegment's Hermite rule.
    """

    def __init__(self, init: HistorySegment, dt: float, tau_max: float, state_dim: int):
        self.init = init
        self.dt = float(dt)
        self.t0 = init.t_end
        cap = int(np.ceil(tau_max / dt)) + 4 if tau_max > 0 else 4
        self.capacity = cap
        self.times = np.empty(0)
        self._vals = np.empty((0, state_dim))
        self._ders = np.empty((0, state_dim))
        self.n = 0  # knots appended so far (index of last = n-1)

    def append(self, t, value, derivative):
        self.times = np.append(self.times, t)[-self.capacity:]
        self._vals = np.vstack([self._vals, value])[-self.capacity:]
        self._ders = np.vstack([self._ders, derivative])[-self.capacity:]
        self.n += 1

    def eval(self, t: float) -> np.ndarray:
        if t <= self.t0:
            return self.init(t)
        base = self.n - len(self.times)  # global index of the first buffered knot
        j = int(np.floor((t - self.t0) / self.dt + 1e-12))  # step interval index
        j = min(j, self.n - 1)
        i = j - base  # local index of the knot at/just before t
        if i < 0:
            raise DomainError("history ring no longer covers the requested time")
        if i >= len(self.times) - 1:
            # between the last appended knot and t0.. or extrapolating one step
            i = len(self.times) - 1
            tl = self.times[i]
            vl, dl = self._vals[i], self._ders[i]
            if abs(t - tl) < 1e-12 * max(1.0, abs(tl)):
                return vl.copy()
            # Hermite on [t_{i-1}, t_i] extended past t_i by < dt
            if len(self.times) >= 2:
                return self._hermite(i - 1, t)
            return vl + (t - tl) * dl
        return self._hermite(i, t)

    def _hermite(self, i, t):
        tl, tr = self.times[i], self.times[i + 1]
        h = tr - tl
        s = (t - tl) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h01 = 3 * s2 - 2 * s3
        h10 = s3 - 2 * s2 + s
        h11 = s3 - s2
        return (
            h00 * self._vals[i]
            + h01 * self._vals[i + 1]
            + h * (h10 * self._ders[i] + h11 * self._ders[i + 1])
        )
