"""Moment dynamics of finite-population networks.

Integrates the coupled delayed ODEs on per-population mean and variance

    mu'_a(t) = -mu_a/theta_a + sum_b J_ab f_b(mu_b(t-tau_ab), v_b(t-tau_ab)) + I_a(t)
    v'_a(t)  = -2 v_a/theta_a + sum_b sigma_ab^2 f_b(...)^2 + lam_a(t)^2

with classical fixed-step RK4 and cubic Hermite interpolation of the
history for delayed evaluations (method-of-steps flavour). Equilibria of
the delay-free field, the two-time covariance function and a Picard
iteration on the integral form (an independent solver oracle) live here
too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import qmc

from .errors import DivergenceError, DomainError, SolverIntegrityError
from .history import ComposedHistory, HistoryRing, HistorySegment
from .models import FinitePopulationModel
from .sigmoid import SigmoidSpec, gauss_expectation, gauss_expectation_grad

VARIANCE_SLACK = 1e-12  # tolerated negative excursion before declaring failure

_trapz = getattr(np, "trapezoid", None) or np.trapz


def _specs(spec, p) -> List[SigmoidSpec]:
    if isinstance(spec, SigmoidSpec):
        return [spec] * p
    spec = list(spec)
    if len(spec) != p:
        raise DomainError(f"need one sigmoid spec per population, got {len(spec)}")
    return spec


def _f_vec(specs, mu, v):
    if all(s is specs[0] for s in specs):
        return np.asarray(gauss_expectation(specs[0], mu, v))
    return np.array([gauss_expectation(s, m, vv) for s, m, vv in zip(specs, mu, v)])


def _f_grad_vec(specs, mu, v):
    if all(s is specs[0] for s in specs):
        dm, dv = gauss_expectation_grad(specs[0], mu, v)
        return np.asarray(dm), np.asarray(dv)
    out = [gauss_expectation_grad(s, m, vv) for s, m, vv in zip(specs, mu, v)]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


@dataclass
class MomentTrajectory:
    """Time-indexed (mu, v) per population plus the initial history."""

    model: FinitePopulationModel
    times: np.ndarray
    mu: np.ndarray        # (n_times, P)
    v: np.ndarray         # (n_times, P)
    derivatives: np.ndarray  # (n_times, 2P) knot derivatives of the stacked state
    init: HistorySegment
    metadata: dict = field(default_factory=dict)

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.mu, self.v], axis=1)

    def segment(self) -> ComposedHistory:
        """The whole trajectory (history included) as one interpolant.

        Keeps the initial segment and the integrated piece separate so
        the derivative kink at t0 is preserved exactly.
        """
        return ComposedHistory(self.init, self.times, self.state, self.derivatives)

    def at(self, t: float) -> np.ndarray:
        seg = getattr(self, "_seg", None)
        if seg is None:
            seg = self.segment()
            object.__setattr__(self, "_seg", seg)
        return seg(t)

    def final_state(self) -> np.ndarray:
        return np.concatenate([self.mu[-1], self.v[-1]])


@dataclass(eq=False)
class Equilibrium:
    """A root of the delay-free moment field with a residual certificate."""

    mu: np.ndarray
    v: np.ndarray
    residual: float
    stability: Optional[str] = None  # "stable" | "unstable" | "marginal"
    rightmost_roots: list = field(default_factory=list)

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.mu, self.v])


def default_dt(model: FinitePopulationModel) -> float:
    """min(tau_min, theta_min)/50 with zero delays ignored."""
    pos = model.tau[model.tau > 0]
    tau_min = pos.min() if pos.size else np.inf
    return float(min(tau_min, model.theta_min) / 50.0)


def make_rhs(model: FinitePopulationModel, spec):
    """Build the moment vector field t, y, delayed -> dy.

    `delayed` maps each distinct positive delay to the state at t - d;
    the zero-delay group uses the current state. Returned alongside is
    the list of distinct delays the field needs.
    """
    p = model.P
    specs = _specs(spec, p)
    delays = model.distinct_delays()
    jm = {d: np.where(model.tau == d, model.J, 0.0) for d in delays}
    sm = {d: np.where(model.tau == d, model.sigma**2, 0.0) for d in delays}
    inv_theta = 1.0 / model.theta

    def rhs(t, y, delayed):
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"state diverged at t={t}", t=t)
        mu, v = y[:p], y[p:]
        dmu = -mu * inv_theta + model.input_at(t)
        dv = -2.0 * v * inv_theta + model.lam_at(t) ** 2
        for d in delays:
            yd = y if d == 0.0 else delayed[d]
            fd = _f_vec(specs, yd[:p], np.maximum(yd[p:], 0.0))
            dmu = dmu + jm[d] @ fd
            dv = dv + sm[d] @ (fd * fd)
        return np.concatenate([dmu, dv])

    return rhs, [d for d in delays if d > 0]


def _coerce_init(init, model, t0=0.0) -> HistorySegment:
    if isinstance(init, HistorySegment):
        return init
    state = np.asarray(init, dtype=float)
    if state.shape != (2 * model.P,):
        raise DomainError(f"initial state must have shape ({2*model.P},)")
    span = max(model.tau_max, 1.0e-9)
    return HistorySegment.constant(state, t0 - span, t0)


def integrate_moments(
    model: FinitePopulationModel,
    spec,
    init,
    t_end: float,
    dt: Optional[float] = None,
    check_floor: bool = True,
) -> MomentTrajectory:
    """Fixed-step RK4 for the delayed moment equations.

    `init` is a HistorySegment over [t0 - tau_max, t0] on the stacked
    state (mu_1..mu_P, v_1..v_P), or a constant state vector. The result
    is deterministic and bit-reproducible for fixed inputs.
    """
    p = model.P
    if dt is None:
        dt = default_dt(model)
    if not dt > 0:
        raise DomainError("dt must be positive")
    init = _coerce_init(init, model)
    if init.t_end - init.t_start + 1e-12 < model.tau_max:
        raise DomainError("initial history does not cover the maximal delay")
    rhs, delays = make_rhs(model, spec)
    t0 = init.t_end
    n_steps = int(np.ceil((t_end - t0) / dt - 1e-12))
    ring = HistoryRing(init, dt, model.tau_max, 2 * p)

    y = init(t0).copy()
    d0 = rhs(t0, y, {d: init(t0 - d) for d in delays})
    ring.append(t0, y, d0)

    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, 2 * p))
    ders = np.empty((n_steps + 1, 2 * p))
    times[0], states[0], ders[0] = t0, y, d0

    v_min_seen = float(np.min(y[p:]))
    k1 = d0
    for n in range(n_steps):
        t = t0 + n * dt

        def delayed_at(ts):
            return {d: ring.eval(ts - d) for d in delays}

        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1, delayed_at(t + 0.5 * dt))
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2, delayed_at(t + 0.5 * dt))
        k4 = rhs(t + dt, y + dt * k3, delayed_at(t + dt))
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_next = t0 + (n + 1) * dt

        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"state diverged at t={t_next}", t=t_next)
        v_now = y[p:]
        if np.any(v_now < -VARIANCE_SLACK):
            raise SolverIntegrityError(
                f"variance dropped below -{VARIANCE_SLACK} at t={t_next}: min={v_now.min()}"
            )
        v_min_seen = min(v_min_seen, float(v_now.min()))

        k1 = rhs(t_next, y, delayed_at(t_next))  # reused as next step's k1
        ring.append(t_next, y, k1)
        times[n + 1], states[n + 1], ders[n + 1] = t_next, y, k1

    meta = {"method": "rk4-hermite", "dt": dt, "v_min": v_min_seen, "spec_list": _specs(spec, p)}
    lam0 = model.lam_floor()
    if check_floor and lam0 is not None and lam0 > 0:
        v0 = float(np.min(init.values[:, p:]))
        floor = min(v0, lam0**2 * model.theta_min / 2.0)
        meta["variance_floor"] = floor
        if v_min_seen < floor - 1e-9:
            raise SolverIntegrityError(
                f"variance floor violated: min v={v_min_seen} < {floor}"
            )
    return MomentTrajectory(
        model, times, states[:, :p], states[:, p:], ders, init, meta
    )


def delay_free_field(model: FinitePopulationModel, spec):
    """The vector field with all delays collapsed to zero, plus its Jacobian."""
    p = model.P
    specs = _specs(spec, p)
    s2 = model.sigma**2
    inv_theta = 1.0 / model.theta

    def G(y, t=0.0):
        mu, v = y[:p], np.maximum(y[p:], 0.0)
        f = _f_vec(specs, mu, v)
        dmu = -mu * inv_theta + model.J @ f + model.input_at(t)
        dv = -2.0 * v * inv_theta + s2 @ (f * f) + model.lam_at(t) ** 2
        return np.concatenate([dmu, dv])

    def jac(y, t=0.0):
        mu, v = y[:p], np.maximum(y[p:], 0.0)
        f = _f_vec(specs, mu, v)
        fm, fv = _f_grad_vec(specs, mu, v)
        out = np.zeros((2 * p, 2 * p))
        out[:p, :p] = model.J * fm - np.diag(inv_theta)
        out[:p, p:] = model.J * fv
        out[p:, :p] = s2 * (2.0 * f * fm)
        out[p:, p:] = s2 * (2.0 * f * fv) - np.diag(2.0 * inv_theta)
        return out

    return G, jac


def find_equilibria(
    model: FinitePopulationModel,
    spec,
    box=None,
    n_starts: int = 256,
    tol: float = 1e-10,
    dedup: float = 1e-8,
    t_eval: float = 0.0,
    info: Optional[dict] = None,
) -> List[Equilibrium]:
    """Damped Newton on the delay-free field from quasi-random seeds.

    Delays do not move equilibria, so the delay-free roots are the DDE
    equilibria. Returns points with residual < tol, deduplicated within
    `dedup` (keeping the smaller residual). Inputs are frozen at t_eval.
    """
    p = model.P
    G, jac = delay_free_field(model, spec)
    if box is None:
        jmax = np.abs(model.J).sum(axis=1)
        imax = np.abs(model.input_at(t_eval))
        mu_hi = model.theta * (jmax + imax) + 1.0
        v_hi = model.theta / 2.0 * (
            (model.sigma**2).sum(axis=1) + model.lam_at(t_eval) ** 2
        ) + 1.0
        lo = np.concatenate([-mu_hi, np.zeros(p)])
        hi = np.concatenate([mu_hi, v_hi])
    else:
        lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        raise DomainError("equilibrium search box must be finite")

    sampler = qmc.Halton(d=2 * p, seed=0)
    seeds = lo + sampler.random(n_starts) * (hi - lo)
    found: List[Equilibrium] = []
    skipped = 0
    for seed in seeds:
        y = seed.copy()
        ok = False
        for _ in range(80):
            g = G(y, t_eval)
            r = np.linalg.norm(g)
            if r < tol:
                ok = True
                break
            try:
                step = np.linalg.solve(jac(y, t_eval), -g)
            except np.linalg.LinAlgError:
                skipped += 1
                break
            lamda = 1.0
            for _ in range(40):
                y_new = y + lamda * step
                if np.linalg.norm(G(y_new, t_eval)) < r:
                    break
                lamda *= 0.5
            else:
                break
            y = y_new
        if not ok:
            continue
        eq = Equilibrium(mu=y[:p].copy(), v=y[p:].copy(), residual=float(np.linalg.norm(G(y, t_eval))))
        dup_idx = next(
            (i for i, e in enumerate(found) if np.linalg.norm(e.state - eq.state) < dedup),
            None,
        )
        if dup_idx is None:
            found.append(eq)
        elif eq.residual < found[dup_idx].residual:
            found[dup_idx] = eq
    for eq in found:
        ev = np.linalg.eigvals(jac(eq.state, t_eval))
        re = ev.real.max()
        if model.tau_max == 0:
            eq.stability = "stable" if re < -1e-9 else ("unstable" if re > 1e-9 else "marginal")
            eq.rightmost_roots = sorted(ev, key=lambda z: -z.real)[:4]
    found.sort(key=lambda e: tuple(e.mu))
    if info is not None:
        info["skipped_seeds"] = skipped
        info["n_starts"] = n_starts
    return found


def covariance(traj: MomentTrajectory, alpha: int, t1: float, t2: float, beta=None) -> float:
    """Two-time covariance C_ab(t1, t2) along a moment trajectory.

    Cross-population covariance is null by construction (independent
    driving noises). Same-population covariance is

        exp(-(t1+t2)/theta_a) * [ v_a(0)
            + int_0^{t1^t2} exp(2s/theta_a) (lam_a(s)^2
            + sum_b sigma_ab^2 f_b(mu_b(s-tau_ab), v_b(s-tau_ab))^2) ds ]

    by trapezoid quadrature on the trajectory grid.
    """
    model = traj.model
    p = model.P
    if beta is not None and beta != alpha:
        return 0.0
    tmin, tmax = float(traj.times[0]), float(traj.times[-1])
    for t in (t1, t2):
        if not (tmin < t <= tmax):
            raise DomainError(f"covariance time {t} outside trajectory range ({tmin}, {tmax}]")
    seg = traj.segment()
    theta = model.theta[alpha]
    t_up = min(t1, t2)
    grid = traj.times[traj.times <= t_up + 1e-12]
    if grid[-1] < t_up - 1e-12:
        grid = np.append(grid, t_up)

    spec_list = traj.metadata.get("spec_list")

    def integrand(s):
        val = model.lam_at(s)[alpha] ** 2
        for b in range(p):
            if model.sigma[alpha, b] == 0.0:
                continue
            sd = seg(s - model.tau[alpha, b])
            fb = gauss_expectation(spec_list[b], sd[b], max(sd[p + b], 0.0))
            val += model.sigma[alpha, b] ** 2 * fb**2
        return np.exp(2.0 * s / theta) * val

    if spec_list is None:
        raise DomainError("trajectory metadata lacks 'spec_list'; integrate with integrate_moments")
    vals = np.array([integrand(s) for s in grid])
    integral = _trapz(vals, grid)
    v0 = traj.init(traj.times[0])[p + alpha]
    return float(np.exp(-(t1 + t2) / theta) * (v0 + integral))


def picard_iterate(
    model: FinitePopulationModel,
    spec,
    init,
    t_end: float,
    n_iter: int = 0,
    dt: Optional[float] = None,
    tol: float = 0.0,
    max_iter: int = 2000,
) -> MomentTrajectory:
    """Iterate the integral-form moment map from a seed trajectory.

    One application maps a candidate trajectory phi to

        mu(t) = e^{-t/th} [mu(0) + int_0^t e^{s/th} (I + sum J f(phi_delayed)) ds]
        v(t)  = e^{-2t/th}[v(0) + int_0^t e^{2s/th} (lam^2 + sum s^2 f^2(phi_delayed)) ds]

    with per-step Simpson quadrature (midpoints from the Hermite
    interpolant of the previous iterate). n_iter=0 returns the seed;
    tol>0 iterates until the sup-norm change drops below tol. Fixed
    points of the map coincide with solutions of the moment equations,
    so a converged iterate is an independent oracle for the RK4 path.
    """
    p = model.P
    specs = _specs(spec, p)
    if dt is None:
        dt = default_dt(model)
    init = _coerce_init(init, model)
    t0 = init.t_end
    n_steps = int(np.ceil((t_end - t0) / dt - 1e-12))
    times = t0 + dt * np.arange(n_steps + 1)
    delays = model.distinct_delays()
    jm = {d: np.where(model.tau == d, model.J, 0.0) for d in delays}
    sm = {d: np.where(model.tau == d, model.sigma**2, 0.0) for d in delays}
    theta = model.theta
    y0 = init(t0)

    # seed: constant continuation of the initial state
    vals = np.tile(y0, (n_steps + 1, 1))
    ders = np.zeros_like(vals)
    seg = ComposedHistory(init, times, vals, ders)

    # fine grid = step endpoints plus midpoints, for per-step Simpson
    fine = np.empty(2 * n_steps + 1)
    fine[0::2] = times
    fine[1::2] = times[:-1] + 0.5 * dt

    def drift_grid(segment):
        """(mu_drive, v_drive) on the fine grid, vectorised over time."""
        if callable(model.I):
            mu_drive = np.stack([model.input_at(s) for s in fine])
        else:
            mu_drive = np.tile(model.input_at(0.0), (len(fine), 1))
        if callable(model.lam):
            v_drive = np.stack([model.lam_at(s) ** 2 for s in fine])
        else:
            v_drive = np.tile(model.lam_at(0.0) ** 2, (len(fine), 1))
        for d in delays:
            yd = segment.eval_many(fine - d)
            fd = np.column_stack(
                [
                    np.asarray(gauss_expectation(s, yd[:, b], np.maximum(yd[:, p + b], 0.0)))
                    for b, s in enumerate(specs)
                ]
            )
            mu_drive = mu_drive + fd @ jm[d].T
            v_drive = v_drive + (fd * fd) @ sm[d].T
        return mu_drive, v_drive

    sup_deltas = []
    n_applied = 0
    while True:
        if (tol <= 0 and n_applied >= n_iter) or (tol > 0 and n_applied >= max_iter):
            break
        mu_drive, v_drive = drift_grid(seg)
        # Simpson increments per step, then prefix sums of the integrals
        wl = dt / 6.0
        emu = np.exp(fine[:, None] / theta)
        ev = np.exp(2.0 * fine[:, None] / theta)
        inc_mu = wl * (
            emu[0:-1:2] * mu_drive[0:-1:2]
            + 4.0 * emu[1::2] * mu_drive[1::2]
            + emu[2::2] * mu_drive[2::2]
        )
        inc_v = wl * (
            ev[0:-1:2] * v_drive[0:-1:2]
            + 4.0 * ev[1::2] * v_drive[1::2]
            + ev[2::2] * v_drive[2::2]
        )
        i_mu = np.vstack([np.zeros(p), np.cumsum(inc_mu, axis=0)])
        i_v = np.vstack([np.zeros(p), np.cumsum(inc_v, axis=0)])
        mu_new = np.exp(-times[:, None] / theta) * (y0[:p] + i_mu)
        v_new = np.exp(-2.0 * times[:, None] / theta) * (y0[p:] + i_v)
        new_vals = np.concatenate([mu_new, v_new], axis=1)
        new_ders = np.concatenate(
            [
                -mu_new / theta + mu_drive[0::2],
                -2.0 * v_new / theta + v_drive[0::2],
            ],
            axis=1,
        )
        delta = float(np.max(np.abs(new_vals - vals)))
        sup_deltas.append(delta)
        vals, ders = new_vals, new_ders
        seg = ComposedHistory(init, times, vals, ders)
        n_applied += 1
        if tol > 0 and delta < tol:
            break

    meta = {
        "method": "picard-simpson",
        "dt": dt,
        "iterations": n_applied,
        "sup_deltas": sup_deltas,
        "spec_list": specs,
    }
    return MomentTrajectory(
        model, times, vals[:, :p], vals[:, p:], ders, init, meta
    )
