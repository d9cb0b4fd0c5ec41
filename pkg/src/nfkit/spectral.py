"""Semi-analytic bifurcation machinery.

Covers four layers of analysis around moment equilibria:

* characteristic roots of the symmetric two-population benchmark
  (J = [[1,-1],[1,1]]) in closed form through Lambert-W branches,
  zeta_k^{+-} = -1 + W_k(G tau e^tau (1 +- i))/tau with
  G = g / sqrt(2 pi (1 + g^2 lam^2/2)), each root certified by plugging
  back into -(zeta+1) + G e^{-zeta tau} (1 +- i) = 0;
* the Hopf curves of that benchmark,
  omega^2 = (-pi + g^2 (1 - pi lam^2/2)) / (pi (1 + g^2 lam^2/2)),
  tau = (-arctan(omega) +- pi/4 + 2 k pi)/omega, which only exist below
  the noise ceiling lam*^2 = 2 (1/pi - 1/g^2);
* dispersion relations nu_k = -1/theta + F0' a_k(nu_k) of one-layer
  fields with exponential kernels, where a_k(nu) is the Fourier
  coefficient of kernel * exp(-nu * delay) on the unit circle
  parameterised by [0,1), plus the closed-form Turing-Hopf curves for
  purely synaptic delays;
* a generic delayed linearisation engine: numerical Jacobians of the
  moment field, Newton harvesting of det(zeta I - A0 - sum A_d e^{-zeta d})
  roots from a seed grid, verified by an argument-principle count on the
  rectangle boundary.

Every emitted quantity carries a plug-back residual certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import CertificationError, DomainError
from .lambertw import lambert_w
from .models import FinitePopulationModel, NeuralFieldModel
from .sigmoid import SigmoidSpec, f0_values
from . import dde as _dde

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# symmetric benchmark: closed-form characteristic roots and Hopf curves
# ---------------------------------------------------------------------------

@dataclass
class CharacteristicRoot:
    zeta: complex
    branch: int = 0
    family: str = ""          # "+", "-" for the symmetric benchmark, "" generic
    residual: float = np.nan

    def __repr__(self):
        return (
            f"CharacteristicRoot({self.zeta:.6g}, k={self.branch}, "
            f"family={self.family or '-'}, res={self.residual:.2e})"
        )


def effective_gain(g: float, lam: float) -> float:
    """Linearised coupling gain at the symmetric fixed point (0, lam^2/2)."""
    return g / np.sqrt(TWO_PI * (1.0 + g * g * lam * lam / 2.0))


def symmetric_root_residual(zeta, g, lam, tau, sign) -> float:
    G = effective_gain(g, lam)
    return abs(-(zeta + 1.0) + G * np.exp(-zeta * tau) * (1.0 + 1j * sign))


def characteristic_roots_symmetric(
    g: float, lam: float, tau: float, n_branches: int = 5
) -> List[CharacteristicRoot]:
    """All W_k branch roots, k in [-n_branches, n_branches], both families.

    Sorted by descending real part; each root carries its plug-back
    residual (certified < 1e-10 by the test suite).
    """
    if tau <= 0:
        raise DomainError("characteristic roots need tau > 0")
    if lam < 0:
        raise DomainError("noise std must be nonnegative")
    G = effective_gain(g, lam)
    roots = []
    for sign in (+1, -1):
        arg = G * tau * np.exp(tau) * (1.0 + 1j * sign)
        for k in range(-n_branches, n_branches + 1):
            z = -1.0 + lambert_w(k, arg) / tau
            roots.append(
                CharacteristicRoot(
                    zeta=complex(z),
                    branch=k,
                    family="+" if sign > 0 else "-",
                    residual=symmetric_root_residual(z, g, lam, tau, sign),
                )
            )
    roots.sort(key=lambda r: -r.zeta.real)
    return roots


def lambda_star(g: float) -> float:
    """Noise ceiling for Hopf bifurcations, lam*^2 = 2(1/pi - 1/g^2)."""
    val = 2.0 * (1.0 / np.pi - 1.0 / (g * g))
    if val <= 0:
        raise DomainError(f"no Hopf ceiling for g={g} <= sqrt(pi)")
    return float(np.sqrt(val))


def hopf_omega(g: float, lam: float) -> float:
    """Crossing frequency omega(lam) of the symmetric benchmark."""
    num = -np.pi + g * g * (1.0 - np.pi * lam * lam / 2.0)
    den = np.pi * (1.0 + g * g * lam * lam / 2.0)
    val = num / den
    if val <= 0:
        raise DomainError(f"no purely imaginary root at g={g}, lam={lam}")
    return float(np.sqrt(val))


def hopf_taus(g: float, lam: float, m_range=range(0, 4), tau_max=np.inf) -> list:
    """Positive crossing delays (-arctan w +- pi/4 + 2 m pi)/w, labelled."""
    w = hopf_omega(g, lam)
    out = []
    for m in m_range:
        for sign in (+1, -1):
            tau = (-np.arctan(w) + sign * np.pi / 4.0 + TWO_PI * m) / w
            if 0 < tau <= tau_max:
                out.append({"tau": tau, "omega": w, "m": m, "sign": sign})
    out.sort(key=lambda d: d["tau"])
    return out


def symmetric_rightmost_re(g: float, lam: float, tau: float, n_branches: int = 8) -> float:
    roots = characteristic_roots_symmetric(g, lam, tau, n_branches)
    return max(r.zeta.real for r in roots)


def symmetric_branch_crossings(
    g: float,
    lam: float,
    taus: Sequence[float],
    n_branches: int = 6,
    refine_iters: int = 60,
) -> list:
    """Zero crossings of Re zeta_k^{+-}(tau) along a tau sweep.

    Each Lambert-W branch root moves continuously in tau; a sign change
    of its real part between consecutive sweep points is bisected down
    to the crossing delay. Returns dicts with branch labels and the
    refined tau; crossings shared by conjugate branch pairs appear once
    per branch.
    """

    def branch_re(k, sign, tau):
        G = effective_gain(g, lam)
        arg = G * tau * np.exp(tau) * (1.0 + 1j * sign)
        return (-1.0 + lambert_w(k, arg) / tau).real

    taus = np.asarray(list(taus), dtype=float)
    out = []
    for sign in (+1, -1):
        for k in range(-n_branches, n_branches + 1):
            res = np.array([branch_re(k, sign, t) for t in taus])
            for i in np.flatnonzero(np.sign(res[:-1]) * np.sign(res[1:]) < 0):
                a, b = taus[i], taus[i + 1]
                fa = res[i]
                for _ in range(refine_iters):
                    m = 0.5 * (a + b)
                    fm = branch_re(k, sign, m)
                    if fa * fm <= 0:
                        b = m
                    else:
                        a, fa = m, fm
                out.append({"k": k, "sign": sign, "tau": 0.5 * (a + b)})
    out.sort(key=lambda d: d["tau"])
    return out


@dataclass
class HopfPoint:
    lam: float
    tau: float
    omega: float
    m: int          # 2*pi*m branch of the argument equation
    sign: int       # +-pi/4 family
    crossing_re: float = np.nan  # real part of the certified crossing root

    @property
    def certified(self) -> bool:
        return abs(self.crossing_re) < 1e-6


@dataclass
class HopfCurves:
    g: float
    lam_star: Optional[float]
    status: str
    points: List[HopfPoint] = field(default_factory=list)

    def curve(self, sign: int, m: int) -> List[HopfPoint]:
        return [p for p in self.points if p.sign == sign and p.m == m]


def hopf_curves(
    g: float,
    m_range=range(0, 4),
    n_lambda: int = 40,
    certify: bool = True,
    n_branches: int = 8,
) -> HopfCurves:
    """Hopf delay curves of the symmetric benchmark, sampled in lam.

    For g <= sqrt(pi) no curve exists; the result then carries an
    explanatory status and no points. Certification re-computes the
    characteristic roots at each (lam, tau) and records the real part of
    the root closest to the predicted crossing i*omega.
    """
    try:
        ls = lambda_star(g)
    except DomainError:
        return HopfCurves(g, None, f"no Hopf bifurcations: g={g} <= sqrt(pi)")
    pts = []
    lams = ls * (np.arange(n_lambda) + 0.5) / n_lambda
    for lam in lams:
        for d in hopf_taus(g, lam, m_range):
            p = HopfPoint(lam=float(lam), tau=d["tau"], omega=d["omega"], m=d["m"], sign=d["sign"])
            if certify:
                roots = characteristic_roots_symmetric(g, lam, d["tau"], n_branches)
                target = 1j * d["omega"]
                best = min(roots, key=lambda r: abs(r.zeta - target))
                p.crossing_re = best.zeta.real
            pts.append(p)
    return HopfCurves(g, ls, "ok", pts)


# ---------------------------------------------------------------------------
# one-layer field dispersion and Turing-Hopf curves
# ---------------------------------------------------------------------------

def a_k_exponential(s: float, nu, k: int, tau_d: float = 0.0, c: float = np.inf,
                    amplitude: float = 1.0):
    """Closed-form Fourier coefficient of A e^{-r/s} e^{-nu tau(r)} on [0,1).

        a_k(nu) = A e^{-nu tau_d} (1 - e^{-(1/s + nu/c)}) / (1/s + nu/c + 2 pi i k)

    with tau(r) = r/c + tau_d. amplitude A = 1 is the bare kernel
    convention; a model kernel w * e^{-r/s}/s uses A = w/s.
    """
    nu = np.asarray(nu, dtype=complex)
    q = 1.0 / s + (0.0 if np.isinf(c) else nu / c)
    val = amplitude * np.exp(-nu * tau_d) * (1.0 - np.exp(-q)) / (q + 2j * np.pi * k)
    return complex(val) if val.ndim == 0 else val


def fourier_coefficient_quadrature(profile_fn, nu, k: int, delay_fn=None,
                                   n_quad: int = 8192):
    """Composite-Simpson quadrature of int_0^1 p(r) e^{-nu tau(r)} e^{-2 pi i k r} dr."""
    if n_quad % 2:
        n_quad += 1
    r = np.linspace(0.0, 1.0, n_quad + 1)
    wts = np.ones(n_quad + 1)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    wts *= 1.0 / (3.0 * n_quad)
    integrand = profile_fn(r).astype(complex)
    if delay_fn is not None:
        integrand = integrand * np.exp(-np.asarray(nu, dtype=complex) * delay_fn(r))
    integrand = integrand * np.exp(-2j * np.pi * k * r)
    return complex(np.sum(wts * integrand))


@dataclass
class DispersionMode:
    k: int
    nu: complex
    a_k: complex
    b_k: complex
    converged: bool = True


@dataclass
class DispersionReport:
    modes: List[DispersionMode]
    variance_eigenvalue: float     # -2/theta, never destabilises
    rightmost: complex
    stable: bool
    F0_prime: float
    a_max: float                   # largest real part over the a_k(0)
    convention: str
    metadata: dict = field(default_factory=dict)

    def mode(self, k: int) -> DispersionMode:
        return next(m for m in self.modes if m.k == k)


def _one_layer_profiles(model: NeuralFieldModel, convention: str):
    """Deterministic and noise kernel profiles of a one-layer model on [0,1)."""
    if model.layers != 1:
        raise DomainError("dispersion analysis applies to one-layer fields")
    w = float(model.w[0, 0])
    sig = float(model.sigma[0, 0])
    s = float(model.s[0])
    if convention == "one-sided":
        prof = lambda r: w * np.exp(-r / s) / s
        prof_sq = lambda r: (sig * np.exp(-r / s) / s) ** 2
    elif convention == "domain-metric":
        prof = lambda r: w * model.kernel_profile(model.distance(0.0, r), 0)
        prof_sq = lambda r: (sig * model.kernel_profile(model.distance(0.0, r), 0)) ** 2
    else:
        raise DomainError(f"unknown kernel convention {convention!r}")
    return prof, prof_sq, w, s


def dispersion(
    model: NeuralFieldModel,
    spec: SigmoidSpec,
    v0: float,
    n_modes: int = 16,
    nu_query=None,
    convention: str = "one-sided",
    n_quad: int = 8192,
    newton_tol: float = 1e-12,
) -> DispersionReport:
    """Linear growth rates nu_k = -1/theta + F0' a_k(nu_k) around (0, v0).

    For the exponential kernel in the one-sided convention the
    coefficients are analytic and must agree with the quadrature path to
    1e-8 (the test suite enforces this); general kernels take the
    quadrature path. Without delays the relation is explicit; with
    delays each mode is solved by damped Newton and flagged (not fatal)
    when it fails to converge. The spectrum always contains the variance
    eigenvalue -2/theta, which cannot destabilise.
    """
    prof, prof_sq, w, s = _one_layer_profiles(model, convention)
    _, f0p = f0_values(spec, v0)
    theta = float(model.theta)
    no_delay = model.tau_d == 0.0 and np.isinf(model.c)
    delay_fn = (lambda r: model.delay_at(r)) if convention == "one-sided" else (
        lambda r: model.delay_at(model.distance(0.0, r)))
    analytic_ok = convention == "one-sided"

    def a_of(nu, k):
        if analytic_ok:
            return a_k_exponential(s, nu, k, model.tau_d, model.c, amplitude=w / s)
        return fourier_coefficient_quadrature(prof, nu, k, delay_fn, n_quad)

    modes = []
    for k in range(0, n_modes + 1):
        if no_delay:
            ak = a_of(0.0, k)
            nu = -1.0 / theta + f0p * ak
            conv = True
        else:
            nu = -1.0 / theta + f0p * a_of(-1.0 / theta, k)
            conv = False
            for _ in range(100):
                h = nu + 1.0 / theta - f0p * a_of(nu, k)
                if abs(h) < newton_tol:
                    conv = True
                    break
                eps = 1e-7
                dh = ((nu + eps) + 1.0 / theta - f0p * a_of(nu + eps, k) - h) / eps
                step = h / dh
                lamda = 1.0
                while lamda > 1e-6:
                    nu_new = nu - lamda * step
                    if abs(nu_new + 1.0 / theta - f0p * a_of(nu_new, k)) < abs(h):
                        break
                    lamda /= 2.0
                nu = nu - lamda * step
            ak = a_of(nu, k)
        nq = nu_query if nu_query is not None else nu
        bk = fourier_coefficient_quadrature(prof_sq, nq, k, delay_fn, n_quad)
        modes.append(DispersionMode(k=k, nu=complex(nu), a_k=complex(a_of(nq, k)), b_k=bk,
                                    converged=conv))
    a0s = [a_of(0.0, k) for k in range(0, n_modes + 1)]
    a_max = max(a.real for a in a0s)
    rightmost = max((m.nu for m in modes if m.converged), key=lambda z: z.real,
                    default=complex(-1.0 / theta))
    stable = rightmost.real < 0 and -2.0 / theta < 0
    return DispersionReport(
        modes=modes,
        variance_eigenvalue=-2.0 / theta,
        rightmost=complex(rightmost),
        stable=bool(stable),
        F0_prime=float(f0p),
        a_max=float(a_max),
        convention=convention,
        metadata={
            "fourier_convention": "a_k = int_0^1 J(r) e^(-nu tau(r)) e^(-2 pi i k r) dr on [0,1)",
            "sigmoid_convention": "probit: S(x) = Phi(g x + h), f(mu,v) = Phi((g mu + h)/sqrt(1+g^2 v))",
            "kernel_amplitude": w / s if convention == "one-sided" else w,
            "v0": v0,
        },
    )


@dataclass
class TuringHopfPoint:
    k: int
    m: int
    tau_d: float
    omega: float
    certified_re: float = np.nan

    @property
    def certified(self) -> bool:
        return abs(self.certified_re) < 1e-6


@dataclass
class TuringHopfResult:
    status: str
    points: List[TuringHopfPoint] = field(default_factory=list)


def turing_hopf_curves(
    model: NeuralFieldModel,
    spec: SigmoidSpec,
    v0: float,
    k: int,
    m_range=range(0, 3),
    certify: bool = True,
) -> TuringHopfResult:
    """Synaptic-delay Turing-Hopf curves of mode k (requires c = inf).

        omega_k = sqrt(F0'^2 A^2 (1-e^{-1/s})^2 / (1/s^2 + 4 pi^2 k^2) - 1/theta^2)
        tau_d^k = (-arctan(theta omega_k) - arctan(2 pi k s) + 2 pi m)/omega_k

    with A the kernel amplitude in the one-sided convention. A negative
    radicand means mode k admits no dynamic instability (empty result).
    Each emitted point re-certifies through dispersion(): the mode-k
    growth rate at tau_d^k must satisfy |Re nu_k| < 1e-6.
    """
    if not np.isinf(model.c):
        raise DomainError("closed-form Turing-Hopf curves require c = inf")
    _, f0p = f0_values(spec, v0)
    s = float(model.s[0])
    theta = float(model.theta)
    amp = float(model.w[0, 0]) / s
    gain2 = (f0p * amp * (1.0 - np.exp(-1.0 / s))) ** 2 / (1.0 / s**2 + 4.0 * np.pi**2 * k**2)
    rad = gain2 - 1.0 / theta**2
    if rad <= 0:
        return TuringHopfResult(f"no dynamic instability for mode k={k}")
    omega = float(np.sqrt(rad))
    pts = []
    for m in m_range:
        tau_d = (-np.arctan(theta * omega) - np.arctan(TWO_PI * k * s) + TWO_PI * m) / omega
        if tau_d <= 0:
            continue
        p = TuringHopfPoint(k=k, m=m, tau_d=float(tau_d), omega=omega)
        if certify:
            probe = NeuralFieldModel(
                s=model.s.copy(), w=model.w.copy(), sigma=model.sigma.copy(),
                domain=model.domain, boundary=model.boundary,
                c=np.inf, tau_d=float(tau_d), theta=theta,
                I=model.I, Lam=model.Lam,
            )
            rep = dispersion(probe, spec, v0, n_modes=max(k, 1), convention="one-sided")
            p.certified_re = rep.mode(k).nu.real
        pts.append(p)
    return TuringHopfResult("ok", pts)


# ---------------------------------------------------------------------------
# generic delayed linearisation: Jacobians, Newton harvest, winding count
# ---------------------------------------------------------------------------

def moment_delay_jacobians(model: FinitePopulationModel, spec, eq_state,
                           fd_step: float = 1e-6):
    """(A0, {d: A_d}) of the moment field at an equilibrium.

    Central finite differences on the instantaneous and per-delay
    arguments of the vector field; the zero-delay coupling group is
    folded into A0.
    """
    p = model.P
    rhs, delays = _dde.make_rhs(model, spec)
    y = np.asarray(eq_state, dtype=float)
    base_delayed = {d: y.copy() for d in delays}

    def col(fn, j, which):
        e = np.zeros(2 * p)
        e[j] = fd_step
        if which is None:
            return (rhs(0.0, y + e, base_delayed) - rhs(0.0, y - e, base_delayed)) / (2 * fd_step)
        dp = {d: (y + e if d == which else y) for d in delays}
        dm = {d: (y - e if d == which else y) for d in delays}
        return (rhs(0.0, y, dp) - rhs(0.0, y, dm)) / (2 * fd_step)

    A0 = np.column_stack([col(rhs, j, None) for j in range(2 * p)])
    mats = {}
    for d in delays:
        mats[d] = np.column_stack([col(rhs, j, d) for j in range(2 * p)])
    return A0, mats


def _char_matrix(zeta, A0, delay_mats):
    dim = A0.shape[0]
    zeta = np.asarray(zeta, dtype=complex)
    M = zeta[..., None, None] * np.eye(dim) - A0
    Mp = np.broadcast_to(np.eye(dim, dtype=complex), M.shape).copy()
    for d, Ad in delay_mats.items():
        phase = np.exp(-zeta * d)[..., None, None]
        M = M - Ad * phase
        Mp = Mp + d * Ad * phase
    return M, Mp


def _winding_count(A0, delay_mats, re_lim, im_lim, n_side=400, max_refine=14):
    """Argument-principle root count inside the rectangle via slogdet phase."""
    corners = [
        complex(re_lim[0], im_lim[0]), complex(re_lim[1], im_lim[0]),
        complex(re_lim[1], im_lim[1]), complex(re_lim[0], im_lim[1]),
        complex(re_lim[0], im_lim[0]),
    ]
    pts = []
    for a, b in zip(corners[:-1], corners[1:]):
        pts.append(a + (b - a) * np.linspace(0, 1, n_side, endpoint=False))
    path = np.concatenate(pts + [np.array([corners[0]])])

    def phases(zs):
        M, _ = _char_matrix(zs, A0, delay_mats)
        sign, _logdet = np.linalg.slogdet(M)
        return np.angle(sign)

    ph = phases(path)
    for _ in range(max_refine):
        dph = np.diff(ph)
        bad = np.abs(((dph + np.pi) % (2 * np.pi)) - np.pi) > np.pi / 2
        if not np.any(bad):
            break
        new_path = [path[0]]
        new_ph = [ph[0]]
        mids = 0.5 * (path[:-1][bad] + path[1:][bad])
        mid_ph = phases(mids)
        mi = 0
        for i in range(len(path) - 1):
            if bad[i]:
                new_path.append(mids[mi])
                new_ph.append(mid_ph[mi])
                mi += 1
            new_path.append(path[i + 1])
            new_ph.append(ph[i + 1])
        path = np.array(new_path)
        ph = np.array(new_ph)
    total = np.sum(((np.diff(ph) + np.pi) % (2 * np.pi)) - np.pi)
    return int(np.round(total / (2 * np.pi)))


def delayed_roots(
    A0: np.ndarray,
    delay_mats: dict,
    re_lim=(-10.0, 5.0),
    im_lim=(0.0, 50.0),
    n_re: int = 40,
    n_im: int = 100,
    extra_seeds: Sequence[complex] = (),
    newton_iters: int = 60,
    dedup: float = 1e-8,
    count_check: bool = True,
) -> tuple:
    """Roots of det(zeta I - A0 - sum_d A_d e^{-zeta d}) in a rectangle.

    Newton iteration zeta <- zeta - 1/tr(M^{-1} M') runs batched from a
    seed grid; converged points are deduplicated, reflected across the
    real axis (the field is real) and verified against an
    argument-principle count over the symmetric rectangle. A count
    mismatch downgrades to a completeness warning in the info dict.
    """
    delay_mats = {d: m for d, m in delay_mats.items() if d > 0}
    re0, re1 = re_lim
    im0, im1 = im_lim
    seeds = [
        (re0 + (re1 - re0) * (i + 0.5) / n_re) + 1j * (im0 + (im1 - im0) * (j + 0.5) / n_im)
        for i in range(n_re)
        for j in range(n_im)
    ]
    zs = np.asarray(list(seeds) + list(extra_seeds), dtype=complex)
    active = np.ones(len(zs), dtype=bool)
    for _ in range(newton_iters):
        if not active.any():
            break
        za = zs[active]
        M, Mp = _char_matrix(za, A0, delay_mats)
        try:
            X = np.linalg.solve(M, Mp)
        except np.linalg.LinAlgError:
            # singular == converged exactly on a root; freeze those entries
            X = np.linalg.solve(M + 1e-300 * np.eye(M.shape[-1]), Mp)
        tr = np.trace(X, axis1=-2, axis2=-1)
        step = 1.0 / tr
        step = np.where(np.isfinite(step), step, 0.0)
        zs[active] = za - step
        still = np.abs(step) > 1e-13 * (1.0 + np.abs(za))
        idx = np.flatnonzero(active)
        active[idx[~still]] = False

    # keep converged, in-rectangle roots; certify via smallest singular value
    margin = 1e-6
    mask = (
        (zs.real >= re0 - margin) & (zs.real <= re1 + margin)
        & (zs.imag >= min(im0, -margin) - margin) & (zs.imag <= im1 + margin)
        & ~active
    )
    cand = zs[mask]
    roots: List[CharacteristicRoot] = []
    for z in cand:
        if any(abs(z - r.zeta) < dedup for r in roots):
            continue
        M, _ = _char_matrix(np.array([z]), A0, delay_mats)
        sv = np.linalg.svd(M[0], compute_uv=False)
        res = float(sv[-1] / max(sv[0], 1e-300))
        if res > 1e-8:
            continue
        roots.append(CharacteristicRoot(zeta=complex(z), residual=res))
    # reflect across the real axis (real system => conjugate roots)
    for r in list(roots):
        if r.zeta.imag > dedup:
            roots.append(CharacteristicRoot(zeta=r.zeta.conjugate(), branch=r.branch,
                                            residual=r.residual))
    roots.sort(key=lambda r: -r.zeta.real)
    info = {"n_seeds": len(zs), "count_verified": None, "warning": None}
    if count_check:
        full_im = max(abs(im0), abs(im1))
        n_inside = sum(
            1 for r in roots
            if re0 + margin < r.zeta.real < re1 - margin and abs(r.zeta.imag) < full_im - margin
        )
        try:
            wcount = _winding_count(A0, delay_mats, (re0, re1), (-full_im, full_im))
            info["count_verified"] = (wcount == n_inside)
            info["winding_count"] = wcount
            info["harvested_count"] = n_inside
            if wcount != n_inside:
                info["warning"] = (
                    f"argument-principle count {wcount} != harvested {n_inside}; "
                    "root list may be incomplete"
                )
        except Exception as exc:  # winding is best-effort verification
            info["warning"] = f"winding count failed: {exc}"
    return roots, info


def dde_linearize_and_roots(
    model: FinitePopulationModel,
    spec,
    eq,
    re_lim=(-10.0, 5.0),
    im_lim=(0.0, 50.0),
    n_re: int = 40,
    n_im: int = 100,
    fd_step: float = 1e-6,
    count_check: bool = True,
) -> tuple:
    """Characteristic roots of the delayed linearisation at an equilibrium.

    Accepts an Equilibrium or a raw stacked state; requires the
    equilibrium residual < 1e-10 so the linearisation is meaningful.
    Returns (roots, info).
    """
    if isinstance(eq, _dde.Equilibrium):
        if eq.residual > 1e-10:
            raise DomainError(f"equilibrium residual {eq.residual} too large")
        state = eq.state
    else:
        state = np.asarray(eq, dtype=float)
    A0, mats = moment_delay_jacobians(model, spec, state, fd_step)
    return delayed_roots(A0, mats, re_lim, im_lim, n_re, n_im, count_check=count_check)


def classify_equilibrium(model, spec, eq, **kwargs):
    """Fill eq.stability / eq.rightmost_roots from the delayed spectrum."""
    roots, info = dde_linearize_and_roots(model, spec, eq, **kwargs)
    if not roots:
        eq.stability = "stable"
        eq.rightmost_roots = []
        return eq
    eq.rightmost_roots = [r.zeta for r in roots[:6]]
    re = roots[0].zeta.real
    eq.stability = "stable" if re < -1e-9 else ("unstable" if re > 1e-9 else "marginal")
    return eq


def count_unstable_roots(roots: List[CharacteristicRoot], tol: float = 1e-9) -> int:
    return sum(1 for r in roots if r.zeta.real > tol)


def hopf_crossings_vs_delay(
    model_at_tau,
    spec,
    eq_state,
    taus: Sequence[float],
    re_lim=(-3.0, 5.0),
    im_lim=(0.0, 50.0),
    n_re: int = 24,
    n_im: int = 60,
) -> dict:
    """Track the unstable-root count along a delay sweep.

    model_at_tau(tau) builds the model with the swept delay; equilibria
    do not depend on delays, so eq_state is reused. Returns the count
    per tau and the detected crossing intervals (count jumps by >= 2,
    i.e. conjugate pairs crossing left to right).
    """
    counts = []
    for tau in taus:
        roots, _ = dde_linearize_and_roots(
            model_at_tau(tau), spec, eq_state,
            re_lim=re_lim, im_lim=im_lim, n_re=n_re, n_im=n_im, count_check=False,
        )
        counts.append(count_unstable_roots(roots))
    crossings = []
    for i in range(len(taus) - 1):
        if counts[i + 1] >= counts[i] + 2:
            crossings.append(
                {"tau_lo": taus[i], "tau_hi": taus[i + 1],
                 "jump": counts[i + 1] - counts[i]}
            )
    return {"taus": list(taus), "counts": counts, "crossings": crossings}
