"""Model containers: finite-population networks, neural fields, spatial grids.

These are plain data holders with validation; all dynamics live in the
solver modules. Time-dependent inputs are accepted either as constants
(scalars/arrays) or as callables of t returning a per-population vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError

ArrayLike = Union[float, np.ndarray, list]
TimeFunc = Union[ArrayLike, Callable[[float], np.ndarray]]


def _as_time_func(x: TimeFunc, p: int, name: str):
    """Normalise a constant or callable input to a callable t -> (p,) array."""
    if callable(x):
        return x
    arr = np.broadcast_to(np.asarray(x, dtype=float), (p,)).copy()
    return lambda t, _a=arr: _a


def _const_value(x: TimeFunc, p: int):
    """The constant vector behind a non-callable input, else None."""
    if callable(x):
        return None
    return np.broadcast_to(np.asarray(x, dtype=float), (p,)).copy()


@dataclass
class FinitePopulationModel:
    """P interacting populations with delayed sigmoidal coupling.

    J[a, b] is the synaptic weight from population b onto a, sigma[a, b]
    the std of its multiplicative noise, tau[a, b] the transmission
    delay. theta are membrane time constants, I(t) the input currents
    and lam(t) the additive noise std.
    """

    J: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    I: TimeFunc = 0.0
    lam: TimeFunc = 0.0

    def __post_init__(self):
        self.J = np.atleast_2d(np.asarray(self.J, dtype=float))
        p = self.J.shape[0]
        if self.J.shape != (p, p):
            raise ConfigurationError(f"J must be square, got {self.J.shape}")
        self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), (p, p)).copy()
        self.tau = np.broadcast_to(np.asarray(self.tau, dtype=float), (p, p)).copy()
        self.theta = np.broadcast_to(np.asarray(self.theta, dtype=float), (p,)).copy()
        if np.any(self.tau < 0):
            raise ConfigurationError("delays must be nonnegative")
        if np.any(self.theta <= 0):
            raise ConfigurationError("time constants must be strictly positive")
        self._I = _as_time_func(self.I, p, "I")
        self._lam = _as_time_func(self.lam, p, "lam")

    @property
    def P(self) -> int:
        return self.J.shape[0]

    @property
    def theta_min(self) -> float:
        return float(self.theta.min())

    @property
    def tau_max(self) -> float:
        return float(self.tau.max())

    def input_at(self, t: float) -> np.ndarray:
        return np.asarray(self._I(t), dtype=float)

    def lam_at(self, t: float) -> np.ndarray:
        return np.asarray(self._lam(t), dtype=float)

    def lam_floor(self) -> Optional[float]:
        """Lower bound of the additive noise std, known for constant lam."""
        c = _const_value(self.lam, self.P)
        return None if c is None else float(c.min())

    def distinct_delays(self) -> np.ndarray:
        return np.unique(self.tau)

    def to_dict(self) -> dict:
        d = {
            "P": self.P,
            "J": self.J.tolist(),
            "sigma": self.sigma.tolist(),
            "tau": self.tau.tolist(),
            "theta": self.theta.tolist(),
        }
        for name, x in (("I", self.I), ("lam", self.lam)):
            c = _const_value(x, self.P)
            d[name] = "<callable>" if c is None else c.tolist()
        return d


@dataclass
class SpatialGrid:
    """Uniform midpoint grid on the unit domain with unit quadrature mass.

    Node j sits at (j + 1/2)/n; each node carries weight 1/n, so the
    weights sum to the domain length 1. Midpoint placement keeps the
    reflected image lattice on the node lattice, which makes reflective
    boundary sums exactly translation invariant.
    """

    n_nodes: int = 512

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ConfigurationError("grid needs at least 2 nodes")
        self.nodes = (np.arange(self.n_nodes) + 0.5) / self.n_nodes
        self.weights = np.full(self.n_nodes, 1.0 / self.n_nodes)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_nodes


@dataclass
class NeuralFieldModel:
    """One- or two-layer neural field on the unit circle or interval.

    Deterministic kernels are exponential with per-layer width,
    J_a(r, r') = exp(-|r - r'|_G / s_a) / s_a, in the metric induced by
    the domain, scaled by the layer coupling matrix w[a, b] (b = source
    layer). Noise kernels are sigma[a, b] * J_b(r, r'). Delays follow
    tau(r, r') = |r - r'|_G / c + tau_d with c possibly infinite.
    """

    s: ArrayLike
    w: np.ndarray
    sigma: np.ndarray = 0.0
    domain: str = "circle"
    boundary: str = "periodic"
    c: float = np.inf
    tau_d: float = 0.0
    theta: float = 1.0
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    I: TimeFunc = 0.0
    Lam: TimeFunc = 0.0
    # reflective kernels integrate over mirror images out to this many widths
    reflect_cutoff: float = 8.0

    def __post_init__(self):
        self.s = np.atleast_1d(np.asarray(self.s, dtype=float))
        L = self.s.shape[0]
        if L not in (1, 2):
            raise ConfigurationError("only 1- or 2-layer fields are supported")
        if np.any(self.s <= 0):
            raise ConfigurationError("kernel widths must be positive")
        self.w = np.broadcast_to(np.asarray(self.w, dtype=float), (L, L)).copy()
        self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), (L, L)).copy()
        if self.domain not in ("circle", "interval"):
            raise ConfigurationError(f"unknown domain {self.domain!r}")
        if self.boundary not in ("periodic", "reflective", "zero"):
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "periodic" and self.domain != "circle":
            raise ConfigurationError("periodic boundary requires the circle domain")
        if self.boundary in ("reflective", "zero") and self.domain != "interval":
            raise ConfigurationError(f"{self.boundary} boundary requires the interval domain")
        if not self.c > 0:
            raise ConfigurationError("transport speed c must be positive (or inf)")
        if self.tau_d < 0:
            raise ConfigurationError("synaptic delay tau_d must be nonnegative")
        if self.theta <= 0:
            raise ConfigurationError("time constant must be positive")
        self._I = _as_time_func(self.I, L, "I")
        self._Lam = _as_time_func(self.Lam, L, "Lam")

    @property
    def layers(self) -> int:
        return self.s.shape[0]

    def distance(self, r1, r2):
        """Domain metric |r1 - r2|_G, elementwise over broadcast inputs."""
        d = np.abs(np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float))
        if self.domain == "circle":
            d = np.minimum(d, 1.0 - d)
        return d

    def kernel_profile(self, dist, layer: int):
        """exp(-d/s)/s for the given source layer, as a function of distance."""
        s = self.s[layer]
        return np.exp(-np.asarray(dist, dtype=float) / s) / s

    def density_at(self, r):
        if self.density is None:
            return np.ones_like(np.asarray(r, dtype=float))
        lam = np.asarray(self.density(np.asarray(r, dtype=float)), dtype=float)
        if np.any(lam <= 0):
            raise ConfigurationError("density must be positive")
        return lam

    def delay_at(self, dist):
        if np.isinf(self.c):
            return np.full_like(np.asarray(dist, dtype=float), self.tau_d)
        return np.asarray(dist, dtype=float) / self.c + self.tau_d

    @property
    def tau_max(self) -> float:
        dmax = 0.5 if self.domain == "circle" else 1.0
        return float(self.tau_d if np.isinf(self.c) else self.tau_d + dmax / self.c)

    def input_at(self, t: float) -> np.ndarray:
        return np.asarray(self._I(t), dtype=float)

    def Lam_at(self, t: float) -> np.ndarray:
        return np.asarray(self._Lam(t), dtype=float)

    def Lam_floor(self) -> Optional[float]:
        c = _const_value(self.Lam, self.layers)
        return None if c is None else float(c.min())

    def to_dict(self) -> dict:
        d = {
            "layers": self.layers,
            "s": self.s.tolist(),
            "w": self.w.tolist(),
            "sigma": self.sigma.tolist(),
            "domain": self.domain,
            "boundary": self.boundary,
            "c": "inf" if np.isinf(self.c) else self.c,
            "tau_d": self.tau_d,
            "theta": self.theta,
            "density": "uniform" if self.density is None else "<callable>",
        }
        for name, x in (("I", self.I), ("Lam", self.Lam)):
            c = _const_value(x, self.layers)
            d[name] = "<callable>" if c is None else c.tolist()
        return d
