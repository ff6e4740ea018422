"""Model parameters, the triple-well potential, surface-tension calibration
and the diffuse energy.

Phase densities are described by ``(u1, u2)`` with ``u0 = 1 - u1 - u2``.  The
diffuse energy of a state is

    E(u) = 1/2 int [ (eps^2/2) |grad u|^2 + W(u) ]
           + sum_{i,j in {1,2}} (eps gamma_ij / 2) int int G(x - y) u_i(x) u_j(y),

where ``|grad u|^2`` sums over all three densities.  A straight interface
between phases i and j then costs ``eps * sigma_ij / 2`` per unit length, with
``sigma_ij`` the geodesic distance between the wells in the metric
``sqrt(2 W) |d zeta|``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .grid_spectral import GridField, dirichlet_energy_array, green_array

__all__ = [
    "SurfaceTensions",
    "BetaWeights",
    "Regime",
    "InteractionMatrix",
    "WellParams",
    "ModelParams",
    "PhaseDensity",
    "EnergyTerms",
    "CalibrationError",
    "beta_weights",
    "sigma_from_beta",
    "classify_regime",
    "triple_well",
    "triple_well_grad",
    "triple_well_hessian",
    "straight_path_sigma",
    "calibrate_sigma",
    "fit_well",
    "symmetric_well",
    "diffuse_energy",
    "droplet_energy_diffuse",
]


# ----------------------------------------------------------------------------
# Surface tensions and regimes
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceTensions:
    s01: float
    s02: float
    s12: float

    def __post_init__(self):
        for name in ("s01", "s02", "s12"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"surface tension {name} must be positive, got {v}")
            object.__setattr__(self, name, v)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s01, self.s02, self.s12)

    def swapped(self) -> "SurfaceTensions":
        """Exchange the labels of phases 1 and 2."""
        return SurfaceTensions(self.s02, self.s01, self.s12)

    def triangle_ok(self, rtol: float = 0.0) -> bool:
        a, b, c = self.as_tuple()
        slack = rtol * (a + b + c)
        return a <= b + c + slack and b <= a + c + slack and c <= a + b + slack


@dataclass(frozen=True)
class BetaWeights:
    b0: float
    b1: float
    b2: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.b0, self.b1, self.b2)


def beta_weights(s: SurfaceTensions) -> BetaWeights:
    """Weights with ``sum sigma_ij H1(dOmega_i & dOmega_j) = 1/2 sum beta_i Per(Omega_i)``."""
    return BetaWeights(
        b0=s.s01 + s.s02 - s.s12,
        b1=s.s01 + s.s12 - s.s02,
        b2=s.s02 + s.s12 - s.s01,
    )


def sigma_from_beta(b: BetaWeights) -> SurfaceTensions:
    return SurfaceTensions(
        s01=(b.b0 + b.b1) / 2.0,
        s02=(b.b0 + b.b2) / 2.0,
        s12=(b.b1 + b.b2) / 2.0,
    )


class Regime(str, enum.Enum):
    DOUBLE_BUBBLE = "DoubleBubble"
    CORE_SHELL_DEGENERATE = "CoreShellDegenerate"
    CORE_SHELL_STRICT = "CoreShellStrict"
    SINGLE_BUBBLES_DEGENERATE = "SingleBubblesDegenerate"
    SINGLE_BUBBLES_STRICT = "SingleBubblesStrict"

    @property
    def is_core_shell(self) -> bool:
        return self in (Regime.CORE_SHELL_DEGENERATE, Regime.CORE_SHELL_STRICT)


def classify_regime(s: SurfaceTensions, rtol: float = 1e-12) -> Regime:
    """Which minimizing geometry the tensions select (phase 1 as the shell)."""
    core = s.s02 - (s.s01 + s.s12)
    single = s.s12 - (s.s01 + s.s02)
    other = s.s01 - (s.s02 + s.s12)
    scale = s.s01 + s.s02 + s.s12
    eq_core = abs(core) <= rtol * scale
    eq_single = abs(single) <= rtol * scale
    assert not (eq_core and eq_single), "two equalities cannot hold with positive tensions"
    if eq_core:
        return Regime.CORE_SHELL_DEGENERATE
    if eq_single:
        return Regime.SINGLE_BUBBLES_DEGENERATE
    if core > 0:
        return Regime.CORE_SHELL_STRICT
    if single > 0:
        return Regime.SINGLE_BUBBLES_STRICT
    if other >= -rtol * scale:
        # Phase 2 wetting 0|1 interfaces has no dedicated tag in this model.
        raise ValueError("sigma01 >= sigma02 + sigma12 is outside the supported regimes")
    return Regime.DOUBLE_BUBBLE


# ----------------------------------------------------------------------------
# Interaction strengths
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric nonnegative 2x2 interaction matrix (entries 11, 12, 22)."""

    g11: float = 0.0
    g12: float = 0.0
    g22: float = 0.0

    def __post_init__(self):
        for name in ("g11", "g12", "g22"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"interaction entry {name} must be >= 0, got {v}")
            object.__setattr__(self, name, v)

    def matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    def is_zero(self) -> bool:
        return self.g11 == 0 and self.g12 == 0 and self.g22 == 0

    def scaled(self, factor: float) -> "InteractionMatrix":
        return InteractionMatrix(self.g11 * factor, self.g12 * factor, self.g22 * factor)

    def swapped(self) -> "InteractionMatrix":
        return InteractionMatrix(self.g22, self.g12, self.g11)

    # Droplet scaling: gamma_ij = Gamma_ij / (|log eta| eta^3).
    def to_raw(self, eta: float) -> "InteractionMatrix":
        """Interpret self as rescaled ``Gamma`` and return raw ``gamma``."""
        return self.scaled(1.0 / (abs(math.log(eta)) * eta**3))

    def to_rescaled(self, eta: float) -> "InteractionMatrix":
        """Interpret self as raw ``gamma`` and return rescaled ``Gamma``."""
        return self.scaled(abs(math.log(eta)) * eta**3)


# ----------------------------------------------------------------------------
# Triple-well potential
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class WellParams:
    """Coefficients of the triple well.

    W = (1-theta) (c01 u0^2 u1^2 + c12 u1^2 u2^2)
        + theta u1^2 (sqrt(c01) u0 + sqrt(c12) u2)^2
        + c02 u0^2 u2^2
        + kappa sum_i min(u_i, 0)^4

    ``theta`` in [0, 1] adds the cross term ``2 sqrt(c01 c12) u0 u1^2 u2``
    which penalises states where phase 1 is absent between phases 0 and 2; at
    ``theta = 1`` the cheapest 0 -> 2 transition passes through phase 1.
    ``kappa`` only acts outside the simplex.
    """

    c01: float
    c02: float
    c12: float
    theta: float = 0.0
    kappa: float = 10.0

    def __post_init__(self):
        for name in ("c01", "c02", "c12", "kappa"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"well coefficient {name} must be >= 0, got {v}")
            object.__setattr__(self, name, v)
        th = float(self.theta)
        if not 0.0 <= th <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {th}")
        object.__setattr__(self, "theta", th)

    def swapped(self) -> "WellParams":
        """Exchange phases 1 and 2 (only exact for theta = 0)."""
        if self.theta != 0.0:
            raise ValueError("label swap of an insulating well is not a well of this family")
        return replace(self, c01=self.c02, c02=self.c01)


def _well_parts(u0, u1, u2, w: WellParams, want_grad: bool):
    """W and its partials in (u0, u1, u2) treated as independent variables.

    The insulation term expands to theta u1^2 (c01 u0^2 + c12 u2^2) + q u0 u1^2 u2
    with q = 2 theta sqrt(c01 c12), so W is the plain pairwise quartic plus
    the cubic-in-u1 cross term.
    """
    a2, b2, c2 = u0 * u0, u1 * u1, u2 * u2
    q = 2.0 * w.theta * math.sqrt(w.c01 * w.c12)
    t01 = w.c01 * a2
    t12 = w.c12 * c2
    t02 = w.c02 * a2
    W = b2 * (t01 + t12) + t02 * c2
    if q:
        cross = q * u0 * u2
        W = W + cross * b2
    neg = None
    if w.kappa and (u0.min(initial=0.0) < 0 or u1.min(initial=0.0) < 0 or u2.min(initial=0.0) < 0):
        neg = (np.minimum(u0, 0.0), np.minimum(u1, 0.0), np.minimum(u2, 0.0))
        sq = tuple(v * v for v in neg)
        W = W + w.kappa * (sq[0] * sq[0] + sq[1] * sq[1] + sq[2] * sq[2])
    if not want_grad:
        return W, None
    d0 = 2.0 * u0 * (w.c01 * b2 + w.c02 * c2)
    d1 = 2.0 * u1 * (t01 + t12)
    d2 = 2.0 * u2 * (w.c12 * b2 + t02)
    if q:
        d0 = d0 + q * b2 * u2
        d1 = d1 + 2.0 * cross * u1
        d2 = d2 + q * b2 * u0
    if neg is not None:
        k4 = 4.0 * w.kappa
        d0 = d0 + k4 * sq[0] * neg[0]
        d1 = d1 + k4 * sq[1] * neg[1]
        d2 = d2 + k4 * sq[2] * neg[2]
    return W, (d0, d1, d2)


def triple_well(u1, u2, w: WellParams):
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    return _well_parts(1.0 - u1 - u2, u1, u2, w, False)[0]


def triple_well_grad(u1, u2, w: WellParams):
    """``(dW/du1, dW/du2)`` with ``u0 = 1 - u1 - u2`` eliminated."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    _, (d0, d1, d2) = _well_parts(1.0 - u1 - u2, u1, u2, w, True)
    return d1 - d0, d2 - d0


def well_value_and_force(u1: np.ndarray, u2: np.ndarray, w: WellParams):
    """``W`` and the projected gradient ``d_i - mean_j d_j`` for i = 1, 2."""
    W, (d0, d1, d2) = _well_parts(1.0 - u1 - u2, u1, u2, w, True)
    m = (d0 + d1 + d2) / 3.0
    return W, d1 - m, d2 - m


def triple_well_hessian(u1, u2, w: WellParams, h: float = 1e-6):
    """Hessian in (u1, u2) by central differences of the analytic gradient."""
    g1p = triple_well_grad(np.asarray(u1) + h, u2, w)
    g1m = triple_well_grad(np.asarray(u1) - h, u2, w)
    g2p = triple_well_grad(u1, np.asarray(u2) + h, w)
    g2m = triple_well_grad(u1, np.asarray(u2) - h, w)
    h11 = (g1p[0] - g1m[0]) / (2 * h)
    h12 = 0.5 * ((g1p[1] - g1m[1]) + (g2p[0] - g2m[0])) / (2 * h)
    h22 = (g2p[1] - g2m[1]) / (2 * h)
    return h11, h12, h22


def well_curvature_bound(w: WellParams, samples: int = 96, slack: float = 0.05) -> float:
    """Largest |eigenvalue| of the projected Hessian of W over a neighbourhood of the simplex.

    The projection uses the metric ``du1^2 + du2^2 + (du1 + du2)^2`` of the
    constraint plane, i.e. the eigenvalues of ``g^{-1} Hess W``.
    """
    t = np.linspace(-slack, 1 + slack, samples)
    U1, U2 = np.meshgrid(t, t, indexing="ij")
    keep = U1 + U2 <= 1 + slack
    h11, h12, h22 = triple_well_hessian(U1[keep], U2[keep], w)
    # Entries of g^{-1} H with g^{-1} = [[2, -1], [-1, 2]] / 3.
    a = (2 * h11 - h12) / 3
    b = (2 * h12 - h22) / 3
    c = (2 * h12 - h11) / 3
    d = (2 * h22 - h12) / 3
    tr, det = a + d, a * d - b * c
    # g^{-1} H is self-adjoint in the g-metric, so its eigenvalues are real.
    disc = np.sqrt(np.maximum(tr**2 / 4 - det, 0.0))
    return float(np.max(np.maximum(np.abs(tr / 2 + disc), np.abs(tr / 2 - disc))))


# ----------------------------------------------------------------------------
# Geodesic calibration of surface tensions
# ----------------------------------------------------------------------------

class CalibrationError(RuntimeError):
    pass


_GAUSS_S = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


@lru_cache(maxsize=8)
def _simplex_graph(N: int, reach: int):
    idx = -np.ones((N + 1, N + 1), dtype=np.int64)
    pts = []
    for i in range(N + 1):
        for j in range(N + 1 - i):
            idx[i, j] = len(pts)
            pts.append((i, j))
    pts = np.array(pts, dtype=np.int64)
    offsets = [
        (a, b)
        for a in range(-reach, reach + 1)
        for b in range(-reach, reach + 1)
        if (a, b) != (0, 0) and math.gcd(abs(a), abs(b)) == 1
    ]
    return idx, pts, offsets


def _geodesic_sigmas(w: WellParams, N: int, reach: int = 3) -> tuple[float, float, float]:
    """Graph shortest paths between the wells on an N-subdivided simplex."""
    idx, pts, offsets = _simplex_graph(N, reach)
    rows, cols, vals = [], [], []
    for a, b in offsets:
        i2, j2 = pts[:, 0] + a, pts[:, 1] + b
        ok = (i2 >= 0) & (j2 >= 0) & (i2 + j2 <= N)
        p = pts[ok]
        # Length of (du1, du2) in the metric of the constraint plane of R^3.
        length = math.sqrt(a * a + b * b + (a + b) ** 2) / N
        acc = 0.0
        for s, gw in zip(_GAUSS_S, _GAUSS_W):
            acc = acc + gw * np.sqrt(np.maximum(
                triple_well((p[:, 0] + s * a) / N, (p[:, 1] + s * b) / N, w), 0.0))
        rows.append(idx[p[:, 0], p[:, 1]])
        cols.append(idx[i2[ok], j2[ok]])
        vals.append(math.sqrt(2.0) * length * acc)
    n_nodes = len(pts)
    graph = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_nodes, n_nodes),
    ).tocsr()
    v0, v1, v2 = idx[0, 0], idx[N, 0], idx[0, N]
    dist = dijkstra(graph, directed=False, indices=[v0, v1])
    return float(dist[0, v1]), float(dist[0, v2]), float(dist[1, v2])


def straight_path_sigma(w: WellParams, samples: int = 4001) -> SurfaceTensions:
    """Cost of the straight segments between wells (an upper bound for each sigma_ij)."""
    t = np.linspace(0.0, 1.0, samples)
    seg = math.sqrt(2.0)  # length of a simplex edge in the plane metric

    def cost(u1, u2):
        return float(np.trapezoid(np.sqrt(2.0 * triple_well(u1, u2, w)) * seg, t))

    return SurfaceTensions(
        s01=cost(t, 0 * t), s02=cost(0 * t, t), s12=cost(1 - t, t)
    )


def calibrate_sigma(
    w: WellParams,
    levels: tuple[int, ...] = (48, 96, 192),
    rtol: float = 0.005,
    reach: int = 3,
) -> SurfaceTensions:
    """Surface tensions ``sigma_ij = inf sqrt(2) int sqrt(W) |zeta'|`` by graph geodesics.

    The simplex is refined through ``levels`` until all three values change by
    at most ``rtol`` relative between consecutive levels.
    """
    prev = None
    for N in levels:
        cur = np.array(_geodesic_sigmas(w, N, reach))
        if prev is not None and np.all(np.abs(cur - prev) <= rtol * cur):
            s = SurfaceTensions(*cur)
            assert s.triangle_ok(rtol=1e-12), "geodesic distances violate the triangle inequality"
            return s
        prev = cur
    raise CalibrationError(
        f"geodesic sigma not converged to rtol={rtol} at N={levels[-1]}: last {prev.tolist()}"
    )


# The symmetric quartic with c = 9 has geodesic sigma ~= 0.8562 (calibrated
# once by calibrate_sigma); scaling c by (1/0.8562)^2 yields sigma = 1.
_SYMMETRIC_SIGMA_AT_C9 = 0.85618


def symmetric_well(sigma: float = 1.0, kappa: float = 10.0) -> WellParams:
    c = 9.0 * (sigma / _SYMMETRIC_SIGMA_AT_C9) ** 2
    return WellParams(c, c, c, 0.0, kappa)


def _insulation_theta(target: SurfaceTensions) -> float:
    r = target.s02 / (target.s01 + target.s12)
    return float(np.clip((r - 0.85) / 0.15, 0.0, 1.0))


def fit_well(
    target: SurfaceTensions,
    c02_cap_ratio: float = 64.0,
    iterations: int = 12,
    N: int = 64,
    kappa: float = 10.0,
) -> WellParams:
    """Tune the well coefficients so the geodesic tensions approach ``target``.

    Arbitrary targets are only reachable approximately: a smooth well cannot
    realise ``sigma02 = sigma01 + sigma12`` (or beyond), so ``c02`` is capped at
    ``c02_cap_ratio * max(c01, c12)`` and ``theta`` routes the 0 -> 2
    transition through phase 1 for near-degenerate targets.
    """
    theta = _insulation_theta(target)
    base = symmetric_well(1.0, kappa)
    c = np.array([base.c01 * target.s01**2, base.c02 * target.s02**2, base.c12 * target.s12**2])
    goal = np.array(target.as_tuple())
    for _ in range(iterations):
        w = WellParams(c[0], c[1], c[2], theta, kappa)
        got = np.array(_geodesic_sigmas(w, N))
        c = c * (goal / got) ** 2
        c[1] = min(c[1], c02_cap_ratio * max(c[0], c[2]))
    return WellParams(float(c[0]), float(c[1]), float(c[2]), theta, kappa)


# ----------------------------------------------------------------------------
# Model parameters and phase densities
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of one experiment.

    ``gamma`` holds the raw interaction strengths entering the diffuse energy.
    ``well`` defaults to a fit of ``sigma`` (symmetric targets use the
    closed-form symmetric well).
    """

    sigma: SurfaceTensions
    gamma: InteractionMatrix = field(default_factory=InteractionMatrix)
    epsilon: float = 0.01
    M1: float = 0.12
    M2: float = 0.04
    eta: float | None = None
    well: WellParams | None = None

    def __post_init__(self):
        if not (self.M1 > 0 and self.M2 > 0 and self.M1 + self.M2 < 1):
            raise ValueError(f"masses must satisfy 0 < M1, M2 and M1 + M2 < 1, got {self.M1}, {self.M2}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.eta is not None and not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.well is None:
            s = self.sigma
            if s.s01 == s.s02 == s.s12:
                w = symmetric_well(s.s01)
            else:
                w = _cached_fit(s.as_tuple())
            object.__setattr__(self, "well", w)

    @property
    def Gamma(self) -> InteractionMatrix:
        if self.eta is None:
            raise ValueError("rescaled interactions need eta")
        return self.gamma.to_rescaled(self.eta)

    @classmethod
    def from_rescaled(cls, sigma, Gamma: InteractionMatrix, eta: float, **kw) -> "ModelParams":
        return cls(sigma=sigma, gamma=Gamma.to_raw(eta), eta=eta, **kw)

    def swapped(self) -> "ModelParams":
        """Relabel phases 1 <-> 2."""
        return replace(
            self,
            sigma=self.sigma.swapped(),
            gamma=self.gamma.swapped(),
            M1=self.M2,
            M2=self.M1,
            well=self.well.swapped(),
        )


@lru_cache(maxsize=64)
def _cached_fit(target: tuple[float, float, float]) -> WellParams:
    return fit_well(SurfaceTensions(*target))


@dataclass(frozen=True)
class PhaseDensity:
    u1: GridField
    u2: GridField

    def __post_init__(self):
        if self.u1.n != self.u2.n:
            raise ValueError("u1 and u2 must share a resolution")

    @property
    def n(self) -> int:
        return self.u1.n

    @property
    def u0(self) -> GridField:
        return GridField(1.0 - self.u1.data - self.u2.data)

    def means(self) -> tuple[float, float]:
        return self.u1.mean(), self.u2.mean()

    def check_bounds(self, slack: float) -> bool:
        a, b = self.u1.data, self.u2.data
        return bool(
            a.min() >= -slack and b.min() >= -slack
            and a.max() <= 1 + slack and b.max() <= 1 + slack
            and (a + b).max() <= 1 + slack
        )

    @classmethod
    def from_arrays(cls, u1, u2) -> "PhaseDensity":
        return cls(GridField(u1), GridField(u2))


@dataclass(frozen=True)
class EnergyTerms:
    gradient: float
    well: float
    nonlocal_: float

    @property
    def total(self) -> float:
        return self.gradient + self.well + self.nonlocal_


def energy_terms_arrays(u1: np.ndarray, u2: np.ndarray, p: ModelParams) -> EnergyTerms:
    eps = p.epsilon
    dirichlet = (
        dirichlet_energy_array(u1) + dirichlet_energy_array(u2)
        + dirichlet_energy_array(u1 + u2)  # grad u0 = -(grad u1 + grad u2)
    )
    grad_term = 0.5 * (eps**2 / 2.0) * dirichlet
    well_term = 0.5 * float(np.mean(triple_well(u1, u2, p.well)))
    nl = 0.0
    g = p.gamma
    if not g.is_zero():
        Gu1 = green_array(u1)
        Gu2 = green_array(u2)
        nl = 0.5 * eps * float(
            g.g11 * np.mean(Gu1 * u1) + 2.0 * g.g12 * np.mean(Gu1 * u2) + g.g22 * np.mean(Gu2 * u2)
        )
    return EnergyTerms(grad_term, well_term, nl)


def diffuse_energy(u: PhaseDensity, p: ModelParams) -> EnergyTerms:
    """Diffuse energy split into gradient, well and nonlocal contributions."""
    return energy_terms_arrays(u.u1.data, u.u2.data, p)


def droplet_energy_diffuse(u: PhaseDensity, p: ModelParams) -> float:
    """Droplet-scaled energy ``E_eta = E / eta``."""
    if p.eta is None:
        raise ValueError("droplet_energy_diffuse needs eta in the parameters")
    return diffuse_energy(u, p).total / p.eta
