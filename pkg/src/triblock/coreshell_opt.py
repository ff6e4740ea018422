"""Logarithmic self-interaction of core shells and the optimal core offset.

For sets ``A_i`` of a cluster, ``I_ij = (1/2pi) int_{A_i} int_{A_j} log(1/|x-y|)``.
A core shell is an outer disk ``B1`` of radius ``r1`` centred at the origin
holding an inner disk ``B2`` of radius ``r2`` centred at ``p = (t, 0)``; phase 2
fills ``B2`` and phase 1 the remainder ``A1 = B1 \\ B2``.

Because ``log(1/|x - y|)`` is harmonic in ``y`` away from ``x``, integrating it
over a disk not containing ``x`` gives the disk's area times the value at its
centre.  This reduces

    I12(t) = (m2 / 2pi) int_{B1} log(1/|x - p|) dx - I22,
    I11(t) = I_{B1 B1} - 2 I12(t) - I22,

so the only offset-dependent quantity is a single integral over ``B1`` with a
logarithmic singularity at ``p``.  It is computed in polar coordinates centred
at ``p``, where the radial integral is exact and one smooth angular quadrature
remains.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.integrate import quad

from .energy import InteractionMatrix, SurfaceTensions, classify_regime
from .grid_spectral import green_regular_part_origin
from .sharp import MassPair

__all__ = [
    "CoreShellGeometry",
    "Placement",
    "F0Result",
    "I22",
    "disk_self_interaction",
    "log_potential_of_disk",
    "I12",
    "I11",
    "dI12_dt",
    "f0",
    "offset_objective",
    "f0_csv_row",
]

QUAD_RTOL = 1e-12


@dataclass(frozen=True)
class CoreShellGeometry:
    r1: float
    r2: float
    t: float = 0.0

    def __post_init__(self):
        r1, r2, t = float(self.r1), float(self.r2), float(self.t)
        if not (0 < r2 < r1):
            raise ValueError(f"need 0 < r2 < r1, got r1={r1}, r2={r2}")
        slack = 1e-12 * r1
        if not (-slack <= abs(t) <= r1 - r2 + slack):
            raise ValueError(f"inner disk must lie inside the outer one: |t| <= {r1 - r2}, got {t}")
        object.__setattr__(self, "r1", r1)
        object.__setattr__(self, "r2", r2)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_masses(cls, m1: float, m2: float, t: float = 0.0) -> "CoreShellGeometry":
        return cls(math.sqrt((m1 + m2) / math.pi), math.sqrt(m2 / math.pi), t)

    @property
    def m1(self) -> float:
        return math.pi * (self.r1**2 - self.r2**2)

    @property
    def m2(self) -> float:
        return math.pi * self.r2**2

    @property
    def t_max(self) -> float:
        return self.r1 - self.r2

    @property
    def offset_ratio(self) -> float:
        return abs(self.t) / self.t_max

    def with_offset(self, t: float) -> "CoreShellGeometry":
        return CoreShellGeometry(self.r1, self.r2, t)


def log_potential_of_disk(r: float, s: float) -> float:
    """``int_{B_r} log(1/|x - y|) dy`` at distance ``s`` from the centre."""
    if s <= r:
        return math.pi * r * r * (0.5 - math.log(r)) - 0.5 * math.pi * s * s
    return -math.pi * r * r * math.log(s)


def disk_self_interaction(r: float) -> float:
    """``(1/2pi) int_{B_r} int_{B_r} log(1/|x - y|)`` by radial quadrature of the disk potential."""
    if not r > 0:
        raise ValueError("radius must be positive")
    # (1/2pi) int_0^r U(s) 2 pi s ds
    val, _ = quad(lambda s: s * log_potential_of_disk(r, s), 0.0, r,
                  epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return val


def I22(r2: float) -> float:
    """Self-interaction of the inner disk of radius ``r2``."""
    return disk_self_interaction(r2)


def _ray_length(r1: float, t: float, phi: float) -> float:
    """Distance from ``(t, 0)`` to the circle ``|x| = r1`` along direction ``phi``."""
    c, s = math.cos(phi), math.sin(phi)
    return -t * c + math.sqrt(max(r1 * r1 - t * t * s * s, 0.0))


def _log_integral_over_B1(r1: float, t: float) -> float:
    """``int_{B1} log(1/|x - (t, 0)|) dx`` in polar coordinates about ``(t, 0)``.

    The radial part is exact: ``int_0^R rho log(1/rho) drho = R^2 (1 - 2 log R) / 4``.
    The angular integrand is smooth and even in ``phi``.
    """
    def ang(phi):
        R = _ray_length(r1, t, phi)
        if R <= 0.0:
            return 0.0
        return 0.25 * R * R * (1.0 - 2.0 * math.log(R))

    val, _ = quad(ang, 0.0, math.pi, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return 2.0 * val


def I12(g: CoreShellGeometry) -> float:
    """Interaction between the annulus (phase 1) and the inner disk (phase 2)."""
    return g.m2 / (2.0 * math.pi) * _log_integral_over_B1(g.r1, abs(g.t)) - I22(g.r2)


def I11(g: CoreShellGeometry) -> float:
    return disk_self_interaction(g.r1) - 2.0 * I12(g) - I22(g.r2)


def dI12_dt(g: CoreShellGeometry) -> float:
    """Derivative of ``I12`` with respect to the offset ``t``.

    Differentiating under the integral gives
    ``(m2 / 2pi) int_{B1} (x1 - t) / |x - (t, 0)|^2 dx``; about ``(t, 0)`` the
    integrand is ``cos(phi)`` per unit radius, so the radial integral is the
    ray length.  Zero at ``t = 0`` by odd symmetry.
    """
    t = g.t
    if t == 0.0:
        return 0.0
    sign = 1.0 if t > 0 else -1.0
    ta = abs(t)
    val, _ = quad(lambda phi: math.cos(phi) * _ray_length(g.r1, ta, phi), 0.0, math.pi,
                  epsabs=1e-15 * g.r1, epsrel=QUAD_RTOL, limit=200)
    return sign * g.m2 / (2.0 * math.pi) * 2.0 * val


class Placement(str, enum.Enum):
    CONCENTRIC = "Concentric"
    TANGENT = "Tangent"
    INDIFFERENT = "Indifferent"
    DISK = "Disk"


@dataclass(frozen=True)
class F0Result:
    value: float
    t: float
    tag: Placement
    geometry: CoreShellGeometry | None


def offset_objective(g: CoreShellGeometry, Gamma: InteractionMatrix) -> float:
    """``sum_ij (Gamma_ij / 2) I_ij`` for the core shell ``g``."""
    i12 = I12(g)
    i22 = I22(g.r2)
    i11 = disk_self_interaction(g.r1) - 2.0 * i12 - i22
    return 0.5 * (Gamma.g11 * i11 + 2.0 * Gamma.g12 * i12 + Gamma.g22 * i22)


def f0(m: MassPair, sigma: SurfaceTensions, Gamma: InteractionMatrix) -> F0Result:
    """Next-order self-energy of one cluster, minimized over the core offset.

    The offset enters only through ``-(Gamma11 - Gamma12) I12(t)`` and ``I12``
    decreases in ``t``: the core sits at the centre when ``Gamma11 > Gamma12``
    and touches the outer circle when ``Gamma11 < Gamma12``.
    """
    if not classify_regime(sigma).is_core_shell:
        raise NotImplementedError(
            "the cluster geometry is only resolved in core-shell regimes (s02 >= s01 + s12)"
        )
    if not isinstance(m, MassPair):
        m = MassPair(*m)
    R0 = green_regular_part_origin()
    m1, m2 = m.m1, m.m2
    if m1 == 0.0 or m2 == 0.0:
        r = math.sqrt((m1 + m2) / math.pi)
        g_ii = Gamma.g11 if m2 == 0.0 else Gamma.g22
        mass = m1 + m2
        value = 0.5 * g_ii * (disk_self_interaction(r) + mass * mass * R0)
        return F0Result(value, 0.0, Placement.DISK, None)

    base = CoreShellGeometry.from_masses(m1, m2)
    if Gamma.g11 > Gamma.g12:
        t, tag = 0.0, Placement.CONCENTRIC
    elif Gamma.g11 < Gamma.g12:
        t, tag = base.t_max, Placement.TANGENT
    else:
        t, tag = 0.0, Placement.INDIFFERENT
    g = base.with_offset(t)
    value = offset_objective(g, Gamma) + 0.5 * R0 * (
        Gamma.g11 * m1 * m1 + 2.0 * Gamma.g12 * m1 * m2 + Gamma.g22 * m2 * m2
    )
    return F0Result(value, t, tag, g)


def f0_csv_row(m: MassPair, Gamma: InteractionMatrix, res: F0Result) -> dict:
    return {
        "m1": m.m1, "m2": m.m2,
        "G11": Gamma.g11, "G12": Gamma.g12, "G22": Gamma.g22,
        "t": res.t, "tag": res.tag.value, "f0": res.value,
    }
