"""Finite droplet configurations on the torus and their lattice energy.

A configuration places clusters of masses ``m^k`` (blown-up areas) at points
``x^k`` of the unit torus.  Its energy is

    F0 = sum_k f0(m^k) + sum_{k != l} sum_ij (Gamma_ij / 2) m_i^k m_j^l G(x^k - x^l),

the cluster self-energies plus the Green's-function interaction of point
masses.  Each cluster's core offset ``t^k`` is fixed at its optimal value; it
does not couple to the positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .coreshell_opt import CoreShellGeometry, I12, I22, disk_self_interaction, f0
from .energy import InteractionMatrix, SurfaceTensions
from .grid_spectral import green_gradient, green_point, green_regular_part, green_regular_part_origin
from .sharp import MassPair, MassSplit

__all__ = [
    "DropletConfig",
    "F0",
    "position_gradient",
    "optimize_positions",
    "hexagonality",
    "torus_distances",
    "sharp_E_eta_and_remainder",
    "config_to_json",
    "config_from_json",
]


def _wrap(x: np.ndarray) -> np.ndarray:
    return x - np.floor(x + 0.5)


@dataclass(frozen=True)
class DropletConfig:
    positions: np.ndarray
    masses: tuple[MassPair, ...]
    offsets: tuple[float, ...] = ()

    def __post_init__(self):
        pos = _wrap(np.array(self.positions, dtype=np.float64).reshape(-1, 2))
        masses = tuple(m if isinstance(m, MassPair) else MassPair(*m) for m in self.masses)
        if len(masses) != pos.shape[0] or pos.shape[0] == 0:
            raise ValueError("need one mass pair per position and at least one droplet")
        offsets = tuple(float(t) for t in self.offsets) or (0.0,) * len(masses)
        if len(offsets) != len(masses):
            raise ValueError("need one core offset per droplet")
        d = torus_distances(pos)
        np.fill_diagonal(d, np.inf)
        if np.any(d <= 0.0):
            raise ValueError("droplet positions must be pairwise distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "offsets", offsets)

    @property
    def K(self) -> int:
        return len(self.masses)

    def mass_array(self) -> np.ndarray:
        return np.array([m.as_tuple() for m in self.masses])

    def with_positions(self, positions) -> "DropletConfig":
        return replace(self, positions=np.asarray(positions, dtype=np.float64))

    @classmethod
    def from_split(cls, split: MassSplit, positions, sigma: SurfaceTensions, Gamma: InteractionMatrix):
        """Clusters of an optimal split, each with its optimal core offset."""
        offsets = tuple(f0(m, sigma, Gamma).t for m in split)
        return cls(np.asarray(positions, dtype=np.float64), tuple(split), offsets)

    def geometry(self, k: int) -> CoreShellGeometry | None:
        m = self.masses[k]
        if m.m1 == 0.0 or m.m2 == 0.0:
            return None
        return CoreShellGeometry.from_masses(m.m1, m.m2, self.offsets[k])


def torus_distances(positions: np.ndarray) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.float64)
    d = _wrap(pos[:, None, :] - pos[None, :, :])
    return np.hypot(d[..., 0], d[..., 1])


def _pair_weights(c: DropletConfig, Gamma: InteractionMatrix) -> np.ndarray:
    m = c.mass_array()
    return m @ Gamma.matrix() @ m.T


def _self_energy(c: DropletConfig, k: int, Gamma: InteractionMatrix, R0: float) -> float:
    m = c.masses[k]
    i11, i12, i22 = _self_integrals(c, k)
    return 0.5 * (
        Gamma.g11 * (i11 + m.m1 * m.m1 * R0)
        + 2.0 * Gamma.g12 * (i12 + m.m1 * m.m2 * R0)
        + Gamma.g22 * (i22 + m.m2 * m.m2 * R0)
    )


def _self_integrals(c: DropletConfig, k: int) -> tuple[float, float, float]:
    m = c.masses[k]
    return _cluster_integrals(m.m1, m.m2, c.offsets[k])


@lru_cache(maxsize=4096)
def _cluster_integrals(m1: float, m2: float, t: float) -> tuple[float, float, float]:
    """``(I11, I12, I22)`` of one cluster."""
    if m1 == 0.0 or m2 == 0.0:
        d = disk_self_interaction(math.sqrt((m1 + m2) / math.pi))
        return (d, 0.0, 0.0) if m2 == 0.0 else (0.0, 0.0, d)
    g = CoreShellGeometry.from_masses(m1, m2, t)
    i12 = I12(g)
    i22 = I22(g.r2)
    return disk_self_interaction(g.r1) - 2.0 * i12 - i22, i12, i22


def F0(c: DropletConfig, sigma: SurfaceTensions, Gamma: InteractionMatrix) -> float:
    """Second-order lattice energy of the configuration."""
    R0 = green_regular_part_origin()
    self_part = math.fsum(_self_energy(c, k, Gamma, R0) for k in range(c.K))
    if c.K == 1:
        return self_part
    W = _pair_weights(c, Gamma)
    iu, ju = np.triu_indices(c.K, 1)
    G = green_point(c.positions[iu] - c.positions[ju])
    # ordered pairs with weight 1/2 each = unordered pairs with weight 1
    return self_part + float(np.sum(W[iu, ju] * np.atleast_1d(G)))


def position_gradient(c: DropletConfig, sigma: SurfaceTensions, Gamma: InteractionMatrix) -> np.ndarray:
    """``dF0/dx^k`` for every droplet, shape (K, 2)."""
    grad = np.zeros((c.K, 2))
    if c.K == 1:
        return grad
    W = _pair_weights(c, Gamma)
    iu, ju = np.triu_indices(c.K, 1)
    gG = green_gradient(c.positions[iu] - c.positions[ju]).reshape(-1, 2)
    contrib = W[iu, ju, None] * gG
    np.add.at(grad, iu, contrib)
    np.add.at(grad, ju, -contrib)
    return grad


@dataclass
class DescentReport:
    config: DropletConfig
    energies: list = field(default_factory=list)
    gradient_norm: float = math.inf
    steps: int = 0
    converged: bool = False


def optimize_positions(
    c: DropletConfig,
    sigma: SurfaceTensions,
    Gamma: InteractionMatrix,
    steps: int = 5000,
    rate: float | None = None,
    gtol: float = 1e-8,
    report: bool = False,
):
    """Steepest descent on the droplet positions with halving backtracking.

    Trial step lengths follow the Barzilai-Borwein rule (the first one is
    ``rate``); a trial is halved until ``F0`` does not increase, so every
    accepted step is monotone.  Stops at ``gtol``, at the step budget, or
    after 50 consecutive steps whose decrease is below round-off.
    """
    if rate is None:
        rate = 1e-2 / float(np.mean([m.total for m in c.masses]))
    F = F0(c, sigma, Gamma)
    g = position_gradient(c, sigma, Gamma)
    rep = DescentReport(c, [F])
    gnorm = float(np.linalg.norm(g))
    it = 0
    trial_rate = rate
    flat = 0
    while it < steps and gnorm >= gtol and flat < 50:
        it += 1
        accepted = False
        lr = trial_rate
        for _ in range(60):
            trial = c.with_positions(c.positions - lr * g)
            Ft = F0(trial, sigma, Gamma)
            if Ft <= F:
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            break
        g_new = position_gradient(trial, sigma, Gamma)
        s_vec = _wrap(trial.positions - c.positions).ravel()
        y_vec = (g_new - g).ravel()
        sy = float(s_vec @ y_vec)
        trial_rate = float(s_vec @ s_vec) / sy if sy > 0 else 2.0 * lr
        # energy changes below round-off cannot be resolved any further
        flat = flat + 1 if F - Ft <= 1e-15 * max(1.0, abs(F)) else 0
        c, F, g = trial, Ft, g_new
        gnorm = float(np.linalg.norm(g))
        rep.energies.append(F)
    rep.config, rep.gradient_norm, rep.steps, rep.converged = c, gnorm, it, gnorm < gtol
    return rep if report else c


def hexagonality(c: DropletConfig) -> tuple[float, float]:
    """Mean nearest-neighbour torus distance and its coefficient of variation."""
    if c.K < 2:
        raise ValueError("hexagonality needs at least two droplets")
    d = torus_distances(c.positions)
    np.fill_diagonal(d, np.inf)
    nn = d.min(axis=1)
    mean = float(nn.mean())
    return mean, float(nn.std() / mean)


# ----------------------------------------------------------------------------
# Energy of the rescaled configuration at small eta
# ----------------------------------------------------------------------------
#
# A function h with Laplacian 1 averages over a disk of radius rho to
# h(centre) + rho^2 / 8.  Both R (the regular part of G) and G away from the
# lattice points have Laplacian 1, so double integrals of h(d + eta (x - y))
# over disks reduce exactly to one evaluation:
#   int_Ba int_Bb h(d + eta (x - y)) = |Ba| |Bb| [h(d + eta (ca - cb)) + eta^2 (ra^2 + rb^2) / 8].
# Annuli are handled as signed differences of disks.

def _pieces(c: DropletConfig, k: int) -> dict[int, list[tuple[float, np.ndarray, float]]]:
    """Signed disks (sign, centre, radius) composing each phase of cluster ``k``."""
    m = c.masses[k]
    origin = np.zeros(2)
    g = c.geometry(k)
    if g is None:
        r = math.sqrt(m.total / math.pi)
        return {1: [(1.0, origin, r)], 2: []} if m.m2 == 0.0 else {1: [], 2: [(1.0, origin, r)]}
    core = np.array([g.t, 0.0])
    return {1: [(1.0, origin, g.r1), (-1.0, core, g.r2)], 2: [(1.0, core, g.r2)]}


def _disk_pair_integral(h, d, A, B, eta) -> float:
    total = 0.0
    for sa, ca, ra in A:
        for sb, cb, rb in B:
            area = math.pi * ra * ra * math.pi * rb * rb
            total += sa * sb * area * (h(d + eta * (ca - cb)) + eta * eta * (ra * ra + rb * rb) / 8.0)
    return total


def sharp_E_eta_and_remainder(
    c: DropletConfig,
    eta: float,
    sigma: SurfaceTensions,
    Gamma: InteractionMatrix,
    ebar: float,
) -> tuple[float, float]:
    """``E_eta`` of the configuration shrunk by ``eta`` and ``F_eta = |log eta| (E_eta - ebar)``.

    ``E_eta = sum_k [P(A^k) + sum_ij Gamma_ij |A_i^k| |A_j^k| / 4pi] + (Phi1 + Phi2) / |log eta|``,
    where ``Phi1`` holds each cluster's logarithmic self-interaction and
    ``R(eta (x - y))`` and ``Phi2`` the Green's-function interaction of
    distinct clusters, both integrated exactly over the cluster shapes.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must lie in (0, 1)")
    radii = np.array([math.sqrt(m.total / math.pi) for m in c.masses])
    if c.K > 1:
        d = torus_distances(c.positions)
        need = eta * (radii[:, None] + radii[None, :])
        np.fill_diagonal(d, np.inf)
        if np.any(d <= need):
            raise ValueError("clusters overlap at this eta")
    L = abs(math.log(eta))
    Gm = Gamma.matrix()
    pieces = [_pieces(c, k) for k in range(c.K)]

    first = 0.0
    phi1 = 0.0
    R = lambda z: green_regular_part(z)
    for k, m in enumerate(c.masses):
        g = c.geometry(k)
        if g is None:
            s = sigma.s01 if m.m2 == 0.0 else sigma.s02
            perim = 2.0 * s * math.sqrt(math.pi * m.total)
        else:
            perim = 2.0 * math.sqrt(math.pi) * (sigma.s01 * math.sqrt(m.total) + sigma.s12 * math.sqrt(m.m2))
        mv = np.array(m.as_tuple())
        first += perim + float(mv @ Gm @ mv) / (4.0 * math.pi)
        I = _self_integrals(c, k)
        Imat = np.array([[I[0], I[1]], [I[1], I[2]]])
        for i in (1, 2):
            for j in (1, 2):
                gij = Gm[i - 1, j - 1]
                if gij == 0.0:
                    continue
                reg = _disk_pair_integral(R, np.zeros(2), pieces[k][i], pieces[k][j], eta)
                phi1 += 0.5 * gij * (Imat[i - 1, j - 1] + reg)

    phi2 = 0.0
    G = lambda z: green_point(z)
    for k in range(c.K):
        for l in range(c.K):
            if k == l:
                continue
            d = _wrap(c.positions[k] - c.positions[l])
            for i in (1, 2):
                for j in (1, 2):
                    gij = Gm[i - 1, j - 1]
                    if gij == 0.0:
                        continue
                    phi2 += 0.5 * gij * _disk_pair_integral(G, d, pieces[k][i], pieces[l][j], eta)

    E = first + (phi1 + phi2) / L
    return E, L * (E - ebar)


# ----------------------------------------------------------------------------
# JSON dump
# ----------------------------------------------------------------------------

def config_to_json(c: DropletConfig, sigma: SurfaceTensions, Gamma: InteractionMatrix) -> str:
    g = position_gradient(c, sigma, Gamma)
    doc = {
        "positions": c.positions.tolist(),
        "masses": [list(m.as_tuple()) for m in c.masses],
        "offsets": list(c.offsets),
        "F0": F0(c, sigma, Gamma),
        "gradient_norm": float(np.linalg.norm(g)),
    }
    if c.K >= 2:
        mean, cv = hexagonality(c)
        doc["nn_mean"], doc["nn_cv"] = mean, cv
    return json.dumps(doc, indent=2)


def config_from_json(text: str) -> DropletConfig:
    doc = json.loads(text)
    return DropletConfig(np.array(doc["positions"]), tuple(MassPair(*m) for m in doc["masses"]),
                         tuple(doc["offsets"]))
