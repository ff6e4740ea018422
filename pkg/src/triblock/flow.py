"""Mass-constrained gradient flow of the diffuse energy.

The flow evolves ``(u1, u2)`` on the constraint plane ``u0 + u1 + u2 = 1``
with the metric inherited from R^3, which makes the gradient term diagonal.
Time is normalised so that the flow is the steepest descent of ``2 E``:

    d/dt u = eps^2 Lap u - g^{-1} [ dW/du + 2 eps gamma G*u ] + lambda,

``g^{-1} = [[2, -1], [-1, 2]] / 3`` and ``lambda`` restores the prescribed
means.  One step of the stabilised semi-implicit scheme solves

    (1 + dt S - dt eps^2 Lap) u^{n+1} = (1 + dt S) u^n - dt (F(u^n) - lambda^n),

so a single Fourier mode of the linear problem is multiplied by
``(1 + dt S) / (1 + dt S + dt eps^2 4 pi^2 |k|^2)`` per step.
"""

from __future__ import annotations

import logging
import time
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy import fft, ndimage

from .energy import (
    EnergyTerms,
    ModelParams,
    PhaseDensity,
    well_curvature_bound,
    well_value_and_force,
)
from .grid_spectral import GridField, _green_multiplier, _rk2, dealias_mask

log = logging.getLogger(__name__)

__all__ = [
    "FlowConfig",
    "FlowState",
    "EnergyRecord",
    "RunReport",
    "FlowError",
    "EnergyIncreaseError",
    "init_random",
    "step",
    "run",
    "default_stabilizer",
    "write_energy_csv",
    "read_energy_csv",
]

_GINV = np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0


class FlowError(RuntimeError):
    pass


class EnergyIncreaseError(FlowError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 1e-3
    S: float | None = None  # None: derived from the well curvature
    max_steps: int = 200_000
    energy_tolerance: float = 1e-9
    window: int = 100
    rho: float = 0.0  # penalty of the augmented multiplier variant
    strict: bool = False
    strict_after: int = 0
    strict_atol: float = 1e-12
    snapshot_every: int = 0
    dealias: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.S is not None and self.S < 0:
            raise ValueError("S must be nonnegative")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


@lru_cache(maxsize=64)
def default_stabilizer(p: ModelParams) -> float:
    """``S = max |W''|`` over the simplex plus the nonlocal Lipschitz bound.

    This is the smallest stabiliser for which the semi-implicit step is
    unconditionally energy stable.
    """
    nonlocal_bound = 2.0 * p.epsilon * float(np.max(np.abs(np.linalg.eigvalsh(p.gamma.matrix())))) / (
        4.0 * np.pi**2
    )
    return well_curvature_bound(p.well) + nonlocal_bound


@dataclass(frozen=True)
class EnergyRecord:
    step: int
    time: float
    total: float
    gradient: float
    well: float
    nonlocal_: float
    mass1_drift: float
    mass2_drift: float


@dataclass(frozen=True)
class FlowState:
    """Phase densities plus bookkeeping.

    ``history`` is an append-only log shared along a trajectory; ``step``
    returns a new state whose log has one more record.
    """

    u: PhaseDensity
    t: float
    lam1: float
    lam2: float
    history: list = field(default_factory=list, compare=False, repr=False)
    steps: int = 0
    terms: EnergyTerms | None = None
    # Spectral cache of (u1, u2) and (G*u1, G*u2); purely an optimisation.
    _cache: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def energy(self) -> float:
        return self.terms.total


def _record(step_idx: int, t: float, terms: EnergyTerms, u1, u2, p: ModelParams) -> EnergyRecord:
    return EnergyRecord(
        step=step_idx,
        time=t,
        total=terms.total,
        gradient=terms.gradient,
        well=terms.well,
        nonlocal_=terms.nonlocal_,
        mass1_drift=float(np.mean(u1) - p.M1),
        mass2_drift=float(np.mean(u2) - p.M2),
    )


def _smooth_noise(rng: np.random.Generator, n: int, length: float) -> np.ndarray:
    xi = rng.standard_normal((n, n))
    if length > 0:
        mult = np.exp(-2.0 * np.pi**2 * length**2 * _rk2(n))
        xi = fft.irfft2(fft.rfft2(xi) * mult, s=(n, n))
    xi -= xi.mean()
    sd = xi.std()
    return xi / sd if sd > 0 else xi


def init_random(
    p: ModelParams,
    seed: int,
    n: int = 256,
    amplitude: float = 0.05,
    correlation_length: float = 0.0,
    species_correlation: float = 0.0,
    mode: str = "noise",
    smoothing: float = 0.0,
    max_iter: int = 200,
) -> FlowState:
    """Random initial state with means exactly ``(M1, M2)``.

    ``mode="noise"``: the uniform state plus seeded Gaussian noise of standard
    deviation ``amplitude`` (optionally smoothed over ``correlation_length``
    and correlated between species), clipped into the simplex and rescaled
    until the means hold, then shifted to make them exact.

    ``mode="clusters"``: random clusters.  The top ``M1 + M2`` area fraction of
    a smooth random field ``xi1`` is filled with phase 1, the top ``M2`` part
    of it (ranked by a second field, correlated with ``xi1`` by
    ``species_correlation``) with phase 2; the indicators are mollified over
    ``smoothing`` and ``amplitude`` scales additional noise.

    ``mode="nested"``: the same clusters, but every cluster receives a
    phase-2 core holding the fraction ``M2 / (M1 + M2)`` of its area, placed
    on its samples farthest from the cluster boundary.
    """
    rng = np.random.default_rng(seed)
    if mode in ("clusters", "nested"):
        u1, u2 = _cluster_state(rng, p, n, correlation_length, species_correlation, smoothing,
                                nested=mode == "nested")
        if amplitude > 0:
            u1 = u1 + amplitude * _smooth_noise(rng, n, 0.0)
            u2 = u2 + amplitude * _smooth_noise(rng, n, 0.0)
    elif mode == "noise":
        if amplitude == 0:
            return _make_state(
                np.full((n, n), p.M1), np.full((n, n), p.M2), p, 0.0, (0.0, 0.0), 0, []
            )
        xi1 = _smooth_noise(rng, n, correlation_length)
        xi2 = _smooth_noise(rng, n, correlation_length)
        c = float(species_correlation)
        xi2 = c * xi1 + np.sqrt(max(0.0, 1.0 - c * c)) * xi2
        u1 = p.M1 + amplitude * xi1
        u2 = p.M2 + amplitude * xi2
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    for _ in range(max_iter):
        u1, u2 = _clip_simplex(u1, u2)
        # Rescaling keeps the samples nonnegative.
        u1 = u1 * (p.M1 / u1.mean())
        u2 = u2 * (p.M2 / u2.mean())
        if (u1 + u2).max() <= 1 + 1e-9 and u1.max() <= 1 + 1e-9 and u2.max() <= 1 + 1e-9:
            break
    else:
        raise FlowError("could not impose the masses within the simplex; reduce the noise amplitude")
    u1 = u1 + (p.M1 - u1.mean())
    u2 = u2 + (p.M2 - u2.mean())
    return _make_state(u1, u2, p, 0.0, (0.0, 0.0), 0, [])


def _fill_top(score: np.ndarray, mass: float, allowed: np.ndarray) -> np.ndarray:
    """Indicator of the highest ``score`` samples inside ``allowed`` with mean exactly ``mass``."""
    n2 = score.size
    target = mass * n2
    order = np.argsort(np.where(allowed, score, -np.inf), axis=None)[::-1]
    full = int(np.floor(target))
    out = np.zeros(n2)
    out[order[:full]] = 1.0
    if full < n2:
        out[order[full]] = target - full
    return out.reshape(score.shape)


def _nested_cores(occupied: np.ndarray, fraction: float) -> np.ndarray:
    """Per-cluster cores: the ``fraction`` of each periodic cluster deepest inside it."""
    n = occupied.shape[0]
    inside = occupied > 0
    # periodic distance to the boundary and periodic labels via a 3 x 3 tiling
    tiled = np.tile(inside, (3, 3))
    depth = ndimage.distance_transform_edt(tiled)[n:2 * n, n:2 * n]
    lab, count = ndimage.label(tiled)
    lab = lab[n:2 * n, n:2 * n]
    core = np.zeros((n, n))
    for k in np.unique(lab[inside]):
        idx = np.flatnonzero((lab == k).ravel())
        target = fraction * occupied.ravel()[idx].sum()
        order = idx[np.argsort(depth.ravel()[idx])[::-1]]
        full = int(np.floor(target))
        core.ravel()[order[:full]] = 1.0
        if full < len(order):
            core.ravel()[order[full]] = target - full
    return np.minimum(core, occupied)


def _cluster_state(rng, p: ModelParams, n, length, corr, smoothing, nested=False):
    xi1 = _smooth_noise(rng, n, length)
    xi2 = _smooth_noise(rng, n, length)
    xi2 = corr * xi1 + np.sqrt(max(0.0, 1.0 - corr * corr)) * xi2
    occupied = _fill_top(xi1, p.M1 + p.M2, np.ones((n, n), bool))
    if nested:
        u2 = _nested_cores(occupied, p.M2 / (p.M1 + p.M2))
    else:
        u2 = _fill_top(xi2, p.M2, occupied == 1.0)
    u1 = occupied - u2
    if smoothing > 0:
        mult = np.exp(-2.0 * np.pi**2 * smoothing**2 * _rk2(n))
        u1 = fft.irfft2(fft.rfft2(u1) * mult, s=(n, n))
        u2 = fft.irfft2(fft.rfft2(u2) * mult, s=(n, n))
    return u1, u2


def _clip_simplex(u1, u2):
    u1 = np.clip(u1, 0.0, 1.0)
    u2 = np.clip(u2, 0.0, 1.0)
    excess = np.maximum(u1 + u2 - 1.0, 0.0)
    return u1 - excess / 2, u2 - excess / 2


def _make_state(u1, u2, p, t, lam, steps, history, U=None) -> FlowState:
    n = u1.shape[0]
    if U is None:
        U = (fft.rfft2(u1), fft.rfft2(u2))
    W, F1, F2 = well_value_and_force(u1, u2, p.well)
    g = p.gamma
    nl = 0.0
    if not g.is_zero():
        gm = _green_multiplier(n)
        Gu1 = fft.irfft2(U[0] * gm, s=(n, n))
        Gu2 = fft.irfft2(U[1] * gm, s=(n, n))
        nl = 0.5 * p.epsilon * float(
            g.g11 * np.mean(Gu1 * u1) + 2 * g.g12 * np.mean(Gu1 * u2) + g.g22 * np.mean(Gu2 * u2)
        )
        # Projected nonlocal force: 2 eps (gamma G*u) minus its mean over (u0, u1, u2).
        c = 2.0 * p.epsilon
        n1 = c * (g.g11 * Gu1 + g.g12 * Gu2)
        n2 = c * (g.g12 * Gu1 + g.g22 * Gu2)
        m = (n1 + n2) / 3.0
        F1 = F1 + (n1 - m)
        F2 = F2 + (n2 - m)
    terms = EnergyTerms(_gradient_term(U, n, p.epsilon), 0.5 * float(np.mean(W)), nl)
    history.append(_record(steps, t, terms, u1, u2, p))
    return FlowState(
        u=PhaseDensity(GridField(u1), GridField(u2)),
        t=t,
        lam1=lam[0],
        lam2=lam[1],
        history=history,
        steps=steps,
        terms=terms,
        _cache=(U, (F1, F2)),
    )


def _gradient_term(U, n: int, eps: float) -> float:
    """``(eps^2/4) int |grad u0|^2 + |grad u1|^2 + |grad u2|^2`` from the half spectra."""
    a, b = U
    dir_sum = (
        a.real**2 + a.imag**2 + b.real**2 + b.imag**2
        + (a.real + b.real) ** 2 + (a.imag + b.imag) ** 2
    )
    dirichlet = 4.0 * np.pi**2 / float(n * n) ** 2 * float(np.sum(_weighted_k2(n) * dir_sum))
    return 0.25 * eps**2 * dirichlet


@lru_cache(maxsize=None)
def _weighted_k2(n: int) -> np.ndarray:
    # Interior columns of the half spectrum stand for two conjugate modes.
    w = np.full((n, n // 2 + 1), 2.0)
    w[:, 0] = 1.0
    w[:, -1] = 1.0
    out = w * _rk2(n)
    out.setflags(write=False)
    return out


def step(state: FlowState, cfg: FlowConfig, p: ModelParams) -> FlowState:
    """Advance one semi-implicit step; means are restored exactly in Fourier space."""
    u1, u2 = state.u.u1.data, state.u.u2.data
    n = u1.shape[0]
    if state._cache is None:
        state = _make_state(u1, u2, p, state.t, (state.lam1, state.lam2), state.steps, [])
    U, (F1, F2) = state._cache
    S = default_stabilizer(p) if cfg.S is None else cfg.S
    dt = cfg.dt

    m1, m2 = float(np.mean(u1)), float(np.mean(u2))
    lam1 = float(np.mean(F1)) + cfg.rho * (p.M1 - m1)
    lam2 = float(np.mean(F2)) + cfg.rho * (p.M2 - m2)

    damp = dt / (1.0 + dt * S)
    mult = 1.0 / (1.0 + damp * p.epsilon**2 * 4.0 * np.pi**2 * _rk2(n))
    R1 = fft.rfft2(F1 - lam1)
    R2 = fft.rfft2(F2 - lam2)
    if cfg.dealias:
        mask = dealias_mask(n)
        R1 *= mask
        R2 *= mask
    V1 = (U[0] - damp * R1) * mult
    V2 = (U[1] - damp * R2) * mult
    # Zero mode: the multiplier restores the prescribed mean exactly.
    V1[0, 0] = p.M1 * n * n
    V2[0, 0] = p.M2 * n * n
    v1 = fft.irfft2(V1, s=(n, n))
    v2 = fft.irfft2(V2, s=(n, n))
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise FlowError(
            f"non-finite values at step {state.steps + 1} (t={state.t:.6g}); reduce dt or raise S"
        )
    new = _make_state(
        v1, v2, p, state.t + dt, (lam1, lam2), state.steps + 1, state.history, U=(V1, V2)
    )
    if cfg.strict and new.steps > cfg.strict_after:
        prev = state.energy
        if new.energy > prev + cfg.strict_atol:
            raise EnergyIncreaseError(
                f"energy increased at step {new.steps}: {prev!r} -> {new.energy!r}"
            )
    return new


@dataclass
class RunReport:
    energies: list
    reason: str
    wall_time: float
    steps: int
    snapshots: list = field(default_factory=list)
    S: float = 0.0


def run(state: FlowState, cfg: FlowConfig, p: ModelParams, snapshot_writer=None, progress=None) -> tuple[FlowState, RunReport]:
    """Step until ``max_steps`` or until the windowed relative decrease drops below tolerance."""
    t0 = time.perf_counter()
    S = default_stabilizer(p) if cfg.S is None else cfg.S
    cfg_run = cfg if cfg.S is not None else _with_S(cfg, S)
    if not state.history:
        state = _make_state(state.u.u1.data, state.u.u2.data, p, state.t, (state.lam1, state.lam2), state.steps, [])
    start = len(state.history) - 1
    snapshots = []
    reason = "budget"
    for k in range(cfg.max_steps):
        state = step(state, cfg_run, p)
        done = k + 1
        if snapshot_writer is not None and cfg.snapshot_every and done % cfg.snapshot_every == 0:
            snapshots.append(snapshot_writer(state))
        if progress is not None:
            progress(state)
        if done >= cfg.window:
            e_now = state.history[-1].total
            e_then = state.history[-1 - cfg.window].total
            rel = (e_then - e_now) / (cfg.window * max(abs(e_now), 1e-300))
            if rel < cfg.energy_tolerance:
                reason = "stationary"
                break
    report = RunReport(
        energies=state.history[start:],
        reason=reason,
        wall_time=time.perf_counter() - t0,
        steps=state.steps,
        snapshots=snapshots,
        S=S,
    )
    return state, report


def _with_S(cfg: FlowConfig, S: float) -> FlowConfig:
    from dataclasses import replace

    return replace(cfg, S=S)


_CSV_HEADER = "step,time,total,gradient_term,well_term,nonlocal_term,mass1_drift,mass2_drift"


def write_energy_csv(path, records) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_CSV_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.step},{r.time!r},{r.total!r},{r.gradient!r},{r.well!r},"
                f"{r.nonlocal_!r},{r.mass1_drift!r},{r.mass2_drift!r}\n"
            )


def read_energy_csv(path) -> list[EnergyRecord]:
    out = []
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected energy CSV header: {header}")
        for line in fh:
            f = line.strip().split(",")
            out.append(EnergyRecord(int(f[0]), *map(float, f[1:])))
    return out
