"""Sharp-interface droplet quantities.

Masses are areas in the blown-up (droplet) scale and ``Gamma`` is the rescaled
interaction matrix.  A single cluster with masses ``m = (m1, m2)`` in a
core-shell regime (``s02 >= s01 + s12``) costs

    e0(m) = 2 s01 sqrt(pi (m1 + m2)) + 2 s12 sqrt(pi m2)
            + sum_ij Gamma_ij m_i m_j / (4 pi),

an annulus of phase 1 wrapped around a disk of phase 2.  ``ebar0`` splits the
total masses into finitely many clusters so that the sum of ``e0`` is minimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .energy import InteractionMatrix, Regime, SurfaceTensions, classify_regime

__all__ = [
    "MassPair",
    "MassSplit",
    "EbarResult",
    "YoungAngles",
    "e0",
    "mass_lower_bound",
    "component_bound",
    "ebar0",
    "merge_gain",
    "youngs_angles",
    "inner_cone_alpha0",
    "inner_cone_residual",
    "f1",
    "f1_prime",
    "f2",
    "f2_prime",
    "coexistence_critical_masses",
    "annulus_orientation_gap",
    "ebar0_csv_row",
]

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True, order=True)
class MassPair:
    m1: float
    m2: float

    def __post_init__(self):
        m1, m2 = float(self.m1), float(self.m2)
        if not (m1 >= 0 and m2 >= 0 and math.isfinite(m1) and math.isfinite(m2)):
            raise ValueError(f"masses must be finite and nonnegative, got ({m1}, {m2})")
        if m1 + m2 <= 0:
            raise ValueError("a cluster needs positive total mass")
        object.__setattr__(self, "m1", m1)
        object.__setattr__(self, "m2", m2)

    @property
    def total(self) -> float:
        return self.m1 + self.m2

    def as_tuple(self) -> tuple[float, float]:
        return (self.m1, self.m2)


@dataclass(frozen=True)
class MassSplit:
    parts: tuple[MassPair, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("a mass split needs at least one cluster")

    @property
    def K(self) -> int:
        return len(self.parts)

    def totals(self) -> tuple[float, float]:
        return (
            math.fsum(p.m1 for p in self.parts),
            math.fsum(p.m2 for p in self.parts),
        )

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)


def _require_core_shell(sigma: SurfaceTensions) -> None:
    if not classify_regime(sigma).is_core_shell:
        raise ValueError(
            "closed-form cluster energy requires a core-shell regime "
            f"(s02 >= s01 + s12); got {sigma.as_tuple()}"
        )


def _e0_raw(m1, m2, sigma: SurfaceTensions, G: InteractionMatrix):
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    perim = 2.0 * SQRT_PI * (sigma.s01 * np.sqrt(m1 + m2) + sigma.s12 * np.sqrt(m2))
    inter = (G.g11 * m1 * m1 + 2.0 * G.g12 * m1 * m2 + G.g22 * m2 * m2) / (4.0 * math.pi)
    return perim + inter


def e0(m: MassPair, sigma: SurfaceTensions, Gamma: InteractionMatrix = InteractionMatrix()) -> float:
    """Perimeter plus self-interaction of the optimal single cluster of masses ``m``.

    One formula covers every mass pair: for ``m1 = 0`` it reduces to
    ``2 (s01 + s12) sqrt(pi m2)``, which is ``2 s02 sqrt(pi m2)`` when
    ``s02 = s01 + s12``.  For ``s02 > s01 + s12`` it is the infimum reached by
    wetting the phase-2 disk with a vanishing phase-1 film, which keeps the
    function continuous up to the boundary of the mass quadrant.
    """
    _require_core_shell(sigma)
    if not isinstance(m, MassPair):
        m = MassPair(*m)
    return float(_e0_raw(m.m1, m.m2, sigma, Gamma))


def _gamma_sum(G: InteractionMatrix) -> float:
    return G.g11 + 2.0 * G.g12 + G.g22


def mass_lower_bound(M1: float, M2: float, s01: float, Gamma: InteractionMatrix) -> float:
    """Minimal total mass of any cluster of an ``ebar0`` minimizer.

    Returns ``inf`` when the interaction vanishes (no pressure to split).
    """
    g = _gamma_sum(Gamma)
    if Gamma.is_zero() or g == 0:
        return math.inf
    if g < 0:
        raise ValueError("the interaction sum Gamma11 + 2 Gamma12 + Gamma22 must be positive")
    M = M1 + M2
    return 32.0 * math.pi**3 * s01**2 / ((1.0 + math.sqrt(2.0)) ** 2 * g**2 * M**2)


def component_bound(M1: float, M2: float, s01: float, Gamma: InteractionMatrix) -> int:
    """Upper bound ``ceil((M1 + M2) / m_minus)`` on the number of clusters."""
    mm = mass_lower_bound(M1, M2, s01, Gamma)
    if math.isinf(mm):
        return 1
    return max(1, math.ceil((M1 + M2) / mm - 1e-12))


def merge_gain(m1: float, m2: float, s01: float) -> float:
    """Energy released by merging single bubbles ``(m1, 0)`` and ``(0, m2)``."""
    if m1 < 0 or m2 < 0:
        raise ValueError("masses must be nonnegative")
    return 2.0 * s01 * SQRT_PI * (math.sqrt(m1) + math.sqrt(m2) - math.sqrt(m1 + m2))


# ----------------------------------------------------------------------------
# ebar0: optimal splitting of the total masses
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class EbarResult:
    value: float
    split: MassSplit
    certification_gap: float
    lattice_value: float
    gradient_norm: float
    per_K: dict = field(default_factory=dict)
    truncated: bool = False

    @property
    def K(self) -> int:
        return self.split.K


def _split_objective(x, K, sigma, G):
    m1, m2 = x[:K], x[K:]
    return float(np.sum(_e0_raw(m1, m2, sigma, G)))


def _split_gradient(x, K, sigma, G, floor=0.0):
    m1, m2 = x[:K], x[K:]
    tot = np.maximum(m1 + m2, floor)
    s2 = np.maximum(m2, floor)
    with np.errstate(divide="ignore"):
        a = sigma.s01 * SQRT_PI / np.sqrt(tot)
        b = sigma.s12 * SQRT_PI / np.sqrt(s2)
    g1 = a + (G.g11 * m1 + G.g12 * m2) / (2.0 * math.pi)
    g2 = a + b + (G.g12 * m1 + G.g22 * m2) / (2.0 * math.pi)
    return np.concatenate([g1, g2])


def _split_hessian(x, K, sigma, G):
    m1, m2 = x[:K], x[K:]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = -0.5 * sigma.s01 * SQRT_PI * (m1 + m2) ** -1.5
        b = -0.5 * sigma.s12 * SQRT_PI * np.where(m2 > 0, m2, np.inf) ** -1.5
    c = 1.0 / (2.0 * math.pi)
    H = np.zeros((2 * K, 2 * K))
    idx = np.arange(K)
    H[idx, idx] = a + G.g11 * c
    H[K + idx, K + idx] = a + b + G.g22 * c
    H[idx, K + idx] = H[K + idx, idx] = a + G.g12 * c
    return H


def _stationarity(x, K, M, sigma, G, zero_tol):
    """Projected-gradient norm on the face of the mass simplex that holds ``x``.

    Free entries must share one multiplier per species; a zero entry only
    needs a gradient no smaller than that multiplier (moving mass into it
    cannot lower the energy).
    """
    g = _split_gradient(x, K, sigma, G)
    worst = 0.0
    for i in range(2):
        block = slice(i * K, (i + 1) * K)
        xi, gi = x[block], g[block]
        free = xi > zero_tol * max(M[i], 1e-300)
        if not free.any():
            continue
        lam = gi[free].mean()
        worst = max(worst, float(np.max(np.abs(gi[free] - lam))))
        if (~free).any():
            worst = max(worst, float(np.max(np.maximum(lam - gi[~free], 0.0))))
    return worst


def _newton_polish(x, K, M, sigma, G, zero_tol=1e-12, iters=30):
    """Newton iterations on the KKT system of the active face."""
    x = x.copy()
    for i in range(2):
        block = slice(i * K, (i + 1) * K)
        xi = x[block]
        xi[xi <= zero_tol * max(M[i], 1e-300)] = 0.0
        if M[i] > 0 and xi.sum() > 0:
            xi *= M[i] / xi.sum()
    for _ in range(iters):
        free = x > 0
        # a cluster with no mass at all leaves the problem
        alive = (x[:K] + x[K:]) > 0
        free &= np.concatenate([alive, alive])
        idx = np.flatnonzero(free)
        if idx.size == 0:
            break
        g = _split_gradient(x, K, sigma, G)[idx]
        H = _split_hessian(x, K, sigma, G)[np.ix_(idx, idx)]
        species = (idx >= K).astype(int)
        C = np.zeros((2, idx.size))
        C[species, np.arange(idx.size)] = 1.0
        used = C.sum(axis=1) > 0
        C = C[used]
        nc = C.shape[0]
        A = np.block([[H, C.T], [C, np.zeros((nc, nc))]])
        rhs = np.concatenate([-g, np.zeros(nc)])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            break
        d = sol[: idx.size]
        # keep inside the orthant
        step = 1.0
        neg = d < 0
        if neg.any():
            step = min(1.0, 0.9 * float(np.min(-x[idx][neg] / d[neg])))
        x_new = x.copy()
        x_new[idx] += step * d
        if np.max(np.abs(step * d)) <= 1e-15 * max(1.0, max(M)):
            x = x_new
            break
        x = x_new
    return x


def _project_masses(x, K, M):
    x = np.maximum(x, 0.0)
    for i in range(2):
        block = slice(i * K, (i + 1) * K)
        s = x[block].sum()
        if M[i] == 0:
            x[block] = 0.0
        elif s > 0:
            x[block] *= M[i] / s
        else:
            x[block] = M[i] / K
    return x


def _local_min(x0, K, M, sigma, G):
    floor = 1e-14 * max(sum(M), 1e-300)
    cons = [
        {"type": "eq", "fun": (lambda x, i=i: x[i * K:(i + 1) * K].sum() - M[i]),
         "jac": (lambda x, i=i: np.r_[np.zeros(i * K), np.ones(K), np.zeros((1 - i) * K)])}
        for i in range(2)
    ]
    bounds = [(0.0, M[0])] * K + [(0.0, M[1])] * K
    res = minimize(
        _split_objective, x0, args=(K, sigma, G),
        jac=lambda x, *a: np.clip(_split_gradient(x, K, sigma, G, floor), -1e12, 1e12),
        method="SLSQP", bounds=bounds, constraints=cons,
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    x = _project_masses(np.asarray(res.x, dtype=float), K, M)
    best = x
    fbest = _split_objective(x, K, sigma, G)
    polished = _newton_polish(x, K, M, sigma, G)
    polished = _project_masses(polished, K, M)
    fp = _split_objective(polished, K, sigma, G)
    if fp <= fbest + 1e-13 * max(1.0, abs(fbest)):
        best, fbest = polished, fp
    return best, fbest


def _seeds(K, M, rng, n_random):
    M1, M2 = M
    seeds = [np.r_[np.full(K, M1 / K), np.full(K, M2 / K)]]
    for j in range(1, K):
        # phase 2 confined to j clusters, phase 1 spread over all of them
        m2 = np.r_[np.full(j, M2 / j), np.zeros(K - j)]
        seeds.append(np.r_[np.full(K, M1 / K), m2])
        # phase 1 confined to j clusters, phase 2 in the others
        m1 = np.r_[np.full(j, M1 / j), np.zeros(K - j)]
        m2b = np.r_[np.zeros(j), np.full(K - j, M2 / (K - j))]
        seeds.append(np.r_[m1, m2b])
    for _ in range(n_random):
        seeds.append(np.r_[M1 * rng.dirichlet(np.ones(K)), M2 * rng.dirichlet(np.ones(K))])
    return seeds


def _canonical(x, K) -> tuple[tuple[float, float], ...]:
    pairs = [(float(a), float(b)) for a, b in zip(x[:K], x[K:]) if a + b > 0]
    return tuple(sorted(pairs, reverse=True))


def _best_for_K(K, M, sigma, G, rng, n_random):
    cands = []
    for x0 in _seeds(K, M, rng, n_random if K > 1 else 0):
        x, f = _local_min(x0, K, M, sigma, G)
        cands.append((f, _canonical(x, K), x))
    return min(cands, key=lambda c: (c[0], c[1]))


def _lattice_ebar(M, sigma, G, K_max, L):
    """Exact minimum of the split energy over masses on the lattice ``M_i / L``."""
    h1, h2 = M[0] / L, M[1] / L
    a = np.arange(L + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    cost = _e0_raw(A * h1, B * h2, sigma, G)
    cost[0, 0] = np.inf
    best = np.full((L + 1, L + 1), np.inf)
    best[0, 0] = 0.0
    layers = []
    for _ in range(K_max):
        new = np.full_like(best, np.inf)
        arg = np.zeros(best.shape + (2,), dtype=int)
        for da in range(L + 1):
            for db in range(L + 1):
                c = cost[da, db]
                if not np.isfinite(c):
                    continue
                cand = best[: L + 1 - da, : L + 1 - db] + c
                view = new[da:, db:]
                better = cand < view
                view[better] = cand[better]
                arg[da:, db:][better] = (da, db)
        best = new
        layers.append((best, arg))
    values = [float(b[L, L]) for b, _ in layers]
    k = int(np.argmin(values))
    # walk the argmin table back to recover the lattice split
    split, A, B = [], L, L
    for j in range(k, -1, -1):
        da, db = layers[j][1][A, B]
        split.append((da * h1, db * h2))
        A, B = A - da, B - db
    return values[k], split


def ebar0(
    M1: float,
    M2: float,
    sigma: SurfaceTensions,
    Gamma: InteractionMatrix = InteractionMatrix(),
    max_components: int = 40,
    n_random: int = 4,
    patience: int = 3,
    lattice_resolution: int = 24,
    seed: int = 0,
) -> EbarResult:
    """Minimal total cluster energy over splittings of ``(M1, M2)``.

    Every cluster count ``K = 1 .. component_bound`` (capped at
    ``max_components``) is searched by multi-start constrained descent followed
    by Newton polishing on the active face; the scan over ``K`` stops once the
    per-``K`` optimum has risen ``patience`` times in a row past the best.  The result is certified against
    the exact optimum over a coarse mass lattice; ``certification_gap`` is
    ``lattice_value - value`` (nonnegative when the descent beat the lattice).
    """
    _require_core_shell(sigma)
    if M1 < 0 or M2 < 0 or M1 + M2 <= 0:
        raise ValueError("total masses must be nonnegative with positive sum")
    M = (float(M1), float(M2))
    N = component_bound(M1, M2, sigma.s01, Gamma)
    K_max = min(N, max_components)
    rng = np.random.default_rng(seed)

    best = None
    per_K = {}
    rising = 0
    for K in range(1, K_max + 1):
        f, canon, x = _best_for_K(K, M, sigma, Gamma, rng, n_random)
        per_K[K] = f
        # a larger K must win by more than round-off
        if best is None or f < best[0] - 1e-13 * max(1.0, abs(best[0])):
            best = (f, canon, x, K)
            rising = 0
        elif K > 1 and f > per_K[K - 1]:
            rising += 1
            if rising >= patience:
                break

    lattice_value, lattice_split = _lattice_ebar(M, sigma, Gamma, min(N, 2 * lattice_resolution), lattice_resolution)
    if lattice_value < best[0] - 1e-12 * max(1.0, abs(best[0])):
        # the lattice found a better basin: descend from it
        K = len(lattice_split)
        x0 = np.array([a for a, _ in lattice_split] + [b for _, b in lattice_split])
        x, f = _local_min(x0, K, M, sigma, Gamma)
        best = (f, _canonical(x, K), x, K)
    f, canon, x, K = best
    # merge empty slots away and recompute the residual on the compact vector
    parts = tuple(MassPair(a, b) for a, b in canon)
    Kc = len(parts)
    xc = np.array([p.m1 for p in parts] + [p.m2 for p in parts])
    value = _split_objective(xc, Kc, sigma, Gamma)
    gnorm = _stationarity(xc, Kc, M, sigma, Gamma, zero_tol=1e-12)
    return EbarResult(
        value=value,
        split=MassSplit(parts),
        certification_gap=lattice_value - value,
        lattice_value=lattice_value,
        gradient_norm=gnorm,
        per_K=per_K,
        truncated=N > max_components,
    )


def ebar0_csv_row(M1, M2, sigma: SurfaceTensions, Gamma: InteractionMatrix, res: EbarResult) -> dict:
    split = ";".join(f"{p.m1:.10g}:{p.m2:.10g}" for p in res.split)
    return {
        "M1": M1, "M2": M2,
        "s01": sigma.s01, "s02": sigma.s02, "s12": sigma.s12,
        "G11": Gamma.g11, "G12": Gamma.g12, "G22": Gamma.g22,
        "K": res.K, "split": split, "ebar0": res.value,
        "certification_gap": res.certification_gap,
    }


# ----------------------------------------------------------------------------
# Young's law and the inner-cone constant
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class YoungAngles:
    theta0: float
    theta1: float
    theta2: float
    degenerate: bool = False

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta0, self.theta1, self.theta2)


def youngs_angles(sigma: SurfaceTensions) -> YoungAngles:
    """Opening angles of phases 0, 1, 2 at a triple junction.

    The angle of phase ``i`` is ``pi`` minus the angle of the tension triangle
    opposite the tension of the interface not touching ``i``; this satisfies
    ``sin(th1)/s02 = sin(th2)/s01 = sin(th0)/s12`` and ``th0 + th1 + th2 = 2 pi``.
    When a tension equals the sum of the other two, the phase it excludes
    closes up (angle 0) and the other two angles are ``pi``.
    """
    s01, s02, s12 = sigma.as_tuple()
    opposite = {0: s12, 1: s02, 2: s01}
    scale = s01 + s02 + s12
    for i, s in opposite.items():
        rest = scale - s
        if s >= rest - 1e-12 * scale:
            th = [math.pi, math.pi, math.pi]
            th[i] = 0.0
            return YoungAngles(*th, degenerate=True)

    def tri_angle(a, b, c):
        # angle opposite side a in a triangle with sides a, b, c
        return math.acos(max(-1.0, min(1.0, (b * b + c * c - a * a) / (2.0 * b * c))))

    A0 = tri_angle(s12, s01, s02)
    A1 = tri_angle(s02, s01, s12)
    A2 = math.pi - A0 - A1
    return YoungAngles(math.pi - A0, math.pi - A1, math.pi - A2, degenerate=False)


def inner_cone_residual(alpha: float) -> float:
    return 1.0 - math.sin(alpha) - math.sqrt(0.5 * math.pi * math.sin(2.0 * alpha))


def inner_cone_alpha0() -> float:
    """The root of ``1 - sin a - sqrt((pi/2) sin 2a)`` in ``(0, pi/2)`` (about 0.21 rad)."""
    lo, hi = 1e-6, 0.5
    assert inner_cone_residual(lo) > 0 > inner_cone_residual(hi)
    return brentq(inner_cone_residual, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


# ----------------------------------------------------------------------------
# Coexistence of core shells and single bubbles
# ----------------------------------------------------------------------------

def f1(eta, M1, M2, sigma: SurfaceTensions, G: InteractionMatrix):
    """Energy of a core shell ``(M1 - eta, M2)`` plus a phase-1 bubble ``eta``."""
    eta = np.asarray(eta, dtype=float)
    perim = 2 * SQRT_PI * (sigma.s12 * math.sqrt(M2) + sigma.s01 * np.sqrt(M2 + eta)
                           + sigma.s01 * np.sqrt(M1 - eta))
    inter = (G.g11 * ((M1 - eta) ** 2 + eta**2) + 2 * G.g12 * M2 * eta + G.g22 * M2**2) / (4 * math.pi)
    return perim + inter


def f1_prime(eta, M1, M2, sigma: SurfaceTensions, G: InteractionMatrix):
    eta = np.asarray(eta, dtype=float)
    return (SQRT_PI * sigma.s01 * (1.0 / np.sqrt(M2 + eta) - 1.0 / np.sqrt(M1 - eta))
            + (G.g11 * (2 * eta - M1) + G.g12 * M2) / (2 * math.pi))


def f2(eta, M1, M2, sigma: SurfaceTensions, G: InteractionMatrix):
    """Energy of a core shell ``(M1, eta)`` plus a phase-2 bubble ``M2 - eta``."""
    eta = np.asarray(eta, dtype=float)
    perim = 2 * SQRT_PI * (sigma.s12 * np.sqrt(eta) + sigma.s01 * np.sqrt(M1 + eta)
                           + sigma.s02 * np.sqrt(M2 - eta))
    inter = (G.g22 * ((M2 - eta) ** 2 + eta**2) + 2 * G.g12 * M1 * eta + G.g11 * M1**2) / (4 * math.pi)
    return perim + inter


def f2_prime(eta, M1, M2, sigma: SurfaceTensions, G: InteractionMatrix):
    eta = np.asarray(eta, dtype=float)
    return (SQRT_PI * (sigma.s01 / np.sqrt(M1 + eta) + sigma.s12 / np.sqrt(eta)
                       - sigma.s02 / np.sqrt(M2 - eta))
            + (G.g22 * (2 * eta - M2) + G.g12 * M1) / (2 * math.pi))


def f1_polynomial(M1, M2, sigma: SurfaceTensions, G: InteractionMatrix) -> np.polynomial.Polynomial:
    """Degree-8 polynomial whose roots contain every zero of ``f1_prime``.

    Obtained by squaring ``f1_prime = 0`` twice:
    ``4 P = (P Q^2 / (4 pi^3 s01^2) - (M1 + M2))^2`` with
    ``P = (M1 - eta)(M2 + eta)`` and ``Q = G11 (2 eta - M1) + G12 M2``.
    """
    Poly = np.polynomial.Polynomial
    P = Poly([M1, -1.0]) * Poly([M2, 1.0])
    Q = Poly([-G.g11 * M1 + G.g12 * M2, 2.0 * G.g11])
    inner = P * Q * Q / (4.0 * math.pi**3 * sigma.s01**2) - (M1 + M2)
    return 4.0 * P - inner * inner


def _polish_root(fun, r, lo, hi):
    """Refine an approximate root by bracketing around it when possible."""
    span = max(1e-12, 1e-6 * (hi - lo))
    a, b = max(lo, r - span), min(hi, r + span)
    fa, fb = fun(a), fun(b)
    if np.sign(fa) != np.sign(fb):
        return brentq(fun, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
    return r


def coexistence_critical_masses(
    M1: float, M2: float, sigma: SurfaceTensions, G: InteractionMatrix, tol: float = 1e-9
) -> tuple[list[float], list[float]]:
    """Critical points of ``f1`` in ``(0, M1)`` and of ``f2`` in ``(0, M2)``."""
    _require_core_shell(sigma)
    if not (M1 > 0 and M2 > 0):
        raise ValueError("masses must be positive")
    fp1 = lambda e: float(f1_prime(e, M1, M2, sigma, G))
    fp2 = lambda e: float(f2_prime(e, M1, M2, sigma, G))

    roots1 = []
    poly = f1_polynomial(M1, M2, sigma, G)
    if poly.degree() >= 1 and np.any(poly.coef != 0):
        for r in poly.roots():
            if abs(r.imag) > 1e-7 * max(1.0, abs(r.real)):
                continue
            x = float(r.real)
            if not (0.0 < x < M1):
                continue
            x = _polish_root(fp1, x, 0.0 + 1e-300, M1 * (1 - 1e-16))
            if abs(fp1(x)) < tol and not any(abs(x - y) <= 1e-10 * M1 for y in roots1):
                roots1.append(x)
    roots1.sort()

    # f2' runs from +inf at 0 to -inf at M2: bracket sign changes on a grid
    # refined towards both ends where the square roots vary fastest
    s = np.linspace(0.0, 1.0, 4001)[1:-1]
    grid = M2 * 0.5 * (1 - np.cos(np.pi * s))
    vals = f2_prime(grid, M1, M2, sigma, G)
    roots2 = []
    for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
        r = brentq(fp2, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        if abs(fp2(r)) < tol:
            roots2.append(float(r))
    return roots1, roots2


def annulus_orientation_gap(m1: float, m2: float, sigma: SurfaceTensions) -> float:
    """Perimeter of the phase-2-outside nesting minus that of phase-1-outside."""
    if m1 < 0 or m2 < 0 or m1 + m2 <= 0:
        raise ValueError("masses must be nonnegative with positive sum")
    case_a = 2 * SQRT_PI * (sigma.s12 * math.sqrt(m2) + sigma.s01 * math.sqrt(m1 + m2))
    case_b = 2 * SQRT_PI * (sigma.s12 * math.sqrt(m1) + sigma.s02 * math.sqrt(m1 + m2))
    return case_b - case_a
