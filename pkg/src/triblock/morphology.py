"""Measurements on simulated phase fields.

The pipeline is: argmax segmentation into labels 0/1/2, periodic 4-connected
components of the non-background region, interface lengths from periodic
marching squares on ``u_i - u_j``, triple-junction angles from local branch
fits, and classification of each component as a single bubble, a core shell
or a double bubble.

Lengths are in units of the torus side; masses are area fractions.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .energy import PhaseDensity

__all__ = [
    "LabelField",
    "Component",
    "ComponentReport",
    "Morphology",
    "JunctionAngles",
    "segment",
    "components",
    "contour_cells",
    "interface_lengths",
    "junction_angles",
    "classify",
    "analyze",
    "report_json",
    "report_csv_row",
    "ADJACENCY_THRESHOLD",
    "CONCENTRIC_MAX",
    "TANGENT_MIN",
]

PAIRS = ((0, 1), (0, 2), (1, 2))

#: phase 2 counts as insulated from the background when L02 < this fraction of L02 + L12
ADJACENCY_THRESHOLD = 0.05
#: core offset ratios t / (r1 - r2) at or below this are concentric
CONCENTRIC_MAX = 0.15
#: core offset ratios at or above this are tangent
TANGENT_MIN = 0.85


def _densities(u) -> np.ndarray:
    """Stack ``(u0, u1, u2)`` from a PhaseDensity or a (u1, u2) pair of arrays."""
    if isinstance(u, PhaseDensity):
        u1, u2 = u.u1.data, u.u2.data
    else:
        u1, u2 = (np.asarray(a, dtype=np.float64) for a in u)
    return np.stack([1.0 - u1 - u2, u1, u2])


@dataclass(frozen=True)
class LabelField:
    labels: np.ndarray

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int8, copy=True)
        if lab.ndim != 2 or lab.shape[0] != lab.shape[1]:
            raise ValueError("labels must be a square 2-D array")
        if lab.min() < 0 or lab.max() > 2:
            raise ValueError("labels must lie in {0, 1, 2}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def fractions(self) -> tuple[float, float, float]:
        counts = np.bincount(self.labels.ravel(), minlength=3)
        return tuple(float(c) / self.labels.size for c in counts)


def segment(u) -> LabelField:
    """Pointwise argmax of ``(u0, u1, u2)``; ties go to the lower label."""
    return LabelField(np.argmax(_densities(u), axis=0).astype(np.int8))


# ----------------------------------------------------------------------------
# Components
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Component:
    index: int
    mask: np.ndarray  # boolean n x n

    def pixels(self) -> np.ndarray:
        return np.argwhere(self.mask)


def _periodic_label(mask: np.ndarray, structure=None) -> tuple[np.ndarray, int]:
    """Connected labelling of ``mask`` on the torus (4-connected by default).

    Returns ``(ids, count)`` with ids ``0 .. count-1`` and ``-1`` outside.
    """
    lab, count = ndimage.label(mask, structure=structure)
    parent = list(range(count + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    seams = [(lab[0, :], lab[-1, :]), (lab[:, 0], lab[:, -1])]
    if structure is not None and np.asarray(structure).all():
        # diagonal neighbours across the seams
        seams += [(lab[0, :], np.roll(lab[-1, :], 1)), (lab[0, :], np.roll(lab[-1, :], -1)),
                  (lab[:, 0], np.roll(lab[:, -1], 1)), (lab[:, 0], np.roll(lab[:, -1], -1))]
    for first, last in seams:
        for a, b in zip(first, last):
            if a and b:
                parent[find(a)] = find(b)
    roots = {}
    remap = np.full(count + 1, -1, dtype=np.int64)
    for k in range(1, count + 1):
        r = find(k)
        if r not in roots:
            roots[r] = len(roots)
        remap[k] = roots[r]
    return remap[lab], len(roots)


def components(l: LabelField) -> list[Component]:
    """Periodic 4-connected components of the non-background pixels, ordered by first pixel."""
    ids, count = _periodic_label(l.labels != 0)
    return [Component(k, ids == k) for k in range(count)]


def _component_map(comps: list[Component], n: int) -> np.ndarray:
    cmap = np.full((n, n), -1, dtype=np.int64)
    for c in comps:
        cmap[c.mask] = c.index
    return cmap


def _unwrapped(pixels: np.ndarray, n: int) -> np.ndarray:
    """Pixel coordinates shifted to the periodic image nearest the first pixel."""
    ref = pixels[0]
    d = pixels - ref
    d = d - n * np.round(d / n)
    return ref + d


def _torus_center(pixels: np.ndarray, n: int) -> np.ndarray:
    """Mean position of a compact pixel set, in torus coordinates [0, 1)."""
    # unwrap around the circular mean so components straddling the seam work
    ang = 2.0 * np.pi * pixels / n
    ref = (np.arctan2(np.sin(ang).mean(axis=0), np.cos(ang).mean(axis=0)) * n / (2.0 * np.pi)) % n
    d = pixels - ref
    d = d - n * np.round(d / n)
    return ((ref + d.mean(axis=0)) / n) % 1.0


# ----------------------------------------------------------------------------
# Marching squares
# ----------------------------------------------------------------------------

@dataclass
class ContourCells:
    """Zero-contour of ``phi`` cell by cell: per-cell length and segment midpoints."""

    length: np.ndarray  # n x n, in pixel units, cell (a, b) spans pixels a..a+1, b..b+1
    midpoints: np.ndarray  # (m, 2) pixel coordinates
    seg_length: np.ndarray  # (m,)
    seg_cell: np.ndarray  # (m, 2) cell index


def contour_cells(phi: np.ndarray) -> ContourCells:
    """Periodic marching squares with linear interpolation along cell edges."""
    n = phi.shape[0]
    v00 = phi
    v10 = np.roll(phi, -1, axis=0)
    v01 = np.roll(phi, -1, axis=1)
    v11 = np.roll(v10, -1, axis=1)
    a, b = np.meshgrid(np.arange(n, dtype=np.float64), np.arange(n, dtype=np.float64), indexing="ij")

    def cross(p, q):
        hit = (p > 0) != (q > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(hit, p / (p - q), 0.0)
        return hit, t

    h0, t0 = cross(v00, v10)  # edge along axis 0 at b
    h1, t1 = cross(v10, v11)  # edge along axis 1 at a + 1
    h2, t2 = cross(v01, v11)  # edge along axis 0 at b + 1
    h3, t3 = cross(v00, v01)  # edge along axis 1 at a
    pts = np.stack([
        np.stack([a + t0, b], -1),
        np.stack([a + 1.0, b + t1], -1),
        np.stack([a + t2, b + 1.0], -1),
        np.stack([a, b + t3], -1),
    ])  # (4, n, n, 2)
    hits = np.stack([h0, h1, h2, h3])
    count = hits.sum(axis=0)

    segs_p, segs_q, segs_cell = [], [], []
    two = count == 2
    if two.any():
        e_first = np.argmax(hits, axis=0)
        e_second = 3 - np.argmax(hits[::-1], axis=0)
        ia, ib = np.nonzero(two)
        segs_p.append(pts[e_first[ia, ib], ia, ib])
        segs_q.append(pts[e_second[ia, ib], ia, ib])
        segs_cell.append(np.stack([ia, ib], -1))
    four = count == 4
    if four.any():
        ia, ib = np.nonzero(four)
        centre = 0.25 * (v00 + v10 + v01 + v11)[ia, ib]
        joined = (centre > 0) == (v00[ia, ib] > 0)  # v00 and v11 connected through the centre
        pairs_a = np.where(joined[:, None], [[0, 1]], [[0, 3]])
        pairs_b = np.where(joined[:, None], [[2, 3]], [[1, 2]])
        for pr in (pairs_a, pairs_b):
            segs_p.append(pts[pr[:, 0], ia, ib])
            segs_q.append(pts[pr[:, 1], ia, ib])
            segs_cell.append(np.stack([ia, ib], -1))

    length = np.zeros((n, n))
    if segs_p:
        P = np.concatenate(segs_p)
        Q = np.concatenate(segs_q)
        C = np.concatenate(segs_cell)
        L = np.hypot(*(Q - P).T)
        np.add.at(length, (C[:, 0], C[:, 1]), L)
        mid = 0.5 * (P + Q)
    else:
        L = np.zeros(0)
        mid = np.zeros((0, 2))
        C = np.zeros((0, 2), dtype=np.int64)
    return ContourCells(length, mid, L, C)


def _cell_labels(lab: np.ndarray) -> np.ndarray:
    """Labels at the four corners of every cell, shape (4, n, n)."""
    l10 = np.roll(lab, -1, axis=0)
    return np.stack([lab, l10, np.roll(lab, -1, axis=1), np.roll(l10, -1, axis=1)])


def _pair_cells(corners: np.ndarray, i: int, j: int) -> np.ndarray:
    """Cells whose corner labels are all in {i, j} and include both."""
    inside = np.all((corners == i) | (corners == j), axis=0)
    return inside & np.any(corners == i, axis=0) & np.any(corners == j, axis=0)


def _pair_contours(dens: np.ndarray, lab: np.ndarray):
    corners = _cell_labels(lab)
    out = {}
    for i, j in PAIRS:
        cc = contour_cells(dens[i] - dens[j])
        ok = _pair_cells(corners, i, j)
        keep = ok[cc.seg_cell[:, 0], cc.seg_cell[:, 1]] if cc.seg_cell.size else np.zeros(0, bool)
        out[(i, j)] = (np.where(ok, cc.length, 0.0), cc.midpoints[keep], cc.seg_length[keep])
    return out


def interface_lengths(u, l: LabelField | None = None, comps: list[Component] | None = None):
    """Interface lengths ``(L01, L02, L12)``: totals and per component.

    Returns ``(totals, per_component)`` where ``per_component[k]`` is the
    triple for component ``k``.  A cell's contour is credited to the component
    owning its non-background corners.
    """
    dens = _densities(u)
    if l is None:
        l = segment(u)
    if comps is None:
        comps = components(l)
    n = l.n
    contours = _pair_contours(dens, l.labels)
    cmap = _component_map(comps, n)
    owner = _cell_labels(cmap).max(axis=0)
    totals = []
    per = np.zeros((len(comps), 3))
    for p, pair in enumerate(PAIRS):
        length = contours[pair][0] / n
        totals.append(float(length.sum()))
        sel = owner >= 0
        if comps:
            np.add.at(per[:, p], owner[sel], length[sel])
    return tuple(totals), [tuple(map(float, row)) for row in per]


# ----------------------------------------------------------------------------
# Triple junctions
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class JunctionAngles:
    position: tuple[float, float]
    theta0: float
    theta1: float
    theta2: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta0, self.theta1, self.theta2)


def _junction_sites(lab: np.ndarray) -> list[np.ndarray]:
    """Centres (pixel coordinates) of clusters of cells showing all three labels."""
    corners = _cell_labels(lab)
    triple = np.all([np.any(corners == k, axis=0) for k in range(3)], axis=0)
    if not triple.any():
        return []
    n = lab.shape[0]
    ids, count = _periodic_label(triple, structure=np.ones((3, 3), dtype=bool))
    sites = []
    for k in range(count):
        px = _unwrapped(np.argwhere(ids == k).astype(np.float64), n)
        sites.append(px.mean(axis=0) + 0.5)
    return sites


def _fit_branch(points: np.ndarray, weights: np.ndarray, J: np.ndarray):
    """Quadratic fit ``w = c + a s + b s^2`` in the principal frame of the branch.

    Returns a callable giving (signed distance residual) for a trial junction
    and the frame data.
    """
    rel = points - J
    mean = np.average(rel, axis=0, weights=weights)
    cov = np.cov((rel - mean).T, aweights=weights)
    evals, evecs = np.linalg.eigh(cov)
    d = evecs[:, 1]
    if d @ mean < 0:
        d = -d
    nrm = np.array([-d[1], d[0]])
    s = rel @ d
    w = rel @ nrm
    deg = 2 if len(s) >= 5 else 1
    A = np.vander(s, deg + 1, increasing=True)
    sw = np.sqrt(weights)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], w * sw, rcond=None)
    if deg == 1:
        coef = np.r_[coef, 0.0]
    return d, nrm, coef


def _branch_tangent(d, nrm, coef, J_rel):
    """Outward unit tangent of the fitted branch at the point nearest ``J_rel``."""
    s0 = J_rel @ d
    slope = coef[1] + 2.0 * coef[2] * s0
    t = d + slope * nrm
    return t / np.linalg.norm(t)


def _curve_residual(d, nrm, coef, J_rel):
    s0 = J_rel @ d
    w0 = J_rel @ nrm
    slope = coef[1] + 2.0 * coef[2] * s0
    return (w0 - (coef[0] + coef[1] * s0 + coef[2] * s0 * s0)) / math.sqrt(1.0 + slope * slope)


def junction_angles(u, l: LabelField | None = None, epsilon: float = 0.01, window: float = 4.0,
                    inner: float = 1.0) -> list[JunctionAngles]:
    """Opening angles of phases 0, 1, 2 at every triple junction.

    Each of the three interface branches is fitted by a quadratic over the
    contour points within ``window * epsilon`` of the junction (points closer
    than ``inner * epsilon`` sit in the diffuse junction core and are
    skipped).  The junction is relocated to the point closest to all three
    fitted curves, and the angles are measured between the branch tangents
    there.  The three angles sum to ``2 pi`` by construction.
    """
    dens = _densities(u)
    if l is None:
        l = segment(u)
    n = l.n
    contours = _pair_contours(dens, l.labels)
    R = window * epsilon * n
    r_in = inner * epsilon * n
    out = []
    for J0 in _junction_sites(l.labels):
        branches = {}
        for pair in PAIRS:
            _, mids, lens = contours[pair]
            rel = mids - J0
            rel = rel - n * np.round(rel / n)
            dist = np.hypot(rel[:, 0], rel[:, 1])
            sel = (dist <= R) & (dist >= r_in)
            if sel.sum() < 3:
                branches = None
                break
            branches[pair] = (rel[sel] + J0, lens[sel])
        if branches is None:
            continue
        J = J0.copy()
        for _ in range(3):
            fits = {p: _fit_branch(pts, w, J) for p, (pts, w) in branches.items()}
            # move J to the least-squares meeting point of the three curves
            J_rel = np.zeros(2)
            for _ in range(20):
                res, jac = [], []
                for p, (d, nrm, coef) in fits.items():
                    r = _curve_residual(d, nrm, coef, J_rel)
                    h = 1e-6
                    gx = (_curve_residual(d, nrm, coef, J_rel + [h, 0]) - _curve_residual(d, nrm, coef, J_rel - [h, 0])) / (2 * h)
                    gy = (_curve_residual(d, nrm, coef, J_rel + [0, h]) - _curve_residual(d, nrm, coef, J_rel - [0, h])) / (2 * h)
                    res.append(r)
                    jac.append([gx, gy])
                delta, *_ = np.linalg.lstsq(np.array(jac), -np.array(res), rcond=None)
                # stay inside the diffuse core of the original estimate
                J_rel = J_rel + delta
                if np.linalg.norm(delta) < 1e-10:
                    break
            if np.linalg.norm(J_rel) > R:
                J_rel = np.zeros(2)
            J_new = J + J_rel
            if np.linalg.norm(J_new - J) < 1e-8:
                J = J_new
                break
            J = J_new
        fits = {p: _fit_branch(pts, w, J) for p, (pts, w) in branches.items()}
        tangents = {p: _branch_tangent(d, nrm, coef, np.zeros(2)) for p, (d, nrm, coef) in fits.items()}
        ang = {p: math.atan2(t[1], t[0]) for p, t in tangents.items()}
        # the sector between the two branches bounding phase k belongs to phase k
        order = sorted(PAIRS, key=lambda p: ang[p])
        theta = {}
        for a_idx in range(3):
            p, q = order[a_idx], order[(a_idx + 1) % 3]
            sector = (ang[q] - ang[p]) % (2.0 * math.pi)
            phase = (set(p) & set(q)).pop()
            theta[phase] = sector
        pos = tuple(((J / n) % 1.0).tolist())
        out.append(JunctionAngles(pos, theta[0], theta[1], theta[2]))
    return out


# ----------------------------------------------------------------------------
# Classification and reports
# ----------------------------------------------------------------------------

class Shape(str, enum.Enum):
    SINGLE_BUBBLE = "SingleBubble"
    CORE_SHELL = "CoreShell"
    DOUBLE_BUBBLE = "DoubleBubble"


@dataclass(frozen=True)
class ComponentReport:
    index: int
    mass1: float
    mass2: float
    center: tuple[float, float]
    L01: float
    L02: float
    L12: float
    tag: str
    offset_ratio: float | None = None
    junction_angles: list = field(default_factory=list)

    @property
    def shape(self) -> str:
        return self.tag.split("(")[0]

    def to_dict(self) -> dict:
        return asdict(self)


def _offset_ratio(comp: Component, lab: np.ndarray) -> float | None:
    n = lab.shape[0]
    px = _unwrapped(comp.pixels().astype(np.float64), n)
    sp = lab[comp.mask]
    core = px[sp == 2]
    if core.size == 0 or (sp == 1).sum() == 0:
        return None
    r1 = math.sqrt(len(px) / math.pi)
    r2 = math.sqrt(len(core) / math.pi)
    if r1 - r2 <= 0:
        return None
    t = float(np.linalg.norm(core.mean(axis=0) - px.mean(axis=0)))
    return t / (r1 - r2)


def classify(comp: Component, lab: LabelField, lengths: tuple[float, float, float],
             adjacency: float = ADJACENCY_THRESHOLD) -> tuple[str, float | None]:
    """Tag a measured component; returns ``(tag, offset_ratio)``."""
    species = lab.labels[comp.mask]
    has1 = bool(np.any(species == 1))
    has2 = bool(np.any(species == 2))
    if has1 != has2:
        return f"SingleBubble({1 if has1 else 2})", None
    L01, L02, L12 = lengths
    if L02 < adjacency * (L02 + L12):
        ratio = _offset_ratio(comp, lab.labels)
        if ratio is None or ratio <= CONCENTRIC_MAX:
            sub = "concentric"
        elif ratio >= TANGENT_MIN:
            sub = "tangent"
        else:
            sub = "offset"
        return f"CoreShell({sub})", ratio
    return "DoubleBubble", None


@dataclass
class Morphology:
    n: int
    fractions: tuple[float, float, float]
    totals: tuple[float, float, float]
    components: list[ComponentReport]

    @property
    def tags(self) -> list[str]:
        return [c.tag for c in self.components]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "fractions": list(self.fractions),
            "interface_totals": {"L01": self.totals[0], "L02": self.totals[1], "L12": self.totals[2]},
            "components": [c.to_dict() for c in self.components],
        }


def analyze(u, epsilon: float = 0.01) -> Morphology:
    """Full measurement of one snapshot."""
    l = segment(u)
    comps = components(l)
    totals, per = interface_lengths(u, l, comps)
    n = l.n
    junctions = junction_angles(u, l, epsilon=epsilon) if comps else []
    cmap = _component_map(comps, n)
    reports = []
    for comp, lengths in zip(comps, per):
        species = l.labels[comp.mask]
        tag, ratio = classify(comp, l, lengths)
        mine = [
            list(j.as_tuple()) for j in junctions
            if cmap[int(j.position[0] * n) % n, int(j.position[1] * n) % n] in (comp.index, -1)
            and _near_component(j.position, comp, n)
        ]
        reports.append(ComponentReport(
            index=comp.index,
            mass1=float(np.count_nonzero(species == 1)) / (n * n),
            mass2=float(np.count_nonzero(species == 2)) / (n * n),
            center=tuple(map(float, _torus_center(comp.pixels().astype(np.float64), n))),
            L01=lengths[0], L02=lengths[1], L12=lengths[2],
            tag=tag, offset_ratio=ratio, junction_angles=mine,
        ))
    return Morphology(n, l.fractions(), totals, reports)


def _near_component(pos, comp: Component, n: int, radius: int = 3) -> bool:
    a, b = int(round(pos[0] * n - 0.5)), int(round(pos[1] * n - 0.5))
    ia = np.arange(a - radius, a + radius + 1) % n
    ib = np.arange(b - radius, b + radius + 1) % n
    return bool(comp.mask[np.ix_(ia, ib)].any())


def report_json(m: Morphology) -> str:
    return json.dumps(m.to_dict(), indent=2)


def report_csv_row(m: Morphology, **extra) -> dict:
    """One summary row per snapshot for sweep tables."""
    row = dict(extra)
    row.update({
        "n": m.n,
        "frac0": m.fractions[0], "frac1": m.fractions[1], "frac2": m.fractions[2],
        "L01": m.totals[0], "L02": m.totals[1], "L12": m.totals[2],
        "components": len(m.components),
        "tags": ";".join(m.tags),
    })
    return row
