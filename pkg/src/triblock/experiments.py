"""Experiment presets, runner and parameter sweeps.

An :class:`ExperimentSpec` bundles model parameters, the time-stepping
configuration, the initial-state recipe and the checks to run on the final
state.  ``run_experiment`` simulates, measures the final snapshot and writes
artifacts into a per-run directory:

``energy.csv``        per-step energy history
``final.tdf``         final (u1, u2) snapshot
``labels.pgm``        argmax segmentation (grey = 127 * label)
``render.ppm``        colour rendering
``morphology.json``   per-component measurements
``report.json``       checks, outcomes and run metadata
"""

from __future__ import annotations

import copy
import difflib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io as tio
from .energy import InteractionMatrix, ModelParams, SurfaceTensions
from .flow import FlowConfig, FlowError, init_random, run, write_energy_csv
from .morphology import analyze

__all__ = [
    "InitSpec",
    "Expectation",
    "ExperimentSpec",
    "ExperimentResult",
    "PRESETS",
    "preset",
    "run_experiment",
    "sweep",
    "spec_from_config",
    "spec_to_dict",
    "UnknownPresetError",
]


@dataclass(frozen=True)
class InitSpec:
    mode: str = "clusters"
    amplitude: float = 0.0
    correlation_length: float = 0.15
    species_correlation: float = 0.9
    smoothing: float = 0.01


@dataclass(frozen=True)
class Expectation:
    """Checks applied to the final state.

    ``shapes``: every two-species component must have one of these shape names
    (``DoubleBubble`` / ``CoreShell``); ``tags``: every component's full tag
    must be one of these; ``min_components``: lower bound on the count.
    """

    shapes: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    min_components: int = 0
    max_junction_error_deg: float | None = None
    max_adjacency_ratio: float | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    sigma: tuple[float, float, float]
    gamma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    masses: tuple[float, float] = (0.12, 0.04)
    epsilon: float = 0.01
    n: int = 256
    seed: int = 0
    dt: float = 1.0
    S: float | None = None
    steps: int = 200_000
    energy_tolerance: float = 1e-9
    window: int = 100
    strict: bool = False
    init: InitSpec = InitSpec()
    expect: Expectation = Expectation()
    description: str = ""

    def model(self) -> ModelParams:
        return ModelParams(
            SurfaceTensions(*self.sigma),
            InteractionMatrix(*self.gamma),
            epsilon=self.epsilon,
            M1=self.masses[0],
            M2=self.masses[1],
        )

    def flow_config(self) -> FlowConfig:
        return FlowConfig(
            dt=self.dt,
            S=self.S,
            max_steps=self.steps,
            energy_tolerance=self.energy_tolerance,
            window=self.window,
            strict=self.strict,
        )

    @property
    def sigma02(self) -> float:
        return self.sigma[1]


class UnknownPresetError(KeyError):
    pass


_FIG2_S02 = {"a": 1.0, "b": 1.6, "c": 1.8, "d": 1.9, "e": 2.0, "f": 3.0}
_FIG4_S02 = {"a": 1.0, "b": 1.5, "c": 2.0}


def _fig2_expect(s02: float) -> Expectation:
    if s02 < 2.0:
        return Expectation(shapes=("DoubleBubble",),
                           max_junction_error_deg=5.0 if s02 == 1.0 else None)
    return Expectation(shapes=("CoreShell",), max_adjacency_ratio=0.05)


def _init_for(s02: float, correlation_length: float = 0.15) -> InitSpec:
    # Below the degenerate line a correlated start locks into a metastable core
    # shell; independent species noise lets the lobes find each other instead.
    return InitSpec(correlation_length=correlation_length, species_correlation=0.9 if s02 >= 2.0 else 0.0)


def _build_presets() -> dict[str, ExperimentSpec]:
    out = {}
    for key, s02 in _FIG2_S02.items():
        out[f"figure2{key}"] = ExperimentSpec(
            name=f"figure2{key}", sigma=(1.0, s02, 1.0), masses=(0.12, 0.04),
            steps=20_000, init=_init_for(s02), expect=_fig2_expect(s02),
            description=f"local system, sigma02 = {s02}, M = (0.12, 0.04)",
        )
        out[f"figure3{key}"] = ExperimentSpec(
            name=f"figure3{key}", sigma=(1.0, s02, 1.0), masses=(0.04, 0.12),
            steps=20_000, init=_init_for(s02), expect=_fig2_expect(s02),
            description=f"local system, sigma02 = {s02}, M = (0.04, 0.12)",
        )
    for key, s02 in _FIG4_S02.items():
        out[f"figure4{key}"] = ExperimentSpec(
            name=f"figure4{key}", sigma=(1.0, s02, 1.0), gamma=(16_000.0, 0.0, 54_000.0),
            masses=(0.10, 0.05), steps=20_000,
            init=_init_for(s02, 0.06),
            expect=Expectation(shapes=("CoreShell",) if s02 >= 2.0 else ("DoubleBubble",), min_components=3),
            description=f"nonlocal system, sigma02 = {s02}, gamma = (16000, 0, 54000)",
        )
    out["figure5"] = ExperimentSpec(
        name="figure5", sigma=(1.0, 2.0, 1.0), gamma=(4_000.0, 0.0, 20_000.0),
        masses=(0.12, 0.04), steps=20_000,
        init=InitSpec(mode="nested", correlation_length=0.06),
        expect=Expectation(tags=("CoreShell(concentric)",), min_components=3),
        description="nonlocal core shells, gamma = (4000, 0, 20000)",
    )
    out["figure7"] = ExperimentSpec(
        name="figure7", sigma=(1.0, 2.0, 1.0), gamma=(20_000.0, 0.0, 100_000.0),
        masses=(0.12, 0.06), steps=20_000,
        init=InitSpec(mode="nested", correlation_length=0.05),
        expect=Expectation(tags=("CoreShell(concentric)",), min_components=3),
        description="nonlocal core shells, gamma = (20000, 0, 100000)",
    )
    return out


PRESETS: dict[str, ExperimentSpec] = _build_presets()


def preset(name: str) -> ExperimentSpec:
    try:
        return PRESETS[name]
    except KeyError:
        close = difflib.get_close_matches(name, PRESETS, n=3)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise UnknownPresetError(f"unknown preset {name!r}{hint} (known: {', '.join(sorted(PRESETS))})") from None


# ----------------------------------------------------------------------------
# Config files
# ----------------------------------------------------------------------------

def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["sigma"] = {"s01": spec.sigma[0], "s02": spec.sigma[1], "s12": spec.sigma[2]}
    d["gamma"] = {"g11": spec.gamma[0], "g12": spec.gamma[1], "g22": spec.gamma[2]}
    d["masses"] = {"M1": spec.masses[0], "M2": spec.masses[1]}
    if d["S"] is None:
        del d["S"]
    d["expect"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d["expect"].items() if v is not None}
    return d


def _tuple3(section, keys) -> tuple[float, float, float]:
    if isinstance(section, (list, tuple)):
        return tuple(float(v) for v in section)
    return tuple(float(section[k]) for k in keys)


def spec_from_config(doc: dict, base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build a spec from a parsed TOML document, starting from ``base`` or a named preset."""
    doc = copy.deepcopy(doc)
    if base is None:
        base = preset(doc.pop("preset")) if "preset" in doc else ExperimentSpec(name="custom", sigma=(1.0, 1.0, 1.0))
    else:
        doc.pop("preset", None)
    kw = {}
    if "sigma" in doc:
        kw["sigma"] = _tuple3(doc.pop("sigma"), ("s01", "s02", "s12"))
    if "gamma" in doc:
        kw["gamma"] = _tuple3(doc.pop("gamma"), ("g11", "g12", "g22"))
    if "Gamma" in doc:
        eta = float(doc.get("eta", 0.0) or 0.0)
        if not eta > 0:
            raise ValueError("a [Gamma] section needs eta to convert to raw strengths")
        G = InteractionMatrix(*_tuple3(doc.pop("Gamma"), ("g11", "g12", "g22"))).to_raw(eta)
        kw["gamma"] = (G.g11, G.g12, G.g22)
    doc.pop("eta", None)
    if "masses" in doc:
        m = doc.pop("masses")
        kw["masses"] = (float(m["M1"]), float(m["M2"])) if isinstance(m, dict) else tuple(map(float, m))
    grid = doc.pop("grid", None)
    if grid is not None:
        kw["n"] = int(grid["n"] if isinstance(grid, dict) else grid)
    if "init" in doc:
        kw["init"] = replace(base.init, **doc.pop("init"))
    if "expect" in doc:
        e = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.pop("expect").items()}
        kw["expect"] = replace(base.expect, **e)
    names = {f.name for f in fields(ExperimentSpec)}
    for k, v in doc.items():
        if k not in names:
            raise ValueError(f"unknown config key {k!r}")
        kw[k] = v
    return replace(base, **kw)


# ----------------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    ok: bool
    checks: list
    morphology: dict | None
    reason: str
    steps: int
    wall_time: float
    outdir: str | None
    error: str | None = None

    @property
    def tags(self) -> list[str]:
        if not self.morphology:
            return []
        return [c["tag"] for c in self.morphology["components"]]


def _check(name: str, passed: bool, detail) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def evaluate_expectations(spec: ExperimentSpec, morph, energies) -> list[dict]:
    e = spec.expect
    checks = []
    comps = morph.components
    two = [c for c in comps if c.mass1 > 0 and c.mass2 > 0]
    if e.shapes:
        shapes = [c.shape for c in two]
        checks.append(_check("shapes", bool(two) and all(s in e.shapes for s in shapes),
                             {"expected": list(e.shapes), "found": shapes}))
    if e.tags:
        tags = [c.tag for c in comps]
        checks.append(_check("tags", bool(comps) and all(t in e.tags for t in tags),
                             {"expected": list(e.tags), "found": tags}))
    if e.min_components:
        checks.append(_check("min_components", len(comps) >= e.min_components,
                             {"expected_at_least": e.min_components, "found": len(comps)}))
    if e.max_junction_error_deg is not None:
        angles = [a for c in comps for j in c.junction_angles for a in j]
        target = None
        from .sharp import youngs_angles

        target = youngs_angles(SurfaceTensions(*spec.sigma)).as_tuple()
        errs = [abs(math.degrees(a - t)) for c in comps for j in c.junction_angles for a, t in zip(j, target)]
        checks.append(_check("junction_angles", bool(errs) and max(errs) <= e.max_junction_error_deg,
                             {"max_error_deg": max(errs) if errs else None, "angles_deg": [math.degrees(a) for a in angles]}))
    if e.max_adjacency_ratio is not None:
        ratios = [c.L02 / (c.L02 + c.L12) if c.L02 + c.L12 > 0 else 0.0 for c in two]
        checks.append(_check("adjacency_ratio", bool(two) and max(ratios) < e.max_adjacency_ratio,
                             {"ratios": ratios, "threshold": e.max_adjacency_ratio}))
    if spec.strict:
        diffs = np.diff([r.total for r in energies])
        checks.append(_check("energy_dissipation", bool(np.all(diffs <= 1e-12)),
                             {"max_increase": float(diffs.max()) if diffs.size else 0.0}))
    drift = max((max(abs(r.mass1_drift), abs(r.mass2_drift)) for r in energies), default=0.0)
    checks.append(_check("mass_conservation", drift <= 1e-12, {"max_drift": drift}))
    return checks


def run_experiment(spec: ExperimentSpec, out: str | os.PathLike | None = None, progress=None) -> ExperimentResult:
    """Simulate ``spec``, analyse the final state and write artifacts to ``out``."""
    t0 = time.perf_counter()
    outdir = None
    if out is not None:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
    p = spec.model()
    try:
        state = init_random(p, spec.seed, n=spec.n, amplitude=spec.init.amplitude,
                            correlation_length=spec.init.correlation_length,
                            species_correlation=spec.init.species_correlation,
                            mode=spec.init.mode, smoothing=spec.init.smoothing)
        state, rep = run(state, spec.flow_config(), p, progress=progress)
    except FlowError as exc:
        result = ExperimentResult(spec, False, [_check("flow", False, str(exc))], None,
                                  "error", 0, time.perf_counter() - t0, str(outdir) if outdir else None,
                                  error=f"{type(exc).__name__}: {exc}")
        if outdir is not None:
            tio.write_json(outdir / "report.json", _report_doc(result))
        return result
    morph = analyze(state.u, epsilon=spec.epsilon)
    checks = evaluate_expectations(spec, morph, state.history)
    result = ExperimentResult(
        spec=spec,
        ok=all(c["passed"] for c in checks),
        checks=checks,
        morphology=morph.to_dict(),
        reason=rep.reason,
        steps=rep.steps,
        wall_time=time.perf_counter() - t0,
        outdir=str(outdir) if outdir else None,
    )
    if outdir is not None:
        from .morphology import segment

        write_energy_csv(outdir / "energy.csv", state.history)
        tio.write_snapshot(outdir / "final.tdf", state.u)
        tio.write_pgm(outdir / "labels.pgm", tio.labels_to_pgm(segment(state.u).labels))
        tio.write_ppm(outdir / "render.ppm", tio.render_rgb(state.u))
        tio.write_json(outdir / "morphology.json", morph.to_dict())
        tio.write_json(outdir / "report.json", _report_doc(result, S=rep.S))
    return result


def _report_doc(result: ExperimentResult, **extra) -> dict:
    doc = {
        "name": result.spec.name,
        "ok": result.ok,
        "checks": result.checks,
        "failed": [c["name"] for c in result.checks if not c["passed"]],
        "stop_reason": result.reason,
        "steps": result.steps,
        "wall_time": result.wall_time,
        "spec": spec_to_dict(result.spec),
        "error": result.error,
    }
    doc.update(extra)
    return doc


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

_PARAM_PATHS = {
    "sigma.s01": ("sigma", 0), "sigma.s02": ("sigma", 1), "sigma.s12": ("sigma", 2),
    "gamma.g11": ("gamma", 0), "gamma.g12": ("gamma", 1), "gamma.g22": ("gamma", 2),
    "masses.M1": ("masses", 0), "masses.M2": ("masses", 1),
}


def with_parameter(spec: ExperimentSpec, path: str, value) -> ExperimentSpec:
    if path in _PARAM_PATHS:
        attr, idx = _PARAM_PATHS[path]
        vals = list(getattr(spec, attr))
        vals[idx] = float(value)
        return replace(spec, **{attr: tuple(vals)})
    if path.startswith("init."):
        return replace(spec, init=replace(spec.init, **{path[5:]: type(getattr(spec.init, path[5:]))(value)}))
    names = {f.name: f for f in fields(ExperimentSpec)}
    if path not in names or path in ("init", "expect", "name"):
        raise ValueError(f"unknown sweep parameter {path!r}")
    current = getattr(spec, path)
    cast = type(current) if current is not None else float
    return replace(spec, **{path: cast(value)})


def _run_row(args):
    spec, path, value, out = args
    row = {"parameter": path, "value": value}
    try:
        res = run_experiment(spec, out)
        row.update({
            "ok": res.ok, "components": len(res.tags), "tags": ";".join(res.tags),
            "classification": _summary_tag(res.tags), "steps": res.steps,
            "stop_reason": res.reason, "error": res.error or "",
        })
    except Exception as exc:  # recorded per row, the sweep carries on
        row.update({"ok": False, "components": 0, "tags": "", "classification": "",
                    "steps": 0, "stop_reason": "error", "error": f"{type(exc).__name__}: {exc}"})
    return row


def _summary_tag(tags: list[str]) -> str:
    shapes = sorted({t.split("(")[0] for t in tags if not t.startswith("SingleBubble")})
    return "+".join(shapes) if shapes else ("SingleBubble" if tags else "")


def sweep(spec: ExperimentSpec, path: str, values, out: str | os.PathLike | None = None,
          workers: int | None = None) -> list[dict]:
    """Run ``spec`` once per value of the parameter ``path``; one summary row per run."""
    values = list(values)
    if not values:
        return []
    jobs = []
    for i, v in enumerate(values):
        s = with_parameter(spec, path, v)
        s = replace(s, name=f"{spec.name}-{path}={v}")
        run_out = None if out is None else Path(out) / f"run{i:03d}"
        jobs.append((s, path, v, run_out))
    if workers is None:
        workers = int(os.environ.get("TD_THREADS", "1") or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            rows = list(ex.map(_run_row, jobs))
    else:
        rows = [_run_row(j) for j in jobs]
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        tio.write_rows_csv(Path(out) / "sweep.csv", rows)
    return rows
