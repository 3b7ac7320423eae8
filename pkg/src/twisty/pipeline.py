"""Experiment configs, named presets and the end-to-end runner.

A run goes synthesize -> embed -> persist -> coords and writes its artifacts
into one directory together with ``manifest.json``.  Every artifact except the
SVG plots is byte-for-byte reproducible from the config.
"""
from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coordinates as co
from . import geometry as geo
from . import observations as ob
from . import persistence as ph
from . import slidingwindow as sw

log = logging.getLogger(__name__)

STAGES = ("synthesize", "embed", "persist", "coords")
SQRT2 = math.sqrt(2.0)
SQRT3_2 = math.sqrt(3.0) / 2.0


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


# --- configuration -------------------------------------------------------------------

@dataclass
class FlowConfig:
    manifold: str = "torus"
    slope: list = field(default_factory=lambda: [SQRT2, 1.0])
    dt: float = 0.05
    n_samples: int = 10000
    p0: list = field(default_factory=lambda: [0.0, 0.0])
    klein_eps: float | None = None


@dataclass
class ObservationConfig:
    kind: str = "distance"
    x_hat: list | None = None
    weights: list = field(default_factory=lambda: [1.0, 1.0])
    support: list | None = None  # Fourier records {n, m, re, im}


@dataclass
class WindowConfig:
    N: int = 29
    tau_steps: int = 5
    stride: int = 1


@dataclass
class PersistenceConfig:
    enabled: bool = True
    maxdim: int = 2
    fields: list = field(default_factory=lambda: [2, 3])
    threshold: float | None = None      # absolute; overrides threshold_factor
    threshold_factor: float = 0.5       # times the enclosing radius of the landmarks
    landmarks: int = 450
    gap_ratio: float = 3.0
    noise_factor: float = 1.5           # noise floor = noise_factor * landmark cover radius


@dataclass
class CoordinatesConfig:
    circular: bool = False
    projective: bool = False
    primes: list = field(default_factory=lambda: list(co.DEFAULT_PRIMES))
    n_circular: int = 2
    projective_classes: int = 1
    projective_dim: int = 2
    cover_slack: float = 1.1
    max_queries: int = 1000


@dataclass
class OutputConfig:
    directory: str = "twisty-out"
    plots: bool = True


@dataclass
class ExperimentConfig:
    preset: str | None = None
    flow: FlowConfig = field(default_factory=FlowConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    persistence: PersistenceConfig = field(default_factory=PersistenceConfig)
    coordinates: CoordinatesConfig = field(default_factory=CoordinatesConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    series_path: str | None = None
    seed: int | None = None

    _SECTIONS = {"flow": FlowConfig, "observation": ObservationConfig, "window": WindowConfig,
                 "persistence": PersistenceConfig, "coordinates": CoordinatesConfig,
                 "outputs": OutputConfig}

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = preset(d["preset"]) if d.get("preset") else cls()
        return base.merged(d)

    def merged(self, d):
        """A copy with the (possibly partial) nested dict ``d`` applied on top."""
        out = copy.deepcopy(self)
        for key, value in d.items():
            if key in self._SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                section = getattr(out, key)
                names = {f.name for f in dataclasses.fields(section)}
                bad = set(value) - names
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
                for k, v in value.items():
                    setattr(section, k, v)
            elif key in ("preset", "series_path", "seed"):
                setattr(out, key, value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        out.validate()
        return out

    def config_hash(self):
        d = self.to_dict()
        d.pop("outputs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def validate(self):
        try:
            if self.series_path is None:
                self.flow_spec()
                self.observation_fn()
            sw.SlidingWindowConfig(self.window.N, self.window.tau_steps, self.window.stride)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.flow.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.persistence.maxdim not in (0, 1, 2):
            raise ConfigError("persistence.maxdim must be 0, 1 or 2")
        for p in self.persistence.fields:
            if not ph.is_prime(p):
                raise ConfigError(f"field characteristic {p} is not prime")
        if not self.persistence.gap_ratio > 1:
            raise ConfigError("gap_ratio must exceed 1")
        if self.persistence.landmarks < 1:
            raise ConfigError("landmark count must be positive")
        for q in self.coordinates.primes:
            if not (ph.is_prime(q) and q > 2):
                raise ConfigError(f"circular coordinates need odd primes, got {q}")
        return self

    def flow_spec(self):
        f = self.flow
        klein = geo.KleinParams(f.klein_eps) if f.klein_eps is not None else None
        return geo.FlowSpec(f.manifold, tuple(f.slope), f.dt, klein)

    def observation_fn(self):
        o = self.observation
        if o.kind == "distance":
            if o.x_hat is None:
                raise ConfigError("distance observation needs x_hat")
            return ob.DistanceTo(self.flow.manifold, tuple(o.x_hat), tuple(o.weights))
        if o.kind == "fourier":
            if not o.support:
                raise ConfigError("fourier observation needs a support")
            G = ob.Fourier(ob.FourierSupport.from_records(o.support))
            if not G.supports(self.flow.manifold):
                raise ConfigError(f"Fourier observation does not descend to {self.flow.manifold}")
            return G
        raise ConfigError(f"unknown observation kind {o.kind!r}")


def _cfg(name, flow, obs, window, pers=None, coords=None):
    cfg = ExperimentConfig(preset=name, flow=FlowConfig(**flow), observation=ObservationConfig(**obs),
                           window=WindowConfig(**window), persistence=PersistenceConfig(**(pers or {})),
                           coordinates=CoordinatesConfig(**(coords or {})),
                           outputs=OutputConfig(directory=f"twisty-out/{name}"))
    return cfg.validate()


def _sphere_flow(manifold):
    # one slow pole-to-pole sweep; the tiny pitch keeps the helix close to the
    # rotation for which an equatorial observation point degenerates
    n, dt = 600000, 0.05
    return dict(manifold=manifold, slope=[1.0, (math.pi - 0.1) / (n * dt)], dt=dt, n_samples=n,
                p0=[0.0, 0.05])


def _presets():
    klein_support = ob.klein_fourier_support().to_records()
    return {
        "torus-dist": lambda: _cfg(
            "torus-dist",
            dict(manifold="torus", slope=[SQRT2, 1.0]),
            dict(kind="distance", x_hat=[6.0, math.pi]),
            dict(N=29, tau_steps=8),
            dict(landmarks=400),
            dict(circular=True)),
        "klein-dist": lambda: _cfg(
            "klein-dist",
            dict(manifold="klein", slope=[1.0, 0.05]),
            dict(kind="distance", x_hat=[4.5, 2.5], weights=[1.0, 0.5]),
            dict(N=29, tau_steps=5),
            coords=dict(projective=True, projective_classes=2)),
        "klein-fail": lambda: _cfg(
            "klein-fail",
            dict(manifold="klein", slope=[1.0, 0.05]),
            dict(kind="distance", x_hat=[math.pi, 0.0], weights=[1.0, 0.5]),
            dict(N=29, tau_steps=5)),
        "sphere-dist": lambda: _cfg(
            "sphere-dist",
            _sphere_flow("sphere"),
            dict(kind="distance", x_hat=[1.0, math.pi / 4]),
            dict(N=29, tau_steps=5, stride=20)),
        "rp2-dist": lambda: _cfg(
            "rp2-dist",
            dict(manifold="rp2", slope=[1.0, 0.0063], p0=[0.0, 0.05]),
            dict(kind="distance", x_hat=[1.0, math.pi / 4]),
            dict(N=29, tau_steps=5),
            coords=dict(projective=True)),
        "genus2-dist": lambda: _cfg(
            "genus2-dist",
            dict(manifold="genus2", slope=[1.0, SQRT3_2], p0=[0.1, 0.05]),
            dict(kind="distance", x_hat=[0.3, 0.2]),
            dict(N=29, tau_steps=3),
            dict(landmarks=600, threshold_factor=0.6, fields=[2])),
        "torus-fourier": lambda: _cfg(
            "torus-fourier",
            dict(manifold="torus", slope=[SQRT2, 1.0]),
            dict(kind="fourier", support=ob.cos_cos_support().to_records()),
            dict(N=10, tau_steps=20),
            coords=dict(circular=True)),
        "klein-fourier": lambda: _cfg(
            "klein-fourier",
            dict(manifold="klein", slope=[1.0, 0.01], n_samples=20000, p0=[0.0, 0.1], klein_eps=0.3),
            dict(kind="fourier", support=klein_support),
            dict(N=29, tau_steps=5),
            coords=dict(projective=True, projective_classes=2)),
    }


PRESET_NAMES = tuple(_presets())


def preset(name):
    table = _presets()
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(table)}")
    return table[name]()


# --- artifact writers ------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_series_csv(path, dt=None):
    """A time series from a CSV with columns (time, value) or (value)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise ConfigError(f"{path}: no samples")
    data = np.array([[float(x) for x in r] for r in rows])
    if data.shape[1] >= 2:
        t = data[:, 0]
        steps = np.diff(t)
        if len(steps) and not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ConfigError(f"{path}: samples are not uniformly spaced")
        return sw.TimeSeries(data[:, 1], float(t[0]), float(steps[0]) if len(steps) else (dt or 1.0))
    return sw.TimeSeries(data[:, 0], 0.0, dt or 1.0)


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


# --- the runner -------------------------------------------------------------------------

@dataclass
class ExperimentBundle:
    directory: Path
    manifest: dict
    config: ExperimentConfig
    series: sw.TimeSeries | None = None
    trajectory: geo.Trajectory | None = None
    cloud: sw.PointCloud | None = None
    landmarks: sw.LandmarkSet | None = None
    persistence: dict = field(default_factory=dict)
    circular: np.ndarray | None = None
    projective: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def significant_counts(result, gap_ratio, floor):
    """Significant classes per dimension, essential classes capped at the threshold."""
    return {f"H{d.dim}": len(ph.significant_classes(d, gap_ratio, cap=result.threshold, floor=floor))
            for d in result.diagrams if d.dim > 0}


def _seed_index(cfg, n):
    seed = cfg.seed
    if seed is None and os.environ.get("TWISTY_SEED"):
        seed = int(os.environ["TWISTY_SEED"])
    if seed is None:
        return 0
    return int(np.random.default_rng(seed).integers(n))


def circular_correlation(a, b):
    """max over orientations of |mean exp(i (a - s b))|; 1 means equal up to offset."""
    return max(abs(np.mean(np.exp(1j * (np.asarray(a) - s * np.asarray(b))))) for s in (1, -1))


def run_experiment(cfg, out_dir=None, stop_after="coords", plots=None):
    """Run the pipeline up to ``stop_after`` and write the bundle.

    Failures are recorded in the manifest (``status: failed`` with the stage)
    before a :class:`PipelineError` is raised.
    """
    if stop_after not in STAGES:
        raise ConfigError(f"unknown stage {stop_after!r}")
    cfg.validate()
    out = Path(out_dir or cfg.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    plots = cfg.outputs.plots if plots is None else plots
    recorded = cfg.to_dict()
    recorded.pop("outputs")  # keeps manifests identical across output directories
    manifest = {"config": recorded, "config_hash": cfg.config_hash(), "status": "ok",
                "stages": {s: "skipped" for s in STAGES}, "artifacts": [], "summary": {}}
    bundle = ExperimentBundle(out, manifest, cfg)
    last = STAGES.index(stop_after)
    stage = STAGES[0]
    try:
        for i, stage in enumerate(STAGES):
            if i > last:
                break
            if stage == "persist" and not cfg.persistence.enabled:
                continue
            if stage == "coords" and not (cfg.coordinates.circular or cfg.coordinates.projective):
                continue
            if stage == "coords" and not cfg.persistence.enabled:
                continue
            _STAGE_FUNCS[stage](bundle)
            manifest["stages"][stage] = "ok"
        if plots:
            from . import plots as plotting
            for name in plotting.write_all(bundle):
                manifest["artifacts"].append(name)
    except Exception as exc:
        manifest["stages"][stage] = "failed"
        manifest["status"] = "failed"
        manifest["failure"] = {"stage": stage, "error": f"{type(exc).__name__}: {exc}"}
        write_json(out / "manifest.json", manifest)
        raise PipelineError(stage, exc) from exc
    manifest["artifacts"] = sorted(set(manifest["artifacts"]))
    write_json(out / "manifest.json", manifest)
    return bundle


def _add(bundle, name):
    bundle.manifest["artifacts"].append(name)
    return bundle.directory / name


def _stage_synthesize(b):
    cfg = b.config
    if cfg.series_path:
        b.series = read_series_csv(cfg.series_path, cfg.flow.dt)
    else:
        flow = cfg.flow_spec()
        b.trajectory = geo.flow_trajectory(flow, geo.ManifoldPoint(flow.manifold, cfg.flow.p0),
                                           cfg.flow.n_samples)
        b.series = ob.observe_trajectory(cfg.observation_fn(), b.trajectory)
    write_csv(_add(b, "series.csv"), ["time", "value"], zip(b.series.times, b.series.values))
    b.manifest["summary"]["n_samples"] = len(b.series)


def _stage_embed(b):
    cfg = b.config
    w = sw.SlidingWindowConfig(cfg.window.N, cfg.window.tau_steps, cfg.window.stride)
    b.cloud = sw.sliding_window(b.series, w)
    k = min(cfg.persistence.landmarks, len(b.cloud))
    b.landmarks = sw.maxmin_landmarks(b.cloud, k, _seed_index(cfg, len(b.cloud)))
    idx = b.landmarks.indices
    header = ["time"] + [f"x{i}" for i in range(b.cloud.dim)]
    write_csv(_add(b, "cloud.csv"), header, np.c_[b.cloud.times[idx], b.cloud.points[idx]])
    kp = min(3, b.cloud.dim)
    _, var = sw.pca_project(b.cloud, kp)
    s = b.manifest["summary"]
    s["n_windows"] = len(b.cloud)
    s["n_landmarks"] = int(k)
    s["cover_radius"] = float(b.landmarks.cover_radius)
    s["pca_variance"] = [float(v) for v in var]


def _landmark_distances(b):
    if "D" not in b.extras:
        b.extras["D"] = ph.pairwise_distances(b.cloud.points[b.landmarks.indices])
    return b.extras["D"]


def _threshold(cfg, D):
    p = cfg.persistence
    return p.threshold if p.threshold is not None else p.threshold_factor * ph.enclosing_radius(D)


def _stage_persist(b):
    cfg = b.config
    D = _landmark_distances(b)
    thr = _threshold(cfg, D)
    floor = cfg.persistence.noise_factor * b.landmarks.cover_radius
    counts = {}
    for p in cfg.persistence.fields:
        r = ph.rips_persistence(D, cfg.persistence.maxdim, p, thr)
        b.persistence[p] = r
        write_json(_add(b, f"persistence_z{p}.json"), ph.diagrams_to_json(r))
        counts[str(p)] = significant_counts(r, cfg.persistence.gap_ratio, floor)
    b.manifest["summary"]["significance"] = {"gap_ratio": cfg.persistence.gap_ratio,
                                             "noise_floor": floor, "threshold": thr}
    b.manifest["summary"]["significant"] = counts


def _top_cocycles(result, k):
    thr = result.threshold
    ranked = sorted(result.cocycles, key=lambda c: (-(min(c.death, thr) - c.birth), c.birth))
    return ranked[:k]


def _queries(b):
    n = len(b.cloud)
    step = max(1, -(-n // b.config.coordinates.max_queries))
    return np.arange(0, n, step)


def _stage_coords(b):
    cfg = b.config
    D = _landmark_distances(b)
    thr = _threshold(cfg, D)
    X = b.cloud.points[b.landmarks.indices]
    q_idx = _queries(b)
    queries = b.cloud.points[q_idx]
    cover_r = float(co.cross_distances(queries, X).min(axis=1).max())
    summary = b.manifest["summary"].setdefault("coordinates", {})
    if cfg.coordinates.circular:
        angles, info = circular_from_landmarks(D, X, queries, cover_r, thr, cfg.coordinates)
        b.circular = angles
        summary["circular"] = info
        header = ["time"] + [f"angle{i}" for i in range(angles.shape[1])]
        write_csv(_add(b, "circular.csv"), header, np.c_[b.cloud.times[q_idx], angles])
        if b.trajectory is not None and b.trajectory.manifold is geo.Manifold.TORUS:
            start = np.round((b.cloud.times[q_idx] - b.trajectory.t0) / b.trajectory.dt).astype(int)
            truth = np.mod(b.trajectory.lift[start], 2 * math.pi)
            summary["circular_correlation"] = [
                [float(circular_correlation(angles[:, i], truth[:, c])) for c in range(2)]
                for i in range(angles.shape[1])]
    if cfg.coordinates.projective:
        if 2 not in b.persistence:
            b.persistence[2] = ph.rips_persistence(D, 1, 2, thr)
        P, info = projective_from_landmarks(b.persistence[2], X, queries, cover_r, cfg.coordinates)
        b.projective = P
        summary["projective"] = info
        header = ["time"] + [f"x{i}" for i in range(P.shape[1])]
        write_csv(_add(b, "projective.csv"), header, np.c_[b.cloud.times[q_idx], P])


_STAGE_FUNCS = {"synthesize": _stage_synthesize, "embed": _stage_embed,
                "persist": _stage_persist, "coords": _stage_coords}


def _valid_until(cocycles, threshold):
    # an essential class is only known to be a cocycle up to the truncation threshold
    return min(min(c.death, threshold) for c in cocycles)


def circular_from_landmarks(D, X, queries, cover_r, thr, ccfg):
    """Circular coordinates of the top classes, retrying primes whose lift fails."""
    errors = []
    for q in ccfg.primes:
        r = ph.rips_persistence(D, 1, q, thr)
        top = _top_cocycles(r, ccfg.n_circular)
        if not top:
            raise co.CoordinateError("no H1 class to build circular coordinates from")
        try:
            alpha = co.choose_alpha(cover_r, max(c.birth for c in top), _valid_until(top, thr),
                                    ccfg.cover_slack)
            cx = co.RipsComplex.build(D, 2 * alpha, is_distance=True)
            hds = [co.harmonic_decompose(co.lift_cocycle(c, cx), cx) for c in top]
        except co.LiftError as exc:
            errors.append(str(exc))
            continue
        hds = co.reduce_circular_basis(hds)
        cover = co.CoordinateCover(X, alpha)
        angles = np.stack([co.circular_coords(queries, cover, hd, cx) for hd in hds], axis=1)
        info = {"prime": q, "alpha": alpha, "classes": [[c.birth, _json_num(c.death)] for c in top],
                "residuals": [hd.residual for hd in hds], "lift_failures": errors}
        return angles, info
    raise co.CoordinateError("integer lift failed for every prime: " + "; ".join(errors))


def projective_from_landmarks(result, X, queries, cover_r, ccfg):
    top = _top_cocycles(result, ccfg.projective_classes)
    if not top:
        raise co.CoordinateError("no Z/2 class to build projective coordinates from")
    alpha = co.choose_alpha(cover_r, max(c.birth for c in top), _valid_until(top, result.threshold),
                            ccfg.cover_slack)
    M = sum(co.z2_cocycle_matrix(c, len(X)) for c in top) % 2
    cover = co.CoordinateCover(X, alpha)
    F = co.projective_coords(queries, cover, M)
    k = min(ccfg.projective_dim, F.shape[1] - 2)
    P, distortion = co.ppca_reduce(F, k) if k >= 0 else (F, [])
    info = {"alpha": alpha, "classes": [[c.birth, _json_num(c.death)] for c in top],
            "ambient_dim": int(F.shape[1] - 1), "distortion_last": distortion[-5:]}
    return P, info


def _json_num(x):
    return None if math.isinf(x) else float(x)


def summary_from_artifacts(directory):
    """Recompute the significance summary from the persistence JSON files."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    sig = manifest["summary"]["significance"]
    counts = {}
    for p in manifest["config"]["persistence"]["fields"]:
        data = json.loads((directory / f"persistence_z{p}.json").read_text())
        dgms = ph.diagrams_from_json(data)
        counts[str(p)] = {f"H{d.dim}": len(ph.significant_classes(d, sig["gap_ratio"], cap=data["threshold"],
                                                                  floor=sig["noise_floor"]))
                          for d in dgms if d.dim > 0}
    return counts
