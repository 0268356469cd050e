"""Run configuration and the coupled level-set / Stokes time loop."""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .diagnostics import (
    CenterTracker,
    DiagnosticsRecord,
    DiagnosticsWriter,
    center_of_mass,
    curvature_profile,
    extract_contour,
    hess_u_sup_estimate,
    patch_area,
    regularity_monitors,
)
from .errors import AreaAbortError, BlowUpError, ConfigError, EmptyContourError
from .fields import (
    GridSpec,
    ScalarField,
    _atomic_write_bytes,
    heaviside_indicator,
    make_grid,
    read_snapshot,
    write_snapshot,
)
from .kernels import write_contour_csv
from .levelset import SimState, cfl_timestep, heun_step, realized_cfl
from .stokes import velocity_from_levelset

log = logging.getLogger(__name__)

__all__ = [
    "CircleIC",
    "AnnulusCosineIC",
    "CustomFileIC",
    "SimConfig",
    "parse_config",
    "serialize_config",
    "initial_levelset",
    "RunSummary",
    "run_simulation",
    "resume_simulation",
    "OUTPUT_DIR_ENV",
]

OUTPUT_DIR_ENV = "STOKESPATCH_OUTPUT_DIR"


def torus_distance(grid: GridSpec, center) -> np.ndarray:
    X1, X2 = grid.coords
    d1 = X1 - center[0]
    d2 = X2 - center[1]
    d1 -= np.floor(d1 + 0.5)
    d2 -= np.floor(d2 + 0.5)
    return np.hypot(d1, d2)


@dataclass(frozen=True)
class CircleIC:
    """Signed distance ``radius - |x - center|`` (periodic distance)."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.25

    def levelset(self, grid: GridSpec) -> ScalarField:
        return ScalarField(grid, self.radius - torus_distance(grid, self.center))

    def text(self) -> str:
        return f"circle({self.center[0]!r}, {self.center[1]!r}, {self.radius!r})"


@dataclass(frozen=True)
class AnnulusCosineIC:
    """``cos(2 pi |x - center|)`` with the periodic distance; zero set ``|x - center| = 1/4``."""

    center: tuple[float, float] = (0.5, 0.5)

    def levelset(self, grid: GridSpec) -> ScalarField:
        return ScalarField(grid, np.cos(2 * np.pi * torus_distance(grid, self.center)))

    def text(self) -> str:
        if self.center == (0.5, 0.5):
            return "annulus_cosine"
        return f"annulus_cosine({self.center[0]!r}, {self.center[1]!r})"


@dataclass(frozen=True)
class CustomFileIC:
    path: str

    def levelset(self, grid: GridSpec) -> ScalarField:
        phi, _ = read_snapshot(self.path)
        if phi.grid != grid:
            raise ConfigError(f"{self.path}: grid n={phi.grid.n} but config has n={grid.n}")
        return phi

    def text(self) -> str:
        return f"custom_file({self.path})"


InitialCondition = Union[CircleIC, AnnulusCosineIC, CustomFileIC]

_IC_RE = re.compile(r"^(\w+)\s*(?:\((.*)\))?$")


def _parse_ic(text: str, line: int | None) -> InitialCondition:
    m = _IC_RE.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse initial_condition {text!r}", line)
    name, args = m.group(1), m.group(2)
    if name == "custom_file":
        if not args:
            raise ConfigError("custom_file needs a path", line)
        return CustomFileIC(args.strip())
    try:
        nums = [float(a) for a in args.split(",")] if args else []
    except ValueError:
        raise ConfigError(f"non-numeric argument in {text!r}", line) from None
    if name == "annulus_cosine":
        if nums and len(nums) != 2:
            raise ConfigError("annulus_cosine takes (c1, c2)", line)
        return AnnulusCosineIC(tuple(nums)) if nums else AnnulusCosineIC()
    if name == "circle":
        if len(nums) != 3:
            raise ConfigError("circle takes (c1, c2, radius)", line)
        if not nums[2] > 0:
            raise ConfigError("circle radius must be positive", line)
        return CircleIC((nums[0], nums[1]), nums[2])
    raise ConfigError(f"unknown initial condition {name!r}", line)


@dataclass(frozen=True)
class SimConfig:
    n: int
    t_final: float
    cfl: float = 0.5
    snapshot_interval: float | None = None
    epsilon: float = 0.0
    initial_condition: InitialCondition = field(default_factory=AnnulusCosineIC)
    output_dir: str = "output"
    dt_max: float = 1e-2
    area_error_abort: float = 0.01
    seed: int = 0
    holder_mu: float = 0.5
    holder_pairs: int = 2000
    hess_probes: int = 16
    preview: bool = False

    def __post_init__(self):
        if self.snapshot_interval is None:
            object.__setattr__(self, "snapshot_interval", self.t_final / 10)
        self.validate()

    def validate(self, lines: dict | None = None):
        lines = lines or {}

        def check(ok, key, msg):
            if not ok:
                raise ConfigError(f"{key}: {msg}", lines.get(key))

        try:
            make_grid(self.n)
        except ConfigError as exc:
            raise ConfigError(f"n: {exc}", lines.get("n")) from None
        check(self.t_final > 0, "t_final", "must be positive")
        check(0 < self.cfl <= 0.5, "cfl", "must lie in (0, 1/2]")
        check(
            0 < self.snapshot_interval <= self.t_final,
            "snapshot_interval",
            "must lie in (0, t_final]",
        )
        check(self.epsilon >= 0, "epsilon", "must be nonnegative")
        check(self.dt_max > 0, "dt_max", "must be positive")
        check(self.area_error_abort > 0, "area_error_abort", "must be positive")
        check(0 < self.holder_mu < 1, "holder_mu", "must lie in (0, 1)")
        check(self.holder_pairs >= 1, "holder_pairs", "must be at least 1")
        check(self.hess_probes >= 8, "hess_probes", "must be at least 8")

    @property
    def grid(self) -> GridSpec:
        return make_grid(self.n)


_INT_KEYS = {"n", "seed", "holder_pairs", "hess_probes"}
_BOOL_KEYS = {"preview"}
_STR_KEYS = {"output_dir"}
_KEYS = {f.name for f in fields(SimConfig)}


def _parse_bool(value, line):
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", line)


def parse_config(text: str) -> SimConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated config."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            if key in _INT_KEYS:
                parsed = int(value)
            elif key in _BOOL_KEYS:
                parsed = _parse_bool(value, lineno)
            elif key in _STR_KEYS:
                parsed = value
            elif key == "initial_condition":
                parsed = _parse_ic(value, lineno)
            else:
                parsed = float(value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: cannot parse {value!r}", lineno) from None
        values[key] = parsed
        lines[key] = lineno
    for required in ("n", "t_final"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    if values["t_final"] <= 0:
        raise ConfigError("t_final: must be positive", lines["t_final"])
    try:
        return SimConfig(**values)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        if exc.line is None and key in lines:
            raise ConfigError(str(exc), lines[key]) from None
        raise


def serialize_config(cfg: SimConfig) -> str:
    out = []
    for f in fields(SimConfig):
        v = getattr(cfg, f.name)
        if f.name == "initial_condition":
            text = v.text()
        elif isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


def initial_levelset(cfg: SimConfig) -> ScalarField:
    phi = cfg.initial_condition.levelset(cfg.grid)
    if patch_area(phi) == 0 or not np.any(phi.values < 0):
        raise ConfigError("initial level set does not define a nonempty bounded patch")
    return phi


# -- run loop ---------------------------------------------------------------


@dataclass
class RunSummary:
    status: str  # "completed", "area-abort" or "blow-up"
    steps: int
    t_start: float
    t_end: float
    dt_max: float
    epsilon: float
    n: int
    message: str = ""
    abort_time: float | None = None
    max_realized_cfl: float = 0.0
    records: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "records"}
        return d


def snapshot_times(t_start: float, t_final: float, interval: float) -> list[float]:
    k_last = int(math.floor(t_final / interval + 1e-9))
    times = [k * interval for k in range(k_last + 1)]
    if t_final - times[-1] > 1e-9 * max(1.0, t_final):
        times.append(t_final)
    return [t for t in times if t >= t_start - 1e-12 * max(1.0, t_final)]


def _write_pgm(path: Path, phi: ScalarField) -> None:
    theta = heaviside_indicator(phi).values
    # rows top to bottom are decreasing x2, columns increasing x1
    img = np.round(255 * theta.T[::-1]).astype(np.uint8)
    n = phi.grid.n
    _atomic_write_bytes(path, f"P5\n{n} {n}\n255\n".encode() + img.tobytes())


class _VelocityCache:
    """The coupled velocity map with a one-entry cache keyed on field identity."""

    def __init__(self, epsilon: float):
        self.epsilon = epsilon
        self._key = None
        self._u = None

    def __call__(self, phi: ScalarField):
        if self._key is not phi:
            self._u = velocity_from_levelset(phi, self.epsilon)
            self._key = phi
        return self._u


def diagnostics_record(phi, u, t, cfl_seen, tracker, cfg, index) -> DiagnosticsRecord:
    q = tracker.update(center_of_mass(phi))
    try:
        _, kmax = curvature_profile(extract_contour(phi))
    except (EmptyContourError, ValueError):
        kmax = math.nan
    inf_band, holder, delta = regularity_monitors(
        phi, cfg.holder_mu, cfg.holder_pairs, seed=cfg.seed + index
    )
    hess = hess_u_sup_estimate(phi, probes=cfg.hess_probes)
    speed = float(np.max(np.abs(u.values[0]) + np.abs(u.values[1])))
    return DiagnosticsRecord(
        t=t,
        area=patch_area(phi),
        q1=float(q[0]),
        q2=float(q[1]),
        max_speed=speed,
        realized_cfl=cfl_seen,
        max_curvature=kmax,
        gradphi_inf=inf_band,
        gradphi_holder=holder,
        delta=delta,
        hess_sup=hess,
    )


def run_simulation(
    cfg: SimConfig,
    initial: SimState | None = None,
    output_dir: str | os.PathLike | None = None,
    write_files: bool = True,
    reference_area: float | None = None,
    on_snapshot: Callable[[SimState, DiagnosticsRecord], None] | None = None,
) -> RunSummary:
    """Integrate the coupled system from ``initial`` (default: the configured IC) to ``t_final``.

    At every snapshot time the level set, contour and diagnostics row are
    written to ``output_dir`` and ``on_snapshot(state, record)`` is called.
    """
    out = Path(output_dir or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)
    resuming = initial is not None
    if initial is None:
        initial = SimState(initial_levelset(cfg))
    elif patch_area(initial.phi) == 0:
        raise ConfigError("snapshot level set has an empty patch")
    grid = initial.phi.grid
    if grid.n != cfg.n:
        raise ConfigError(f"snapshot grid n={grid.n} does not match config n={cfg.n}")

    velocity = _VelocityCache(cfg.epsilon)
    area0 = reference_area if reference_area is not None else patch_area(initial.phi)
    tracker = CenterTracker()
    targets = snapshot_times(initial.t, cfg.t_final, cfg.snapshot_interval)
    summary = RunSummary(
        status="completed",
        steps=0,
        t_start=initial.t,
        t_end=initial.t,
        dt_max=cfg.dt_max,
        epsilon=cfg.epsilon,
        n=cfg.n,
    )
    writer = None
    if write_files:
        out.mkdir(parents=True, exist_ok=True)
        writer = DiagnosticsWriter(out / "diagnostics.csv", append=resuming)

    def emit(state: SimState, cfl_seen: float):
        index = int(round(state.t / cfg.snapshot_interval))
        u = velocity(state.phi)
        rec = diagnostics_record(state.phi, u, state.t, cfl_seen, tracker, cfg, index)
        summary.records.append(rec)
        summary.snapshot_times.append(state.t)
        if on_snapshot is not None:
            on_snapshot(state, rec)
        if writer is not None:
            write_snapshot(out / f"snap_{index:05d}.pstk", state.phi, state.t)
            try:
                write_contour_csv(
                    out / f"contour_{index:05d}.csv",
                    extract_contour(state.phi),
                    state.t,
                    {"q1": rec.q1, "q2": rec.q2},
                )
            except EmptyContourError:
                log.warning("no contour at t=%g", state.t)
            writer.write(rec)
            if cfg.preview:
                _write_pgm(out / f"preview_{index:05d}.pgm", state.phi)

    state = initial
    cfl_seen = 0.0
    try:
        if targets and abs(targets[0] - state.t) <= 1e-12 * max(1.0, cfg.t_final):
            if not resuming:
                emit(state, cfl_seen)
            targets = targets[1:]
        for target in targets:
            while state.t < target:
                u = velocity(state.phi)
                dt = cfl_timestep(u, cfg.cfl, cfg.dt_max)
                landing = target - state.t <= dt * (1 + 1e-12)
                if landing:
                    dt = target - state.t
                cfl_seen = max(cfl_seen, realized_cfl(u, dt))
                summary.max_realized_cfl = max(summary.max_realized_cfl, cfl_seen)
                state = heun_step(state, dt, velocity)
                if landing:
                    state = replace(state, t=target)
                drift = abs(patch_area(state.phi) / area0 - 1.0)
                if drift > cfg.area_error_abort:
                    raise AreaAbortError(state.t, drift, cfg.area_error_abort)
            emit(state, cfl_seen)
            cfl_seen = 0.0
    except AreaAbortError as exc:
        summary.status = "area-abort"
        summary.abort_time = exc.t
        summary.message = str(exc)
    except BlowUpError as exc:
        summary.status = "blow-up"
        summary.abort_time = exc.t
        summary.message = str(exc)
    finally:
        if writer is not None:
            writer.close()
    summary.steps = state.step_count
    summary.t_end = state.t
    if write_files:
        _atomic_write_bytes(out / "summary.json", json.dumps(summary.to_json(), indent=2).encode())
    return summary


def resume_simulation(snapshot_path, cfg: SimConfig, output_dir=None, **kwargs) -> RunSummary:
    """Continue a run from a ``PSTK0001`` snapshot; the system is autonomous in ``phi``."""
    phi, t = read_snapshot(snapshot_path)
    return run_simulation(cfg, SimState(phi, t, 0), output_dir=output_dir, **kwargs)
