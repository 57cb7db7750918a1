"""Flat ``section.key = value`` run configuration.

Example::

    # Neumann disk with a ball-shaped void
    geometry.cross_section = disk
    geometry.radius = 0.5
    geometry.void = ball
    geometry.void_radius = 1.0
    geometry.center = 0, 0, 0.5
    geometry.bc = neumann
    numeric.eps = 0.1

Blank lines and ``#`` comments are ignored.  Unknown keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigParse, VoidGapError
from .geometry import (CellGeometry, CrossSection, VoidShape, make_cell, normalize_bc,
                       read_triangle_soup, rescale_period)


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA: dict[str, tuple] = {
    "geometry.cross_section": (str, "disk"),
    "geometry.radius": (float, 0.5),
    "geometry.width": (float, 1.0),
    "geometry.height": (float, 1.0),
    "geometry.vertices": (_floats, ()),
    "geometry.void": (str, "ball"),
    "geometry.void_radius": (float, 1.0),
    "geometry.void_axes": (_floats, (1.0, 1.0, 1.0)),
    "geometry.void_half_edges": (_floats, (1.0, 1.0, 1.0)),
    "geometry.void_mesh": (str, ""),
    "geometry.void_rotation": (_floats, ()),
    "geometry.center": (_floats, (0.0, 0.0, 0.5)),
    "geometry.bc": (str, "neumann"),
    "geometry.period": (float, 1.0),
    "numeric.mode_count": (int, 6),
    "numeric.mode_h": (float, 0.02),
    "numeric.modes_method": (str, "numeric"),
    "numeric.extrapolate": (_bool, True),
    "numeric.mesh_level": (int, 3),
    "numeric.vmass_method": (str, "bem"),
    "numeric.eps": (float, 0.1),
    "numeric.eps_list": (_floats, (0.05, 0.075, 0.1, 0.15)),
    "numeric.cell_h": (float, 1.0 / 32.0),
    "numeric.eta_points": (int, 32),
    "numeric.eta_grid": (_floats, ()),
    "numeric.bands": (int, 4),
    "numeric.eigen_resolution": (float, 1e-6),
    "numeric.c0": (float, math.nan),
    "numeric.psi_max": (float, 2.0),
    "numeric.psi_points": (int, 41),
    "numeric.locus_grid": (int, 41),
    "run.verify": (_bool, False),
    "run.threads": (int, 1),
    "output.dir": (str, "voidgap_out"),
    "output.plots": (_bool, True),
}


@dataclass
class RunConfig:
    """Parsed configuration: a mapping of every schema key to its typed value,
    plus the set of keys explicitly given in the source text."""

    values: dict
    given: frozenset = field(default_factory=frozenset)
    source: str = ""

    def __getitem__(self, key: str):
        return self.values[key]

    def with_overrides(self, **pairs) -> "RunConfig":
        vals = dict(self.values)
        given = set(self.given)
        for dotted, value in pairs.items():
            key = dotted.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigParse(f"unknown configuration key {key!r}")
            vals[key] = value
            given.add(key)
        return RunConfig(vals, frozenset(given), self.source)

    def to_text(self) -> str:
        """Canonical dump of every key (defaults included), one per line."""
        lines = []
        for key in SCHEMA:
            v = self.values[key]
            if isinstance(v, tuple):
                text = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            lines.append(f"{key} = {text}")
        return "\n".join(lines)

    # ---- derived objects
    def cross_section(self) -> CrossSection:
        kind = self["geometry.cross_section"].lower()
        try:
            if kind == "disk":
                cs = CrossSection.disk(self["geometry.radius"])
            elif kind == "rectangle":
                cs = CrossSection.rectangle(self["geometry.width"], self["geometry.height"])
            elif kind == "polygon":
                v = np.asarray(self["geometry.vertices"], dtype=float)
                if v.size % 2:
                    raise ConfigParse("geometry.vertices needs an even number of coordinates")
                cs = CrossSection.polygon(v.reshape(-1, 2))
            else:
                raise ConfigParse(f"unknown cross-section kind {kind!r}")
        except ConfigParse:
            raise
        except VoidGapError as exc:
            raise ConfigParse(f"invalid cross-section: {exc}") from exc
        period = self["geometry.period"]
        if period != 1.0:
            cs = rescale_period(cs, period)
        return cs

    def void(self) -> VoidShape:
        kind = self["geometry.void"].lower()
        if kind == "ball":
            void = VoidShape.ball(self["geometry.void_radius"])
        elif kind == "ellipsoid":
            void = VoidShape.ellipsoid(*self._triple("geometry.void_axes"))
        elif kind == "cuboid":
            void = VoidShape.cuboid(*self._triple("geometry.void_half_edges"))
        elif kind == "mesh":
            path = self["geometry.void_mesh"]
            if not path:
                raise ConfigParse("geometry.void = mesh needs geometry.void_mesh")
            base = Path(self.source).parent if self.source else Path(".")
            p = Path(path)
            void = read_triangle_soup(p if p.is_absolute() else base / p)
        else:
            raise ConfigParse(f"unknown void kind {kind!r}")
        rot = self["geometry.void_rotation"]
        if rot:
            if len(rot) != 9:
                raise ConfigParse("geometry.void_rotation needs nine numbers (row-major)")
            void = void.rotated(np.asarray(rot).reshape(3, 3))
        return void

    def _triple(self, key):
        v = self[key]
        if len(v) != 3:
            raise ConfigParse(f"{key} needs three numbers")
        return v

    def center(self) -> tuple:
        c = self["geometry.center"]
        if len(c) != 3:
            raise ConfigParse("geometry.center needs three numbers")
        return c

    def bc(self) -> str:
        try:
            return normalize_bc(self["geometry.bc"])
        except ValueError as exc:
            raise ConfigParse(str(exc)) from exc

    def cell(self, eps: float | None = None) -> CellGeometry:
        return make_cell(self.cross_section(), self.void(), self.center(),
                         self["numeric.eps"] if eps is None else eps, self.bc())

    def eta_grid(self) -> np.ndarray:
        explicit = self["numeric.eta_grid"]
        if "numeric.eta_grid" in self.given:
            if not explicit:
                raise ConfigParse("numeric.eta_grid is empty")
            grid = np.asarray(explicit, dtype=float)
            if np.any(grid < 0) or np.any(grid >= 2 * math.pi):
                raise ConfigParse("numeric.eta_grid values must lie in [0, 2 pi)")
            return grid
        n = self["numeric.eta_points"]
        if n < 1:
            raise ConfigParse("numeric.eta_points must be positive (empty eta grid)")
        return 2 * math.pi * np.arange(n) / n


def parse_config(text: str, source: str = "") -> RunConfig:
    """Parse configuration text; raises :class:`ConfigParse` on any problem."""
    values = {k: default for k, (_, default) in SCHEMA.items()}
    given = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParse(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigParse(f"line {lineno}: unknown configuration key {key!r}")
        if key in given:
            raise ConfigParse(f"line {lineno}: duplicate key {key!r}")
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(value)
        except ValueError as exc:
            raise ConfigParse(f"line {lineno}: bad value for {key}: {exc}") from exc
        given.add(key)
    cfg = RunConfig(values, frozenset(given), source)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def _validate(cfg: RunConfig) -> None:
    if cfg["numeric.mode_count"] < 2:
        raise ConfigParse("numeric.mode_count must be at least 2")
    for key in ("numeric.mode_h", "numeric.cell_h", "numeric.eps", "numeric.eigen_resolution"):
        if not cfg[key] > 0:
            raise ConfigParse(f"{key} must be positive")
    if cfg["numeric.modes_method"] not in ("numeric", "analytic"):
        raise ConfigParse("numeric.modes_method must be 'numeric' or 'analytic'")
    if cfg["numeric.vmass_method"] not in ("bem", "analytic"):
        raise ConfigParse("numeric.vmass_method must be 'bem' or 'analytic'")
    if cfg["run.threads"] < 1:
        raise ConfigParse("run.threads must be at least 1")
    cfg.bc()
    cfg.eta_grid()
