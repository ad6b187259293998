"""Configuration documents for the experiment runner.

The configuration is a TOML document with the sections below; every key is
optional unless marked required, and applied defaults are echoed back into
the result envelope.

[geometry]   kind = "interval" | "rectangle"; x_lo, x_hi, gamma;
             y_lo, y_hi (rectangle only)
[coefficients] mu, p, m1, m2, a1, a2   (constants; crowding values hold
             outside the refuges and drop to zero on them)
[refuges]    regions = [ { subdomain = 1, box = [0.2, 0.3] }, ... ]
[mesh]       n_per_side, ny (rectangle only)
[solver]     tol, max_iters
[command]    name = "Eigen" | "LambdaStar" | "LambdaInfinity" | "Solve" |
             "Branch" | "AlphaSweep" | "Blowup" | "LargeSolution" |
             "Validate";
             lambda (Solve/LargeSolution), lambda_grid (Branch/Blowup),
             alpha_list (AlphaSweep/Eigen alpha), ramp (LargeSolution)
[output]     dir, formats (subset of ["csv", "json"])
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import InvariantError, RefugeTouchesBoundary, SchemaError
from .mesh import Geometry, RefugeRegion
from .problem import ProblemSpec

COMMANDS = ("Eigen", "LambdaStar", "LambdaInfinity", "Solve", "Branch",
            "AlphaSweep", "Blowup", "LargeSolution", "Validate")

_ALLOWED = {
    "geometry": {"kind", "x_lo", "x_hi", "gamma", "y_lo", "y_hi"},
    "coefficients": {"mu", "p", "m1", "m2", "a1", "a2"},
    "refuges": {"regions"},
    "mesh": {"n_per_side", "ny"},
    "solver": {"tol", "max_iters"},
    "command": {"name", "lambda", "lambda_grid", "alpha_list", "ramp",
                "alpha", "mu_list"},
    "output": {"dir", "formats"},
}


@dataclass
class RunConfig:
    """Validated run description with all defaults applied."""

    spec: ProblemSpec
    command: str
    n_per_side: int
    ny: Optional[int]
    tol: float
    max_iters: int
    sweep: Dict[str, object]
    output_dir: str
    formats: Tuple[str, ...]
    echo: Dict[str, object] = field(default_factory=dict)

    @property
    def content_hash(self) -> str:
        blob = json.dumps(self.echo, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _check_keys(data: dict) -> None:
    for section, body in data.items():
        if section not in _ALLOWED:
            raise SchemaError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise SchemaError(f"section [{section}] must hold key = value "
                              "entries")
        for key in body:
            if key not in _ALLOWED[section]:
                raise SchemaError(f"unknown key {section}.{key}")


def _number(data, section, key, default=None, required=False):
    body = data.get(section, {})
    if key not in body:
        if required:
            raise SchemaError(f"missing required key {section}.{key}")
        return default
    val = body[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SchemaError(f"{section}.{key} must be a number, "
                          f"got {val!r}")
    return float(val)


def _build_geometry(data) -> Geometry:
    body = data.get("geometry", {})
    kind = body.get("kind", "interval")
    if kind not in ("interval", "rectangle"):
        raise SchemaError(f"geometry.kind must be 'interval' or "
                          f"'rectangle', got {kind!r}")
    x_lo = _number(data, "geometry", "x_lo", 0.0)
    x_hi = _number(data, "geometry", "x_hi", 1.0)
    gamma = _number(data, "geometry", "gamma", 0.5 * (x_lo + x_hi))
    if kind == "interval":
        return Geometry("interval", (x_lo, x_hi), gamma)
    y_lo = _number(data, "geometry", "y_lo", 0.0)
    y_hi = _number(data, "geometry", "y_hi", 1.0)
    return Geometry("rectangle", (x_lo, x_hi, y_lo, y_hi), gamma)


def _build_refuges(data, geometry: Geometry) -> Tuple[RefugeRegion, ...]:
    body = data.get("refuges", {})
    regions_raw = body.get("regions", [])
    if not isinstance(regions_raw, list):
        raise SchemaError("refuges.regions must be an array of tables")
    regions: List[RefugeRegion] = []
    for item in regions_raw:
        if not isinstance(item, dict) or \
                set(item) - {"subdomain", "box"}:
            raise SchemaError(
                "each refuge needs exactly {subdomain, box}")
        try:
            region = RefugeRegion(int(item["subdomain"]),
                                  tuple(float(b) for b in item["box"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed refuge entry {item!r}") from exc
        lo = geometry.bounds[0] if region.subdomain == 1 \
            else geometry.interface_pos
        hi = geometry.interface_pos if region.subdomain == 1 \
            else geometry.bounds[1]
        if not (lo < region.box[0] and region.box[1] < hi):
            raise RefugeTouchesBoundary(
                f"refuge x-range {region.box[:2]} not strictly inside "
                f"subdomain {region.subdomain} = ({lo}, {hi})")
        if geometry.dim == 2:
            if not (geometry.bounds[2] < region.box[2] and
                    region.box[3] < geometry.bounds[3]):
                raise RefugeTouchesBoundary(
                    f"refuge y-range {region.box[2:]} not strictly inside "
                    f"({geometry.bounds[2]}, {geometry.bounds[3]})")
        regions.append(region)
    return tuple(regions)


def _float_list(data, section, key):
    body = data.get(section, {})
    if key not in body:
        return None
    val = body[key]
    if not isinstance(val, list) or \
            any(isinstance(v, bool) or not isinstance(v, (int, float))
                for v in val):
        raise SchemaError(f"{section}.{key} must be an array of numbers")
    return [float(v) for v in val]


def config_from_dict(data: dict) -> RunConfig:
    _check_keys(data)
    geometry = _build_geometry(data)
    refuges = _build_refuges(data, geometry)
    mu = _number(data, "coefficients", "mu", 1.0)
    p = _number(data, "coefficients", "p", 2.0)
    if not p > 1:
        raise InvariantError(f"p must exceed 1, got {p}")
    if mu < 0:
        raise InvariantError(f"mu must be non-negative, got {mu}")
    spec = ProblemSpec(
        geometry=geometry, mu=mu, p=p,
        m1=_number(data, "coefficients", "m1", 1.0),
        m2=_number(data, "coefficients", "m2", 1.0),
        a1=_number(data, "coefficients", "a1", 1.0),
        a2=_number(data, "coefficients", "a2", 1.0),
        refuges=refuges,
    )

    n = int(_number(data, "mesh", "n_per_side", 256))
    ny = data.get("mesh", {}).get("ny")
    ny = int(ny) if ny is not None else \
        (n if geometry.dim == 2 else None)
    tol = _number(data, "solver", "tol", 1e-10)
    if tol <= 0:
        raise InvariantError(f"solver.tol must be positive, got {tol}")
    max_iters = int(_number(data, "solver", "max_iters", 200000))

    command = data.get("command", {}).get("name", "Validate")
    if command not in COMMANDS:
        raise SchemaError(f"command.name must be one of {COMMANDS}, "
                          f"got {command!r}")
    sweep = {
        "lambda": _number(data, "command", "lambda"),
        "lambda_grid": _float_list(data, "command", "lambda_grid"),
        "alpha_list": _float_list(data, "command", "alpha_list"),
        "ramp": _float_list(data, "command", "ramp"),
        "alpha": _number(data, "command", "alpha", 0.0),
        "mu_list": _float_list(data, "command", "mu_list"),
    }

    out = data.get("output", {})
    formats = tuple(out.get("formats", ["csv", "json"]))
    if set(formats) - {"csv", "json"}:
        raise SchemaError(f"output.formats must be a subset of "
                          f"['csv', 'json'], got {list(formats)}")

    # The echo is schema-shaped, so parse(emit(echo)) round-trips.
    geo_echo = {"kind": geometry.kind, "x_lo": geometry.bounds[0],
                "x_hi": geometry.bounds[1], "gamma": geometry.interface_pos}
    if geometry.dim == 2:
        geo_echo.update(y_lo=geometry.bounds[2], y_hi=geometry.bounds[3])
    command_echo = {"name": command}
    for key, val in sweep.items():
        if val is not None and not (key == "alpha" and val == 0.0):
            command_echo["lambda" if key == "lambda" else key] = val
    mesh_echo = {"n_per_side": n}
    if ny is not None:
        mesh_echo["ny"] = ny
    echo = {
        "geometry": geo_echo,
        "coefficients": {"mu": spec.mu, "p": spec.p,
                         "m1": float(spec.m1), "m2": float(spec.m2),
                         "a1": float(spec.a1), "a2": float(spec.a2)},
        "refuges": {"regions": [{"subdomain": r.subdomain,
                                 "box": list(r.box)} for r in refuges]},
        "mesh": mesh_echo,
        "solver": {"tol": tol, "max_iters": max_iters},
        "command": command_echo,
        "output": {"dir": out.get("dir", "out"),
                   "formats": list(formats)},
    }
    return RunConfig(
        spec=spec, command=command, n_per_side=n, ny=ny, tol=tol,
        max_iters=max_iters, sweep=sweep,
        output_dir=out.get("dir", "out"), formats=formats, echo=echo,
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML configuration document."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"malformed TOML: {exc}") from exc
    return config_from_dict(data)
