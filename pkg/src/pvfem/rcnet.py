"""
Theoretical R-values, C-values and time constants of a PV module layer stack.

Heat generated in the cells leaves through a front path and a back path,
each a series chain of layers ending in an air film. The two paths are in
parallel. Per-layer values are per unit area of the layer itself; the
equivalent area only enters the mass.

Internally everything is SI: r in K/(W/m^2), c in J/(K m^2), tau in s.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import yaml

AIR_CONDUCTIVITY = 0.023
AIR_DENSITY = 1.23
AIR_SPECIFIC_HEAT = 1000.0

SIDES = ("front", "back", "shared")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    thickness: float        # m
    conductivity: float     # W/(m K)
    density: float          # kg/m^3
    specific_heat: float    # J/(kg K)
    area: float = 1.6       # m^2
    side: str = "front"

    def __post_init__(self):
        if self.thickness < 0:
            raise ValueError(f"{self.name}: thickness must be >= 0")
        for attr in ("conductivity", "density", "specific_heat", "area"):
            if getattr(self, attr) <= 0:
                raise ValueError(f"{self.name}: {attr} must be > 0")
        if self.side not in SIDES:
            raise ValueError(f"{self.name}: side must be one of {SIDES}")


@dataclass(frozen=True)
class LayerStack:
    front_layers: tuple[LayerSpec, ...]
    back_layers: tuple[LayerSpec, ...]
    front_air_film: LayerSpec
    back_air_film: LayerSpec

    def __post_init__(self):
        if not self.front_layers or not self.back_layers:
            raise ValueError("a layer stack needs at least one layer on each side")

    def scaled(self, factor: float) -> "LayerStack":
        """Copy of the stack with every thickness (air films included) scaled."""
        def sc(layer):
            return dataclasses.replace(layer, thickness=layer.thickness * factor)
        return LayerStack(tuple(sc(x) for x in self.front_layers),
                          tuple(sc(x) for x in self.back_layers),
                          sc(self.front_air_film), sc(self.back_air_film))

    def without(self, name_prefix: str) -> "LayerStack":
        """Copy of the stack with matching layers set to zero thickness."""
        def zero(layer):
            if layer.name.startswith(name_prefix):
                return dataclasses.replace(layer, thickness=0.0)
            return layer
        return LayerStack(tuple(zero(x) for x in self.front_layers),
                          tuple(zero(x) for x in self.back_layers),
                          self.front_air_film, self.back_air_film)


class LayerRc(NamedTuple):
    r_eq: float
    c_eq: float
    tau: float
    mass: float


class RcRow(NamedTuple):
    name: str
    r_eq: float
    c_eq: float
    tau: float
    mass: float


@dataclass(frozen=True)
class RcSummary:
    layers: list[RcRow]
    totals: dict[str, RcRow] = field(default_factory=dict)
    include_air: bool = True

    @property
    def tau0(self) -> float:
        return self.totals["total_air" if self.include_air else "total"].tau

    @property
    def r_total(self) -> float:
        return self.totals["total_air" if self.include_air else "total"].r_eq

    @property
    def c_total(self) -> float:
        return self.totals["total"].c_eq


def layer_rc(layer: LayerSpec) -> LayerRc:
    """R-value, C-value, time constant and mass of one layer.

    ``r = L / lambda``, ``c = rho * c_p * L``, ``tau = r * c`` and
    ``m = rho * A * L``.
    """
    r = layer.thickness / layer.conductivity
    c = layer.density * layer.specific_heat * layer.thickness
    return LayerRc(r, c, r * c, layer.density * layer.area * layer.thickness)


def parallel(r_a: float, r_b: float) -> float:
    if r_a + r_b == 0:
        return 0.0
    return r_a * r_b / (r_a + r_b)


def _series(name: str, layers) -> RcRow:
    rcs = [layer_rc(x) for x in layers]
    r = sum(x.r_eq for x in rcs)
    c = sum(x.c_eq for x in rcs)
    return RcRow(name, r, c, r * c, sum(x.mass for x in rcs))


def stack_summary(stack: LayerStack, include_air: bool = True) -> RcSummary:
    """Per-layer values and side/overall totals of a layer stack.

    The overall R-value is the parallel combination of the front and back
    series totals; C-values of both sides add up.
    """
    ordered = [stack.front_air_film, *stack.front_layers, *stack.back_layers, stack.back_air_film]
    rows = [RcRow(x.name, *layer_rc(x)) for x in ordered]

    front = _series("total_front", stack.front_layers)
    back = _series("total_back", stack.back_layers)
    front_air = _series("total_front_air", [*stack.front_layers, stack.front_air_film])
    back_air = _series("total_back_air", [*stack.back_layers, stack.back_air_film])

    module_mass = front.mass + back.mass
    r_tot = parallel(front.r_eq, back.r_eq)
    c_tot = front.c_eq + back.c_eq
    total = RcRow("total", r_tot, c_tot, r_tot * c_tot, module_mass)
    r_air = parallel(front_air.r_eq, back_air.r_eq)
    c_air = front_air.c_eq + back_air.c_eq
    total_air = RcRow("total_air", r_air, c_air, r_air * c_air, front_air.mass + back_air.mass)

    totals = {row.name: row for row in (front, back, front_air, back_air, total, total_air)}
    return RcSummary(rows, totals, include_air)


def air_film_for_target(r_target: float, conductivity: float = AIR_CONDUCTIVITY,
                        name: str = "air_film", side: str = "front",
                        area: float = 1.6) -> LayerSpec:
    """Air layer whose thickness gives the requested R-value (K per W/m^2)."""
    if r_target < 0:
        raise ValueError("r_target must be >= 0")
    return LayerSpec(name, r_target * conductivity, conductivity,
                     AIR_DENSITY, AIR_SPECIFIC_HEAT, area, side)


def u0_equivalent(r_eq: float) -> float:
    """Faiman-style U0 [W/(m^2 K)] with the same zero-wind R-value."""
    return 1.0 / r_eq


# --- config I/O -----------------------------------------------------------

def _layer_from_dict(d: dict, side: str) -> LayerSpec:
    return LayerSpec(
        name=str(d["name"]),
        thickness=float(d["thickness_mm"]) / 1000.0,
        conductivity=float(d["conductivity"]),
        density=float(d["density"]),
        specific_heat=float(d["specific_heat"]),
        area=float(d.get("area", 1.6)),
        side=str(d.get("side", side)),
    )


def stack_from_dict(cfg: dict) -> LayerStack:
    """Build a stack from the ``front``/``back``/``air_film_*`` config mapping.

    Layers flagged ``side: shared`` in either list are placed in both paths.
    """
    if not isinstance(cfg, dict):
        raise ValueError("layer stack config must be a mapping")
    try:
        front_raw = cfg["front"] or []
        back_raw = cfg["back"] or []
        air_front = _layer_from_dict(cfg["air_film_front"], "front")
        air_back = _layer_from_dict(cfg["air_film_back"], "back")
    except KeyError as exc:
        raise ValueError(f"layer stack config lacks key {exc}") from None
    front = [_layer_from_dict(d, "front") for d in front_raw]
    back = [_layer_from_dict(d, "back") for d in back_raw]
    shared = [x for x in front + back if x.side == "shared"]
    front = [x for x in front if x.side != "shared"] + shared
    back = shared + [x for x in back if x.side != "shared"]
    return LayerStack(tuple(front), tuple(back), air_front, air_back)


def load_stack(path) -> LayerStack:
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not cfg:
        raise ValueError(f"{path}: empty layer stack config")
    return stack_from_dict(cfg.get("stack", cfg))


def bundled_stack_path() -> Path:
    return Path(__file__).parent / "data" / "table1_stack.yaml"
