"""Problem instances: service-area grid, donor layouts, demand, and file I/O.

A :class:`Scenario` is an immutable-by-convention description of one
deployment problem: where fiber-connected donors sit, which grid points
may host relay nodes, which cells must be covered, and the radio/policy
parameters the constraint checks use.

Node id convention (relied on by the action protocol): candidates are
numbered 1..N in grid order, donors N+1..N+D. Action 0 is reserved for
the "stop" action, so a candidate id doubles as its action id.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .propagation import RadioParams

FORMAT_VERSION = 1

LAYOUTS = ("pentagon", "five_dice", "vertical", "single")

Position = tuple[float, float]


class ScenarioError(Exception):
    """Base class for scenario construction and I/O failures."""


class ScenarioFormatError(ScenarioError):
    """Malformed or wrong-version scenario file."""


class ScenarioValidationError(ScenarioError):
    """Structurally valid file whose values break an invariant."""


@dataclass(eq=False)
class Scenario:
    """One deployment problem instance. Treat as immutable after build."""

    area_m: tuple[float, float]
    grid_spacing_m: float
    donors: list[tuple[int, Position]]
    candidates: list[tuple[int, Position]]
    coverage_cells: list[tuple[int, Position]]
    demand_mbps: dict[int, float]
    donor_fiber_mbps: float
    radio: RadioParams
    coverage_target: float = 0.98
    resilience_degree: int = 2
    backup_fraction: float = 0.2
    overhead_factor: float = 1.2
    backhaul_degree_cap: int = 8
    layout: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    # -- convenience views ------------------------------------------------

    @property
    def donor_ids(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.donors)

    @property
    def candidate_ids(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.candidates)

    @property
    def node_ids(self) -> frozenset[int]:
        return self.donor_ids | self.candidate_ids

    def positions(self) -> dict[int, Position]:
        """Position of every donor and candidate, keyed by node id."""
        pos = {i: p for i, p in self.candidates}
        pos.update({i: p for i, p in self.donors})
        return pos

    def demand_of(self, node_id: int) -> float:
        return self.demand_mbps.get(node_id, 0.0)

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        w, h = self.area_m
        if w <= 0 or h <= 0:
            raise ScenarioValidationError("area dimensions must be positive")
        if self.grid_spacing_m <= 0:
            raise ScenarioValidationError("grid_spacing_m must be positive")
        if not self.donors:
            raise ScenarioValidationError("scenario needs at least one donor")
        if self.donor_ids & self.candidate_ids:
            raise ScenarioValidationError("donor and candidate ids must be disjoint")
        n = len(self.candidates)
        if sorted(i for i, _ in self.candidates) != list(range(1, n + 1)):
            raise ScenarioValidationError("candidate ids must be exactly 1..N")
        for name, nodes in (("donor", self.donors), ("candidate", self.candidates)):
            for node_id, (x, y) in nodes:
                if not (0 <= x <= w and 0 <= y <= h):
                    raise ScenarioValidationError(
                        f"{name} {node_id} position ({x}, {y}) outside area bounds"
                    )
        cell_ids = [i for i, _ in self.coverage_cells]
        if len(set(cell_ids)) != len(cell_ids):
            raise ScenarioValidationError("coverage cell ids must be unique")
        if not 0 <= self.coverage_target <= 1:
            raise ScenarioValidationError("coverage_target must be in [0, 1]")
        if self.resilience_degree < 1:
            raise ScenarioValidationError("resilience_degree must be >= 1")
        if not 0 <= self.backup_fraction < 1:
            raise ScenarioValidationError("backup_fraction must be in [0, 1)")
        if self.overhead_factor <= 1:
            raise ScenarioValidationError("overhead_factor must be > 1")
        if self.backhaul_degree_cap < 1:
            raise ScenarioValidationError("backhaul_degree_cap must be >= 1")
        if self.donor_fiber_mbps <= 0:
            raise ScenarioValidationError("donor_fiber_mbps must be positive")
        missing = self.node_ids - set(self.demand_mbps)
        if missing:
            raise ScenarioValidationError(f"missing demand for nodes {sorted(missing)}")
        try:
            self.radio.validate()
        except ValueError as exc:
            raise ScenarioValidationError(f"radio: {exc}") from exc


# -- construction -----------------------------------------------------------


def _layout_positions(layout: str, area: tuple[float, float]) -> list[Position]:
    """Nominal (pre-snap) donor coordinates for each named layout."""
    w, h = area
    if layout == "five_dice":
        return [
            (0.25 * w, 0.25 * h),
            (0.75 * w, 0.25 * h),
            (0.50 * w, 0.50 * h),
            (0.25 * w, 0.75 * h),
            (0.75 * w, 0.75 * h),
        ]
    if layout == "vertical":
        return [(0.5 * w, f * h) for f in (0.1, 0.3, 0.5, 0.7, 0.9)]
    if layout == "pentagon":
        cx, cy, r = 0.5 * w, 0.5 * h, 0.3 * min(w, h)
        out = []
        for k in range(5):
            theta = math.radians(90.0 + 72.0 * k)
            out.append((cx + r * math.cos(theta), cy + r * math.sin(theta)))
        return out
    if layout == "single":
        return [(0.5 * w, 0.5 * h)]
    raise ScenarioError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


def grid_coverage_cells(
    area_m: tuple[float, float], spacing_m: float
) -> list[tuple[int, Position]]:
    """One cell per spacing-sized tile, evaluated at the tile center."""
    nx = round(area_m[0] / spacing_m)
    ny = round(area_m[1] / spacing_m)
    cells = []
    for j in range(ny):
        for i in range(nx):
            cells.append((j * nx + i, ((i + 0.5) * spacing_m, (j + 0.5) * spacing_m)))
    return cells


def build_grid_scenario(
    layout: str,
    area_m: tuple[float, float] = (1000.0, 1000.0),
    grid_spacing_m: float = 50.0,
    *,
    radio: RadioParams | None = None,
    demand_mbps: float = 100.0,
    donor_fiber_mbps: float = 10_000.0,
    coverage_target: float = 0.98,
    resilience_degree: int = 2,
    backup_fraction: float = 0.2,
    overhead_factor: float = 1.2,
    backhaul_degree_cap: int = 8,
) -> Scenario:
    """Build a grid scenario with donors placed per the named layout.

    Grid points sit at multiples of the spacing starting from the area
    origin; donors snap to the nearest grid point and replace it (no
    co-located candidate). Deterministic: identical inputs give a
    byte-identical serialized scenario.
    """
    w, h = area_m
    nx, ny = w / grid_spacing_m, h / grid_spacing_m
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise ScenarioError("grid spacing must divide both area dimensions")
    nx, ny = round(nx), round(ny)

    grid_points: list[Position] = []
    for j in range(ny):
        for i in range(nx):
            grid_points.append((i * grid_spacing_m, j * grid_spacing_m))

    def snap_index(pos: Position) -> int:
        i = min(nx - 1, max(0, math.floor(pos[0] / grid_spacing_m + 0.5)))
        j = min(ny - 1, max(0, math.floor(pos[1] / grid_spacing_m + 0.5)))
        return j * nx + i

    donor_indices: list[int] = []
    for nominal in _layout_positions(layout, area_m):
        idx = snap_index(nominal)
        if idx in donor_indices:
            raise ScenarioError(f"layout {layout!r} snaps two donors onto one grid point")
        donor_indices.append(idx)

    taken = set(donor_indices)
    candidates = []
    next_id = 1
    for g, pos in enumerate(grid_points):
        if g not in taken:
            candidates.append((next_id, pos))
            next_id += 1
    donors = []
    for k, g in enumerate(donor_indices):
        donors.append((next_id + k, grid_points[g]))

    node_ids = [i for i, _ in candidates] + [i for i, _ in donors]
    return Scenario(
        area_m=(float(w), float(h)),
        grid_spacing_m=float(grid_spacing_m),
        donors=donors,
        candidates=candidates,
        coverage_cells=grid_coverage_cells(area_m, grid_spacing_m),
        demand_mbps={i: float(demand_mbps) for i in node_ids},
        donor_fiber_mbps=float(donor_fiber_mbps),
        radio=radio if radio is not None else RadioParams(),
        coverage_target=coverage_target,
        resilience_degree=resilience_degree,
        backup_fraction=backup_fraction,
        overhead_factor=overhead_factor,
        backhaul_degree_cap=backhaul_degree_cap,
        layout=layout,
    )


# -- serialization -----------------------------------------------------------


def scenario_to_json(scenario: Scenario) -> str:
    """Canonical JSON form: fixed key order, two-space indent."""
    doc = {
        "format_version": FORMAT_VERSION,
        "layout": scenario.layout,
        "area_m": [scenario.area_m[0], scenario.area_m[1]],
        "grid_spacing_m": scenario.grid_spacing_m,
        "donors": [[i, x, y] for i, (x, y) in scenario.donors],
        "candidates": [[i, x, y] for i, (x, y) in scenario.candidates],
        "coverage_cells": [[i, x, y] for i, (x, y) in scenario.coverage_cells],
        "demand_mbps": {str(i): scenario.demand_mbps[i] for i in sorted(scenario.demand_mbps)},
        "donor_fiber_mbps": scenario.donor_fiber_mbps,
        "radio": {
            "tx_power_dbm": scenario.radio.tx_power_dbm,
            "backhaul_gain_tx_dbi": scenario.radio.backhaul_gain_tx_dbi,
            "backhaul_gain_rx_dbi": scenario.radio.backhaul_gain_rx_dbi,
            "access_gain_dbi": scenario.radio.access_gain_dbi,
            "hpbw_deg": scenario.radio.hpbw_deg,
            "frequency_ghz": scenario.radio.frequency_ghz,
            "bandwidth_mhz": scenario.radio.bandwidth_mhz,
            "noise_figure_db": scenario.radio.noise_figure_db,
            "snr_threshold_db": scenario.radio.snr_threshold_db,
            "atm_db_per_km": scenario.radio.atm_db_per_km,
            "rain_db_per_km": scenario.radio.rain_db_per_km,
        },
        "policy": {
            "coverage_target": scenario.coverage_target,
            "resilience_degree": scenario.resilience_degree,
            "backup_fraction": scenario.backup_fraction,
            "overhead_factor": scenario.overhead_factor,
        },
        "backhaul_degree_cap": scenario.backhaul_degree_cap,
    }
    return json.dumps(doc, indent=2) + "\n"


def scenario_fingerprint(scenario: Scenario) -> str:
    """sha256 of the canonical serialization; ties deployments to scenarios."""
    return hashlib.sha256(scenario_to_json(scenario).encode()).hexdigest()


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(scenario_to_json(scenario))


def _require(doc: dict, key: str, kind: type, where: str = "scenario"):
    if key not in doc:
        raise ScenarioFormatError(f"{where} file missing field {key!r}")
    value = doc[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ScenarioFormatError(f"{where} field {key!r} has wrong type")
    return value


def _parse_nodes(raw: list, key: str) -> list[tuple[int, Position]]:
    out = []
    for entry in raw:
        if not (isinstance(entry, list) and len(entry) == 3):
            raise ScenarioFormatError(f"field {key!r} entries must be [id, x, y]")
        i, x, y = entry
        out.append((int(i), (float(x), float(y))))
    return out


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file; errors name the offending field."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario file must be a JSON object")
    version = _require(doc, "format_version", int)
    if version != FORMAT_VERSION:
        raise ScenarioFormatError(
            f"unsupported format_version {version} (expected {FORMAT_VERSION})"
        )

    radio_doc = _require(doc, "radio", dict)
    radio_kwargs = {}
    for fname in (
        "tx_power_dbm",
        "backhaul_gain_tx_dbi",
        "backhaul_gain_rx_dbi",
        "access_gain_dbi",
        "hpbw_deg",
        "frequency_ghz",
        "bandwidth_mhz",
        "noise_figure_db",
        "snr_threshold_db",
        "atm_db_per_km",
        "rain_db_per_km",
    ):
        radio_kwargs[fname] = _require(radio_doc, fname, float, where="radio")
    policy = _require(doc, "policy", dict)

    area = _require(doc, "area_m", list)
    if len(area) != 2:
        raise ScenarioFormatError("field 'area_m' must be [width, height]")

    demand_raw = _require(doc, "demand_mbps", dict)
    try:
        demand = {int(k): float(v) for k, v in demand_raw.items()}
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"field 'demand_mbps' malformed: {exc}") from exc

    return Scenario(
        area_m=(float(area[0]), float(area[1])),
        grid_spacing_m=_require(doc, "grid_spacing_m", float),
        donors=_parse_nodes(_require(doc, "donors", list), "donors"),
        candidates=_parse_nodes(_require(doc, "candidates", list), "candidates"),
        coverage_cells=_parse_nodes(_require(doc, "coverage_cells", list), "coverage_cells"),
        demand_mbps=demand,
        donor_fiber_mbps=_require(doc, "donor_fiber_mbps", float),
        radio=RadioParams(**radio_kwargs),
        coverage_target=_require(policy, "coverage_target", float, where="policy"),
        resilience_degree=_require(policy, "resilience_degree", int, where="policy"),
        backup_fraction=_require(policy, "backup_fraction", float, where="policy"),
        overhead_factor=_require(policy, "overhead_factor", float, where="policy"),
        backhaul_degree_cap=_require(doc, "backhaul_degree_cap", int),
        layout=doc.get("layout"),
    )
