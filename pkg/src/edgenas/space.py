"""Configuration grid for the VGG-style CNN family.

Nine grid parameters describe one network: the block count, one kernel
count per block (k3/k4 exist only for deep enough networks), two hidden
fully-connected widths and their dropout probabilities. Dropout
probabilities are stored as integer hundredths so grid membership is
exact; they render as 0.10..0.30.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

PARAM_ORDER = ("block", "k1", "k2", "k3", "k4", "fc1", "do1", "fc2", "do2")
DROPOUT_PARAMS = ("do1", "do2")

# Published grid: Block 2-4, K1 6-16/2, K2 24-32/4, K3 36-48/4, K4 52-64/4,
# FC1 100-120/5, FC2 80-100/5, DO1/DO2 0.10-0.30/0.01 (as hundredths).
TABLE1_GRID = {
    "block": (2, 4, 1),
    "k1": (6, 16, 2),
    "k2": (24, 32, 4),
    "k3": (36, 48, 4),
    "k4": (52, 64, 4),
    "fc1": (100, 120, 5),
    "do1": (10, 30, 1),
    "fc2": (80, 100, 5),
    "do2": (10, 30, 1),
}


class SpaceValidationError(ValueError):
    """Malformed grid definition or configuration file."""


def _display(name: str) -> str:
    return name.upper() if name != "block" else "Block"


def _render_value(name: str, value: int) -> str:
    if name in DROPOUT_PARAMS:
        return f"{value / 100:.2f}"
    return str(value)


@dataclass(frozen=True)
class ParamSpec:
    """One grid dimension: values lo, lo+step, ..., hi inclusive.

    ``active_when`` is the minimum block count for which the parameter
    exists (None means always active).
    """

    name: str
    lo: int
    hi: int
    step: int
    active_when: int | None = None

    def __post_init__(self):
        if self.step <= 0:
            raise SpaceValidationError(f"non-positive step: {_display(self.name)}")
        if self.lo > self.hi:
            raise SpaceValidationError(f"empty range: {_display(self.name)}")
        if (self.hi - self.lo) % self.step != 0:
            raise SpaceValidationError(f"grid misaligned: {_display(self.name)}")

    @property
    def grid(self) -> tuple[int, ...]:
        return tuple(range(self.lo, self.hi + 1, self.step))

    @property
    def size(self) -> int:
        return (self.hi - self.lo) // self.step + 1

    def contains(self, value: int) -> bool:
        return self.lo <= value <= self.hi and (value - self.lo) % self.step == 0

    def position(self, value: int) -> int:
        if not self.contains(value):
            raise SpaceValidationError(
                f"{_display(self.name)}={_render_value(self.name, value)} "
                f"off-grid ({self.range_text()})"
            )
        return (value - self.lo) // self.step

    def range_text(self) -> str:
        lo = _render_value(self.name, self.lo)
        hi = _render_value(self.name, self.hi)
        step = _render_value(self.name, self.step) if self.name in DROPOUT_PARAMS else self.step
        return f"{lo}..{hi} step {step}"


@dataclass(frozen=True)
class Configuration:
    """One grid point. Inactive kernel fields are None, never zero."""

    block: int
    k1: int
    k2: int
    fc1: int
    do1: int  # hundredths
    fc2: int
    do2: int  # hundredths
    k3: int | None = None
    k4: int | None = None
    output_classes: int = 7

    @property
    def do1_prob(self) -> float:
        return self.do1 / 100.0

    @property
    def do2_prob(self) -> float:
        return self.do2 / 100.0

    @property
    def kernels(self) -> tuple[int, ...]:
        ks = [self.k1, self.k2, self.k3, self.k4]
        return tuple(k for k in ks[: self.block] if k is not None)

    def get(self, name: str) -> int | None:
        return getattr(self, name)

    def present_params(self) -> tuple[str, ...]:
        return tuple(n for n in PARAM_ORDER if getattr(self, n) is not None)

    def to_json_dict(self) -> dict:
        out: dict = {}
        for name in PARAM_ORDER:
            value = getattr(self, name)
            if value is None:
                continue
            key = f"{name}_hundredths" if name in DROPOUT_PARAMS else name
            out[key] = value
        out["output_classes"] = self.output_classes
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Configuration":
        kwargs: dict = {}
        for name in PARAM_ORDER:
            key = f"{name}_hundredths" if name in DROPOUT_PARAMS else name
            if key in data:
                kwargs[name] = int(data[key])
        kwargs["output_classes"] = int(data.get("output_classes", 7))
        missing = [n for n in ("block", "k1", "k2", "fc1", "do1", "fc2", "do2") if n not in kwargs]
        if missing:
            raise SpaceValidationError(f"configuration missing fields: {', '.join(missing)}")
        return cls(**kwargs)

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SearchSpace:
    """The full grid plus the block-conditional activation rules."""

    params: dict[str, ParamSpec]
    output_classes: int = 7

    def spec_for(self, name: str) -> ParamSpec:
        return self.params[name]

    def active_params(self, block: int) -> tuple[str, ...]:
        names = []
        for name in PARAM_ORDER:
            spec = self.params[name]
            if spec.active_when is not None and block < spec.active_when:
                continue
            names.append(name)
        return tuple(names)

    def to_json_dict(self) -> dict:
        out: dict = {}
        for name in PARAM_ORDER:
            spec = self.params[name]
            if name in DROPOUT_PARAMS:
                out[name] = {
                    "lo_hundredths": spec.lo,
                    "hi_hundredths": spec.hi,
                    "step_hundredths": spec.step,
                }
            else:
                out[name] = {"lo": spec.lo, "hi": spec.hi, "step": spec.step}
        out["output_classes"] = self.output_classes
        return out


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    reasons: tuple[str, ...] = ()


def build_space(spec_table: list[ParamSpec], output_classes: int = 7) -> SearchSpace:
    """Assemble a SearchSpace, attaching k3/k4 activation rules.

    Raises SpaceValidationError when a parameter is missing, duplicated,
    or (via ParamSpec) has a misaligned grid.
    """
    by_name: dict[str, ParamSpec] = {}
    for spec in spec_table:
        if spec.name not in PARAM_ORDER:
            raise SpaceValidationError(f"unknown parameter: {spec.name}")
        if spec.name in by_name:
            raise SpaceValidationError(f"duplicate parameter: {_display(spec.name)}")
        by_name[spec.name] = spec
    missing = [n for n in PARAM_ORDER if n not in by_name]
    if missing:
        raise SpaceValidationError(f"missing parameters: {', '.join(missing)}")
    for name, min_block in (("k3", 3), ("k4", 4)):
        spec = by_name[name]
        if spec.active_when != min_block:
            by_name[name] = replace(spec, active_when=min_block)
    return SearchSpace(params=by_name, output_classes=output_classes)


def table1_space(output_classes: int = 7) -> SearchSpace:
    """The published grid, as shipped in data/table1_space.json."""
    specs = [ParamSpec(name, lo, hi, step) for name, (lo, hi, step) in TABLE1_GRID.items()]
    return build_space(specs, output_classes=output_classes)


def cardinality(space: SearchSpace) -> int:
    """Number of distinct valid configurations (conditional k3/k4 counting)."""
    total = 0
    for block in space.spec_for("block").grid:
        n = 1
        for name in space.active_params(block):
            if name == "block":
                continue
            n *= space.spec_for(name).size
        total += n
    return total


def unconditional_cardinality(space: SearchSpace) -> int:
    """Count as if k3/k4 existed for every depth (for the discrepancy report)."""
    n = 1
    for name in PARAM_ORDER:
        n *= space.spec_for(name).size
    return n


def validate(config: Configuration, space: SearchSpace) -> ValidationResult:
    """Grid membership plus conditional presence/absence checks.

    Returns structured reasons instead of raising; callers that need an
    exception wrap this themselves.
    """
    reasons: list[str] = []
    block_spec = space.spec_for("block")
    if not block_spec.contains(config.block):
        reasons.append(
            f"Block={config.block} off-grid ({block_spec.range_text()})"
        )
        return ValidationResult(False, tuple(reasons))
    active = set(space.active_params(config.block))
    for name in PARAM_ORDER:
        value = getattr(config, name)
        if name in active:
            if value is None:
                reasons.append(f"{_display(name)} missing for block={config.block}")
                continue
            spec = space.spec_for(name)
            if not spec.contains(value):
                reasons.append(
                    f"{_display(name)}={_render_value(name, value)} "
                    f"off-grid ({spec.range_text()})"
                )
        elif value is not None:
            reasons.append(f"{_display(name)} inactive for block={config.block}")
    if config.output_classes != space.output_classes:
        reasons.append(
            f"output_classes={config.output_classes} (space fixes {space.output_classes})"
        )
    return ValidationResult(not reasons, tuple(reasons))


def _block_sizes(space: SearchSpace) -> list[tuple[int, list[str], int]]:
    """Per block value: (block, non-block active params, sub-space size)."""
    out = []
    for block in space.spec_for("block").grid:
        names = [n for n in space.active_params(block) if n != "block"]
        n = 1
        for name in names:
            n *= space.spec_for(name).size
        out.append((block, names, n))
    return out


def config_from_index(space: SearchSpace, index: int) -> Configuration:
    """Canonical bijection: blocks ascending, then row-major over the
    active parameter grids in PARAM_ORDER (last parameter fastest)."""
    if index < 0 or index >= cardinality(space):
        raise IndexError(f"index {index} out of range [0, {cardinality(space)})")
    rest = index
    for block, names, size in _block_sizes(space):
        if rest >= size:
            rest -= size
            continue
        values: dict[str, int] = {"block": block}
        for name in reversed(names):
            grid = space.spec_for(name).grid
            rest, pos = divmod(rest, len(grid))
            values[name] = grid[pos]
        return Configuration(output_classes=space.output_classes, **values)
    raise AssertionError("unreachable: index inside cardinality")


def index_of(space: SearchSpace, config: Configuration) -> int:
    """Inverse of config_from_index; raises on invalid configurations."""
    verdict = validate(config, space)
    if not verdict.valid:
        raise SpaceValidationError("; ".join(verdict.reasons))
    offset = 0
    for block, names, size in _block_sizes(space):
        if block == config.block:
            index = 0
            for name in names:
                spec = space.spec_for(name)
                index = index * spec.size + spec.position(getattr(config, name))
            return offset + index
        offset += size
    raise SpaceValidationError(f"Block={config.block} off-grid")


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Uniform draw over the whole space via a uniform index."""
    return config_from_index(space, int(rng.integers(cardinality(space))))


def space_to_json(space: SearchSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space.to_json_dict(), indent=2) + "\n")


def space_from_json(path: str | Path) -> SearchSpace:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpaceValidationError(f"unparseable space file {path}: {exc}") from exc
    return space_from_dict(data)


def space_from_dict(data: dict) -> SearchSpace:
    specs = []
    for name in PARAM_ORDER:
        if name not in data:
            raise SpaceValidationError(f"missing parameters: {name}")
        entry = data[name]
        if name in DROPOUT_PARAMS:
            spec = ParamSpec(
                name,
                int(entry["lo_hundredths"]),
                int(entry["hi_hundredths"]),
                int(entry["step_hundredths"]),
            )
        else:
            spec = ParamSpec(name, int(entry["lo"]), int(entry["hi"]), int(entry["step"]))
        specs.append(spec)
    return build_space(specs, output_classes=int(data.get("output_classes", 7)))


def config_from_json(path: str | Path) -> Configuration:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpaceValidationError(f"unparseable configuration file {path}: {exc}") from exc
    return Configuration.from_json_dict(data)
