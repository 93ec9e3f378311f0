"""Declarative scenario configuration.

A scenario is a YAML document whose nested sections mirror
:class:`ScenarioConfig`.  Unknown keys are errors, so a typo can never
silently change an acceptance run.  ``parse(serialize(cfg)) == cfg``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..geometry import CoatingSpec, DomainError

EQUATIONS = ("helmholtz", "maxwell-ball", "maxwell-cylinder")
VARIANTS = {
    "helmholtz": ("virtual-surface", "physical-lining"),
    "maxwell-ball": ("virtual-surface",),
    "maxwell-cylinder": ("shs", "pec"),
}
SOURCE_KINDS = ("zero", "dipole", "random-dipoles", "non-radiating-bump", "shell-current")
EXPECTATIONS = ("exists", "no-finite-energy")
DIAGNOSTICS = ("degeneracy", "energy", "hidden-neumann", "scaling", "identities")
CONVERGENCE_PARAMETERS = ("seed_radius", "integrator_tol", "l_max")


class ConfigError(ValueError):
    """Structured validation failure; ``errors`` lists ``(field path, message)``."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass(frozen=True)
class ModeGrid:
    """Spherical ``l = 0..l_max`` (``l_min`` allows skipping), or cylindrical ``n = 0..n_max`` x ``beta``."""

    l_max: int | None = None
    l_min: int = 0
    n_max: int | None = None
    beta_fracs: tuple[float, ...] = (0.0,)  # beta = frac * k


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "zero"
    location: tuple[float, ...] = (0.0, 0.0, 0.0)
    moment: tuple[float, ...] = (0.0, 0.0, 1.0)
    count: int = 1
    seed: int = 0
    radius: float = 0.5
    width: float = 0.3
    l: int = 1
    m: int = 0
    pol: str = "TM"
    expect: str | None = None


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    seed_radius: float = 1e-8
    verdict: float = 1e-8  # single-coating verdict threshold
    acceptance: float = 1e-6  # max table discrepancy (or |reflection| for SHS)
    variant_agreement: float = 1e-10  # entrywise agreement between variant tables
    control_min: float | None = None  # PEC control must exceed this somewhere


@dataclass(frozen=True)
class ConvergenceConfig:
    parameter: str = "seed_radius"
    values: tuple[float, ...] = (1e-6, 1e-7, 1e-8)


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None  # None: $CLOAKVERIFY_OUT or ./cloakverify-out
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    spec: CoatingSpec
    equation: str
    mode_grid: ModeGrid
    k_grid: tuple[float, ...]
    variants: tuple[str, ...] = ("virtual-surface",)
    sources: tuple[SourceConfig, ...] = ()
    tolerances: Tolerances = Tolerances()
    diagnostics: tuple[str, ...] = ()
    convergence: ConvergenceConfig | None = None
    output: OutputConfig = OutputConfig()
    description: str = ""

    def __post_init__(self):
        errors = validate(self)
        if errors:
            raise ConfigError(errors)

    def hash(self) -> str:
        """Stable digest of the serialized config (provenance)."""
        text = json.dumps(to_dict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ScenarioConfig":
        data = to_dict(self)
        for key, val in changes.items():
            section, _, sub = key.partition(".")
            if sub:
                data[section] = dict(data.get(section) or {}, **{sub: val})
            else:
                data[section] = val
        return from_dict(data)


# --- validation -------------------------------------------------------------------


def validate(cfg: ScenarioConfig) -> list[tuple[str, str]]:
    err = []
    if cfg.equation not in EQUATIONS:
        err.append(("equation", f"must be one of {EQUATIONS}"))
        return err
    if not cfg.k_grid:
        err.append(("k_grid", "must be non-empty"))
    if any(not (k > 0) for k in cfg.k_grid):
        err.append(("k_grid", "wavenumbers must be positive"))
    g = cfg.mode_grid
    if cfg.equation == "maxwell-cylinder":
        if not cfg.spec.is_cylinder:
            err.append(("spec.kind", "maxwell-cylinder needs a cylinder coating"))
        if g.n_max is None or g.n_max < 0:
            err.append(("mode_grid.n_max", "required, >= 0"))
        if not g.beta_fracs:
            err.append(("mode_grid.beta_fracs", "must be non-empty"))
    else:
        if cfg.spec.is_cylinder:
            err.append(("spec.kind", f"{cfg.equation} needs a ball coating"))
        if g.l_max is None or g.l_max < g.l_min or g.l_min < 0:
            err.append(("mode_grid.l_max", "required, with 0 <= l_min <= l_max"))
        if cfg.equation == "maxwell-ball" and g.l_min < 1:
            err.append(("mode_grid.l_min", "Maxwell multipoles start at l = 1"))
    for v in cfg.variants:
        if v not in VARIANTS[cfg.equation]:
            err.append(("variants", f"{v!r} not valid for {cfg.equation}; choose from {VARIANTS[cfg.equation]}"))
    if not cfg.variants:
        err.append(("variants", "must be non-empty"))
    t = cfg.tolerances
    for name in ("rtol", "seed_radius", "verdict", "acceptance", "variant_agreement"):
        if not getattr(t, name) > 0:
            err.append((f"tolerances.{name}", "must be positive"))
    if t.control_min is not None and not t.control_min > 0:
        err.append(("tolerances.control_min", "must be positive"))
    for i, s in enumerate(cfg.sources):
        p = f"sources[{i}]"
        if s.kind not in SOURCE_KINDS:
            err.append((f"{p}.kind", f"must be one of {SOURCE_KINDS}"))
        if s.expect is not None and s.expect not in EXPECTATIONS:
            err.append((f"{p}.expect", f"must be one of {EXPECTATIONS}"))
        if len(s.location) != 3 or len(s.moment) != 3:
            err.append((p, "location and moment need three components"))
        # gap invariant: supports stay strictly inside Sigma
        a = cfg.spec.cloak_radius
        reach = {"dipole": float(sum(c * c for c in s.location) ** 0.5),
                 "random-dipoles": s.radius,
                 "non-radiating-bump": float(sum(c * c for c in s.location) ** 0.5) + s.width,
                 "shell-current": s.radius}.get(s.kind, 0.0)
        if reach >= a:
            err.append((p, f"support reaches {reach:g} >= cloak radius {a:g}"))
        if s.kind == "random-dipoles" and s.count < 1:
            err.append((f"{p}.count", "must be >= 1"))
    if cfg.sources and not (cfg.equation == "maxwell-ball" and cfg.spec.kind == "single-ball"):
        err.append(("sources", "internal currents are evaluated for single-ball Maxwell scenarios only"))
    for d in cfg.diagnostics:
        if d not in DIAGNOSTICS:
            err.append(("diagnostics", f"{d!r} not one of {DIAGNOSTICS}"))
    if cfg.convergence is not None:
        c = cfg.convergence
        if c.parameter not in CONVERGENCE_PARAMETERS:
            err.append(("convergence.parameter", f"must be one of {CONVERGENCE_PARAMETERS}"))
        if len(c.values) < 3:
            err.append(("convergence.values", "need at least three sweep values"))
    for f in cfg.output.formats:
        if f not in ("csv", "json"):
            err.append(("output.formats", f"unknown format {f!r}"))
    return err


# --- (de)serialization ------------------------------------------------------------

_SECTIONS = {
    "mode_grid": ModeGrid,
    "tolerances": Tolerances,
    "convergence": ConvergenceConfig,
    "output": OutputConfig,
}


def _strict(cls, data, path: str, errors: list):
    if not isinstance(data, dict):
        errors.append((path, "expected a mapping"))
        return None
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(names))
    for key in unknown:
        errors.append((f"{path}.{key}" if path else key, "unknown key"))
    kw = {}
    for key, val in data.items():
        if key not in names:
            continue
        if isinstance(val, list):
            val = tuple(tuple(v) if isinstance(v, list) else v for v in val)
        kw[key] = val
    try:
        return cls(**kw)
    except (TypeError, DomainError) as exc:
        errors.append((path or cls.__name__, str(exc)))
        return None


def from_dict(data: dict) -> ScenarioConfig:
    errors: list[tuple[str, str]] = []
    if not isinstance(data, dict):
        raise ConfigError([("", "config must be a mapping")])
    top = {f.name for f in fields(ScenarioConfig)}
    for key in sorted(set(data) - top):
        errors.append((key, "unknown key"))
    for key in ("name", "spec", "equation", "mode_grid", "k_grid"):
        if key not in data:
            errors.append((key, "required"))
    kw = {k: v for k, v in data.items() if k in top}
    if "spec" in kw:
        kw["spec"] = _strict(CoatingSpec, kw["spec"], "spec", errors)
    for key, cls in _SECTIONS.items():
        if kw.get(key) is not None:
            kw[key] = _strict(cls, kw[key], key, errors)
    if "sources" in kw:
        raw = kw["sources"] or []
        if not isinstance(raw, (list, tuple)):
            errors.append(("sources", "expected a list"))
            raw = []
        kw["sources"] = tuple(_strict(SourceConfig, s, f"sources[{i}]", errors) for i, s in enumerate(raw))
    for key in ("k_grid", "variants", "diagnostics"):
        if key in kw:
            val = kw[key]
            if not isinstance(val, (list, tuple)):
                errors.append((key, "expected a list"))
            else:
                kw[key] = tuple(float(v) if key == "k_grid" else v for v in val)
    if errors:
        raise ConfigError(errors)
    try:
        return ScenarioConfig(**kw)
    except TypeError as exc:
        raise ConfigError([("", str(exc))]) from None


def to_dict(cfg: ScenarioConfig) -> dict:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        return v

    out = {}
    for f in fields(ScenarioConfig):
        val = getattr(cfg, f.name)
        if f.name == "spec":
            val = {"kind": val.kind, "outer_radius": val.outer_radius, "cloak_radius": val.cloak_radius,
                   "stretch": val.stretch, "interior": val.interior}
        elif f.name == "sources":
            val = [asdict(s) for s in val]
        elif val is not None and hasattr(val, "__dataclass_fields__"):
            val = asdict(val)
        out[f.name] = plain(val)
    return out


def parse(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("", f"invalid YAML: {exc}")]) from None
    return from_dict(data)


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from None
    return parse(text)


def bundled_scenarios() -> dict[str, Path]:
    """Canonical configs shipped with the package, keyed by file stem."""
    root = Path(__file__).resolve().parent.parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.yaml"))}


def resolve_config(name_or_path: str) -> ScenarioConfig:
    """Load a config from a path, or by the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.exists():
        return load_config(p)
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return load_config(bundled[name_or_path])
    raise ConfigError([("", f"no config file or bundled scenario named {name_or_path!r}")])
