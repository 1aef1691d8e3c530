"""JSON model configuration: parsing, validation and construction of solvers.

A config is a JSON object with ``"schema": 1``, a ``model_kind`` and a
section named after the kind.  See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import rates as R
from .discrete import DiscreteModel, ReserveTable, solve_reserves_discrete
from .duration import (
    DisabilityReserveSurface,
    RehabRates,
    default_rates,
    disability_model,
    solve_disability,
    validate_rates,
)
from .measure import SpouseModel, solve_spouse_reserves, spouse_insurance_model
from .model import (
    ACTIVE,
    Discount,
    InsuranceModel,
    Label,
    Lump,
    PaymentSpec,
    State,
    discrete,
    disabled,
    parse_state,
)

SCHEMA_VERSION = 1
MODEL_KINDS = ("discrete", "disability_rehab", "random_spouse")


class ConfigError(ValueError):
    """The config is malformed or fails validation."""

    def __init__(self, message: str, diagnostics: Optional[list["Diagnostic"]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


def _number(value: Any, name: str) -> float:
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{name}: cannot parse {value!r} as a number") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    return float(value)


@dataclass
class ModelConfig:
    """A parsed config document.  ``section`` is the kind-specific sub-object."""

    model_kind: str
    t_start: float
    horizon_end: float
    grid_step: float
    r: Any
    section: dict
    simulation: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        kind = doc.get("model_kind")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}, got {kind!r}")
        for key in ("t_start", "horizon_end", "grid_step"):
            if key not in doc:
                raise ConfigError(f"missing required field {key!r}")
        return cls(
            model_kind=kind,
            t_start=_number(doc["t_start"], "t_start"),
            horizon_end=_number(doc["horizon_end"], "horizon_end"),
            grid_step=_number(doc["grid_step"], "grid_step"),
            r=doc.get("r", 0.0),
            section=doc.get(kind, {}) or {},
            simulation=doc.get("simulation", {}) or {},
            schema=doc.get("schema", SCHEMA_VERSION),
            raw=doc,
        )

    def sha256(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    def discount(self) -> Discount:
        if isinstance(self.r, dict):
            pts = self.r.get("table")
            if not pts:
                raise ConfigError("r must be a number or {\"table\": [[t, r], ...]}")
            return Discount(knots=tuple((float(t), float(v)) for t, v in sorted(pts)))
        return Discount(_number(self.r, "r"))


def load_config(path: str | Path) -> ModelConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ModelConfig.from_dict(doc)


def _scaled(fn, scale: float):
    return fn if scale == 1.0 else R.Scaled(fn, scale)


# ----------------------------------------------------------------------------
# model builders


@dataclass
class DisabilitySetup:
    cfg: ModelConfig
    rates: RehabRates
    r: float
    annuity_rate: float
    slice_onsets: tuple[float, ...]

    def solve(self, extra_onsets=()) -> DisabilityReserveSurface:
        return solve_disability(self.rates, self.r, self.cfg.horizon_end, self.cfg.t_start,
                                self.cfg.grid_step, self.annuity_rate,
                                slice_onsets=tuple(self.slice_onsets) + tuple(extra_onsets))

    def insurance_model(self) -> InsuranceModel:
        return disability_model(self.rates, self.r, self.cfg.horizon_end, self.cfg.t_start, self.annuity_rate)

    def default_states(self) -> list[State]:
        return [ACTIVE, disabled(self.cfg.t_start)]

    def reserve(self, solution: DisabilityReserveSurface, state: State) -> float:
        if state.label is Label.ACTIVE:
            return float(solution.active[0])
        if state.label is Label.DEAD:
            return 0.0
        if state.label is Label.DISABLED:
            return solution.disabled_at(solution.onset_index(state.coord), 0)
        raise ConfigError(f"state {state} is not part of the disability model")


def _disability(cfg: ModelConfig, scale: float) -> DisabilitySetup:
    sec = cfg.section
    t0 = _number(sec.get("t0", cfg.t_start), "disability.t0")
    overrides = {k: R.parse_rate(v) for k, v in (sec.get("rates") or {}).items()}
    unknown = set(overrides) - {"mu_star_dagger", "mu_star_diamond", "mu_diamond_star_base", "mu_diamond_dagger"}
    if unknown:
        raise ConfigError(f"unknown disability rate(s): {sorted(unknown)}")
    base = default_rates(t0)
    mode = sec.get("rehabilitation", "onset")
    if mode not in ("onset", "duration_independent", "off"):
        raise ConfigError(f"rehabilitation must be onset, duration_independent or off, got {mode!r}")
    fields = {name: overrides.get(name, getattr(base, name)) for name in
              ("mu_star_dagger", "mu_star_diamond", "mu_diamond_star_base", "mu_diamond_dagger")}
    if mode == "off":
        fields["mu_diamond_star_base"] = R.Constant(0.0)
    fields = {k: _scaled(v, scale) for k, v in fields.items()}
    onset_factor = R.Constant(1.0) if mode == "duration_independent" else None
    rates = RehabRates(t0=t0, onset_factor=onset_factor, **fields)
    disc = cfg.discount()
    if not disc.is_constant:
        raise ConfigError("the disability model needs a constant interest rate")
    return DisabilitySetup(cfg, rates, disc.rate, _number(sec.get("annuity_rate", 1.0), "annuity_rate"),
                           tuple(_number(s, "slice_onsets") for s in sec.get("slice_onsets", ())))


@dataclass
class DiscreteSetup:
    cfg: ModelConfig
    model: DiscreteModel
    boundary: np.ndarray

    def solve(self, extra_onsets=()) -> ReserveTable:
        return solve_reserves_discrete(self.model, self.boundary, self.cfg.t_start, self.cfg.horizon_end,
                                       self.cfg.grid_step)

    def insurance_model(self) -> InsuranceModel:
        return self.model.as_insurance_model(self.cfg.horizon_end)

    def state(self, name: str) -> State:
        return discrete(self.model.state_names().index(name))

    def default_states(self) -> list[State]:
        return [discrete(0)]

    def state_name(self, state: State) -> str:
        return self.model.state_names()[state.index]

    def reserve(self, solution: ReserveTable, state: State) -> float:
        return float(solution.values[state.index, 0])


def _discrete(cfg: ModelConfig, scale: float) -> DiscreteSetup:
    sec = cfg.section
    names = tuple(sec.get("states") or ())
    if not names or len(set(names)) != len(names):
        raise ConfigError("discrete.states must be a non-empty list of unique names")
    idx = {n: i for i, n in enumerate(names)}

    def lookup(name, where):
        if name not in idx:
            raise ConfigError(f"{where}: unknown state {name!r}")
        return idx[name]

    intens = {}
    for item in sec.get("intensities", ()):
        i, j = lookup(item["from"], "intensities"), lookup(item["to"], "intensities")
        if i == j:
            raise ConfigError(f"intensities: self-transition at {item['from']!r}")
        intens[(i, j)] = _scaled(R.parse_rate(item["rate"]), scale)

    sojourn = []
    breaks = set()
    for item in sec.get("sojourn", ()):
        lo = _number(item.get("from", -math.inf), "sojourn.from")
        hi = _number(item.get("until", math.inf), "sojourn.until")
        sojourn.append((lookup(item["state"], "sojourn"), R.parse_rate(item["rate"]), lo, hi))
        breaks.update(b for b in (lo, hi) if math.isfinite(b))
    transfers = {}
    for item in sec.get("transitions", ()):
        key = (lookup(item["from"], "transitions"), lookup(item["to"], "transitions"))
        transfers[key] = R.parse_rate(item["amount"])
    lumps = tuple(
        Lump(_number(item["time"], "lumps.time"),
             (lambda k: (lambda s: s.index == k))(lookup(item["state"], "lumps")),
             _number(item["amount"], "lumps.amount"))
        for item in sec.get("lumps", ())
    )

    def mu(t, i, j):
        fn = intens.get((i, j))
        return float(fn(t)) if fn is not None else 0.0

    def sojourn_rate(t, g):
        return sum(float(fn(t)) for i, fn, lo, hi in sojourn if i == g.index and lo <= t < hi)

    def transition(t, g, h):
        fn = transfers.get((g.index, h.index))
        return float(fn(t)) if fn is not None else 0.0

    pay = PaymentSpec(sojourn_rate, lumps, transition, tuple(sorted(breaks)))
    model = DiscreteModel(len(names), mu, pay, cfg.discount(), names)
    bd = sec.get("boundary", {}) or {}
    boundary = np.zeros(len(names))
    for name, value in bd.items():
        boundary[lookup(name, "boundary")] = _number(value, "boundary")
    return DiscreteSetup(cfg, model, boundary)


@dataclass
class SpouseSetup:
    cfg: ModelConfig
    model: SpouseModel
    r: float

    def solve(self, extra_onsets=()) -> ReserveTable:
        return solve_spouse_reserves(self.model, self.r, self.cfg.t_start, self.cfg.horizon_end, self.cfg.grid_step)

    def insurance_model(self) -> InsuranceModel:
        return spouse_insurance_model(self.model, self.r, self.cfg.t_start, self.cfg.horizon_end)

    def default_states(self) -> list[State]:
        return [ACTIVE]

    def reserve(self, solution: ReserveTable, state: State) -> float:
        if state.label is Label.ACTIVE:
            return float(solution.values[0, 0])
        if state.label is Label.DEAD:
            return 0.0
        d = self.model.differences
        j = int(np.argmin(np.abs(d - state.coord)))
        if abs(d[j] - state.coord) > 1e-9:
            raise ConfigError(f"no spouse node at age difference {state.coord}")
        return float(solution.values[1 + j, 0])


def _spouse(cfg: ModelConfig, scale: float) -> SpouseSetup:
    sec = cfg.section
    phi = sec.get("phi")
    if not phi:
        raise ConfigError("random_spouse.phi must list [age_difference, weight] pairs")
    nodes = tuple((_number(d, "phi"), _number(w, "phi")) for d, w in phi)
    disc = cfg.discount()
    if not disc.is_constant:
        raise ConfigError("the random-spouse model needs a constant interest rate")
    mortality = R.parse_rate(sec.get("mu_star_dagger", {"gompertz_makeham": [0.0004, 0.060, -5.46]}))
    spouse = R.parse_rate(sec.get("spouse_mortality", {"gompertz_makeham": [0.0004, 0.060, -5.46]}))
    model = SpouseModel(
        mu_star_dagger=_scaled(mortality, scale),
        g=R.parse_rate(sec.get("g", 1.0)),
        phi_nodes=nodes,
        spouse_mortality=_scaled(spouse, scale),
        annuity_rate=_number(sec.get("annuity_rate", 1.0), "annuity_rate"),
        age_offset=_number(sec.get("age_offset", 0.0), "age_offset"),
    )
    return SpouseSetup(cfg, model, disc.rate)


_BUILDERS = {"disability_rehab": _disability, "discrete": _discrete, "random_spouse": _spouse}


def build(cfg: ModelConfig, rate_scale: float = 1.0):
    """Solver setup for the config; ``rate_scale`` multiplies every intensity (test hook)."""
    try:
        return _BUILDERS[cfg.model_kind](cfg, rate_scale)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{cfg.model_kind} section: {exc}") from exc


def parse_states(setup, names) -> list[State]:
    out = []
    for name in names:
        try:
            out.append(setup.state(name) if isinstance(setup, DiscreteSetup) else parse_state(name))
        except ValueError:
            raise ConfigError(f"unknown state {name!r}") from None
    return out


# ----------------------------------------------------------------------------
# validation


def validate_model(cfg: ModelConfig, samples: int = 256) -> list[Diagnostic]:
    """Diagnostics for the config; an empty list means it is valid."""
    out: list[Diagnostic] = []
    err = lambda m: out.append(Diagnostic("error", m))  # noqa: E731
    warn = lambda m: out.append(Diagnostic("warning", m))  # noqa: E731
    if cfg.schema != SCHEMA_VERSION:
        err(f"unsupported schema {cfg.schema!r}; expected {SCHEMA_VERSION}")
    span = cfg.horizon_end - cfg.t_start
    if not cfg.grid_step > 0:
        err("grid_step must be positive")
    elif span <= 0:
        err("horizon_end must be after t_start")
    else:
        n = round(span / cfg.grid_step)
        if abs(n * cfg.grid_step - span) > 1e-9 * max(1.0, span):
            err(f"horizon length {span} is not a multiple of grid_step {cfg.grid_step}")
    try:
        disc = cfg.discount()
        if not np.isfinite(disc.short_rate(np.linspace(cfg.t_start, cfg.horizon_end, 8))).all():
            err("interest rate is not finite")
    except (ConfigError, ValueError) as exc:
        err(str(exc))
    if any(d.level == "error" for d in out):
        return out
    try:
        setup = build(cfg)
    except ConfigError as exc:
        err(str(exc))
        return out
    grid = np.linspace(cfg.t_start, cfg.horizon_end, samples)
    if isinstance(setup, DisabilitySetup):
        if setup.rates.t0 < 0:
            err("disability.t0 must be non-negative")
        if setup.annuity_rate < 0:
            err("annuity_rate must be non-negative")
        for level, msg in validate_rates(setup.rates, cfg.t_start, cfg.horizon_end, samples):
            out.append(Diagnostic(level, msg))
        for s in setup.slice_onsets:
            if not cfg.t_start <= s <= cfg.horizon_end:
                err(f"slice onset {s} outside [{cfg.t_start}, {cfg.horizon_end}]")
    elif isinstance(setup, DiscreteSetup):
        m = setup.model
        for i in range(m.n_states):
            for j in range(m.n_states):
                if i == j:
                    continue
                vals = np.array([m.mu(t, i, j) for t in grid])
                if not np.isfinite(vals).all():
                    err(f"intensity {m.names[i]}->{m.names[j]} not finite on the horizon")
                elif vals.min() < 0:
                    warn(f"intensity {m.names[i]}->{m.names[j]} negative from t={grid[np.argmax(vals < 0)]:.4g}")
            rates = np.array([m.payments.sojourn_rate(t, discrete(i)) for t in grid])
            if not np.isfinite(rates).all():
                err(f"sojourn payment rate of {m.names[i]} not finite")
        for lump in m.payments.sojourn_lumps:
            if not math.isfinite(lump.amount):
                err(f"lump at t={lump.time} is not finite")
            if not cfg.t_start <= lump.time <= cfg.horizon_end:
                warn(f"lump at t={lump.time} lies outside the horizon and is ignored")
            elif cfg.grid_step > 0:
                k = round((lump.time - cfg.t_start) / cfg.grid_step)
                if abs(cfg.t_start + k * cfg.grid_step - lump.time) > 1e-9 * max(1.0, lump.time):
                    err(f"lump at t={lump.time} is not on the solver grid")
    elif isinstance(setup, SpouseSetup):
        sm = setup.model
        g = np.asarray(sm.g(grid), dtype=float) * np.ones_like(grid)
        if g.min() < 0 or g.max() > 1:
            err("random_spouse.g must stay within [0, 1]")
        for j, d in enumerate(sm.differences):
            if sm.spouse_age(cfg.t_start, d) < 0:
                err(f"spouse age negative on the horizon for node {j} (d={d})")
        mort = np.asarray(sm.mu_star_dagger(grid), dtype=float)
        if mort.min() < 0:
            warn("insured mortality negative on the horizon")
    return out
