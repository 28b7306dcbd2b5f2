"""Thermophilic (Berkeley-style) composting of the bin's biodegradable fraction.

Lumped single-compartment model integrated with fixed-step RK4:

* organic matter decays first order, ``dOM/dt = -k f_T(T) f_M(m) f_A OM``;
* carbon leaves with the decayed matter at the current C/OM ratio, nitrogen at
  ``nitrogen_volatilization`` times the current N/OM ratio;
* heat released per kg decayed warms the pile against a linear loss to ambient;
* water evaporates in proportion to the pile's excess temperature and is topped
  back up to the wetting target at every turning.

Ash is inert. Dry mass is organic matter plus ash; everything that decays is
booked in ``degraded_mass_kg`` so the dry mass balance closes exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

PRESET_NAMES = ("paper-default",)

REPORT_ROWS = ("Organic matter", "Organic Carbon Content", "Nitrogen Content", "Ash Content")
REPORT_FOOTER = (
    "Organic matter, carbon and nitrogen are % of current dry solids. Ash is % of the "
    "OM-free reference basis (dry solids net of cumulative mineralised mass), so organic "
    "matter and ash need not sum to 100."
)
SERIES_COLUMNS = ("day", "temperature_C", "moisture", "om_pct", "c_pct", "n_pct", "ash_pct", "cn_ratio")


@dataclass(frozen=True)
class Feedstock:
    mass_kg: float  # wet mass
    organic_matter_frac: float
    carbon_frac: float
    nitrogen_frac: float
    ash_frac: float
    moisture_frac: float
    activator_strength: float | None = None

    def __post_init__(self):
        if not self.mass_kg > 0:
            raise ValueError("feedstock mass must be positive")
        for name in ("organic_matter_frac", "carbon_frac", "nitrogen_frac", "ash_frac", "moisture_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if abs(self.organic_matter_frac + self.ash_frac - 1.0) > 1e-9:
            raise ValueError("organic matter and ash fractions must sum to 1 (dry basis)")
        if self.carbon_frac > self.organic_matter_frac or self.nitrogen_frac > self.organic_matter_frac:
            raise ValueError("carbon and nitrogen fractions cannot exceed organic matter")
        if self.activator_strength is not None and self.activator_strength < 0:
            raise ValueError("activator strength must be >= 0")

    @property
    def dry_mass_kg(self) -> float:
        return self.mass_kg * (1.0 - self.moisture_frac)

    @property
    def cn_ratio(self) -> float:
        return self.carbon_frac / self.nitrogen_frac if self.nitrogen_frac > 0 else math.inf


@dataclass(frozen=True)
class CompartmentSpec:
    width_m: float = 1.0
    height_m: float = 1.5
    volume_m3: float = 1.5
    ambient_C: float = 30.0

    def __post_init__(self):
        if not self.volume_m3 > 0:
            raise ValueError("compartment volume must be positive")


@dataclass(frozen=True)
class CompostConfig:
    rate_per_day: float = 0.01933
    activator_gain: float = 0.5
    t_min_C: float = 5.0
    t_opt_C: float = 60.0
    t_max_C: float = 75.0
    moisture_min: float = 0.2
    moisture_opt: float = 0.55
    moisture_max: float = 0.9
    heat_yield_kj_per_kg: float = 14500.0
    heat_loss_kj_per_day_C: float = 2000.0
    solids_heat_capacity_kj_per_kg_C: float = 1.5
    water_heat_capacity_kj_per_kg_C: float = 4.18
    evaporation_kg_per_day_C: float = 0.3
    nitrogen_volatilization: float = 0.2162
    wetting_target: float = 0.55
    bulk_density_kg_m3: float = 350.0
    dt_days: float = 0.05
    days: float = 14.0
    turning: bool = True
    turning_start_day: float = 4.0
    turning_interval_days: float = 2.0

    def __post_init__(self):
        if not self.t_min_C < self.t_opt_C < self.t_max_C:
            raise ValueError("cardinal temperatures must satisfy t_min < t_opt < t_max")
        if not self.moisture_min < self.moisture_opt < self.moisture_max:
            raise ValueError("moisture cardinal points must satisfy min < opt < max")
        if self.rate_per_day < 0 or self.heat_loss_kj_per_day_C < 0:
            raise ValueError("rate and loss coefficients must be >= 0")
        if not 0.0 <= self.nitrogen_volatilization <= 1.0:
            raise ValueError("nitrogen_volatilization must lie in [0, 1]")
        if not 0.0 < self.wetting_target < 1.0:
            raise ValueError("wetting_target must lie in (0, 1)")
        if not 0.0 < self.dt_days <= 0.25:
            raise ValueError("dt_days must lie in (0, 0.25]")
        if self.days < 0:
            raise ValueError("days must be >= 0")


@dataclass(frozen=True)
class CompostState:
    day: float
    temperature_C: float
    organic_kg: float
    ash_kg: float
    carbon_kg: float
    nitrogen_kg: float
    water_kg: float
    degraded_mass_kg: float
    ambient_C: float
    activator_strength: float = 0.0

    @property
    def dry_mass_kg(self) -> float:
        return self.organic_kg + self.ash_kg

    @property
    def moisture_frac(self) -> float:
        return self.water_kg / (self.water_kg + self.dry_mass_kg)

    @property
    def cn_ratio(self) -> float:
        return self.carbon_kg / self.nitrogen_kg

    @property
    def remaining(self) -> Feedstock:
        dry = self.dry_mass_kg
        return Feedstock(
            mass_kg=dry + self.water_kg,
            organic_matter_frac=self.organic_kg / dry,
            carbon_frac=self.carbon_kg / dry,
            nitrogen_frac=self.nitrogen_kg / dry,
            ash_frac=self.ash_kg / dry,
            moisture_frac=self.moisture_frac,
            activator_strength=self.activator_strength,
        )

    def as_vector(self) -> np.ndarray:
        return np.array([self.organic_kg, self.ash_kg, self.carbon_kg, self.nitrogen_kg,
                         self.water_kg, self.temperature_C, self.degraded_mass_kg])

    def with_vector(self, y: np.ndarray, day: float) -> "CompostState":
        om, ash, c, n, w, t, deg = (float(v) for v in y)
        return replace(self, day=day, organic_kg=om, ash_kg=ash, carbon_kg=c, nitrogen_kg=n,
                       water_kg=w, temperature_C=t, degraded_mass_kg=deg)


def temperature_factor(T: float, cfg: CompostConfig) -> float:
    """Cardinal-temperature rate multiplier: 1 at ``t_opt``, 0 outside ``(t_min, t_max)``."""
    tmin, topt, tmax = cfg.t_min_C, cfg.t_opt_C, cfg.t_max_C
    if T <= tmin or T >= tmax:
        return 0.0
    num = (T - tmax) * (T - tmin) ** 2
    den = (topt - tmin) * ((topt - tmin) * (T - topt) - (topt - tmax) * (topt + tmin - 2.0 * T))
    return num / den


def moisture_factor(m: float, cfg: CompostConfig) -> float:
    if m <= cfg.moisture_min or m >= cfg.moisture_max:
        return 0.0
    half_width = cfg.moisture_opt - cfg.moisture_min
    return max(0.0, 1.0 - ((m - cfg.moisture_opt) / half_width) ** 2)


def activator_factor(strength: float, cfg: CompostConfig) -> float:
    return 1.0 + strength * cfg.activator_gain


def _rhs(y: np.ndarray, ambient: float, f_a: float, cfg: CompostConfig) -> np.ndarray:
    om, ash, c, n, w, T, _ = y
    dry = om + ash
    m = w / (w + dry)
    rate = cfg.rate_per_day * temperature_factor(T, cfg) * moisture_factor(m, cfg) * f_a * om
    heat_capacity = dry * cfg.solids_heat_capacity_kj_per_kg_C + w * cfg.water_heat_capacity_kj_per_kg_C
    dT = (cfg.heat_yield_kj_per_kg * rate - cfg.heat_loss_kj_per_day_C * (T - ambient)) / heat_capacity
    evap = cfg.evaporation_kg_per_day_C * max(T - ambient, 0.0) if w > 0 else 0.0
    c_per_om = c / om if om > 0 else 0.0
    n_per_om = n / om if om > 0 else 0.0
    return np.array([
        -rate,
        0.0,
        -c_per_om * rate,
        -cfg.nitrogen_volatilization * n_per_om * rate,
        -evap,
        dT,
        rate,
    ])


def init_pile(feedstock: Feedstock, spec: CompartmentSpec | None = None,
              config: CompostConfig | None = None) -> CompostState:
    """Day-0 pile at ambient temperature, wetted up to ``config.wetting_target``.

    C:N outside [20, 40] is rejected; outside [25, 35] it draws a warning.
    """
    spec = spec or CompartmentSpec()
    cfg = config or CompostConfig()
    if feedstock.nitrogen_frac <= 0 or feedstock.carbon_frac <= 0:
        raise ValueError("C:N ratio must be finite and positive")
    cn = feedstock.cn_ratio
    if not 20.0 <= cn <= 40.0:
        raise ValueError(f"C:N ratio {cn:.1f} outside the accepted range [20, 40]")
    if not 25.0 <= cn <= 35.0:
        warnings.warn(f"C:N ratio {cn:.1f} is far from the 30:1 target", RuntimeWarning, stacklevel=2)

    dry = feedstock.dry_mass_kg
    water = feedstock.mass_kg - dry
    if feedstock.moisture_frac < cfg.wetting_target:
        water = dry * cfg.wetting_target / (1.0 - cfg.wetting_target)
    volume = (dry + water) / cfg.bulk_density_kg_m3
    if volume > spec.volume_m3 * (1 + 1e-12):
        raise ValueError(f"wetted pile needs {volume:.3f} m3, compartment holds {spec.volume_m3} m3")

    return CompostState(
        day=0.0,
        temperature_C=spec.ambient_C,
        organic_kg=dry * feedstock.organic_matter_frac,
        ash_kg=dry * feedstock.ash_frac,
        carbon_kg=dry * feedstock.carbon_frac,
        nitrogen_kg=dry * feedstock.nitrogen_frac,
        water_kg=water,
        degraded_mass_kg=0.0,
        ambient_C=spec.ambient_C,
        activator_strength=feedstock.activator_strength or 0.0,
    )


def step(state: CompostState, dt_days: float, config: CompostConfig | None = None) -> CompostState:
    """Advance the pile by one RK4 step of ``dt_days`` (at most 0.25 day)."""
    cfg = config or CompostConfig()
    if not 0.0 < dt_days <= 0.25:
        raise ValueError("dt_days must lie in (0, 0.25]")
    y = state.as_vector()
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite compost state")
    f_a = activator_factor(state.activator_strength, cfg)
    amb = state.ambient_C
    k1 = _rhs(y, amb, f_a, cfg)
    k2 = _rhs(y + 0.5 * dt_days * k1, amb, f_a, cfg)
    k3 = _rhs(y + 0.5 * dt_days * k2, amb, f_a, cfg)
    k4 = _rhs(y + dt_days * k3, amb, f_a, cfg)
    y_new = y + dt_days / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise ValueError("compost integration produced non-finite values")
    y_new[4] = max(y_new[4], 0.0)
    return state.with_vector(y_new, state.day + dt_days)


def turn(state: CompostState, config: CompostConfig) -> CompostState:
    """Turning: re-aerate and top the water back up to the wetting target."""
    target = config.wetting_target
    if state.moisture_frac >= target:
        return state
    return replace(state, water_kg=state.dry_mass_kg * target / (1.0 - target))


def turning_days(config: CompostConfig, days: float) -> list[float]:
    if not config.turning:
        return []
    out = []
    d = config.turning_start_day
    while d < days - 1e-9:
        out.append(d)
        d += config.turning_interval_days
    return out


def run_cycle(
    feedstock: Feedstock,
    spec: CompartmentSpec | None = None,
    config: CompostConfig | None = None,
    days: float | None = None,
    every_step: bool = False,
) -> tuple[CompostState, list[CompostState]]:
    """Integrate from day 0 to ``days`` (default ``config.days``).

    Returns the final state and the series of states at whole days, or at every
    integration step when ``every_step`` is set. Both include day 0.
    """
    cfg = config or CompostConfig()
    days = cfg.days if days is None else days
    if days < 0:
        raise ValueError("days must be >= 0")
    state = init_pile(feedstock, spec, cfg)
    series = [state]
    n_steps = int(round(days / cfg.dt_days))
    if n_steps * cfg.dt_days < days - 1e-9:
        n_steps += 1
    turns = turning_days(cfg, days)
    next_turn = 0
    for i in range(1, n_steps + 1):
        dt = min(cfg.dt_days, days - (i - 1) * cfg.dt_days)
        state = step(state, dt, cfg)
        day = min(i * cfg.dt_days, days)
        state = replace(state, day=day)
        if next_turn < len(turns) and day >= turns[next_turn] - 1e-9:
            state = turn(state, cfg)
            next_turn += 1
        if every_step or abs(day - round(day)) < 1e-9 or i == n_steps:
            series.append(state)
    return state, series


@dataclass(frozen=True)
class CompositionReport:
    rows: tuple[tuple[str, float], ...]
    cn_ratio: float
    day: float
    footer: str = REPORT_FOOTER

    def as_dict(self) -> dict[str, float]:
        return dict(self.rows)

    def format(self) -> str:
        lines = [f"Composition after {self.day:g} days", f"{'Component':<24}Percentage"]
        lines += [f"{name:<24}{pct:.4f}" if name == "Nitrogen Content" else f"{name:<24}{pct:.2f}"
                  for name, pct in self.rows]
        lines.append(f"{'C:N ratio':<24}{self.cn_ratio:.2f}")
        lines.append(self.footer)
        return "\n".join(lines)


def ash_reference_pct(state: CompostState) -> float:
    """Ash as % of dry solids net of cumulative mineralised mass (capped at 100)."""
    basis = max(state.dry_mass_kg - state.degraded_mass_kg, state.ash_kg)
    return 100.0 * state.ash_kg / basis


def composition_report(state: CompostState) -> CompositionReport:
    dry = state.dry_mass_kg
    rows = (
        (REPORT_ROWS[0], 100.0 * state.organic_kg / dry),
        (REPORT_ROWS[1], 100.0 * state.carbon_kg / dry),
        (REPORT_ROWS[2], 100.0 * state.nitrogen_kg / dry),
        (REPORT_ROWS[3], ash_reference_pct(state)),
    )
    return CompositionReport(rows, state.cn_ratio, state.day)


def series_to_csv(series: list[CompostState]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SERIES_COLUMNS)
    for s in series:
        r = composition_report(s).as_dict()
        writer.writerow([
            f"{s.day:.4f}", f"{s.temperature_C:.4f}", f"{s.moisture_frac:.6f}",
            f"{r[REPORT_ROWS[0]]:.6f}", f"{r[REPORT_ROWS[1]]:.6f}", f"{r[REPORT_ROWS[2]]:.6f}",
            f"{r[REPORT_ROWS[3]]:.6f}", f"{s.cn_ratio:.6f}",
        ])
    return buf.getvalue()


@dataclass(frozen=True)
class Preset:
    feedstock: Feedstock
    compartment: CompartmentSpec
    config: CompostConfig

    def to_dict(self) -> dict:
        return {"feedstock": asdict(self.feedstock), "compartment": asdict(self.compartment),
                "config": asdict(self.config)}

    @classmethod
    def from_dict(cls, d: dict) -> "Preset":
        return cls(Feedstock(**d["feedstock"]), CompartmentSpec(**d.get("compartment", {})),
                   CompostConfig(**d.get("config", {})))


def load_preset(name_or_path: str | Path = "paper-default") -> Preset:
    """Load a bundled preset by name, or a preset JSON file by path."""
    if str(name_or_path) in PRESET_NAMES:
        text = resources.files("smartbin.presets").joinpath(f"{name_or_path}.json").read_text(encoding="utf-8")
    else:
        text = Path(name_or_path).read_text(encoding="utf-8")
    return Preset.from_dict(json.loads(text))


def first_day_reaching(series: list[CompostState], temperature_C: float) -> float | None:
    for s in series:
        if s.temperature_C >= temperature_C:
            return s.day
    return None
