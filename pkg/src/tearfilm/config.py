"""Run-configuration schema.

YAML files validated by pydantic with unknown keys rejected; every
physical default traces to the typical tear-film parameter tables
(osmotic strength 0.392, Peclet numbers 6.76 / 27.7, extinction 0.417;
4.5 um thickness, 0.54 mm length, 10 um/min peak thinning).
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .dae import IntegratorConfig
from .model import EvaporationPeak, ModelParams
from .spectral import PeriodicGrid

__all__ = ["RunConfig", "SweepConfig", "load_run_config", "load_sweep_config"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsSection(_Strict):
    Pc: float = 0.392
    Pe_c: float = 6.76
    Pe_f: float = 27.7
    phi: float = 0.417
    f0: float = 1.0
    I0: float = 1.0
    normalize_intensity: bool = False  # pick I0 so I(h=1, f=f0) = 1
    d_um: float = 4.5
    ell_mm: float = 0.54
    v_max_um_min: float = 10.0

    def to_model(self) -> ModelParams:
        data = self.model_dump()
        if data.pop("normalize_intensity"):
            raw = (1.0 - np.exp(-self.phi * self.f0)) / (1.0 + self.f0**2)
            data["I0"] = 1.0 / raw
        return ModelParams(**data)


class GridSection(_Strict):
    nx: int = 60
    ny: int = 60

    def to_grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.nx, self.ny)


class PeakSection(_Strict):
    a: float
    center: tuple[float, float] = (0.0, 0.0)
    widths: tuple[float, float] = (0.5, 0.5)

    def to_peak(self) -> EvaporationPeak:
        return EvaporationPeak(a=self.a, center=tuple(self.center),
                               widths=tuple(self.widths))


class EvaporationSection(_Strict):
    v_b: float = 0.1
    peaks: list[PeakSection] = Field(default_factory=list)
    periodic_images: bool = False

    @field_validator("v_b")
    @classmethod
    def _positive(cls, v):
        if v <= 0:
            raise ValueError("v_b must be positive")
        return v


class IntegratorSection(_Strict):
    rtol: float = 1e-6
    atol: float = 1e-8
    max_order: int = 5
    initial_dt: float = 1e-6
    tbu_threshold: float = 1.0 / 4.5
    t_end: float = 10.0
    lin_solver: Literal["auto", "dense", "krylov"] = "auto"
    lin_rtol: float = 1e-5
    gmres_restart: int = 150
    dealias: bool = False
    use_bdf: bool = False

    def to_config(self, **overrides) -> IntegratorConfig:
        return IntegratorConfig(**{**self.model_dump(), **overrides})


class PodSection(_Strict):
    tau: float = 0.5
    snapshot_count: Optional[int] = None  # None -> table default for tau
    ranks: Optional[tuple[int, int, int]] = None
    rank_f: Optional[int] = None
    basis: Literal["full2d", "radial"] = "full2d"
    include_f: bool = True
    basis_file: Optional[str] = None  # export path for the built basis
    restart: bool = True


class PodStudySection(_Strict):
    taus: list[float] = Field(default_factory=lambda: [0.5])
    sources: list[Literal["full2d", "radial"]] = Field(
        default_factory=lambda: ["full2d"]
    )
    error_times: int = 120


class RadialSection(_Strict):
    R0: float = float(np.pi)
    n: int = 141
    tau: float = 3.0
    snapshot_count: int = 100


class StreakSection(_Strict):
    n: int = 256


class GridStudySection(_Strict):
    sizes: list[int] = Field(default_factory=lambda: [20, 30, 40, 50, 60])
    reference: int = 100
    t_eval: float = 2.4


class OutputsSection(_Strict):
    snapshot_times: Optional[list[float]] = None
    snapshot_cadence: Optional[float] = None
    probes: list[tuple[float, float]] | Literal["auto"] = "auto"


class RunConfig(_Strict):
    mode: Literal["full", "pod", "radial1d", "streak1d", "grid_study",
                  "pod_error_study"] = "full"
    params: ParamsSection = Field(default_factory=ParamsSection)
    grid: GridSection = Field(default_factory=GridSection)
    evaporation: EvaporationSection = Field(default_factory=EvaporationSection)
    integrator: IntegratorSection = Field(default_factory=IntegratorSection)
    pod: PodSection = Field(default_factory=PodSection)
    pod_study: PodStudySection = Field(default_factory=PodStudySection)
    radial: RadialSection = Field(default_factory=RadialSection)
    streak: StreakSection = Field(default_factory=StreakSection)
    grid_study: GridStudySection = Field(default_factory=GridStudySection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)

    def peaks(self) -> list[EvaporationPeak]:
        return [p.to_peak() for p in self.evaporation.peaks]

    def probe_points(self) -> np.ndarray:
        """Configured probes; 'auto' is the origin plus all peak centers."""
        if self.outputs.probes == "auto":
            pts = [(0.0, 0.0)] + [tuple(p.center) for p in self.evaporation.peaks]
            unique = sorted(set(pts))
            return np.asarray(unique, dtype=float)
        return np.asarray(self.outputs.probes, dtype=float)


class SweepSection(_Strict):
    kind: Literal["fixed_product", "fixed_width", "two_spot_separation"]
    values: list[float]
    product: float = 0.25  # fixed_product: x_w * y_w
    x_w: float = 0.5  # fixed_width: fixed x width
    a: float = 1.0
    width: float = 0.5  # two_spot_separation: common circular width


class SweepConfig(_Strict):
    base: RunConfig = Field(default_factory=RunConfig)
    sweep: SweepSection

    def cases(self) -> list[tuple[str, RunConfig]]:
        """Materialize one run config per sweep value."""
        out = []
        s = self.sweep
        for v in s.values:
            cfg = self.base.model_copy(deep=True)
            cfg.mode = "full"
            if s.kind == "fixed_product":
                x_w = v
                y_w = s.product / v
                cfg.evaporation.peaks = [
                    PeakSection(a=s.a, center=(0.0, 0.0), widths=(x_w, y_w))
                ]
                label = f"xw{v:g}"
            elif s.kind == "fixed_width":
                cfg.evaporation.peaks = [
                    PeakSection(a=s.a, center=(0.0, 0.0), widths=(s.x_w, v))
                ]
                label = f"yw{v:g}"
            else:  # two_spot_separation, half-separation v
                if v == 0.0:
                    centers = [(0.0, 0.0), (0.0, 0.0)]
                else:
                    centers = [(-v, 0.0), (v, 0.0)]
                cfg.evaporation.peaks = [
                    PeakSection(a=s.a, center=ctr, widths=(s.width, s.width))
                    for ctr in centers
                ]
                label = f"xk{v:g}"
            out.append((label, cfg))
        return out


def load_run_config(path) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return RunConfig.model_validate(raw)


def load_sweep_config(path) -> SweepConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return SweepConfig.model_validate(raw)
