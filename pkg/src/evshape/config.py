"""Pipeline configuration: dataclasses with a flat INI (key = value) file
format, one section per pipeline stage. The dataset command snapshots the
resolved config into each scene directory for reproducibility.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .camera import AugmentationParams, Intrinsics
from .diffrender import SoftRenderConfig
from .eventsim import SimConfig
from .losses import LossWeights
from .meshopt import OptimConfig
from .silext import ExtractParams


@dataclass(frozen=True)
class SceneSection:
    object: str = "sphere"  # sphere | cube | blob | path to an OBJ file
    radius: float = 0.55
    blob_bumps: int = 6
    blob_amplitude: float = 0.22
    offcenter: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class CameraSection:
    n_views: int = 45
    width: int = 280
    height: int = 280
    focal: float = 280.0
    base_distance: float = 1.8
    base_elevation: float = 30.0
    frame_dt_us: int = 20_000
    dist_amplitude: float = 0.1
    dist_frequency: float = 1.0
    elev_amplitude: float = 10.0
    elev_frequency: float = 1.0
    micro_sigma_deg: float = 0.5

    def intrinsics(self) -> Intrinsics:
        return Intrinsics(self.width, self.height, self.focal)

    def augmentation(self) -> AugmentationParams:
        return AugmentationParams(
            self.dist_amplitude,
            self.dist_frequency,
            self.elev_amplitude,
            self.elev_frequency,
            self.micro_sigma_deg,
        )


@dataclass(frozen=True)
class RenderSection:
    albedo_lo: float = 0.2
    albedo_hi: float = 0.9
    background: str = "checker"  # checker | path to a PGM file
    checker_tile: int = 20
    checker_lo: float = 0.3
    checker_hi: float = 0.8
    light: tuple[float, float, float] = (0.4, 0.8, 0.45)


@dataclass(frozen=True)
class EventsSection:
    ct: float = 0.2
    sigma_c_pos: float = 0.03
    sigma_c_neg: float = 0.03
    sigma_n: float = 0.1
    log_eps: float = 1e-3

    def sim_config(self, seed: int) -> SimConfig:
        return SimConfig(self.ct, (self.sigma_c_pos, self.sigma_c_neg), self.sigma_n, self.log_eps, seed)


@dataclass(frozen=True)
class BinningSection:
    count: int = 0  # 0: events/n_views so frames match view count
    denoise_min_count: int = 0


@dataclass(frozen=True)
class ExtractSection:
    dilate_radius: int = 3
    min_component: int = 100

    def params(self) -> ExtractParams:
        return ExtractParams(self.dilate_radius, self.min_component)


@dataclass(frozen=True)
class OptimSection:
    iterations: int = 2000
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.99
    views_per_iter: int = 2
    template_subdivisions: int = 3
    init_radius: float = 0.0  # 0: estimate from silhouettes
    lambda_iou: float = 1.0
    lambda_lap: float = 1.0
    lambda_smooth: float = 1e-2
    sigma: float = 1e-4

    def optim_config(self, seed: int) -> OptimConfig:
        return OptimConfig(
            iterations=self.iterations,
            lr=self.lr,
            betas=(self.beta1, self.beta2),
            views_per_iter=self.views_per_iter,
            seed=seed,
            template_subdivisions=self.template_subdivisions,
            init_radius=None if self.init_radius == 0 else self.init_radius,
            weights=LossWeights(self.lambda_iou, self.lambda_lap, self.lambda_smooth),
            render=SoftRenderConfig(sigma=self.sigma),
        )


@dataclass(frozen=True)
class PipelineConfig:
    scene: SceneSection = field(default_factory=SceneSection)
    camera: CameraSection = field(default_factory=CameraSection)
    render: RenderSection = field(default_factory=RenderSection)
    events: EventsSection = field(default_factory=EventsSection)
    binning: BinningSection = field(default_factory=BinningSection)
    extract: ExtractSection = field(default_factory=ExtractSection)
    optim: OptimSection = field(default_factory=OptimSection)


_SECTIONS = {f.name: f.type for f in fields(PipelineConfig)}


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text: str, target_type):
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    if target_type is str:
        return text
    if target_type is tuple or str(target_type).startswith("tuple"):
        return tuple(float(x) for x in text.split())
    raise ValueError(f"unsupported config field type {target_type}")


def config_to_ini(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser()
    for sec in fields(PipelineConfig):
        section = getattr(cfg, sec.name)
        parser[sec.name] = {f.name: _format_value(getattr(section, f.name)) for f in fields(section)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_from_ini(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse an INI overlay onto `base` (defaults when None); unknown
    sections/keys raise ValueError so typos fail loudly."""
    base = base or PipelineConfig()
    parser = configparser.ConfigParser()
    parser.read_string(text)
    sections = {}
    for sec in fields(PipelineConfig):
        sections[sec.name] = getattr(base, sec.name)
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ValueError(f"unknown config section [{name}]")
        cls = type(sections[name])
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, raw in parser[name].items():
            if key not in known:
                raise ValueError(f"unknown config key {name}.{key}")
            ann = cls.__dataclass_fields__[key].type
            py_type = {"int": int, "float": float, "str": str}.get(ann, tuple if "tuple" in str(ann) else ann)
            updates[key] = _parse_value(raw, py_type)
        current = {f.name: getattr(sections[name], f.name) for f in fields(cls)}
        current.update(updates)
        sections[name] = cls(**current)
    return PipelineConfig(**sections)


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    with open(path) as fh:
        return config_from_ini(fh.read(), base)


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(config_to_ini(cfg))
