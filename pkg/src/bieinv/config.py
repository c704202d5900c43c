"""Run configuration: INI parsing, defaults, validation, hashing.

The INI layout has sections [problem], [collocation], [train], [recovery],
[output] and optionally [convergence]. Defaults reproduce the smooth 2D
benchmark setup: 40 boundary sources (10 per edge), 100 interior sources,
width-10 networks, 2000 epochs.
"""

import configparser
import dataclasses
import hashlib
from typing import Optional, Tuple

from .errors import ConfigurationError


def parse_spacing(text):
    """Grid spacing given either as a decimal or a fraction like 1/64."""
    s = str(text).strip()
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            return float(num) / float(den)
        return float(s)
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"problem.fdm_h: cannot parse spacing {text!r}")


@dataclasses.dataclass
class RunConfig:
    # problem
    problem: str = "smooth_2d"
    fdm_h: float = 1.0 / 64.0
    data_file: Optional[str] = None
    anchor_point: Optional[Tuple[float, ...]] = None
    anchor_value: Optional[float] = None
    # collocation
    boundary_sources_per_edge: int = 10
    checks_per_edge: int = 5
    interior_sources: int = 100
    boundary_order: int = 10
    boundary_panels: int = 4
    interior_mode: str = "lattice"
    interior_lattice: int = 32
    margin: float = 0.03
    # train
    seed: int = 8
    width: int = 10
    epochs: int = 2000
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    feedback: float = 0.1
    checkpoint_every: int = 100
    resample_interior: bool = False
    use_interior_data: bool = False
    # recovery
    recovery_mode: str = "auto"
    recovery_parametrization: str = "exp"
    recovery_epochs: int = 12000
    recovery_lr: float = 3e-3
    recovery_anchor_weight: float = 10.0
    recovery_seed: int = 5
    # output
    out_dir: str = "out"
    eval_grid: int = 20
    plots: bool = True
    # convergence study
    ladder: Tuple[int, ...] = (16, 32, 64, 128)
    trials: int = 3
    convergence_epochs: int = 600
    interior_scale: float = 0.0625

    def validate(self):
        def positive_int(sec_key, val):
            if not isinstance(val, int) or val < 1:
                raise ConfigurationError(f"{sec_key} must be a positive integer, got {val!r}")
        def positive(sec_key, val):
            if not val > 0:
                raise ConfigurationError(f"{sec_key} must be positive, got {val!r}")
        positive_int("collocation.sources_per_edge", self.boundary_sources_per_edge)
        positive_int("collocation.checks_per_edge", self.checks_per_edge)
        positive_int("collocation.interior_sources", self.interior_sources)
        positive_int("collocation.boundary_panels", self.boundary_panels)
        positive_int("collocation.interior_lattice", self.interior_lattice)
        if not isinstance(self.boundary_order, int) or not 1 <= self.boundary_order <= 32:
            raise ConfigurationError(
                f"collocation.boundary_order must be in 1..32, got {self.boundary_order!r}")
        if self.interior_mode not in ("lattice", "mc"):
            raise ConfigurationError(
                f"collocation.interior_mode must be 'lattice' or 'mc', got {self.interior_mode!r}")
        if not 0.0 <= self.margin < 0.5:
            raise ConfigurationError(
                f"collocation.margin must lie in [0, 0.5), got {self.margin!r}")
        positive_int("train.width", self.width)
        positive_int("train.epochs", self.epochs)
        positive_int("train.checkpoint_every", self.checkpoint_every)
        positive("train.lr", self.lr)
        positive("train.adam_eps", self.adam_eps)
        for key in ("adam_beta1", "adam_beta2"):
            b = getattr(self, key)
            if not 0.0 <= b < 1.0:
                raise ConfigurationError(f"train.{key} must lie in [0, 1), got {b!r}")
        if self.feedback < 0.0:
            raise ConfigurationError(
                f"train.feedback must be nonnegative, got {self.feedback!r}")
        if self.recovery_mode not in ("auto", "smooth", "piecewise"):
            raise ConfigurationError(
                f"recovery.mode must be auto, smooth or piecewise, got {self.recovery_mode!r}")
        if self.recovery_parametrization not in ("exp", "linear"):
            raise ConfigurationError(
                "recovery.parametrization must be 'exp' or 'linear', "
                f"got {self.recovery_parametrization!r}")
        positive_int("recovery.epochs", self.recovery_epochs)
        positive("recovery.lr", self.recovery_lr)
        if self.recovery_anchor_weight < 0:
            raise ConfigurationError(
                f"recovery.anchor_weight must be nonnegative, got {self.recovery_anchor_weight!r}")
        positive_int("output.eval_grid", self.eval_grid)
        if not 0 < self.fdm_h <= 0.5 or abs(round(1.0 / self.fdm_h) * self.fdm_h - 1.0) > 1e-9:
            raise ConfigurationError(
                f"problem.fdm_h must divide the unit edge, got {self.fdm_h!r}")
        if len(self.ladder) > 0:
            for m in self.ladder:
                positive_int("convergence.ladder", m)
        positive_int("convergence.trials", self.trials)
        positive_int("convergence.epochs", self.convergence_epochs)
        positive("convergence.interior_scale", self.interior_scale)
        if (self.anchor_point is None) != (self.anchor_value is None):
            raise ConfigurationError(
                "problem.anchor_point and problem.anchor_value must be given together")
        return self

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["anchor_point"] = (None if self.anchor_point is None
                             else list(self.anchor_point))
        d["ladder"] = list(self.ladder)
        return d

    def hash(self):
        lines = [f"{k}={v!r}" for k, v in sorted(self.to_dict().items())]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)


# INI key -> (attribute, converter); converters run on the raw string.
def _to_bool(s):
    low = str(s).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(low)


_SCHEMA = {
    "problem": {
        "name": ("problem", str),
        "fdm_h": ("fdm_h", parse_spacing),
        "data_file": ("data_file", lambda s: s.strip() or None),
        "anchor_point": ("anchor_point",
                         lambda s: tuple(float(t) for t in s.split(",")) if s.strip() else None),
        "anchor_value": ("anchor_value", lambda s: float(s) if s.strip() else None),
    },
    "collocation": {
        "sources_per_edge": ("boundary_sources_per_edge", int),
        "checks_per_edge": ("checks_per_edge", int),
        "interior_sources": ("interior_sources", int),
        "boundary_order": ("boundary_order", int),
        "boundary_panels": ("boundary_panels", int),
        "interior_mode": ("interior_mode", str),
        "interior_lattice": ("interior_lattice", int),
        "margin": ("margin", float),
    },
    "train": {
        "seed": ("seed", int),
        "width": ("width", int),
        "epochs": ("epochs", int),
        "lr": ("lr", float),
        "adam_beta1": ("adam_beta1", float),
        "adam_beta2": ("adam_beta2", float),
        "adam_eps": ("adam_eps", float),
        "feedback": ("feedback", float),
        "checkpoint_every": ("checkpoint_every", int),
        "resample_interior": ("resample_interior", _to_bool),
        "use_interior_data": ("use_interior_data", _to_bool),
    },
    "recovery": {
        "mode": ("recovery_mode", str),
        "parametrization": ("recovery_parametrization", str),
        "epochs": ("recovery_epochs", int),
        "lr": ("recovery_lr", float),
        "anchor_weight": ("recovery_anchor_weight", float),
        "seed": ("recovery_seed", int),
    },
    "output": {
        "dir": ("out_dir", str),
        "eval_grid": ("eval_grid", int),
        "plots": ("plots", _to_bool),
    },
    "convergence": {
        "ladder": ("ladder", lambda s: tuple(int(t) for t in s.split(","))),
        "trials": ("trials", int),
        "epochs": ("convergence_epochs", int),
        "interior_scale": ("interior_scale", float),
    },
}


def load_config(path=None, overrides=None):
    """Build a validated RunConfig from an INI file plus overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigurationError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigurationError(f"unknown config key {section}.{key}")
                attr, conv = _SCHEMA[section][key]
                try:
                    setattr(cfg, attr, conv(raw))
                except (ValueError, TypeError):
                    raise ConfigurationError(
                        f"{section}.{key}: cannot parse value {raw!r}")
    if overrides:
        for attr, value in overrides.items():
            if not hasattr(cfg, attr):
                raise ConfigurationError(f"unknown config override {attr!r}")
            setattr(cfg, attr, value)
    return cfg.validate()
