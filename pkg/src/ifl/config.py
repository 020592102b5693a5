"""Experiment configuration: a flat key=value file with section headers.

Sections: [experiment] for orchestration, [forward]/[inverse] for filter
selection, [dither] and [rkhs] for filter parameters, [bounds] (and
optionally [inverse_bounds]) for stability inputs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .stability import InverseBoundsExt, SoekfBounds

EXPERIMENTS = ("fm-demod", "bearing", "rkhs-fm", "stability-sweep")
FORWARD_KINDS = ("ekf", "soekf", "gsekf", "dekf", "rkhs")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    experiment: str
    runs: int = 500
    horizon: int = 100
    seed: int = 0
    out_dir: str = "results"
    workers: Optional[int] = None
    # Filter selection. With true/assumed set, the run is a mismatch pair:
    # the adversary runs `true_forward`, the defender inverts `assumed_forward`.
    true_forward: Optional[str] = None
    assumed_forward: Optional[str] = None
    filters: Optional[tuple[str, ...]] = None
    # Model options.
    transition_form: str = "printed"
    # Gaussian-sum sizes (forward components l, inverse components l-bar).
    gs_components: int = 5
    inv_gs_components: int = 5
    # Dither schedule (bearing experiment).
    dither_d0: float = 1.0
    dither_tau: float = 20.0
    dither_cutoff: int = 80
    # Kernel filter parameters.
    rkhs_sigma2_fwd: float = 30.0
    rkhs_sigma2_inv: float = 50.0
    rkhs_window: int = 2
    rkhs_ald_nu: float = 0.1
    # Information-matrix initialization: the bearing experiment's printed
    # choice initializes J0 to the covariance itself; set False for inv(cov).
    bearing_j0_verbatim: bool = True
    # Stability sweep inputs.
    stability_bounds: Optional[SoekfBounds] = None
    inverse_bounds: Optional[InverseBoundsExt] = None
    delta_grid: tuple[float, ...] = ()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"expected one of {EXPERIMENTS}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.horizon < 2:
            raise ConfigError("horizon must be >= 2")
        for name in ("true_forward", "assumed_forward"):
            value = getattr(self, name)
            if value is not None and value not in FORWARD_KINDS:
                raise ConfigError(f"{name}={value!r} not in {FORWARD_KINDS}")
        if (self.true_forward is None) != (self.assumed_forward is None):
            raise ConfigError("true_forward and assumed_forward must be "
                              "set together")
        if self.experiment == "stability-sweep" and self.stability_bounds is None:
            raise ConfigError("stability-sweep needs a [bounds] section")
        if self.gs_components < 1 or self.inv_gs_components < 1:
            raise ConfigError("mixture sizes must be >= 1")


def _coerce(raw: str, target_type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    return target_type(raw)


def parse_bounds_section(section) -> SoekfBounds:
    kwargs = {}
    valid = {f.name: f.type for f in fields(SoekfBounds)}
    for key, raw in section.items():
        if key not in valid:
            raise ConfigError(f"unknown bounds key {key!r}")
        kwargs[key] = int(raw) if key in ("n", "p") else float(raw)
    try:
        return SoekfBounds(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"incomplete [bounds] section: {exc}") from exc


def parse_inverse_bounds_section(section) -> InverseBoundsExt:
    kwargs = {}
    valid = {f.name for f in fields(InverseBoundsExt)}
    for key, raw in section.items():
        if key not in valid:
            raise ConfigError(f"unknown inverse_bounds key {key!r}")
        kwargs[key] = int(raw) if key == "n_a" else float(raw)
    try:
        return InverseBoundsExt(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"incomplete [inverse_bounds] section: {exc}") from exc


_SECTION_KEYS = {
    "experiment": {
        "id": ("experiment", str),
        "runs": ("runs", int),
        "horizon": ("horizon", int),
        "seed": ("seed", int),
        "out": ("out_dir", str),
        "workers": ("workers", int),
        "filters": ("filters", "csv"),
        "delta_grid": ("delta_grid", "floats"),
    },
    "forward": {
        "kind": ("true_forward", str),
        "components": ("gs_components", int),
        "transition_form": ("transition_form", str),
    },
    "inverse": {
        "assumed": ("assumed_forward", str),
        "components": ("inv_gs_components", int),
    },
    "dither": {
        "d0": ("dither_d0", float),
        "tau": ("dither_tau", float),
        "cutoff": ("dither_cutoff", int),
    },
    "rkhs": {
        "sigma2_forward": ("rkhs_sigma2_fwd", float),
        "sigma2_inverse": ("rkhs_sigma2_inv", float),
        "window": ("rkhs_window", int),
        "ald_nu": ("rkhs_ald_nu", float),
    },
    "crlb": {
        "bearing_j0_verbatim": ("bearing_j0_verbatim", bool),
    },
}


def load_config(path) -> ExperimentConfig:
    """Parse an experiment config file; raises ConfigError on any problem."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if "experiment" not in parser or "id" not in parser["experiment"]:
        raise ConfigError("config must contain [experiment] with an 'id' key")

    kwargs = {"experiment": parser["experiment"]["id"].strip()}
    for section_name, keys in _SECTION_KEYS.items():
        if section_name not in parser:
            continue
        for key, raw in parser[section_name].items():
            if section_name == "experiment" and key == "id":
                continue
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section_name}]")
            attr, kind = keys[key]
            if kind == "csv":
                kwargs[attr] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif kind == "floats":
                kwargs[attr] = tuple(float(s) for s in raw.split(",") if s.strip())
            else:
                try:
                    kwargs[attr] = _coerce(raw, kind)
                except (ValueError, ConfigError) as exc:
                    raise ConfigError(
                        f"bad value for {key!r} in [{section_name}]: {raw!r}"
                    ) from exc
    for extra in parser.sections():
        if extra not in _SECTION_KEYS and extra not in ("bounds", "inverse_bounds"):
            raise ConfigError(f"unknown section [{extra}]")
    if "bounds" in parser:
        kwargs["stability_bounds"] = parse_bounds_section(parser["bounds"])
    if "inverse_bounds" in parser:
        kwargs["inverse_bounds"] = parse_inverse_bounds_section(
            parser["inverse_bounds"])

    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg
