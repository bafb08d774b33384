"""Experiment configuration: TOML files, defaults, strict validation.

The schema has five sections — model, detector, run, chsh, output — and
unknown sections or keys are fatal, so a typo in a physics parameter cannot
pass silently.  Complex matrices are written row-major as [re, im] pairs.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass

import numpy as np

from .coincidence import PER_PAIR, RACE, CoincidenceParams
from .detector import DetectorParams
from .errors import ParseError, ValidationError
from .model import (
    SingleSignalSpec,
    build_matrix_model,
    build_scalar_pair_model,
    singlet_model,
)
from .oracle import CANONICAL_CHSH_ANGLES
from .sampling import DiscretizationParams

MODEL_KINDS = ("scalar", "matrix", "singlet", "single")

FORMATS = ("report", "table")

_SCHEMA = {
    "model": ("kind", "sigma12", "b", "e0", "scale"),
    "detector": ("dt", "kappa", "threshold", "coincidence_window", "max_time"),
    "run": ("trials", "seed", "workers", "mode"),
    "chsh": ("angles",),
    "output": ("dir", "format"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved and validated experiment settings."""

    experiment: str
    model_kind: str = "singlet"
    sigma12: tuple | None = None
    b: tuple | None = None
    e0: float = 25.0
    scale: float = 1.0
    dt: float = 0.01
    kappa: float = 0.04
    threshold: float = 50.0
    coincidence_window: float = 0.0
    max_time: float = 0.0
    trials: int = 10000
    seed: int = 1
    workers: int = 1
    mode: str = PER_PAIR
    angles: tuple = CANONICAL_CHSH_ANGLES
    out_dir: str = "."
    out_format: str = "report"

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValidationError(f"model.kind must be one of {MODEL_KINDS}")
        if self.mode not in (PER_PAIR, RACE):
            raise ValidationError(f"run.mode must be '{PER_PAIR}' or '{RACE}'")
        if self.out_format not in FORMATS:
            raise ValidationError(f"output.format must be one of {FORMATS}")
        if int(self.trials) < 1:
            raise ValidationError("run.trials must be >= 1")
        if int(self.workers) < 1:
            raise ValidationError("run.workers must be >= 1")
        if len(self.angles) != 4:
            raise ValidationError("chsh.angles must hold exactly four angles")
        for name in ("dt", "kappa", "threshold"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"detector.{name} must be finite and > 0")
        if self.e0 < 0:
            raise ValidationError("model.e0 must be >= 0")
        for name, quotient in (
            ("kappa", self.kappa / self.dt),
            ("coincidence_window", self.coincidence_window / self.dt),
        ):
            if abs(quotient - round(quotient)) > 1e-9 * max(1.0, quotient):
                raise ValidationError(
                    f"detector.{name} must be an integer multiple of dt "
                    f"(got ratio {quotient})"
                )
        if self.kappa / self.dt < 1:
            raise ValidationError("detector.kappa must be at least dt")

    # -- builders -----------------------------------------------------------

    def detector_params(self):
        return DetectorParams(
            kappa=self.kappa,
            threshold=self.threshold,
            background=self.e0,
            max_time=self.max_time,
        )

    def coincidence_params(self):
        return CoincidenceParams(
            detector=self.detector_params(),
            coincidence_window=self.coincidence_window,
            counting_mode=self.mode,
        )

    def discretization(self):
        det = self.detector_params()
        max_bins = int(round(det.max_time / self.dt))
        return DiscretizationParams(dt=self.dt, max_bins=max_bins)

    def sigma12_matrix(self):
        if self.sigma12 is None:
            return None
        return _entries_to_matrix(self.sigma12, "model.sigma12")

    def b_matrix(self):
        if self.b is None:
            return None
        return _entries_to_matrix(self.b, "model.b")

    def correlation_model(self):
        """The bi-signal model selected by the model section."""
        if self.model_kind == "singlet":
            return singlet_model(self.e0, self.scale)
        if self.model_kind == "scalar":
            entries = self.sigma12_matrix()
            entry = complex(self.scale) if entries is None else entries[0, 0]
            return build_scalar_pair_model(entry, self.e0)
        if self.model_kind == "matrix":
            entries = self.sigma12_matrix()
            if entries is None:
                raise ValidationError("model.sigma12 is required for kind 'matrix'")
            return build_matrix_model(self.scale * entries, self.e0)
        raise ValidationError("model.kind 'single' has no bi-signal form")

    def single_signal_spec(self):
        """The single-signal model for born-single style experiments."""
        b = self.b_matrix()
        if b is None:
            raise ValidationError("model.b is required for single-signal runs")
        return SingleSignalSpec(b, self.e0)

    def echo(self):
        """Flat, deterministic key order mapping for report headers."""
        items = [
            ("experiment", self.experiment),
            ("model.kind", self.model_kind),
            ("model.e0", self.e0),
            ("model.scale", self.scale),
            ("detector.dt", self.dt),
            ("detector.kappa", self.kappa),
            ("detector.threshold", self.threshold),
            ("detector.coincidence_window", self.coincidence_window),
            ("detector.max_time", self.detector_params().max_time),
            ("run.trials", int(self.trials)),
            ("run.seed", int(self.seed)),
            ("run.mode", self.mode),
        ]
        if self.sigma12 is not None:
            items.insert(2, ("model.sigma12", list(self.sigma12)))
        if self.b is not None:
            items.insert(2, ("model.b", list(self.b)))
        if self.experiment == "chsh":
            items.append(("chsh.angles", [float(a) for a in self.angles]))
        return items


def _entries_to_matrix(entries, name):
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"{name} must be a list of [re, im] pairs")
    values = arr[:, 0] + 1j * arr[:, 1]
    m = int(round(np.sqrt(values.size)))
    if m * m != values.size:
        raise ValidationError(
            f"{name} must have a square number of entries, got {values.size}"
        )
    return values.reshape(m, m)


def _check_keys(data):
    for section, content in data.items():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section '{section}'")
        if not isinstance(content, dict):
            raise ValidationError(f"config section '{section}' must be a table")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ValidationError(
                    f"unknown key '{key}' in config section '{section}'"
                )


def _normalize_pairs(value, name):
    try:
        return tuple(tuple(float(x) for x in pair) for pair in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be a list of [re, im] pairs") from exc


def parse_config(path=None, overrides=None, experiment="chsh", preset=None):
    """Parse a TOML config file and apply command-line overrides.

    Precedence, lowest first: experiment preset, config file, overrides.
    Unknown sections or keys raise ValidationError naming the offender;
    malformed TOML raises ParseError with the parser's position message.
    """
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise ParseError(f"cannot read config file {path}: {exc}") from exc
    _check_keys(data)
    merged = {section: {} for section in _SCHEMA}
    if preset:
        _check_keys(preset)
        for section, content in preset.items():
            merged[section].update(content)
    for section, content in data.items():
        merged[section].update(content)
    if overrides:
        _check_keys(overrides)
        for section, content in overrides.items():
            for key, value in content.items():
                if value is not None:
                    merged[section][key] = value

    model = merged["model"]
    det = merged["detector"]
    run = merged["run"]
    chsh = merged["chsh"]
    output = merged["output"]
    kwargs = {"experiment": experiment}
    if "kind" in model:
        kwargs["model_kind"] = str(model["kind"])
    if "sigma12" in model:
        kwargs["sigma12"] = _normalize_pairs(model["sigma12"], "model.sigma12")
    if "b" in model:
        kwargs["b"] = _normalize_pairs(model["b"], "model.b")
    if "e0" in model:
        kwargs["e0"] = float(model["e0"])
    if "scale" in model:
        kwargs["scale"] = float(model["scale"])
    if "dt" in det:
        kwargs["dt"] = float(det["dt"])
    if "kappa" in det:
        kwargs["kappa"] = float(det["kappa"])
    if "threshold" in det:
        kwargs["threshold"] = float(det["threshold"])
    if "coincidence_window" in det:
        kwargs["coincidence_window"] = float(det["coincidence_window"])
    if "max_time" in det:
        kwargs["max_time"] = float(det["max_time"])
    if "trials" in run:
        kwargs["trials"] = int(run["trials"])
    if "seed" in run:
        kwargs["seed"] = int(run["seed"])
    if "workers" in run:
        kwargs["workers"] = int(run["workers"])
    if "mode" in run:
        kwargs["mode"] = str(run["mode"])
    if "angles" in chsh:
        angles = tuple(float(a) for a in chsh["angles"])
        kwargs["angles"] = angles
    if "dir" in output:
        kwargs["out_dir"] = str(output["dir"])
    if "format" in output:
        kwargs["out_format"] = str(output["format"])
    return ExperimentConfig(**kwargs)
