"""Experiment configuration and its ``key = value`` file format.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
Unknown keys are rejected.  Recognised keys (defaults in parentheses):

dataset
    ``preset`` (blobs3), ``data`` (CSV path; overrides the preset),
    ``data_seed`` (the run seed), ``samples_per_domain``, ``class_separation``,
    ``noise_sigma``, ``rotations`` (comma-separated degrees, sources then target)
model
    ``strategy`` (gpg | lps | static), ``backbone_hidden`` (64,32),
    ``dynamic_hidden`` (empty), ``embed_dim`` (16), ``generator_hidden`` (32),
    ``pretrain_epochs`` (30, LPS only)
losses
    ``lambda_mar`` (1.0), ``lambda_kl`` (1.0), ``kl_anneal_epochs`` (10)
selection
    ``selection`` (detective | random | entropy | margin), ``lambda_dom`` (7.5),
    ``lambda_pre`` (0.5), ``lambda_u`` (0.01), ``tau`` (1.0), ``density_k`` (10),
    ``disable_ius``, ``disable_cdc``, ``disable_udn`` (false)
optimisation
    ``batch_size`` (64), ``momentum`` (0.9), ``weight_decay`` (5e-5),
    ``learning_rate`` (4e-4), ``max_grad_norm`` (0 = no clipping),
    ``target_batch_size`` (0 = pool labelled target samples with the sources)
protocol
    ``budget_fraction`` (0.05), ``rounds`` (5), ``epochs_per_round`` (30),
    ``reinit_each_round`` (false), ``seed`` (0), ``label`` (derived)
"""

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError

SELECTIONS = ("detective", "random", "entropy", "margin")


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "blobs3"
    data: str | None = None
    data_seed: int | None = None
    samples_per_domain: int | None = None
    class_separation: float | None = None
    noise_sigma: float | None = None
    rotations: tuple | None = None

    strategy: str = "gpg"
    backbone_hidden: tuple = (64, 32)
    dynamic_hidden: tuple = ()
    embed_dim: int = 16
    generator_hidden: int = 32
    pretrain_epochs: int = 30

    lambda_mar: float = 1.0
    lambda_kl: float = 1.0
    kl_anneal_epochs: int = 10

    selection: str = "detective"
    lambda_dom: float = 7.5
    lambda_pre: float = 0.5
    lambda_u: float = 0.01
    tau: float = 1.0
    density_k: int = 10
    disable_ius: bool = False
    disable_cdc: bool = False
    disable_udn: bool = False

    batch_size: int = 64
    target_batch_size: int = 0
    momentum: float = 0.9
    weight_decay: float = 5e-5
    learning_rate: float = 4e-4
    max_grad_norm: float = 0.0

    budget_fraction: float = 0.05
    rounds: int = 5
    epochs_per_round: int = 30
    reinit_each_round: bool = False
    seed: int = 0
    label: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 <= self.budget_fraction <= 1:
            raise ConfigError(f"budget_fraction must lie in [0, 1], got {self.budget_fraction}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        for name in ("lambda_mar", "lambda_kl", "lambda_dom", "lambda_pre", "lambda_u"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.strategy not in ("gpg", "lps", "static"):
            raise ConfigError(f"strategy must be gpg, lps or static, got {self.strategy!r}")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}, got {self.selection!r}")
        if self.batch_size < 1 or self.epochs_per_round < 0 or self.pretrain_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epoch counts >= 0")
        if self.learning_rate < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ConfigError("need learning_rate >= 0, weight_decay >= 0, 0 <= momentum < 1")
        if self.density_k < 1:
            raise ConfigError(f"density_k must be >= 1, got {self.density_k}")

    @property
    def effective_strategy(self):
        return "static" if self.disable_udn else self.strategy

    @property
    def run_label(self):
        if self.label:
            return self.label
        if self.selection != "detective":
            return self.selection.capitalize()
        parts = [tag for flag, tag in (
            (self.disable_udn, "-UDN"),
            (self.disable_ius, "-IUS"),
            (self.disable_cdc, "-CDC"),
        ) if flag]
        return "".join(parts) or "Detective"

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _tuple_of_ints(text):
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _tuple_of_floats(text):
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


_PARSERS = {
    "backbone_hidden": _tuple_of_ints,
    "dynamic_hidden": _tuple_of_ints,
    "rotations": _tuple_of_floats,
}


def _parse_value(key, text):
    if key in _PARSERS:
        return _PARSERS[key](text)
    default = _FIELDS[key].default
    kind = type(default)
    if key in ("data", "label", "preset"):
        return text
    if key in ("data_seed", "samples_per_domain"):
        return int(text)
    if key in ("class_separation", "noise_sigma"):
        return float(text)
    if kind is bool:
        try:
            return _BOOL[text.lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {text!r}") from None
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def parse_overrides(text, source="<config>"):
    """``key = value`` lines to a dict of typed values, without building a config."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def parse_config(text, source="<config>"):
    return ExperimentConfig(**parse_overrides(text, source))


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def dump_config(cfg):
    lines = []
    for f in fields(ExperimentConfig):
        val = getattr(cfg, f.name)
        if val is None:
            continue
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        elif isinstance(val, bool):
            val = str(val).lower()
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
