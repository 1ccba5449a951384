"""INI-style experiment plans.

A plan file has up to four kinds of sections::

    [system]        # SystemConfig fields
    protocol = P1
    M = 4
    ...

    [receiver]      # TALS stopping rule
    delta = 1e-8
    max_iters = 300
    pinv_rel_tol = 1e-12

    [experiment]
    receiver = pf_tals
    snr_grid = 0, 10, 20, 30
    trials = 100
    master_seed = 1
    output = results.csv

    [variant.k8_i20]  # optional, any number; each overrides [system] keys
    K = 8
    I = 20
    T = 100

Unknown sections or keys are errors reported by dotted key path
(``system.foo``).  With Protocol 2 a ``P`` entry is ignored with a warning.
"""

import configparser
from dataclasses import dataclass, field, fields, replace
import math
import warnings

from .channel_model import SystemConfig
from .errors import ConfigError
from .receivers import TalsOptions

RECEIVERS = ("pf_tals", "npf_tals", "perfect_csi_baseline", "pilot_assisted_baseline")

_INT_KEYS = ("M", "N", "N_r", "K", "I", "P", "T", "seed")
_STR_KEYS = ("protocol", "modulation", "theta_mode", "coding_mode", "selection_mode")
SYSTEM_KEYS = _INT_KEYS + _STR_KEYS + ("snr_db",)
RECEIVER_KEYS = ("delta", "max_iters", "pinv_rel_tol")
EXPERIMENT_KEYS = ("receiver", "snr_grid", "trials", "master_seed", "output")


@dataclass(frozen=True)
class ExperimentPlan:
    base: SystemConfig
    snr_grid: tuple
    trials: int
    receiver: str
    output_path: str
    master_seed: int
    options: TalsOptions = field(default_factory=TalsOptions)
    variants: tuple = ()  # (name, SystemConfig) pairs

    def __post_init__(self):
        if not self.snr_grid:
            raise ConfigError("snr_grid must not be empty", ("experiment.snr_grid",))
        if any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ConfigError("snr_grid must be strictly increasing", ("experiment.snr_grid",))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1", ("experiment.trials",))
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"receiver must be one of {RECEIVERS}", ("experiment.receiver",))
        for name, cfg in self.configs():
            _check_receiver(self.receiver, cfg, name)

    def configs(self):
        """``(name, SystemConfig)`` for every run; the base alone if no variants."""
        return self.variants or (("", self.base),)


def _check_receiver(receiver, cfg, name=""):
    want = {"pf_tals": "P1", "npf_tals": "P2"}.get(receiver)
    if want and cfg.protocol != want:
        where = f" (variant {name})" if name else ""
        raise ConfigError(f"receiver {receiver} needs protocol {want}{where}",
                          ("experiment.receiver", "system.protocol"))


def _convert(section, key, raw, errors):
    path = f"{section}.{key}"
    try:
        if key in _INT_KEYS or key in ("max_iters", "trials", "master_seed"):
            return int(raw, 0)
        if key in ("snr_db", "delta", "pinv_rel_tol"):
            return float(raw)
        if key == "snr_grid":
            return tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())
        if key == "protocol":
            return raw.strip().upper()
        return raw.strip()
    except ValueError:
        errors.append((path, f"{path}: cannot parse {raw!r}"))
        return None


def _parse(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (N vs n)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    return parser


def _section_values(parser, section, allowed, errors):
    values = {}
    if not parser.has_section(section):
        return values
    for key, raw in parser.items(section):
        if key not in allowed:
            errors.append((f"{section}.{key}", f"unknown key {section}.{key}"))
            continue
        value = _convert(section, key, raw, errors)
        if value is not None:
            values[key] = value
    return values


def _build_system(values, errors, prefix="system"):
    values = dict(values)
    if values.get("protocol", "P1") == "P2" and "P" in values:
        warnings.warn(f"{prefix}.P is ignored for protocol P2", UserWarning, stacklevel=4)
    if values.get("protocol", "P1") == "P2":
        values["P"] = 1
    try:
        return SystemConfig(**values)
    except ConfigError as exc:
        errors.extend((f"{prefix}.{f}", str(exc)) for f in exc.fields or ("?",))
    return None


def _raise(errors):
    if errors:
        paths = []
        for path, _ in errors:
            if path not in paths:
                paths.append(path)
        messages = "; ".join(dict.fromkeys(msg for _, msg in errors))
        raise ConfigError(f"invalid configuration ({', '.join(paths)}): {messages}", paths)


def validate_config(text):
    """Parse the ``[system]`` section and return a resolved :class:`SystemConfig`."""
    parser = _parse(text)
    errors = []
    values = _section_values(parser, "system", SYSTEM_KEYS, errors)
    _raise(errors)
    cfg = _build_system(values, errors)
    _raise(errors)
    return cfg


def load_plan(text, overrides=None):
    """Parse a full plan; ``overrides`` maps dotted keys to raw string values."""
    parser = _parse(text)
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.rpartition(".")
        if not section:
            raise ConfigError(f"override {dotted!r} needs a section prefix", (dotted,))
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(raw))

    errors = []
    known = {"system", "receiver", "experiment"}
    for section in parser.sections():
        if section not in known and not section.startswith("variant."):
            errors.append((section, f"unknown section [{section}]"))
    sys_values = _section_values(parser, "system", SYSTEM_KEYS, errors)
    rx_values = _section_values(parser, "receiver", RECEIVER_KEYS, errors)
    exp_values = _section_values(parser, "experiment", EXPERIMENT_KEYS, errors)
    variant_values = [(s[len("variant."):], _section_values(parser, s, SYSTEM_KEYS, errors))
                      for s in parser.sections() if s.startswith("variant.")]
    _raise(errors)

    base = _build_system(sys_values, errors)
    variants = []
    for name, values in variant_values:
        cfg = _build_system({**sys_values, **values}, errors, prefix=f"variant.{name}")
        variants.append((name, cfg))
    _raise(errors)

    for key in ("receiver", "snr_grid"):
        if key not in exp_values:
            errors.append((f"experiment.{key}", f"missing required key experiment.{key}"))
    _raise(errors)
    try:
        options = TalsOptions(**rx_values)
    except ValueError as exc:
        raise ConfigError(str(exc), [f"receiver.{k}" for k in rx_values]) from exc
    return ExperimentPlan(
        base=base,
        snr_grid=exp_values["snr_grid"],
        trials=exp_values.get("trials", 1),
        receiver=exp_values["receiver"],
        output_path=exp_values.get("output", "results.csv"),
        master_seed=exp_values.get("master_seed", 0),
        options=options,
        variants=tuple(variants),
    )


def plan_to_dict(plan):
    def cfg_dict(cfg):
        d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
        d["snr_db"] = None if math.isinf(d["snr_db"]) else d["snr_db"]
        return d

    return {
        "system": cfg_dict(plan.base),
        "variants": {name: cfg_dict(cfg) for name, cfg in plan.variants},
        "receiver_options": {"delta": plan.options.delta, "max_iters": plan.options.max_iters,
                             "pinv_rel_tol": plan.options.pinv_rel_tol},
        "experiment": {"receiver": plan.receiver, "snr_grid": list(plan.snr_grid),
                       "trials": plan.trials, "master_seed": plan.master_seed,
                       "output": plan.output_path},
    }


def with_system(plan, **changes):
    """Copy of ``plan`` with ``changes`` applied to the base and every variant."""
    return replace(plan, base=replace(plan.base, **changes),
                   variants=tuple((n, replace(c, **changes)) for n, c in plan.variants))
