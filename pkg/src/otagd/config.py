"""Experiment configuration: strict INI files with five sections.

Every key has a type and a range check; unknown sections or keys are
errors.  Messages carry the line number of the offending entry.
"""

from __future__ import annotations

import configparser
import copy
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from otagd.channel import ChannelModel
from otagd.objectives import FederatedProblem, make_logistic, make_quadratic
from otagd.stable import StableParams
from otagd.trainer import Schedule, TrainConfig


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _opt_int(text: str):
    return None if text.strip().lower() == "auto" else int(text)


def _opt_float(text: str):
    return None if text.strip().lower() == "auto" else float(text)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _choice(*options):
    def conv(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return conv


# section -> key -> (converter, default, check or None, description of the check)
SCHEMA = {
    "problem": {
        "type": (_choice("quadratic", "logistic"), "quadratic", None, ""),
        "agents": (int, 100, lambda v: v >= 1, "must be >= 1"),
        "dim": (int, 10, lambda v: v >= 1, "must be >= 1"),
        "seed": (int, 0, lambda v: v >= 0, "must be >= 0"),
        "center_scale": (float, 1.0, lambda v: v > 0, "must be > 0"),
        "samples_per_agent": (int, 50, lambda v: v >= 1, "must be >= 1"),
        "l2_reg": (float, 0.1, lambda v: v > 0, "must be > 0"),
        "separation": (float, 1.0, lambda v: v >= 0, "must be >= 0"),
    },
    "channel": {
        "fading": (_choice("rayleigh", "gaussian"), "rayleigh", None, ""),
        "fading_mean": (float, 1.0, lambda v: v > 0, "must be > 0"),
        "fading_std": (_opt_float, None, lambda v: v is None or v >= 0, "must be >= 0"),
        "interference": (_bool, True, None, ""),
        "alpha": (float, 1.5, lambda v: 1.0 < v <= 2.0, "must lie in (1, 2]"),
        "delta": (float, 1.0, lambda v: v > 0, "must be > 0"),
        "mode": (_choice("direct", "waveform"), "direct", None, ""),
        "waveform_samples": (int, 0, lambda v: v >= 0, "must be >= 0"),
        "basis_seed": (int, 0, lambda v: v >= 0, "must be >= 0"),
    },
    "training": {
        "schedule": (_choice("theta_over_k", "power", "constant"), "theta_over_k", None, ""),
        "theta": (float, 1.0, lambda v: v > 0, "must be > 0"),
        "rho": (float, 0.5, lambda v: 0 < v < 1, "must lie in (0, 1)"),
        "eta": (float, 0.1, lambda v: v > 0, "must be > 0"),
        "momentum": (_bool, False, None, ""),
        "beta": (float, 0.0, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
        "rounds": (int, 1000, lambda v: v >= 0, "must be >= 0"),
        "trials": (int, 50, lambda v: v >= 1, "must be >= 1"),
        "init_distance": (float, 1.0, lambda v: v >= 0, "must be >= 0"),
        "seed": (int, 0, lambda v: v >= 0, "must be >= 0"),
        "workers": (int, 1, lambda v: v >= 1, "must be >= 1"),
    },
    "analysis": {
        "fit_kmin": (_opt_int, None, lambda v: v is None or v >= 1, "must be >= 1"),
        "fit_kmax": (_opt_int, None, lambda v: v is None or v >= 2, "must be >= 2"),
        "bound_L": (float, 1.0, lambda v: v > 0, "must be > 0"),
        "bound_C": (_opt_float, None, lambda v: v is None or v >= 0, "must be >= 0"),
        "calib_samples": (int, 100_000, lambda v: v >= 1, "must be >= 1"),
        "calib_quantile": (float, 0.999, lambda v: 0 < v <= 1, "must lie in (0, 1]"),
        "bound_k": (_int_list, (10, 100, 1000), lambda v: len(v) > 0 and min(v) >= 1, "needs positive integers"),
        "gen_B": (float, 1.0, lambda v: v > 0, "must be > 0"),
        "gen_lambda": (_opt_float, None, lambda v: v is None or v > 0, "must be > 0"),
        "gen_dataset_size": (int, 60_000, lambda v: v >= 1, "must be >= 1"),
        "gen_p": (float, 0.05, lambda v: 0 < v < 1, "must lie in (0, 1)"),
        "check_below": (float, 0.3, lambda v: v >= 0, "must be >= 0"),
        "check_above": (float, 0.2, lambda v: v >= 0, "must be >= 0"),
    },
    "output": {
        "directory": (str, "results", lambda v: len(v) > 0, "must be nonempty"),
        "figures": (_bool, True, None, ""),
        "thin_above": (int, 1000, lambda v: v >= 1, "must be >= 1"),
        "points_per_decade": (int, 200, lambda v: v >= 1, "must be >= 1"),
    },
}


@dataclass
class ExperimentConfig:
    """Validated settings; ``sections[name][key]`` holds typed values."""

    sections: dict = field(default_factory=lambda: {s: {k: v[1] for k, v in keys.items()}
                                                    for s, keys in SCHEMA.items()})
    source: str | None = None

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    @property
    def alpha(self) -> float:
        return self.sections["channel"]["alpha"]

    def copy_with(self, section: str, key: str, value) -> "ExperimentConfig":
        out = ExperimentConfig(copy.deepcopy(self.sections), self.source)
        out.sections[section][key] = value
        validate(out)
        return out

    def build_problem(self) -> FederatedProblem:
        p = self.sections["problem"]
        if p["type"] == "quadratic":
            return make_quadratic(p["agents"], p["dim"], seed=p["seed"], center_scale=p["center_scale"])
        return make_logistic(p["agents"], p["dim"], p["samples_per_agent"], p["l2_reg"],
                             seed=p["seed"], separation=p["separation"])

    def build_channel(self) -> ChannelModel:
        c = self.sections["channel"]
        return ChannelModel(
            num_agents=self.sections["problem"]["agents"],
            fading_mean=c["fading_mean"],
            fading=c["fading"],
            fading_std=c["fading_std"] if c["fading"] == "gaussian" else None,
            interference=StableParams(c["alpha"], c["delta"]) if c["interference"] else None,
            waveform_samples=c["waveform_samples"],
        )

    def schedule(self) -> Schedule:
        t = self.sections["training"]
        value = {"theta_over_k": t["theta"], "power": t["rho"], "constant": t["eta"]}[t["schedule"]]
        return Schedule(t["schedule"], value)

    def build_train_config(self) -> TrainConfig:
        t = self.sections["training"]
        return TrainConfig(
            schedule=self.schedule(),
            momentum=t["momentum"],
            beta=t["beta"],
            rounds=t["rounds"],
            trials=t["trials"],
            init_distance=t["init_distance"],
            seed=t["seed"],
            mode=self.sections["channel"]["mode"],
            basis_seed=self.sections["channel"]["basis_seed"],
            workers=t["workers"],
        )

    def to_dict(self) -> dict:
        return {s: {k: (list(v) if isinstance(v, tuple) else v) for k, v in keys.items()}
                for s, keys in self.sections.items()}

    def dumps(self) -> str:
        lines = []
        for s, keys in self.sections.items():
            lines.append(f"[{s}]")
            for k, v in keys.items():
                lines.append(f"{k} = {_format_value(v)}")
            lines.append("")
        return "\n".join(lines)


def _format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def _line_index(text: str) -> dict:
    where = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), i)
    return where


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    where = _line_index(text)

    def at(section, key=None):
        line = where.get((section, key))
        return f"line {line}: " if line else ""

    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from None

    cfg = ExperimentConfig(source=source)
    problems = []
    for section in parser.sections():
        if section not in SCHEMA:
            problems.append(f"{at(section)}unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                problems.append(f"{at(section, key)}unknown key '{key}' in [{section}]")
                continue
            conv, _, check, msg = SCHEMA[section][key]
            try:
                value = conv(raw)
            except ValueError as exc:
                problems.append(f"{at(section, key)}[{section}] {key}: {exc}")
                continue
            if check is not None and not check(value):
                problems.append(f"{at(section, key)}[{section}] {key}: {msg}, got {raw.strip()}")
                continue
            cfg.sections[section][key] = value
    if problems:
        raise ConfigError(problems)
    validate(cfg, at)
    return cfg


def validate(cfg: ExperimentConfig, at=lambda s, k=None: "") -> None:
    """Cross-field checks; also re-runs the per-key checks."""
    problems = []
    for section, keys in SCHEMA.items():
        for key, (_, _, check, msg) in keys.items():
            value = cfg.sections[section][key]
            if check is not None and not check(value):
                problems.append(f"{at(section, key)}[{section}] {key}: {msg}, got {value!r}")
    c, t, a = cfg["channel"], cfg["training"], cfg["analysis"]
    if c["fading"] == "gaussian" and c["fading_std"] is None:
        problems.append(f"{at('channel', 'fading')}[channel] gaussian fading needs fading_std")
    if c["fading"] == "rayleigh" and c["fading_std"] is not None:
        problems.append(f"{at('channel', 'fading_std')}[channel] fading_std is implied by Rayleigh fading; set it to auto")
    if t["beta"] > 0 and not t["momentum"]:
        problems.append(f"{at('training', 'beta')}[training] beta > 0 requires momentum = on")
    if c["mode"] == "waveform" and 0 < c["waveform_samples"] < cfg["problem"]["dim"]:
        problems.append(f"{at('channel', 'waveform_samples')}[channel] waveform_samples must be >= dim")
    if a["fit_kmin"] is not None and a["fit_kmax"] is not None and a["fit_kmin"] >= a["fit_kmax"]:
        problems.append(f"{at('analysis', 'fit_kmin')}[analysis] fit_kmin must be < fit_kmax")
    if a["fit_kmax"] is not None and a["fit_kmax"] > t["rounds"]:
        problems.append(f"{at('analysis', 'fit_kmax')}[analysis] fit_kmax exceeds rounds")
    if problems:
        raise ConfigError(problems)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse_config(text, source=str(path))


def default_config_text() -> str:
    return resources.files("otagd").joinpath("configs/default.ini").read_text()


def default_config() -> ExperimentConfig:
    return parse_config(default_config_text(), source="default.ini")
