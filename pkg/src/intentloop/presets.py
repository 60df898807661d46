"""Error-model preset bundles stored as TOML.

A bundle file carries ``[preset.<name>]`` tables whose keys are exactly
the error-model fields, ``[detector.<name>]`` tables for feedback-path
detector noise, and a ``[refinement]`` table with loop settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .feedback import DetectorConfig
from .generator import ErrorModelConfig


@dataclass
class PresetBundle:
    presets: dict[str, ErrorModelConfig]
    detectors: dict[str, DetectorConfig] = field(default_factory=dict)
    max_iterations: int = 3
    max_signals_per_iteration: int = 16

    def preset(self, name: str) -> ErrorModelConfig:
        if name not in self.presets:
            raise KeyError(f"unknown preset {name!r}; have {sorted(self.presets)}")
        return self.presets[name]

    def detector(self, name: str) -> DetectorConfig:
        return self.detectors.get(name, DetectorConfig())


def _parse_bundle(doc: dict) -> PresetBundle:
    presets = {
        name: ErrorModelConfig.from_dict(table)
        for name, table in doc.get("preset", {}).items()
    }
    detectors = {
        name: DetectorConfig(**table)
        for name, table in doc.get("detector", {}).items()
    }
    refinement = doc.get("refinement", {})
    return PresetBundle(
        presets=presets,
        detectors=detectors,
        max_iterations=refinement.get("max_iterations", 3),
        max_signals_per_iteration=refinement.get("max_signals_per_iteration", 16),
    )


def load_presets(path=None) -> PresetBundle:
    """Load a bundle; defaults to the packaged calibrated presets."""
    if path is None:
        data = resources.files("intentloop").joinpath("data/presets.toml").read_bytes()
        return _parse_bundle(tomllib.loads(data.decode()))
    with open(path, "rb") as fh:
        return _parse_bundle(tomllib.load(fh))


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(round(float(value), 8))
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_toml_value(v)}" for k, v in sorted(value.items()))
        return "{ " + inner + " }"
    raise TypeError(f"cannot serialize {value!r}")


def dump_presets(bundle: PresetBundle) -> str:
    lines = ["# Calibrated error-model presets.", ""]
    for name in sorted(bundle.presets):
        lines.append(f"[preset.{name}]")
        for key, value in bundle.presets[name].to_dict().items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    for name in sorted(bundle.detectors):
        lines.append(f"[detector.{name}]")
        for key, value in bundle.detectors[name].to_dict().items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    lines.append("[refinement]")
    lines.append(f"max_iterations = {bundle.max_iterations}")
    lines.append(
        f"max_signals_per_iteration = {bundle.max_signals_per_iteration}")
    lines.append("")
    return "\n".join(lines)


def save_presets(bundle: PresetBundle, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_presets(bundle))
