"""Run configuration (YAML)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .phonotactics import parse_smoothing


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LanguageConfig:
    id: str
    unimorph: Path
    pron: Path | None = None
    g2p: Path | None = None
    freq: Path | None = None
    raw_text: Path | None = None

    def paths(self) -> list[Path]:
        return [p for p in (self.unimorph, self.pron, self.g2p, self.freq, self.raw_text) if p is not None]


@dataclass(frozen=True)
class RunConfig:
    languages: tuple[LanguageConfig, ...]
    folds_phon: int = 10
    folds_morph: int = 30
    ngram_order: int = 4
    smoothing: str = "witten_bell"
    inflection_alpha: float = 0.1
    min_accuracy: float = 0.75
    alpha: float = 0.05
    seed: int = 0
    output_dir: Path = Path("out")
    jobs: int = 1
    audit: bool = False

    def validate(self) -> "RunConfig":
        if not self.languages:
            raise ConfigError("no languages configured")
        ids = [lang.id for lang in self.languages]
        if len(set(ids)) != len(ids):
            raise ConfigError("language ids must be unique")
        for lang in self.languages:
            if (lang.pron is None) == (lang.g2p is None):
                raise ConfigError(f"{lang.id}: give exactly one of 'pron' or 'g2p'")
            if (lang.freq is None) == (lang.raw_text is None):
                raise ConfigError(f"{lang.id}: give exactly one of 'freq' or 'raw_text'")
            for p in lang.paths():
                if not p.exists():
                    raise ConfigError(f"{lang.id}: missing input file {p}")
        if self.folds_phon < 2 or self.folds_morph < 2:
            raise ConfigError("fold counts must be at least 2")
        if self.ngram_order < 1:
            raise ConfigError("ngram_order must be at least 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not self.inflection_alpha > 0:
            raise ConfigError("inflection_alpha must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        try:
            parse_smoothing(self.smoothing)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def with_overrides(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def parameters(self) -> dict:
        """Scalar settings, for output metadata."""
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name not in ("languages", "output_dir", "jobs")}


_LANG_KEYS = {"id", "unimorph", "pron", "g2p", "freq", "raw_text"}
_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"languages"}


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML config; relative paths resolve against the config file's directory."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    base = path.parent
    unknown = set(raw) - _RUN_KEYS - {"languages"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    langs = []
    for block in raw.get("languages") or []:
        extra = set(block) - _LANG_KEYS
        if extra or "id" not in block or "unimorph" not in block:
            raise ConfigError(f"bad language block {block!r}")
        langs.append(LanguageConfig(
            id=str(block["id"]),
            **{k: (base / block[k]) for k in _LANG_KEYS - {"id"} if block.get(k)},
        ))
    settings = {k: v for k, v in raw.items() if k != "languages"}
    if "output_dir" in settings:
        settings["output_dir"] = base / settings["output_dir"]
    try:
        cfg = RunConfig(languages=tuple(langs), **settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
