from __future__ import annotations

from pathlib import Path

import pytest
import yaml

import irregphon
from irregphon.synthetic import generate_language

TOY_CONFIG = Path(irregphon.__file__).parent / "data" / "toy" / "config.yaml"


def write_config(directory: Path, blocks: list[dict], **settings) -> Path:
    cfg = {"seed": 11, "output_dir": "out", **settings, "languages": blocks}
    path = directory / "config.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def toy_config() -> Path:
    return TOY_CONFIG


@pytest.fixture(scope="session")
def gated_corpus(tmp_path_factory) -> Path:
    """Two learnable languages plus one with random (unlearnable) inflection."""
    d = tmp_path_factory.mktemp("gated")
    blocks = [
        generate_language("alpha", 1, n_lexemes=80, length_freq_coupling=0.5).write(d),
        generate_language("beta", 2, n_lexemes=80, irregular_rate=0.1).write(d, "raw", "g2p"),
        generate_language("chaos", 3, n_lexemes=80, random_inflection=True).write(d),
    ]
    return write_config(d, blocks)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)
