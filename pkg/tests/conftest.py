from __future__ import annotations

from pathlib import Path

import pytest

from fmgen.model import FeatureDiagram, parse_model

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
GOLDENS = Path(__file__).resolve().parent / "goldens"


@pytest.fixture(scope="session")
def dialog_diagram() -> FeatureDiagram:
    return parse_model((FIXTURES / "dialog.fm").read_text())


@pytest.fixture(scope="session")
def view_diagram() -> FeatureDiagram:
    return parse_model((FIXTURES / "view.fm").read_text())
