"""
Bundled grid cases.
"""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, Tuple

from app.schemas.fixture import FixtureManifest
from app.schemas.grid import GridCase
from app.services.case_parser import parse_case
from app.utils.errors import UnknownFixtureError

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"


@lru_cache
def _manifests() -> Dict[str, FixtureManifest]:
    raw = json.loads((FIXTURE_DIR / "manifests.json").read_text(encoding="utf-8"))
    return {name: FixtureManifest(name=name, **entry) for name, entry in raw.items()}


def fixture_names() -> Tuple[str, ...]:
    return tuple(sorted(_manifests()))


def fixture_text(name: str) -> str:
    """
    Raw case-file text of a bundled fixture.

    Raises:
        UnknownFixtureError: ``name`` is not bundled
    """
    manifest = _manifests().get(name)
    if manifest is None:
        raise UnknownFixtureError(
            f"unknown fixture '{name}' (available: {', '.join(fixture_names())})"
        )
    return (FIXTURE_DIR / manifest.file).read_text(encoding="utf-8")


def load_fixture(name: str) -> Tuple[GridCase, FixtureManifest]:
    """
    Parse a bundled fixture.

    Returns:
        (GridCase, FixtureManifest)

    Raises:
        UnknownFixtureError: ``name`` is not bundled
    """
    case = parse_case(fixture_text(name))
    logger.debug("Loaded fixture %s", name)
    return case, _manifests()[name]
