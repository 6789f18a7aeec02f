"""
Shared fixtures for the a11yfix test suite.
"""

import sys
from pathlib import Path

import pytest
import yaml

# Add the project root to the Python path
PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from cost import CostLedger  # noqa: E402
from llm import CallSession, MockProvider  # noqa: E402
from rules import default_registry  # noqa: E402
from schemas import Stage  # noqa: E402

PAGE_TEMPLATE = (
    '<!DOCTYPE html><html lang="en"><head><title>Fixture</title>{head}</head>'
    '<body>{body}</body></html>'
)


def make_page(main: str = "", head: str = "", body: str = None) -> str:
    """A complete page; content goes inside <main> unless a full body is given."""
    if body is None:
        body = f"<main>{main}</main>"
    return PAGE_TEMPLATE.format(head=head, body=body)


@pytest.fixture
def page():
    return make_page


@pytest.fixture
def registry():
    return default_registry()


@pytest.fixture
def ledger():
    return CostLedger()


@pytest.fixture
def mock_session(ledger):
    """Factory: a CallSession over a MockProvider built from a script dict."""
    def factory(script=None, file_id="page.html", stage=Stage.AGENT):
        provider = MockProvider(script or {})
        return CallSession(provider, ledger, file_id, stage)
    return factory


@pytest.fixture
def write_script(tmp_path):
    """Factory: dump a mock script to YAML and return its path."""
    def factory(script, name="mock.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(script, sort_keys=False), encoding="utf-8")
        return path
    return factory


@pytest.fixture
def make_dataset(tmp_path):
    """Factory: lay out scraped_sites/ (and scraped_sites_fixed/) under tmp_path."""
    def factory(violated, fixed=None, root_name="dataset"):
        root = tmp_path / root_name
        violated_dir = root / "scraped_sites"
        violated_dir.mkdir(parents=True)
        for name, html in violated.items():
            (violated_dir / name).write_text(html, encoding="utf-8")
        if fixed is not None:
            fixed_dir = root / "scraped_sites_fixed"
            fixed_dir.mkdir()
            for name, html in fixed.items():
                (fixed_dir / name).write_text(html, encoding="utf-8")
        return root
    return factory
