"""Acceptance gate: one test per headline criterion, judged at its stated tolerance."""

import pytest

from evotree import acceptance

LINES = []
_ctx = acceptance.Context()


@pytest.mark.parametrize("cid", [cid for cid, _ in acceptance.CRITERIA])
def test_criterion(cid):
    result = acceptance.run_criterion(cid, _ctx)
    LINES.append(result.line())
    print(result.line())
    assert result.passed, result.line()
