import doctest
import importlib

import pytest


@pytest.mark.parametrize("module", ["rvstar.estimate", "rvstar.spectral", "rvstar.starspace"])
def test_docstring_examples(module):
    result = doctest.testmod(importlib.import_module(module))
    assert result.failed == 0
