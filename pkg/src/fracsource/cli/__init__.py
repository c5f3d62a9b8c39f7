"""Scenario-driven command line front end.

Submodules are imported lazily so that ``fracsource --threads N`` can set
the BLAS thread count before numpy is loaded.
"""
import importlib

_EXPORTS = {
    "RunReport": "pipeline",
    "StageError": "pipeline",
    "run_scenario": "pipeline",
    "Scenario": "scenario",
    "ScenarioError": "scenario",
    "ScenarioParseError": "scenario",
    "bundled_scenarios": "scenario",
    "load_scenario": "scenario",
    "parse_scenario": "scenario",
    "verify_all": "verify",
}

__all__ = list(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(importlib.import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
