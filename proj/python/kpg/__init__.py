"""g-matrix and Rabi-map simulator for electrically driven hole spin qubits.

Thin wrapper over the compiled core: each operation reads a structured-text
device configuration and returns the same document the command line tool
writes, parsed into plain dictionaries.
"""

import json as _json
import os as _os

# Installed wheels place the compiled module inside this package; for
# in-tree runs the build system exports its directory instead.
if "KPG_MODULE_DIR" in _os.environ:
    __path__.append(_os.environ["KPG_MODULE_DIR"])

from ._kpg import (
    SimulationError,
    config_hash,
    g_matrices,
    solve_json,
    rabimap_json,
    sweep_json,
    check_json,
    symmetry_json,
)

__all__ = [
    "SimulationError",
    "config_hash",
    "g_matrices",
    "solve",
    "rabimap",
    "sweep",
    "check",
    "symmetry",
]


def solve(config, cache=""):
    """g-matrix report for the configured device as a dictionary."""
    return _json.loads(solve_json(str(config), str(cache)))


def rabimap(config, cache="", threads=1):
    """Larmor/Rabi frequency map over field orientations as a dictionary."""
    return _json.loads(rabimap_json(str(config), str(cache), threads))


def sweep(config, cache=""):
    """Gate-voltage or strain sweep as a dictionary."""
    return _json.loads(sweep_json(str(config), str(cache)))


def check(config, cache=""):
    """Physics invariant audit as a dictionary."""
    return _json.loads(check_json(str(config), str(cache)))


def symmetry(config):
    """Mirror symmetry survey as a dictionary."""
    return _json.loads(symmetry_json(str(config)))
