"""Synthesis of deterministic fault-tolerant logical-zero preparation protocols.

Small CSS codes (distance below five) admit preparation protocols where a
non-destructive verification layer measures a few stabilizers and every
nonzero outcome branches into a short, deterministic correction circuit.
This package derives such protocols automatically: encoding circuit,
solver-certified minimal verification measurements, syndrome-conditioned
correction circuits, flag handling for ancilla hook errors, and validation
by both exhaustive single-fault injection and Monte Carlo sampling.
"""

__version__ = "1.0.0"

_EXPORTS = {
    "CssCode": "csscode",
    "PauliKind": "csscode",
    "catalog": "csscode",
    "catalog_names": "csscode",
    "validate": "csscode",
    "DetFtProtocol": "protocol",
    "assemble": "protocol",
    "global_optimize": "protocol",
    "metrics": "protocol",
    "NoiseModel": "simnoise",
    "estimate_ler": "simnoise",
    "exhaustive_single_fault_check": "simnoise",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        mod = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        return getattr(mod, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
