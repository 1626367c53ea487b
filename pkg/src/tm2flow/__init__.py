"""Compile Turing machines into polynomial flows on R^n and S^n and check them against the discrete run."""
from . import analytic, corpus, euler, flow, graph, machine, pipeline, pivp, poly, sphere
from .machine import Configuration, EncodedConfig, Tape, TuringMachine, decode, encode, parse_machine, parse_tape
from .pipeline import HaltCheckConfig, halt_check
from .poly import Polynomial, PolyVectorField

__version__ = "0.1.0"

__all__ = [
    "analytic", "corpus", "euler", "flow", "graph", "machine", "pipeline", "pivp", "poly", "sphere",
    "Configuration", "EncodedConfig", "Tape", "TuringMachine", "decode", "encode", "parse_machine",
    "parse_tape", "HaltCheckConfig", "halt_check", "Polynomial", "PolyVectorField", "__version__",
]
