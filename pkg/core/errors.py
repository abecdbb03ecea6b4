#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Errors
----------------
Exception hierarchy raised by the library; main.py maps it to exit codes
"""


class HierNavError(Exception):
    """Base class for every error raised by HierNav"""


class ShapeError(HierNavError, ValueError):
    """Dimension or architecture mismatch"""


class NumericError(HierNavError, ArithmeticError):
    """Non-finite action, gradient or loss"""


class MazeParseError(HierNavError, ValueError):
    """Maze text could not be parsed"""

    def __init__(self, message, line=None, column=None):
        location = ""
        if line is not None:
            location = f" (line {line}" + (f", column {column})" if column else ")")
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ConfigError(HierNavError, ValueError):
    """Invalid configuration document"""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ContractViolation(HierNavError, ValueError):
    """A precondition of a graph operation was violated"""


class EmptyDatasetError(HierNavError, ValueError):
    """No dynamics pairs could be extracted"""


class TrainingAborted(HierNavError, RuntimeError):
    """Learning produced a non-finite loss"""


class PlanningError(HierNavError, RuntimeError):
    """Unknown nodes, goal outside the lattice or unreachable goal"""


class ArtifactError(HierNavError):
    """A required artifact (library, replay data, dynamics model) is missing"""


class ExportError(HierNavError, RuntimeError):
    """Run directory is empty or malformed"""
