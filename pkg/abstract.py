#!/usr/bin/python3
import threading
from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    import discretize
    import model

# abstract.py - Abstract Base Classes, errors and miscellaneous object-oriented programming items.
# Copyright (C) 2019 Danya Generalov (https://github.com/danya02)
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.


class ToolkitError(Exception):
    """Base class of everything this package raises on purpose."""


class ParameterError(ToolkitError, ValueError):
    """A problem constant or a solver setting is outside its admissible range."""


class ConfigError(ParameterError):
    def __init__(self, message: str, line: str = None):
        """A run configuration could not be parsed or validated. 'line' is the offending input, if known."""
        super().__init__(message if line is None else f'{message}: {line!r}')
        self.line = line


class DomainError(ToolkitError, ValueError):
    def __init__(self, message: str, where=None):
        """
        An evaluation left the domain of the equation.

        'where' identifies the offending node index, sample index or abscissa so that callers
        (the Newton damping loop in particular) can report it.
        """
        super().__init__(message)
        self.where = where


class ConvergenceError(ToolkitError, RuntimeError):
    def __init__(self, message: str, residual: float = float('nan'), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NodalChangeError(ToolkitError):
    def __init__(self, expected: int, found: int):
        """A continuation step landed on a profile with a different number of sign changes."""
        super().__init__(f'nodal count changed from {expected} to {found}')
        self.expected = expected
        self.found = found


class NumericError(ToolkitError, ArithmeticError):
    """A dense linear algebra routine failed."""


class CollocationSystem(metaclass=ABCMeta):

    def __init__(self):
        """A discretized boundary value problem F(phi, lambda) = 0 on a spectral grid."""
        pass

    @property
    @abstractmethod
    def grid(self) -> 'discretize.SpectralGrid':
        """
        The collocation grid.
        It must be immutable, since systems are shared between branch-tracing threads.
        """

    @property
    @abstractmethod
    def params(self) -> 'model.ModelParams':
        """The problem constants n, delta, q."""

    @abstractmethod
    def reaction(self, phi: np.ndarray) -> np.ndarray:
        """
        The zero-order term g(phi) of the reduced equation, evaluated nodewise.

        The residual is L phi + mu(lambda) g(phi), with mu(lambda) = lambda / (1 + 1/delta).
        """

    @abstractmethod
    def reaction_derivative(self, phi: np.ndarray) -> np.ndarray:
        """
        The nodewise derivative g'(phi).
        It must be the exact derivative of reaction(), since the Jacobian is assembled from it.
        """


# from https://stackoverflow.com/a/6798042/5936187
class Singleton(type):
    _instances = {}
    _lock = threading.Lock()

    def __call__(cls, *args, **kwargs):
        with cls._lock:
            if cls not in cls._instances:
                cls._instances[cls] = super(Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]
