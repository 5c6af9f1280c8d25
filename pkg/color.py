#!/usr/bin/python3
import colorsys
import logging

import pygame

l = logging.getLogger(__name__)


# color.py - Helper functions for picking and shifting branch colours.
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

GOLDEN_TURN = 0.618033988749895

EVENT_COLORS = {
    'fold': pygame.Color(0, 0, 0),
    'sigma-zero': pygame.Color(200, 0, 0),
    'positivity-loss': pygame.Color(120, 60, 0),
    'lambda-floor': pygame.Color(90, 90, 90),
    'step-failure': pygame.Color(160, 0, 160),
}


def boost(val: float) -> int:
    return int(val * 255)


def branch_color(index: int, value: float = 0.85) -> pygame.Color:
    """Well separated hues for consecutive branch indices."""
    h = (index * GOLDEN_TURN) % 1
    return pygame.Color(*[boost(i) for i in colorsys.hsv_to_rgb(h, 1, value)])


def event_color(kind: str) -> pygame.Color:
    if kind not in EVENT_COLORS:
        l.warning('No colour for event kind %s', kind)
    return EVENT_COLORS.get(kind, pygame.Color(0, 0, 0))
