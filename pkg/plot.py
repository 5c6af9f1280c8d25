#!/usr/bin/python3
import logging
from typing import Optional, Sequence, Tuple

import pygame

import color
from continuation import Branch, DegeneracyReport

l = logging.getLogger(__name__)

# plot.py - Branch diagrams in the (lambda, s) plane, drawn on pygame surfaces and saved as PNG.
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

MARGIN = 24
BACKGROUND = pygame.Color(255, 255, 255)
AXIS = pygame.Color(190, 190, 190)


class Viewport:
    def __init__(self, lam_range: Tuple[float, float], s_range: Tuple[float, float], size: Tuple[int, int]):
        """Maps (lambda, s) to pixels, lambda to the right and s upwards."""
        self.lam_lo, self.lam_hi = _padded(*lam_range)
        self.s_lo, self.s_hi = _padded(*s_range)
        self.width, self.height = size

    def to_pixel(self, lam: float, s: float) -> Tuple[int, int]:
        x = MARGIN + (lam - self.lam_lo) / (self.lam_hi - self.lam_lo) * (self.width - 2 * MARGIN)
        y = self.height - MARGIN - (s - self.s_lo) / (self.s_hi - self.s_lo) * (self.height - 2 * MARGIN)
        return int(round(x)), int(round(y))


def _padded(lo: float, hi: float) -> Tuple[float, float]:
    if hi - lo < 1e-12:
        pad = max(abs(lo), 1.0) * 0.05
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def render_branches(branches: Sequence[Branch], size: Tuple[int, int] = (640, 480),
                    reports: Sequence[Optional[DegeneracyReport]] = ()) -> pygame.Surface:
    """Draw every branch as a polyline with its events; the trivial branch s = 0 is the horizontal axis."""
    surface = pygame.Surface(size)
    surface.fill(BACKGROUND)
    points = [(p.lam, p.s_coord) for b in branches for p in b.points]
    points += [(r.lambda_star, r.s_star) for r in reports if r is not None]
    if not points:
        l.warning('Nothing to draw')
        return surface
    lams = [p[0] for p in points]
    ss = [p[1] for p in points] + [0.0]
    view = Viewport((min(lams), max(lams)), (min(ss), max(ss)), size)

    left, zero = view.to_pixel(view.lam_lo, 0.0)
    right, _ = view.to_pixel(view.lam_hi, 0.0)
    pygame.draw.line(surface, AXIS, (left, zero), (right, zero))

    for i, branch in enumerate(branches):
        pixels = [view.to_pixel(p.lam, p.s_coord) for p in branch.points]
        c = color.branch_color(i)
        if len(pixels) > 1:
            pygame.draw.lines(surface, c, False, pixels, 2)
        elif pixels:
            pygame.draw.circle(surface, c, pixels[0], 2)
        for event in branch.events:
            if 0 <= event.index < len(pixels):
                pygame.draw.circle(surface, color.event_color(event.kind), pixels[event.index], 4, 1)
    for report in reports:
        if report is None:
            continue
        x, y = view.to_pixel(report.lambda_star, report.s_star)
        c = color.event_color('sigma-zero')
        pygame.draw.line(surface, c, (x - 5, y - 5), (x + 5, y + 5), 2)
        pygame.draw.line(surface, c, (x - 5, y + 5), (x + 5, y - 5), 2)
    return surface


def save_branches(branches: Sequence[Branch], path: str, size: Tuple[int, int] = (640, 480),
                  reports: Sequence[Optional[DegeneracyReport]] = ()) -> str:
    surface = render_branches(branches, size, reports)
    pygame.image.save(surface, path)
    l.info('Wrote branch diagram %s', path)
    return path
