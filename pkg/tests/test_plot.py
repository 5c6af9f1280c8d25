import pygame
import pytest

import color
import continuation
import plot


@pytest.fixture
def branches(system):
    return [continuation.trace_trivial(1.0, 5.0, 4, system), continuation.trace_trivial(5.0, 9.0, 3, system)]


class TestViewport:

    def test_corners(self):
        view = plot.Viewport((0.0, 10.0), (-1.0, 1.0), (200, 100))
        left, bottom = view.to_pixel(view.lam_lo, view.s_lo)
        right, top = view.to_pixel(view.lam_hi, view.s_hi)
        assert (left, bottom) == (plot.MARGIN, 100 - plot.MARGIN)
        assert (right, top) == (200 - plot.MARGIN, plot.MARGIN)

    def test_degenerate_range(self):
        view = plot.Viewport((3.0, 3.0), (0.0, 0.0), (100, 100))
        assert view.lam_lo < 3.0 < view.lam_hi
        assert view.s_lo < 0.0 < view.s_hi


class TestRender:

    def test_surface(self, branches):
        surface = plot.render_branches(branches, (320, 240))
        assert surface.get_size() == (320, 240)
        assert surface.get_at((0, 0)) == plot.BACKGROUND

    def test_nothing(self):
        surface = plot.render_branches([], (50, 40))
        assert surface.get_at((25, 20)) == plot.BACKGROUND

    def test_png(self, branches, tmp_path):
        path = plot.save_branches(branches, str(tmp_path / 'b.png'), (160, 120))
        assert pygame.image.load(path).get_size() == (160, 120)


class TestColor:

    def test_branch_colors_differ(self):
        assert color.branch_color(0) != color.branch_color(1)
        assert color.branch_color(3) == color.branch_color(3)

    def test_event_colors(self):
        for kind in continuation.EVENT_KINDS:
            assert isinstance(color.event_color(kind), pygame.Color)

    def test_boost(self):
        assert color.boost(1.0) == 255
