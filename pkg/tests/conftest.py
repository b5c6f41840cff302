import warnings
from fractions import Fraction

import pytest

from polyimage.geometry import Polyhedron, halfspaces, minimal_presentation

warnings.filterwarnings("ignore", category=RuntimeWarning, module="numpy")


@pytest.fixture(scope="session")
def wedge() -> Polyhedron:
    """The standing end-to-end fixture: x2 <= 0, x2 <= x1, x2 <= -x1.

    The first constraint is implied by the other two, so the minimal
    presentation has two facets (both rays from the origin).
    """
    return halfspaces(2, ([0, -1], 0), ([1, -1], 0), ([-1, -1], 0))


@pytest.fixture(scope="session")
def wedge_min(wedge) -> Polyhedron:
    return minimal_presentation(wedge)


@pytest.fixture(scope="session")
def tent() -> Polyhedron:
    """x1 <= x2 <= 2 - x1: floor a = x1, ceiling b = 2 - x1."""
    return halfspaces(2, ([-1, 1], 0), ([-1, -1], 2))


@pytest.fixture(scope="session")
def unit_box() -> Polyhedron:
    return halfspaces(2, ([1, 0], 0), ([-1, 0], 1), ([0, 1], 0), ([0, -1], 1))


@pytest.fixture(scope="session")
def rotated_square() -> Polyhedron:
    """Vertices (0, +-2) and (+-2, 0); projection [-2, 2] with no walls."""
    return minimal_presentation(
        halfspaces(2, ([-1, 1], 2), ([1, 1], 2), ([1, -1], 2), ([-1, -1], 2)))


@pytest.fixture(scope="session")
def notched_wedge() -> Polyhedron:
    """Base-positioned fixture with one vertical facet at x1 = -2.

    Constraints: -x2 >= 0 (base facet through the origin), x1 + 2 >= 0
    (vertical wall), x1 + 1 - x2 >= 0 (non-vertical).  The origin lies in the
    relative interior of the base facet and straight down is a recession
    direction, so the peel polynomials can be built on it directly.
    """
    return minimal_presentation(
        halfspaces(2, ([0, -1], 0), ([1, 0], 2), ([1, -1], 1)))


def rational_points(rng, n, dim, span=20, denom=16):
    out = []
    for _ in range(n):
        out.append(tuple(Fraction(rng.randint(-span * denom, span * denom), denom)
                         for _ in range(dim)))
    return out
