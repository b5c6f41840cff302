"""Error taxonomy shared across the package.

Synthesis errors carry the offending polyhedron (``node``) so callers and the
CLI can serialize exactly where a construction became impossible instead of
silently emitting a wrong map.
"""

from __future__ import annotations


class PolyImageError(Exception):
    """Base class; ``payload`` holds machine-readable context."""

    def __init__(self, message: str = "", **payload):
        super().__init__(message or self.__class__.__name__)
        self.payload = payload

    @property
    def node(self):
        return self.payload.get("node")


# geometry
class EmptyInterior(PolyImageError):
    pass


class FacetTooThin(PolyImageError):
    pass


class NoInteriorDirection(PolyImageError):
    pass


# polyalg
class DegreeCapExceeded(PolyImageError):
    def __init__(self, message: str = "", step_index: int = -1, **payload):
        super().__init__(message, step_index=step_index, **payload)
        self.step_index = step_index


# skyscraper
class NotBoundedPosition(PolyImageError):
    pass


class MixedSides(PolyImageError):
    pass


# interior_complement
class BadPosition(PolyImageError):
    pass


class OriginNotInterior(PolyImageError):
    pass


class LayerEncountered(PolyImageError):
    pass


class CompactBaseRequired(PolyImageError):
    pass


class UniversePolyhedron(PolyImageError):
    pass


# complement
class FaceParallelContradiction(PolyImageError):
    pass


# verify
class SamplingStarved(PolyImageError):
    pass


class RootNotBracketed(PolyImageError):
    pass
