"""Push-pull edit description: which faces move and how.

The motion is parametrized linearly over t in [0, 1]: a translation
scales its distance by t, a rotation its angle.  Reparametrizing after a
partial move keeps the same form, so the editing loop can always work
on a unit parameter domain.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .geom import RigidTransform, unit

TRANSLATE = "translate"
ROTATE = "rotate"


@dataclass(frozen=True)
class Motion:
    kind: str
    direction: np.ndarray = None   # unit vector (translation)
    distance: float = 0.0          # length units (translation)
    point: np.ndarray = None       # axis point (rotation)
    axis: np.ndarray = None        # unit axis (rotation)
    angle: float = 0.0             # radians (rotation)

    def __post_init__(self):
        if self.kind == TRANSLATE:
            d = self.direction
            if d is None:
                raise ValueError("translation needs a direction")
            object.__setattr__(self, "direction", unit(d) if np.linalg.norm(d) else np.asarray(d, float))
        elif self.kind == ROTATE:
            if self.axis is None or self.point is None:
                raise ValueError("rotation needs an axis point and direction")
            object.__setattr__(self, "axis", unit(self.axis))
            object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        else:
            raise ValueError(f"unknown motion kind {self.kind!r}")

    @staticmethod
    def translation(direction, distance):
        n = float(np.linalg.norm(np.asarray(direction, dtype=float)))
        if n == 0.0 or distance == 0.0:
            return Motion(TRANSLATE, direction=np.zeros(3), distance=0.0)
        return Motion(TRANSLATE, direction=np.asarray(direction, dtype=float) / n,
                      distance=float(distance))

    @staticmethod
    def rotation(point, axis, angle):
        return Motion(ROTATE, point=point, axis=axis, angle=float(angle))

    @property
    def magnitude(self):
        return abs(self.distance) if self.kind == TRANSLATE else abs(self.angle)

    def transform_at(self, t):
        """Rigid transform of the motion interpolated at parameter t."""
        if self.kind == TRANSLATE:
            if self.distance == 0.0:
                return RigidTransform.identity()
            return RigidTransform.translation(self.direction * (self.distance * t))
        if self.angle == 0.0:
            return RigidTransform.identity()
        return RigidTransform.rotation(self.point, self.axis, self.angle * t)

    def velocity_scale(self):
        """Upper bound of boundary speed per unit t, for probe sizing."""
        return abs(self.distance) if self.kind == TRANSLATE else abs(self.angle)


@dataclass(frozen=True)
class PushPullEdit:
    """Faces to move, the motion over t in [0, 1], and the driven-face scheme."""

    faces: tuple
    motion: Motion
    scheme: "ChoosingScheme" = None

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))
        if self.scheme is None:
            from .constraints import ChoosingScheme

            object.__setattr__(self, "scheme", ChoosingScheme())

    def transform_at(self, t):
        return self.motion.transform_at(t)

    def with_scheme(self, scheme):
        return replace(self, scheme=scheme)

    def scaled(self, factor):
        """Same edit with the total magnitude multiplied by ``factor``."""
        if self.motion.kind == TRANSLATE:
            m = Motion.translation(self.motion.direction, self.motion.distance * factor)
        else:
            m = Motion.rotation(self.motion.point, self.motion.axis, self.motion.angle * factor)
        return replace(self, motion=m)
