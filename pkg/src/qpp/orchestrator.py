"""The push-pull editing loop.

Detect the next critical point of the remaining edit; if there is one,
resolve the crossing, rebase the model on the result, shrink the edit
to its unconsumed part and repeat; once no critical point remains, a
final regeneration lands the model at the edit's end.  Every
intermediate model is validated, and failures surface as exceptions
rather than invalid geometry.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tol
from .brep import BrepSolid
from .edit import Motion, PushPullEdit, ROTATE, TRANSLATE
from .errors import InvalidModel, QppError
from .regen import PushContext, apply_motion, materialize, regenerate
from .resolution import resolve_gti
from .solver import detect_next_critical_point
from .validate import validate_solid

MAX_ITERATIONS = 64


def remaining_edit(edit: PushPullEdit, t_prime: float) -> PushPullEdit:
    """The unconsumed part of an edit after stopping at t_prime.

    A translation keeps its direction with the leftover distance; a
    rotation keeps its axis with the leftover angle (the axis is a
    world-frame invariant of the motion, so composing the inverse of
    the partial motion leaves it in place).  The domain is [0, 1] again.
    """
    if not 0 < t_prime <= 1:
        raise ValueError(f"t_prime must be in (0, 1], got {t_prime}")
    m = edit.motion
    if m.kind == TRANSLATE:
        motion = Motion.translation(m.direction, m.distance * (1.0 - t_prime))
    else:
        motion = Motion.rotation(m.point, m.axis, m.angle * (1.0 - t_prime))
    return PushPullEdit(edit.faces, motion, edit.scheme)


@dataclass
class Crossing:
    t_local: float               # parameter in the iteration's own edit
    t_global: float              # mapped back to the original edit
    events: list                 # critical-point batch

    def to_json(self):
        return {
            "t": self.t_global,
            "t_local": self.t_local,
            "events": [cp.to_json() for cp in self.events],
        }


@dataclass
class EditTrace:
    crossings: list = field(default_factory=list)
    models: list = field(default_factory=list)   # model after each crossing
    final: BrepSolid = None
    iterations: int = 0

    @property
    def taus(self):
        return [c.t_global for c in self.crossings]

    def to_json(self):
        return {
            "iterations": self.iterations,
            "crossings": [c.to_json() for c in self.crossings],
        }


def _require_valid(M, stage):
    report = validate_solid(M)
    if not report.ok:
        raise InvalidModel(f"invalid model {stage}:\n{report}", report)


def push_pull(M: BrepSolid, edit: PushPullEdit, n_grid=None):
    """Apply an edit across all of its critical points.

    Returns the final model and the trace of crossings; every model on
    the way passes validation.
    """
    _require_valid(M, "before the edit")
    trace = EditTrace()
    consumed = 0.0
    current = M
    cur_edit = edit
    if edit.motion.magnitude == 0.0:
        trace.final = current.copy()
        return trace.final, trace

    for iteration in range(MAX_ITERATIONS):
        trace.iterations = iteration + 1
        ctx = PushContext(current, cur_edit)
        kw = {"n_grid": n_grid} if n_grid else {}
        det = detect_next_critical_point(current, cur_edit, context=ctx, **kw)
        if det is None:
            break
        t_prime = det.t
        if t_prime <= 16 * tol.T_TIE:
            raise QppError(
                f"critical point at t'={t_prime} makes no progress "
                f"(iteration {iteration})")
        resolved = resolve_gti(current, cur_edit, det.batch, det.roots, ctx)
        t_global = consumed + t_prime * (1.0 - consumed)
        trace.crossings.append(Crossing(t_prime, t_global, det.batch))
        trace.models.append(resolved)
        current = resolved
        consumed = t_global
        if t_prime >= 1.0 - 1e-12:
            cur_edit = cur_edit.scaled(0.0)
            break
        cur_edit = remaining_edit(cur_edit, t_prime)
    else:
        raise QppError(f"edit did not settle within {MAX_ITERATIONS} iterations")

    if cur_edit.motion.magnitude > 0.0:
        ctx = PushContext(current, cur_edit)
        final_cfg = apply_motion(current, cur_edit, 1.0, context=ctx)
        result = regenerate(current, final_cfg)
        bad = [f for f, s in result.face_status.items() if s != "unchanged"]
        if bad:
            raise QppError(
                f"final regeneration still reports changed faces {bad}")
        current = materialize(current, result)
    _require_valid(current, "after the edit")
    trace.final = current
    return current, trace


# Re-exported editing types live here because the edit loop owns them.
__all__ = ["Motion", "PushPullEdit", "remaining_edit", "push_pull",
           "Crossing", "EditTrace"]
