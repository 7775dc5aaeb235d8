"""qpp: quadric B-rep solid modeling with push-pull direct editing.

The package implements a boundary-representation kernel restricted to
quadric carrier surfaces (planes, spheres, cylinders, cones and the
general homogeneous 4x4 form) together with a push-pull editing loop
that preserves tangent (G1) face connections.  Topology changes caused
by an edit are detected a posteriori: the boundary is regenerated from
the post-edit carrier surfaces under the pre-edit topology, per-face
connection graphs are diffed against the reference topology, each
difference is mapped back to a candidate critical event, and the event
equations are solved for the edit parameter at which the change
occurred.  Crossing a critical point triggers a local topology repair
that keeps the model a valid solid.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "BrepSolid": ("qpp.brep", "BrepSolid"),
    "Edge": ("qpp.brep", "Edge"),
    "Face": ("qpp.brep", "Face"),
    "Vertex": ("qpp.brep", "Vertex"),
    "QuadricSurface": ("qpp.quadric", "QuadricSurface"),
    "Motion": ("qpp.orchestrator", "Motion"),
    "PushPullEdit": ("qpp.orchestrator", "PushPullEdit"),
    "push_pull": ("qpp.orchestrator", "push_pull"),
    "remaining_edit": ("qpp.orchestrator", "remaining_edit"),
    "ChoosingScheme": ("qpp.constraints", "ChoosingScheme"),
    "validate_solid": ("qpp.validate", "validate_solid"),
    "load_model": ("qpp.document", "load_model"),
    "save_model": ("qpp.document", "save_model"),
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        module, attr = _EXPORTS[name]
        return getattr(importlib.import_module(module), attr)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
