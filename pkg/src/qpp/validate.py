"""Solid validity checking.

A report is a list of violations; an empty report means the model is a
valid manifold solid whose geometry agrees with its topology within the
standard tolerances.  The function is diagnostic and never raises.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tol
from .brep import BrepSolid


@dataclass
class Violation:
    code: str
    entity: str
    detail: str

    def __str__(self):
        return f"[{self.code}] {self.entity}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, code, entity, detail):
        self.violations.append(Violation(code, entity, detail))

    def codes(self):
        return {v.code for v in self.violations}

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def _check_references(M, rep):
    for v in M.vertices.values():
        for sid in v.triple:
            if sid not in M.surfaces:
                rep.add("dangling_ref", v.id, f"unknown surface {sid!r}")
    for e in M.edges.values():
        for sid in e.carriers:
            if sid not in M.surfaces:
                rep.add("dangling_ref", e.id, f"unknown surface {sid!r}")
        if e.bounds is not None:
            for vid in e.bounds:
                if vid not in M.vertices:
                    rep.add("dangling_ref", e.id, f"unknown vertex {vid!r}")
    for f in M.faces.values():
        if f.surface not in M.surfaces:
            rep.add("dangling_ref", f.id, f"unknown surface {f.surface!r}")
        for eid in f.edge_ids():
            if eid not in M.edges:
                rep.add("dangling_ref", f.id, f"unknown edge {eid!r}")


def _check_surfaces(M, rep):
    for s in M.surfaces.values():
        sym = np.abs(s.Q - s.Q.T).max() / max(np.abs(s.Q).max(), 1e-30)
        if sym > 1e-12:
            rep.add("asymmetric_matrix", s.id, f"relative asymmetry {sym:.2e}")
        dev = s.canonical_consistency()
        if dev > 1e-9:
            rep.add("canonical_mismatch", s.id, f"relative deviation {dev:.2e}")
        for key in ("normal", "axis"):
            d = s.canonical.get(key)
            if d is not None and abs(np.linalg.norm(d) - 1.0) > 1e-12:
                rep.add("non_unit_direction", s.id, f"{key} norm {np.linalg.norm(d)!r}")


def _check_on_surface(M, rep):
    scale = M.model_scale
    for v in M.vertices.values():
        for sid in v.triple:
            s = M.surfaces.get(sid)
            if s is None:
                continue
            d = s.distance_estimate(v.position) / scale
            if d > tol.ON_SURFACE:
                rep.add("vertex_off_surface", v.id, f"distance {d:.2e} from {sid}")
    for e in M.edges.values():
        if e.samples is None or len(e.samples) == 0:
            rep.add("missing_samples", e.id, "edge has no sample points")
            continue
        for sid in e.carriers:
            s = M.surfaces.get(sid)
            if s is None:
                continue
            d = (s.distance_estimate(e.samples) / scale).max()
            if d > tol.ON_SURFACE:
                rep.add("sample_off_surface", e.id, f"distance {d:.2e} from {sid}")
        if e.bounds is not None:
            for vid in e.bounds:
                v = M.vertices.get(vid)
                if v is None:
                    continue
                for sid in e.carriers:
                    s = M.surfaces.get(sid)
                    if s is None:
                        continue
                    d = s.distance_estimate(v.position) / scale
                    if d > tol.ON_SURFACE:
                        rep.add("end_off_surface", e.id, f"vertex {vid} is {d:.2e} from {sid}")


def _check_manifold(M, rep):
    uses = M.edge_uses()
    for eid, e in M.edges.items():
        us = uses.get(eid, [])
        if len(us) != 2:
            rep.add("non_manifold", eid, f"{len(us)} co-edges (need exactly 2)")
        elif us[0][3] == us[1][3]:
            rep.add("same_sense", eid, "co-edges have equal senses")
    for eid in uses:
        if eid not in M.edges:
            rep.add("dangling_ref", eid, "co-edge references unknown edge")


def _check_loops(M, rep):
    for f in M.faces.values():
        for li, loop in enumerate(f.loops):
            if not loop:
                rep.add("empty_loop", f.id, f"loop {li} has no co-edges")
                continue
            closed_edges = [eid for eid, _ in loop if eid in M.edges and M.edges[eid].closed]
            if closed_edges:
                if len(loop) != 1:
                    rep.add("mixed_loop", f.id, f"loop {li} mixes closed edge with others")
                continue
            n = len(loop)
            for i in range(n):
                eid, sense = loop[i]
                nid, nsense = loop[(i + 1) % n]
                e, ne = M.edges.get(eid), M.edges.get(nid)
                if e is None or ne is None or e.bounds is None or ne.bounds is None:
                    continue
                head = e.bounds[1] if sense > 0 else e.bounds[0]
                tail = ne.bounds[0] if nsense > 0 else ne.bounds[1]
                if head != tail:
                    rep.add("open_loop", f.id,
                            f"loop {li}: {eid} ends at {head} but {nid} starts at {tail}")
        for eid in f.edge_ids():
            e = M.edges.get(eid)
            if e is not None and f.surface not in e.carriers:
                rep.add("carrier_mismatch", f.id, f"edge {eid} does not lie on face carrier")


def _check_euler(M, rep):
    chi = M.euler_characteristic()
    if chi % 2 != 0:
        rep.add("euler", "model", f"odd Euler characteristic {chi}")
        return
    genus = len(M.shells) - chi // 2
    if genus < 0:
        rep.add("euler", "model", f"negative derived genus {genus} (chi={chi})")
    if M.genus is not None and genus != M.genus:
        rep.add("euler", "model", f"derived genus {genus} != declared {M.genus}")


def validate_solid(M: BrepSolid) -> ValidationReport:
    """Check manifoldness, loop closure, on-surface residuals and Euler count."""
    rep = ValidationReport()
    _check_references(M, rep)
    _check_surfaces(M, rep)
    _check_on_surface(M, rep)
    _check_manifold(M, rep)
    _check_loops(M, rep)
    _check_euler(M, rep)
    return rep
