"""Scratch debugging helper for surgery runs (not part of the package)."""
import sys
import traceback

import numpy as np

import qpp.resolution as R
from qpp.fixtures import get_fixture
from qpp.solver import detect_next_critical_point
from qpp.orchestrator import push_pull, remaining_edit


def dump(name, editname, base=None, edit=None, delta_idx=-1):
    fx = get_fixture(name)
    M = base if base is not None else fx.solid
    edit = edit if edit is not None else fx.edits[editname]
    det = detect_next_critical_point(M, edit)
    print("batch:", [(cp.event.kind, cp.event.edge_a, cp.event.edge_b,
                      np.round(cp.point, 4), round(cp.t, 6)) for cp in det.batch])
    s = R._Surgeon(M, edit, det.batch, det.roots, None)
    print("ladder:", s.delta_ladder)
    try:
        out = s._run_at(s.tau + s.delta_ladder[delta_idx])
        print("OK: V,E,F =", len(out.vertices), len(out.edges), len(out.faces),
              "genus", out.genus)
        return s, out
    except Exception as exc:
        traceback.print_exc()
        print("dropped:", sorted(s.dropped_edges))
        print("new vertices:", {k: np.round(v[0], 4)
                                for k, v in s.new_vertices.items()})
        msg = str(exc)
        if "vertex" in msg:
            vid = msg.split("vertex ")[1].split(" ")[0]
            inc = [e.id for e in s.out.edges.values()
                   if e.bounds and vid in e.bounds]
            print(f"edges at {vid}:", inc)
            for eid in inc:
                e = s.out.edges[eid]
                print(" ", eid, e.carriers, e.bounds,
                      "faces:", s.out.faces_of_edge(eid),
                      "onbd:", s._edge_on_boundary(e))
        return s, None


if __name__ == "__main__":
    dump(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else "push")
