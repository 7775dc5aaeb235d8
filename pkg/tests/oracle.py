"""Dense-sampling ground truth for critical parameters.

The oracle never looks at events or root finding: it marches the edit
parameter on a fixed grid, regenerates the boundary at every step and
records a topology signature (per-face connection graphs plus edge
liveness).  Every signature change is bisected, giving the list of
parameters where the regenerated topology actually flips.
"""

import numpy as np

from qpp.regen import PushContext, apply_motion, regenerate


def _signature(M, result):
    sig = []
    for fid in sorted(M.faces):
        g = result.reg_graphs[fid]
        sig.append((fid, tuple(sorted((p, m) for p, m in g.arcs.items()))))
    dead = tuple(sorted(e for e, g in result.edge_geometry.items() if not g.alive))
    return tuple(sig), dead


def change_points(M, edit, scheme=None, grid=1e-3, refine=1e-9, context=None,
                  dedup=1e-6):
    """All parameters in (0, 1] where the regenerated topology changes."""
    ctx = context or PushContext(M, edit, scheme)

    def sig_at(t):
        return _signature(M, regenerate(M, apply_motion(M, edit, t, context=ctx)))

    ts = np.arange(0.0, 1.0 + grid / 2, grid)
    if ts[-1] < 1.0:
        ts = np.append(ts, 1.0)
    sigs_prev = sig_at(ts[0])
    flips = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        sigs_next = sig_at(t1)
        if sigs_next != sigs_prev:
            lo, hi = t0, t1
            s_lo = sigs_prev
            while hi - lo > refine:
                mid = 0.5 * (lo + hi)
                if sig_at(mid) == s_lo:
                    lo = mid
                else:
                    hi = mid
            flips.append(0.5 * (lo + hi))
        sigs_prev = sigs_next
    out = []
    for t in flips:
        if out and t - out[-1] <= dedup:
            continue
        out.append(t)
    return out


def first_change(M, edit, scheme=None, **kw):
    pts = change_points(M, edit, scheme, **kw)
    return pts[0] if pts else None
