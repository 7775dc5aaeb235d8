"""Connection graphs of face boundaries and their Boolean difference.

Nodes are the ids of the edges bounding one face; an arc between two
nodes means the edges share at least one connection point on that face.
Arcs carry a connection-point count so that a tangency crossing, which
creates two intersection points at once, is distinguishable from a
plain corner contact.  Closed edges appear as lone nodes until some
other edge actually intersects them.

The difference of a reference and a regenerated graph keeps the origin
of every arc: ``added`` arcs exist only in the regenerated graph,
``lost`` arcs only in the reference.  Node sets are induced from the
surviving arcs.
"""

from dataclasses import dataclass, field


def _norm_pair(a, b):
    if a == b:
        raise ValueError(f"self-connection on edge {a!r}")
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class ConnectionGraph:
    nodes: frozenset
    arcs: dict = field(default_factory=dict)  # pair -> connection-point count

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        arcs = {}
        for pair, mult in self.arcs.items():
            pair = _norm_pair(*pair)
            if pair[0] not in self.nodes or pair[1] not in self.nodes:
                raise ValueError(f"arc {pair} references unknown node")
            arcs[pair] = arcs.get(pair, 0) + int(mult)
        object.__setattr__(self, "arcs", arcs)

    def arc_set(self):
        return set(self.arcs)

    def __eq__(self, other):
        return self.nodes == other.nodes and self.arcs == other.arcs

    def to_json(self):
        return {
            "nodes": sorted(self.nodes),
            "arcs": [{"edges": list(p), "count": self.arcs[p]} for p in sorted(self.arcs)],
        }


ADDED = "added"
LOST = "lost"


@dataclass(frozen=True)
class DiffArc:
    pair: tuple
    origin: str          # ADDED or LOST
    ref_count: int
    reg_count: int

    @property
    def count_changed_only(self):
        """Arc present on both sides but with a different contact count."""
        return self.ref_count > 0 and self.reg_count > 0


@dataclass(frozen=True)
class DiffGraph:
    arcs: tuple

    @property
    def nodes(self):
        return frozenset(n for a in self.arcs for n in a.pair)

    @property
    def empty(self):
        return not self.arcs

    def added(self):
        return [a for a in self.arcs if a.origin == ADDED]

    def lost(self):
        return [a for a in self.arcs if a.origin == LOST]

    def to_json(self):
        return [
            {
                "edges": list(a.pair),
                "origin": a.origin,
                "ref_count": a.ref_count,
                "reg_count": a.reg_count,
            }
            for a in self.arcs
        ]


def build_connection_graph(face, connections):
    """Graph of the face's bounding edges with the given connection pairs.

    ``connections`` is an iterable of (edge id, edge id) pairs, repeated
    pairs accumulate into the arc's connection-point count.
    """
    nodes = frozenset(face.edge_ids())
    arcs = {}
    for a, b in connections:
        pair = _norm_pair(a, b)
        for n in pair:
            if n not in nodes:
                raise ValueError(f"edge {n!r} does not bound face {face.id!r}")
        arcs[pair] = arcs.get(pair, 0) + 1
    return ConnectionGraph(nodes, arcs)


def graph_subtract(g1: ConnectionGraph, g2: ConnectionGraph) -> ConnectionGraph:
    """Arc-set difference with nodes induced from the surviving arcs."""
    arcs = {p: m for p, m in g1.arcs.items() if p not in g2.arcs}
    nodes = frozenset(n for p in arcs for n in p)
    return ConnectionGraph(nodes, arcs)


def diff_connection_graphs(g_ref: ConnectionGraph, g_reg: ConnectionGraph) -> DiffGraph:
    """Symmetric difference with origin tags and contact-count changes.

    Arcs only in the regenerated graph are tagged ``added``, arcs only
    in the reference ``lost``.  Arcs present in both with different
    contact counts are reported with the tag of the larger side.
    """
    out = []
    for pair in sorted(set(g_ref.arcs) | set(g_reg.arcs)):
        ref = g_ref.arcs.get(pair, 0)
        reg = g_reg.arcs.get(pair, 0)
        if ref == reg:
            continue
        out.append(DiffArc(pair, ADDED if reg > ref else LOST, ref, reg))
    return DiffGraph(tuple(out))


def graph_from_topology(M, face):
    """Reference connection graph from stored shared vertices.

    Two open edges are connected once per shared bounding vertex; closed
    edges have no stored connections and appear as lone nodes.
    """
    conns = []
    eids = sorted(set(face.edge_ids()))
    for i, a in enumerate(eids):
        ea = M.edges[a]
        if ea.bounds is None:
            continue
        for b in eids[i + 1:]:
            eb = M.edges[b]
            if eb.bounds is None or a == b:
                continue
            shared = set(ea.bounds) & set(eb.bounds)
            for _ in shared:
                conns.append((a, b))
    return build_connection_graph(face, conns)
