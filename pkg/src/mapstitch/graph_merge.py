"""Connection-strength scoring, the weighted submap graph and the merge executor.

Submaps are nodes of an undirected graph; an edge's strength combines the
number of connected frame pairs, the distinct shared map points and the
squared median intersection angle.  Merge paths are selected by a minimum
spanning tree over the negated strength.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    NoValidPairs,
    OutOfRangeTheta,
    ResidualTooLarge,
)
from .geometry import SimilarityTransform, estimate_similarity, intersection_angles
from .submap import Submap

ANGLE_CAP_DEG = 45.0


def connection_strength(pair_count, point_count, median_angle_deg):
    """Strength of a submap connection: pairs + 0.1*points + 0.1*angle^2.

    Written over exact tenths so that integer inputs produce exact results
    (e.g. (10, 100, 10) -> 30.0).  Works on any numeric type, including
    fractions.Fraction for exact-arithmetic checks.
    """
    if median_angle_deg < 0 or median_angle_deg > ANGLE_CAP_DEG:
        raise OutOfRangeTheta(f"median angle {median_angle_deg} outside [0, {ANGLE_CAP_DEG}]")
    return (10 * pair_count + point_count + median_angle_deg * median_angle_deg) / 10


@dataclass(frozen=True)
class PairEvidence:
    """One connected-frame pair between two submaps, in canonical id order."""

    submap_lo: int
    frame_lo_id: int
    submap_hi: int
    frame_hi_id: int
    shared_ids: tuple

    @classmethod
    def make(cls, submap_a, frame_a_id, submap_b, frame_b_id, shared_ids) -> "PairEvidence":
        shared = tuple(sorted(shared_ids))
        if submap_a <= submap_b:
            return cls(submap_a, frame_a_id, submap_b, frame_b_id, shared)
        return cls(submap_b, frame_b_id, submap_a, frame_a_id, shared)

    @property
    def key(self) -> tuple:
        return (self.frame_lo_id, self.frame_hi_id)


@dataclass
class ConnectionEdge:
    """Aggregated connection between two submaps with its strength."""

    submap_a: int
    submap_b: int
    pairs: list
    pair_count: int
    point_count: int
    median_angle_deg: float
    strength: float
    inherited: bool = False
    merged: bool = False
    # Original (submap, submap) evidence keys behind a quotient edge.
    source_keys: tuple = ()

    @property
    def weight(self) -> float:
        return -self.strength

    def to_dict(self) -> dict:
        return {
            "submap_a": self.submap_a,
            "submap_b": self.submap_b,
            "pair_count": self.pair_count,
            "point_count": self.point_count,
            "median_angle_deg": self.median_angle_deg,
            "strength": self.strength,
            "weight": self.weight,
            "inherited": self.inherited,
            "merged": self.merged,
        }


def _pair_angles(maps: tuple, pair: PairEvidence) -> np.ndarray | None:
    """Per-point intersection angles of one pair, in the lo frame's map.

    Each frame of the pair is resolved in whichever of the given maps holds
    it (merges move frames between containers).  The hi frame's camera
    center is transported by a provisional similarity fitted on the pair's
    shared points; angles are invariant under that similarity, so the
    transport is exact up to noise.  Returns None when the shared points
    are too degenerate to fit the transport.
    """
    map_lo = next((m for m in maps if m.has_frame(pair.frame_lo_id)), None)
    map_hi = next((m for m in maps if m.has_frame(pair.frame_hi_id)), None)
    if map_lo is None or map_hi is None:
        return None
    try:
        pts_lo = np.array([map_lo.map_points[i] for i in pair.shared_ids])
        pts_hi = np.array([map_hi.map_points[i] for i in pair.shared_ids])
    except KeyError:
        return None
    if map_lo is map_hi:
        transport = SimilarityTransform.identity()
    else:
        try:
            transport, _ = estimate_similarity(pts_hi, pts_lo)
        except DegenerateConfiguration:
            return None
    center_lo = map_lo.frame_pose(pair.frame_lo_id).center
    center_hi = transport.apply(map_hi.frame_pose(pair.frame_hi_id).center)
    return intersection_angles(center_lo, center_hi, pts_lo)


def build_edge_from_pairs(
    map_a: Submap, map_b: Submap, id_a: int, id_b: int, pairs, min_shared_points: int
) -> ConnectionEdge:
    """Aggregate pair evidence into an edge; raises NoValidPairs if empty."""
    id_lo, id_hi = (id_a, id_b) if id_a <= id_b else (id_b, id_a)
    valid_pairs = []
    pair_medians = []
    shared_union = set()
    for pair in sorted(pairs, key=lambda p: p.key):
        if len(pair.shared_ids) < min_shared_points:
            continue
        angles = _pair_angles((map_a, map_b), pair)
        if angles is None:
            continue
        valid_pairs.append(pair)
        pair_medians.append(float(np.median(angles)))
        shared_union.update(pair.shared_ids)
    if not valid_pairs:
        raise NoValidPairs(
            f"no pair between submaps {id_lo} and {id_hi} shares >= {min_shared_points} points"
        )
    theta = min(float(np.median(pair_medians)), ANGLE_CAP_DEG)
    strength = connection_strength(len(valid_pairs), len(shared_union), theta)
    return ConnectionEdge(
        submap_a=id_lo,
        submap_b=id_hi,
        pairs=valid_pairs,
        pair_count=len(valid_pairs),
        point_count=len(shared_union),
        median_angle_deg=theta,
        strength=float(strength),
    )


def build_edge(a: Submap, b: Submap, matches, min_shared_points: int = 5) -> ConnectionEdge:
    """Edge between two submaps from connected-frame matches (queries in a).

    Pair shared ids are the landmark ids observed by both frames and mapped
    in both submaps.  Computation is canonicalized by submap id so that
    swapping the arguments yields identical numbers.
    """
    pairs = {}
    for match in matches:
        frame_a = next(f for f, _ in a.frames if f.id == match.query_frame_id)
        frame_b = next(f for f, _ in b.keyframes if f.id == match.matched_frame_id)
        shared = (
            frame_a.observed_ids
            & frame_b.observed_ids
            & a.map_points.keys()
            & b.map_points.keys()
        )
        pair = PairEvidence.make(a.id, frame_a.id, b.id, frame_b.id, shared)
        pairs[pair.key] = pair
    return build_edge_from_pairs(a, b, a.id, b.id, pairs.values(), min_shared_points)


class UnionFind:
    def __init__(self, items=()):
        self.parent = {item: item for item in items}

    def add(self, item) -> None:
        self.parent.setdefault(item, item)

    def find(self, item):
        self.add(item)
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


@dataclass
class MstResult:
    edges: list
    connected: bool


def kruskal_mst(edges, nodes=None) -> MstResult:
    """Minimum spanning tree/forest over edges carrying a, b and weight.

    Edges are scanned in ascending (weight, a, b) order and kept when they
    join distinct components.  ``connected`` is False when the input nodes
    end up in more than one component (spanning forest).
    """
    edges = list(edges)
    node_set = set(nodes) if nodes is not None else set()
    for e in edges:
        node_set.add(e.submap_a)
        node_set.add(e.submap_b)
    uf = UnionFind(node_set)
    chosen = []
    for e in sorted(edges, key=lambda e: (e.weight, e.submap_a, e.submap_b)):
        if uf.union(e.submap_a, e.submap_b):
            chosen.append(e)
    roots = {uf.find(n) for n in node_set}
    return MstResult(chosen, len(roots) <= 1)


class SubmapGraph:
    """Undirected weighted graph over submaps with merge bookkeeping.

    Nodes are original submap ids.  Pair evidence accumulates per unordered
    id pair; edges are rebuilt from the unions of all evidence seen so far.
    A union-find alias maps absorbed submaps onto the map that absorbed
    them, so inherited connections keep linking the live maps.
    """

    def __init__(self):
        self.nodes: dict[int, dict] = {}
        self.pair_store: dict[tuple, dict] = {}
        self.alias = UnionFind()
        self.merged_keys: set[tuple] = set()

    def add_node(self, submap_id: int) -> None:
        self.nodes.setdefault(submap_id, {"keyframes": 0})
        self.alias.add(submap_id)

    def note_keyframes(self, submap_id: int, count: int) -> None:
        self.add_node(submap_id)
        self.nodes[submap_id]["keyframes"] = count

    def add_pair(self, submap_a: int, frame_a_id: int, submap_b: int, frame_b_id: int, shared_ids):
        self.add_node(submap_a)
        self.add_node(submap_b)
        pair = PairEvidence.make(submap_a, frame_a_id, submap_b, frame_b_id, shared_ids)
        key = (pair.submap_lo, pair.submap_hi)
        self.pair_store.setdefault(key, {})[pair.key] = pair

    def mark_merged(self, source_rep: int, target_rep: int, source_keys=()) -> None:
        self.merged_keys.update(source_keys)
        # Target absorbs source: the target id stays the component representative.
        self.alias.parent[self.alias.find(source_rep)] = self.alias.find(target_rep)

    def quotient_edges(self, resolve, min_shared_points: int) -> list[ConnectionEdge]:
        """Live edges between distinct components, rebuilt from all evidence.

        ``resolve`` maps a component representative to its live Submap.  An
        edge is flagged inherited when any of its evidence predates the
        current pairing, i.e. was recorded between original submaps that
        have since been absorbed.
        """
        groups: dict[tuple, list] = {}
        group_keys: dict[tuple, list] = {}
        inherited_flags: dict[tuple, bool] = {}
        for (a, b), pairs in self.pair_store.items():
            ra, rb = self.alias.find(a), self.alias.find(b)
            if ra == rb:
                continue
            key = (ra, rb) if ra <= rb else (rb, ra)
            groups.setdefault(key, []).extend(pairs.values())
            group_keys.setdefault(key, []).append((a, b))
            if (a, b) != key:
                inherited_flags[key] = True
        edges = []
        for (ra, rb), pairs in sorted(groups.items()):
            try:
                edge = build_edge_from_pairs(
                    resolve(ra), resolve(rb), ra, rb, pairs, min_shared_points
                )
            except NoValidPairs:
                continue
            edge.inherited = inherited_flags.get((ra, rb), False)
            edge.source_keys = tuple(sorted(group_keys[(ra, rb)]))
            edges.append(edge)
        return edges

    def snapshot(self, resolve, min_shared_points: int) -> dict:
        """Historical graph over original submap ids, for reports and DOT."""
        edges = []
        for (a, b), pairs in sorted(self.pair_store.items()):
            map_a = resolve(self.alias.find(a))
            map_b = resolve(self.alias.find(b))
            try:
                edge = build_edge_from_pairs(map_a, map_b, a, b, pairs.values(), min_shared_points)
            except NoValidPairs:
                continue
            edge.merged = (a, b) in self.merged_keys
            edges.append(edge)
        mst = kruskal_mst(edges, nodes=self.nodes.keys())
        mst_keys = {(e.submap_a, e.submap_b) for e in mst.edges}
        return {
            "nodes": [
                {"id": node_id, "keyframes": info["keyframes"]}
                for node_id, info in sorted(self.nodes.items())
            ],
            "edges": [
                dict(e.to_dict(), mst=(e.submap_a, e.submap_b) in mst_keys) for e in edges
            ],
            "connected": mst.connected if self.nodes else True,
        }


def snapshot_to_dot(snapshot: dict) -> str:
    """Render a graph snapshot to DOT; merge-path edges are bold."""
    lines = ["graph submaps {", "  node [shape=circle];"]
    for node in snapshot.get("nodes", []):
        lines.append(f'  s{node["id"]} [label="S{node["id"]}\\n{node["keyframes"]} kf"];')
    for e in snapshot.get("edges", []):
        label = (
            f'F={e["pair_count"]},M={e["point_count"]},'
            f'θ={e["median_angle_deg"]:.1f},C={e["strength"]:.1f}'
        )
        style = ' style=bold penwidth=2' if e.get("mst") or e.get("merged") else ""
        lines.append(f'  s{e["submap_a"]} -- s{e["submap_b"]} [label="{label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class MergeDecision:
    source_id: int
    target_id: int
    edge: ConnectionEdge
    transform: SimilarityTransform | None
    residual_rms: float | None
    accepted: bool
    reason: str
    inherited: bool

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "target_id": self.target_id,
            "pair_count": self.edge.pair_count,
            "point_count": self.edge.point_count,
            "median_angle_deg": self.edge.median_angle_deg,
            "strength": self.edge.strength,
            "residual_rms": self.residual_rms,
            "accepted": self.accepted,
            "reason": self.reason,
            "inherited": self.inherited,
        }


def estimate_merge_transform(target: Submap, source: Submap, edge: ConnectionEdge):
    """Similarity mapping source coordinates into the target submap.

    Correspondences are all landmark ids with 3D estimates in both submaps
    (a superset of the edge's own shared points).
    """
    shared = sorted(target.map_points.keys() & source.map_points.keys())
    if len(shared) < 3:
        raise DegenerateConfiguration(
            f"submaps {target.id} and {source.id} share only {len(shared)} map points"
        )
    src = np.array([source.map_points[i] for i in shared])
    dst = np.array([target.map_points[i] for i in shared])
    return estimate_similarity(src, dst)


def execute_merge(
    target: Submap,
    source: Submap,
    transform: SimilarityTransform,
    residual_rms: float | None = None,
    residual_cap: float | None = None,
) -> Submap:
    """Transport the source submap by `transform` and fold it into target."""
    if residual_rms is not None and residual_cap is not None and residual_rms > residual_cap:
        raise ResidualTooLarge(f"residual {residual_rms:.4f} exceeds cap {residual_cap:.4f}")
    source.transport(transform)
    target.absorb(source)
    return target


def attempt_merges(state, new_matches, cfg) -> list[MergeDecision]:
    """Fold fresh matches into the graph, then merge along the spanning tree.

    Fresh edges must reach the strength threshold to trigger a merge.  Once
    a submap is absorbed, connections inherited from it already passed the
    connectivity vetting when they were recorded, so they cascade on the
    residual check alone; this is what lets a chain of stranded submaps
    collapse into the live map.
    """
    graph = state.graph
    cur = state.current_map
    touched = set()
    for match in new_matches:
        frame_a = next(f for f, _ in cur.frames if f.id == match.query_frame_id)
        source = state.submap_by_id(match.matched_submap_id)
        frame_b = next(f for f, _ in source.keyframes if f.id == match.matched_frame_id)
        shared = (
            frame_a.observed_ids
            & frame_b.observed_ids
            & cur.map_points.keys()
            & source.map_points.keys()
        )
        if len(shared) < cfg.min_shared_points:
            continue
        graph.add_pair(cur.id, frame_a.id, source.id, frame_b.id, shared)
        touched.add(tuple(sorted((graph.alias.find(cur.id), graph.alias.find(source.id)))))

    decisions = []
    skipped = set()
    while True:
        cur_rep = graph.alias.find(cur.id)
        resolve = state.submap_by_id
        edges = graph.quotient_edges(resolve, cfg.min_shared_points)
        if not edges:
            break
        live_nodes = {cur_rep} | {graph.alias.find(s.id) for s in state.stack}
        mst = kruskal_mst(edges, nodes=live_nodes)
        candidates = [
            e for e in mst.edges if cur_rep in (e.submap_a, e.submap_b)
            and (e.submap_a, e.submap_b) not in skipped
        ]
        merged_any = False
        for edge in sorted(candidates, key=lambda e: (-e.strength, e.submap_a, e.submap_b)):
            pair_key = (edge.submap_a, edge.submap_b)
            source_rep = edge.submap_b if edge.submap_a == cur_rep else edge.submap_a
            if not edge.inherited and edge.strength < cfg.strength_threshold:
                if pair_key in touched:
                    decisions.append(
                        MergeDecision(source_rep, cur_rep, edge, None, None, False,
                                      "below_strength_threshold", edge.inherited)
                    )
                skipped.add(pair_key)
                continue
            source = resolve(source_rep)
            try:
                transform, residual = estimate_merge_transform(cur, source, edge)
            except DegenerateConfiguration:
                decisions.append(
                    MergeDecision(source_rep, cur_rep, edge, None, None, False,
                                  "degenerate_correspondences", edge.inherited)
                )
                skipped.add(pair_key)
                continue
            if residual > cfg.merge_residual_cap:
                decisions.append(
                    MergeDecision(source_rep, cur_rep, edge, transform, residual, False,
                                  "residual_above_cap", edge.inherited)
                )
                skipped.add(pair_key)
                continue
            execute_merge(cur, source, transform, residual, cfg.merge_residual_cap)
            graph.mark_merged(source_rep, cur_rep, edge.source_keys)
            state.stack.remove(source)
            state.drop_submap(source)
            decisions.append(
                MergeDecision(source_rep, cur_rep, edge, transform, residual, True,
                              "merged", edge.inherited)
            )
            merged_any = True
            break
        if not merged_any:
            break
    return decisions
