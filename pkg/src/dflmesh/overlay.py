"""Virtual-ring overlay: decentralized construction and repair of the topology.

Every member owns one coordinate per virtual ring, drawn uniformly from
[0, 1).  Each ring orders all members circularly by (coordinate, id); a
member keeps its ring predecessor/successor pointers plus a two-hop table
(its neighbors' neighbors), which is enough to splice joins and to repair
any single failure locally.  Two members adjacent in several rings count as
one link in the equivalent communication graph; the lost degree is repaired
by pooling and re-pairing, reusing the graph generator's rewiring rule.

Joins locate their splice point by greedy bidirectional routing over ring
pointers (hop counts are logged).  Simultaneous failures of ring-adjacent
members exceed what two-hop state can repair: the simulator flags the event
and falls back to a fresh coordinate lookup among survivors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, repair_duplicate_pool

__all__ = ["OverlayNode", "OverlayNetwork", "HopStats"]

_COORD_TAG = 0xC00D
_REWIRE_TAG = 0xE44E


def _canonical(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _between(a, x, b) -> bool:
    """Is key x inside the circular interval (a, b]?  a == b covers the whole ring."""
    if a < b:
        return a < x <= b
    if a > b:
        return x > a or x <= b
    return True


@dataclass
class OverlayNode:
    """Protocol state of one member: coordinates, ring pointers, two-hop table."""

    node_id: int
    coords: tuple[float, ...]
    pred: list[int]
    succ: list[int]
    two_hop: list[tuple[int, int]]  # (pred of pred, succ of succ) per ring


@dataclass(frozen=True)
class HopStats:
    mean: float
    max: int


class OverlayNetwork:
    """Synchronous event simulator for the virtual-ring protocol."""

    def __init__(self, rings: int, seed: int = 0):
        if rings < 1:
            raise ValueError(f"need at least one ring, got {rings}")
        self.rings = rings
        self.seed = seed
        self.nodes: dict[int, OverlayNode] = {}
        self.extra_edges: set[tuple[int, int]] = set()
        self.event_log: list[dict] = []
        self.auto_rewire = True
        self._coord_rng = np.random.default_rng(
            np.random.SeedSequence((seed, _COORD_TAG))
        )
        self._event_counter = 0

    # -- bookkeeping -------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def live_ids(self) -> list[int]:
        return sorted(self.nodes)

    def _key(self, ring: int, node_id: int) -> tuple[float, int]:
        return (self.nodes[node_id].coords[ring], node_id)

    def _refresh_two_hop(self, ring: int, ids) -> None:
        for x in ids:
            node = self.nodes.get(x)
            if node is None:
                continue
            p, s = node.pred[ring], node.succ[ring]
            node.two_hop[ring] = (
                self.nodes[p].pred[ring],
                self.nodes[s].succ[ring],
            )

    # -- routing --------------------------------------------------------------

    def _locate(self, ring: int, key: tuple[float, int], start_id: int):
        """Greedy walk from start_id to the predecessor of ``key``; returns (id, hops)."""
        target = key[0]
        here = self.nodes[start_id].coords[ring]
        forward = (target - here) % 1.0
        backward = (here - target) % 1.0
        direction = 1 if forward <= backward else -1
        u = start_id
        hops = 0
        limit = len(self.nodes) + 1
        while True:
            node = self.nodes[u]
            if _between(self._key(ring, u), key, self._key(ring, node.succ[ring])):
                return u, hops
            if hops > limit:
                raise RuntimeError("greedy lookup failed to terminate")
            u = node.succ[ring] if direction > 0 else node.pred[ring]
            hops += 1

    # -- membership events ------------------------------------------------------

    def join(self, node_id: int, coords=None) -> list[int]:
        """Add a member; returns per-ring lookup hop counts (also logged)."""
        if node_id < 0:
            raise ValueError(f"node ids must be nonnegative, got {node_id}")
        if node_id in self.nodes:
            raise ValueError(f"node {node_id} already present")
        if coords is None:
            coords = tuple(float(c) for c in self._coord_rng.random(self.rings))
        else:
            coords = tuple(float(c) for c in coords)
            if len(coords) != self.rings:
                raise ValueError(
                    f"need {self.rings} coordinates, got {len(coords)}"
                )
            if any(not 0.0 <= c < 1.0 for c in coords):
                raise ValueError("coordinates must lie in [0, 1)")
        node = OverlayNode(
            node_id=node_id,
            coords=coords,
            pred=[node_id] * self.rings,
            succ=[node_id] * self.rings,
            two_hop=[(node_id, node_id)] * self.rings,
        )
        if not self.nodes:
            self.nodes[node_id] = node
            hops = [0] * self.rings
        else:
            entry = min(self.nodes)
            placements = []
            hops = []
            for ring in range(self.rings):
                pred_id, h = self._locate(ring, (coords[ring], node_id), entry)
                placements.append(pred_id)
                hops.append(h)
            self.nodes[node_id] = node
            for ring, pred_id in enumerate(placements):
                succ_id = self.nodes[pred_id].succ[ring]
                node.pred[ring] = pred_id
                node.succ[ring] = succ_id
                self.nodes[pred_id].succ[ring] = node_id
                self.nodes[succ_id].pred[ring] = node_id
                affected = {
                    node_id,
                    pred_id,
                    succ_id,
                    self.nodes[pred_id].pred[ring],
                    self.nodes[succ_id].succ[ring],
                }
                self._refresh_two_hop(ring, affected)
        self._event_counter += 1
        if self.auto_rewire:
            self.rewire_duplicates()
        self.event_log.append({"event": "join", "id": node_id, "hops": hops})
        return hops

    def fail_node(self, node_id: int) -> None:
        """Remove one member; survivors repair each ring from two-hop state."""
        if node_id not in self.nodes:
            raise ValueError(f"unknown node {node_id}")
        gone = self.nodes.pop(node_id)
        for ring in range(self.rings):
            y, z = gone.pred[ring], gone.succ[ring]
            if y == node_id:  # it was alone on this ring
                continue
            # y finds the node behind the failure in its own two-hop table
            table_z = self.nodes[y].two_hop[ring][1]
            if table_z != z and y != z:
                raise RuntimeError(
                    f"stale two-hop table at node {y}, ring {ring}: "
                    f"{table_z} != {z}"
                )
            if y == z:  # two-member ring collapses to one
                self.nodes[y].pred[ring] = y
                self.nodes[y].succ[ring] = y
                self._refresh_two_hop(ring, {y})
                continue
            self.nodes[y].succ[ring] = z
            self.nodes[z].pred[ring] = y
            affected = {
                y,
                z,
                self.nodes[y].pred[ring],
                self.nodes[z].succ[ring],
            }
            self._refresh_two_hop(ring, affected)
        self.extra_edges = {
            e for e in self.extra_edges if node_id not in e
        }
        self._event_counter += 1
        if self.auto_rewire and self.nodes:
            self.rewire_duplicates()
        self.event_log.append(
            {"event": "fail", "id": node_id, "two_hop_sufficient": True}
        )

    def fail_simultaneous(self, ids) -> bool:
        """Remove several members at once; returns True when two-hop state sufficed.

        Ring-adjacent simultaneous failures defeat two-hop repair; the
        simulator flags that case and rebuilds the affected rings from a
        fresh coordinate lookup over the survivors.
        """
        ids = set(ids)
        unknown = ids - set(self.nodes)
        if unknown:
            raise ValueError(f"unknown nodes {sorted(unknown)}")
        if ids >= set(self.nodes):
            raise ValueError("cannot fail every node")
        sufficient = True
        for ring in range(self.rings):
            for x in ids:
                if self.nodes[x].succ[ring] in ids:
                    sufficient = False
                    break
            if not sufficient:
                break
        if sufficient:
            saved_log = len(self.event_log)
            for x in sorted(ids):
                self.fail_node(x)
            del self.event_log[saved_log:]  # replaced by one batch record
        else:
            for x in ids:
                del self.nodes[x]
            self.extra_edges = {
                e for e in self.extra_edges if not (set(e) & ids)
            }
            for ring in range(self.rings):
                order = sorted(self.nodes, key=lambda nid: self._key(ring, nid))
                m = len(order)
                for k, nid in enumerate(order):
                    self.nodes[nid].pred[ring] = order[(k - 1) % m]
                    self.nodes[nid].succ[ring] = order[(k + 1) % m]
                self._refresh_two_hop(ring, order)
            self._event_counter += 1
            if self.auto_rewire and self.nodes:
                self.rewire_duplicates()
        self.event_log.append(
            {
                "event": "fail_batch",
                "ids": sorted(ids),
                "two_hop_sufficient": sufficient,
            }
        )
        return sufficient

    # -- degree repair ------------------------------------------------------

    def _ring_pairs(self) -> dict[tuple[int, int], int]:
        """Multiplicity of each member pair across rings (self-pairs skipped)."""
        count: dict[tuple[int, int], int] = {}
        for ring in range(self.rings):
            seen: set[tuple[int, int]] = set()
            for nid, node in self.nodes.items():
                for other in (node.pred[ring], node.succ[ring]):
                    if other != nid:
                        seen.add(_canonical(nid, other))
            for pair in seen:
                count[pair] = count.get(pair, 0) + 1
        return count

    def rewire_duplicates(self) -> set[tuple[int, int]]:
        """Recompute repair links for pairs adjacent in more than one ring."""
        count = self._ring_pairs()
        pool: list[int] = []
        for (u, v), c in count.items():
            for _ in range(c - 1):
                pool.extend((u, v))
        rng = np.random.default_rng(
            np.random.SeedSequence((self.seed, _REWIRE_TAG, self._event_counter))
        )
        self.extra_edges = set(
            repair_duplicate_pool(pool, set(count), rng)
        )
        return self.extra_edges

    # -- views -------------------------------------------------------------------

    def equivalent_graph(self) -> Graph:
        """Union of ring adjacencies and repair links, reindexed to 0..m-1."""
        if not self.nodes:
            raise ValueError("empty network has no graph")
        order = self.live_ids()
        index = {nid: k for k, nid in enumerate(order)}
        pairs: set[tuple[int, int]] = set()
        for pair in self._ring_pairs():
            pairs.add(_canonical(index[pair[0]], index[pair[1]]))
        for a, b in self.extra_edges:
            pairs.add(_canonical(index[a], index[b]))
        return Graph(len(order), pairs)

    def lookup_cost(self, samples: int = 200, seed: int = 0) -> HopStats:
        """Mean/max greedy-routing hops over sampled (source, target) pairs."""
        if self.n_nodes < 2:
            raise ValueError("lookup cost needs at least two members")
        if samples < 1:
            raise ValueError(f"samples must be >= 1, got {samples}")
        rng = np.random.default_rng(seed)
        ids = self.live_ids()
        hops_seen = []
        for _ in range(samples):
            src = ids[int(rng.integers(len(ids)))]
            ring = int(rng.integers(self.rings))
            target = float(rng.random())
            _, hops = self._locate(ring, (target, -1), src)
            hops_seen.append(hops)
        return HopStats(mean=float(np.mean(hops_seen)), max=int(max(hops_seen)))

    def check(self) -> dict:
        """Protocol self-audit; returned dict is JSON-ready and also logged."""
        ring_ok = True
        two_hop_ok = True
        for ring in range(self.rings):
            if not self.nodes:
                break
            order = sorted(self.nodes, key=lambda nid: self._key(ring, nid))
            m = len(order)
            for k, nid in enumerate(order):
                node = self.nodes[nid]
                if (
                    node.pred[ring] != order[(k - 1) % m]
                    or node.succ[ring] != order[(k + 1) % m]
                ):
                    ring_ok = False
                expected = (
                    self.nodes[node.pred[ring]].pred[ring],
                    self.nodes[node.succ[ring]].succ[ring],
                )
                if tuple(node.two_hop[ring]) != expected:
                    two_hop_ok = False
        degrees = {}
        for pair in set(self._ring_pairs()) | self.extra_edges:
            for nid in pair:
                degrees[nid] = degrees.get(nid, 0) + 1
        max_degree = max(degrees.values()) if degrees else 0
        report = {
            "event": "check",
            "nodes": self.n_nodes,
            "rings": self.rings,
            "ring_order_ok": ring_ok,
            "two_hop_ok": two_hop_ok,
            "max_degree": max_degree,
            "degree_ok": max_degree <= 2 * self.rings,
        }
        self.event_log.append(report)
        return report
