"""Geometric network model and the two retrieval protocols.

Nodes sit in the unit square, which is cut into square-lets of side
``c1 * s(n)`` with ``s(n) = sqrt(ln n / n)``.  Square-lets are addressed by
``(cx, cy)`` with ``cx`` growing eastward and ``cy`` northward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Literal, Mapping

import numpy as np

from .coding import ContentStore, KeyMaterial, NodeCache, build_key, combine_slots, decode_last_hop
from .errors import ContractViolation
from .gf2 import BitVector, EchelonBasis, xor_masked

Cell = tuple[int, int]
Direction = Literal["E", "W", "S", "N"]

STEPS: dict[str, Cell] = {"E": (1, 0), "W": (-1, 0), "N": (0, 1), "S": (0, -1)}
# after a full lap the walk moves one row (or column) over
LAP_SHIFT: dict[str, Cell] = {"E": (0, 1), "W": (0, 1), "N": (1, 0), "S": (1, 0)}


def square_let_scale(n: int) -> float:
    return math.sqrt(math.log(n) / n)


@dataclass
class Topology:
    n: int
    c1: float
    delta: float
    positions: np.ndarray
    cell_side: float
    grid: int
    cell_x: np.ndarray
    cell_y: np.ndarray
    members: dict[Cell, tuple[int, ...]]
    anchors: dict[Cell, int]

    @property
    def s(self) -> float:
        return square_let_scale(self.n)

    @property
    def c2(self) -> float:
        return (2 + self.delta) / self.c1

    def cell_of(self, node: int) -> Cell:
        return int(self.cell_x[node]), int(self.cell_y[node])

    def nodes_in(self, cell: Cell) -> tuple[int, ...]:
        return self.members.get(cell, ())


def build_topology(n: int, c1: float = 1.0, delta: float = 1.0, seed: int = 0) -> Topology:
    if n < 2:
        raise ContractViolation("need at least two nodes")
    if c1 <= 0 or delta < 0:
        raise ContractViolation("c1 must be positive and delta non-negative")
    rng = np.random.default_rng(seed)
    positions = rng.random((n, 2))
    side = c1 * square_let_scale(n)
    grid = max(1, math.ceil(1.0 / side - 1e-12))
    cx = np.minimum((positions[:, 0] / side).astype(np.int64), grid - 1)
    cy = np.minimum((positions[:, 1] / side).astype(np.int64), grid - 1)

    flat = cy * grid + cx
    order = np.argsort(flat, kind="stable")
    cells, starts, counts = np.unique(flat[order], return_index=True, return_counts=True)
    picks = rng.integers(0, counts)
    members: dict[Cell, tuple[int, ...]] = {}
    anchors: dict[Cell, int] = {}
    for cell, start, count, pick in zip(cells, starts, counts, picks):
        key = (int(cell % grid), int(cell // grid))
        ids = tuple(int(i) for i in order[start : start + count])
        members[key] = ids
        anchors[key] = ids[pick]
    return Topology(n, c1, delta, positions, side, grid, cx, cy, members, anchors)


@dataclass(frozen=True)
class LocalGroupPlan:
    """Square-lets grouped into near-square blocks of about ``s_g`` per side.

    ``starts`` holds the first square-let index of each group along either
    axis; leftover square-lets join the leading groups, so no group is
    narrower than ``cells_per_side``.
    """

    s_g: float
    cells_per_side: int
    grid: int
    starts: tuple[int, ...]
    degenerate: bool

    @property
    def groups_per_axis(self) -> int:
        return len(self.starts)

    def _axis_group(self, c: int) -> int:
        return int(np.searchsorted(self.starts, c, side="right")) - 1

    def group_of(self, cell: Cell) -> Cell:
        return self._axis_group(cell[0]), self._axis_group(cell[1])

    def axis_range(self, g: int) -> range:
        end = self.starts[g + 1] if g + 1 < len(self.starts) else self.grid
        return range(self.starts[g], end)

    def cells(self, group: Cell) -> list[Cell]:
        return [(x, y) for y in self.axis_range(group[1]) for x in self.axis_range(group[0])]


def plan_local_groups(topology: Topology, m: int, M: int, c4: float = 1.0) -> LocalGroupPlan:
    if m < 1 or M < 1:
        raise ContractViolation("m and M must be positive")
    s_g = c4 * math.sqrt(m / (topology.n * M))
    k = max(1, round(s_g / topology.cell_side))
    groups = max(1, topology.grid // k)
    bounds = np.array_split(np.arange(topology.grid), groups)
    starts = tuple(int(b[0]) for b in bounds)
    return LocalGroupPlan(s_g, k, topology.grid, starts, degenerate=groups == 1)


@dataclass
class RetrievalResult:
    scheme: str
    routing: str
    mode: str
    hops: int
    transmissions: int
    success: bool
    secure_channel_bytes: int
    data_channel_bytes: int
    direction: str | None = None
    path: tuple[int, ...] = ()
    gains: dict[int, BitVector] = field(default_factory=dict)
    key: KeyMaterial | None = None
    decoded: BitVector | None = None

    @property
    def nodes_used(self) -> int:
        """Caches consulted, counting the requester's own."""
        return self.hops + 1


def resolve_direction(direction: str, rng: np.random.Generator | None = None) -> str:
    """Map ``"random"`` to a uniform angle snapped to the nearest axis."""
    if direction in STEPS:
        return direction
    if direction in ("random", "random-angle"):
        rng = np.random.default_rng() if rng is None else rng
        angle = rng.uniform(0.0, 2 * math.pi)
        return "ENWS"[round(angle / (math.pi / 2)) % 4]
    raise ContractViolation(f"unknown direction {direction!r}")


def walk_cells(topology: Topology, start: Cell, direction: str) -> Iterator[Cell]:
    """Square-lets in walk order: laps along ``direction`` on the torus, then one row over.

    Every square-let is produced exactly once.
    """
    g = topology.grid
    dx, dy = STEPS[direction]
    px, py = LAP_SHIFT[direction]
    for lap in range(g):
        bx, by = start[0] + lap * px, start[1] + lap * py
        for step in range(g):
            yield (bx + step * dx) % g, (by + step * dy) % g


def walk_order(topology: Topology, requester: int, direction: str) -> Iterator[int]:
    for cell in walk_cells(topology, topology.cell_of(requester), direction):
        for node in topology.nodes_in(cell):
            if node != requester:
                yield node


def _payload_bytes(Q: int) -> int:
    return (Q + 7) // 8


def _secure_bytes(contributors: int, M: int, m: int) -> int:
    # encoding vectors up, gains back down
    return contributors * (-(-M * m // 8) + -(-M // 8))


def reactive_walk(
    topology: Topology,
    caches: Mapping[int, NodeCache],
    store: ContentStore,
    requester: int,
    direction: str,
    target: int | None = None,
    rng: np.random.Generator | None = None,
    gain_rule: str = "indexed",
    verify: bool = True,
) -> RetrievalResult:
    """Walk away from ``requester`` gathering cached material until it suffices.

    ``target=None`` asks for every content; otherwise only ``target``.
    """
    direction = resolve_direction(direction, rng)
    own = caches[requester]
    nodes = walk_order(topology, requester, direction)
    if own.scheme == "coded":
        if target is None:
            result = _coded_all(own, caches, store, nodes, verify)
        else:
            result = _coded_single(own, caches, store, nodes, target, gain_rule, verify)
    else:
        if target is None:
            result = _uncoded_all(own, caches, store, nodes, verify)
        else:
            result = _uncoded_single(own, caches, store, nodes, target, verify)
    result.routing = "reactive"
    result.direction = direction
    return result


def _coded_single(own, caches, store, nodes, target, gain_rule, verify) -> RetrievalResult:
    store.check_index(target)
    m, Q, M = store.m, store.Q, own.M
    key = build_key(own, target, m, gain_rule)
    basis = EchelonBasis(m, track=True)
    path: list[int] = []
    mask = 0 if not key.v_req else None
    if mask is None:
        for node in nodes:
            path.append(node)
            for slot in caches[node].slots:
                basis.add(slot.vector.bits)
            mask = basis.represent(key.v_req.bits)
            if mask is not None:
                break
    hops = len(path)
    result = RetrievalResult(
        scheme="coded", routing="reactive", mode="single-content", hops=hops, transmissions=hops,
        success=False, secure_channel_bytes=_secure_bytes(hops, M, m),
        data_channel_bytes=_payload_bytes(Q) * hops, path=tuple(path), key=key,
    )
    if mask is None:
        return result

    gains = {}
    offset = 0
    for node in path:
        width = caches[node].M
        gains[node] = BitVector(width, (mask >> offset) & ((1 << width) - 1))
        offset += width
    received = BitVector.zeros(Q)
    for node in reversed(path):  # farthest node starts the relay
        received = received ^ combine_slots(caches[node], gains[node])
    decoded = decode_last_hop(received, key)
    result.gains = gains
    result.decoded = decoded
    result.success = decoded == store.payload(target) if verify else True
    return result


def _coded_all(own, caches, store, nodes, verify) -> RetrievalResult:
    m, Q = store.m, store.Q
    basis = EchelonBasis(m, track=verify)
    payloads: list[int] = []
    for slot in own.slots:
        basis.add(slot.vector.bits)
        payloads.append(slot.payload.bits)
    path: list[int] = []
    transmissions = 0
    slots_seen = 0
    while not basis.full:
        node = next(nodes, None)
        if node is None:
            break
        path.append(node)
        fresh = 0
        for slot in caches[node].slots:
            fresh += basis.add(slot.vector.bits)
            payloads.append(slot.payload.bits)
            slots_seen += 1
        transmissions += fresh * len(path)  # innovative files ride every hop back
    success = basis.full
    if success and verify:
        for r in range(1, m + 1):
            mask = basis.represent(1 << (r - 1))
            if xor_masked(payloads, mask) != store.payload(r).bits:
                success = False
                break
    return RetrievalResult(
        scheme="coded", routing="reactive", mode="all-contents", hops=len(path),
        transmissions=transmissions, success=success,
        secure_channel_bytes=_secure_bytes(len(path), own.M, m),
        data_channel_bytes=_payload_bytes(Q) * transmissions, path=tuple(path),
    )


def _uncoded_single(own, caches, store, nodes, target, verify) -> RetrievalResult:
    store.check_index(target)
    path: list[int] = []
    found = None
    for slot in own.slots:
        if slot.index == target:
            found = slot.payload
    if found is None:
        for node in nodes:
            path.append(node)
            for slot in caches[node].slots:
                if slot.index == target:
                    found = slot.payload
            if found is not None:
                break
    hops = len(path)
    success = found is not None and (not verify or found == store.payload(target))
    return RetrievalResult(
        scheme="uncoded", routing="reactive", mode="single-content", hops=hops,
        transmissions=hops if found is not None else 0, success=success, secure_channel_bytes=0,
        data_channel_bytes=_payload_bytes(store.Q) * (hops if found is not None else 0),
        path=tuple(path), decoded=found,
    )


def _uncoded_all(own, caches, store, nodes, verify) -> RetrievalResult:
    m = store.m
    have: dict[int, BitVector] = {slot.index: slot.payload for slot in own.slots}
    path: list[int] = []
    transmissions = 0
    while len(have) < m:
        node = next(nodes, None)
        if node is None:
            break
        path.append(node)
        fresh = 0
        for slot in caches[node].slots:
            if slot.index not in have:
                have[slot.index] = slot.payload
                fresh += 1
        transmissions += fresh * len(path)
    success = len(have) == m
    if success and verify:
        success = all(have[r] == store.payload(r) for r in range(1, m + 1))
    return RetrievalResult(
        scheme="uncoded", routing="reactive", mode="all-contents", hops=len(path),
        transmissions=transmissions, success=success, secure_channel_bytes=0,
        data_channel_bytes=_payload_bytes(store.Q) * transmissions, path=tuple(path),
    )


# Proactive gathering ---------------------------------------------------------


def next_hop(cell: Cell, root: Cell) -> Cell:
    """Horizontal first, then vertical, one square-let at a time."""
    if cell[0] != root[0]:
        return cell[0] + (1 if root[0] > cell[0] else -1), cell[1]
    return cell[0], cell[1] + (1 if root[1] > cell[1] else -1)


def relay_transmissions(topology: Topology, cells: list[Cell], root: Cell, requester: int) -> int:
    """Uplinks to anchors, anchor-to-anchor relays and the final delivery."""
    uplinks = 0
    active: list[Cell] = []
    for cell in cells:
        others = [v for v in topology.nodes_in(cell) if v != requester]
        if not others:
            continue
        active.append(cell)
        anchor = topology.anchors.get(cell)
        uplinks += sum(1 for v in others if v != anchor)
    if not active:
        return 0
    edges: set[Cell] = set()
    for cell in active:
        while cell != root and cell not in edges:
            edges.add(cell)
            cell = next_hop(cell, root)
    final = 1 if topology.anchors.get(root) != requester else 0
    return uplinks + len(edges) + final


def proactive_gather(
    topology: Topology,
    plan: LocalGroupPlan,
    caches: Mapping[int, NodeCache],
    store: ContentStore,
    requester: int,
    target: int | None = None,
    gain_rule: str = "indexed",
    verify: bool = True,
) -> RetrievalResult:
    """Collect from every node of the requester's local group via anchor relays."""
    root = topology.cell_of(requester)
    cells = plan.cells(plan.group_of(root))
    contributors = [v for cell in cells for v in topology.nodes_in(cell) if v != requester]
    transmissions = relay_transmissions(topology, cells, root, requester)
    own = caches[requester]
    m, Q, M = store.m, store.Q, own.M
    coded = own.scheme == "coded"
    result = RetrievalResult(
        scheme=own.scheme, routing="proactive",
        mode="all-contents" if target is None else "single-content",
        hops=len(contributors), transmissions=transmissions, success=False,
        secure_channel_bytes=_secure_bytes(len(contributors), M, m) if coded else 0,
        data_channel_bytes=_payload_bytes(Q) * transmissions, path=tuple(contributors),
    )

    if not coded:
        if target is None:
            seen = set(own.indices())
            for v in contributors:
                seen.update(caches[v].indices())
            result.success = len(seen) == m
        else:
            holders = [own] + [caches[v] for v in contributors]
            hit = next((s for c in holders for s in c.slots if s.index == target), None)
            result.decoded = None if hit is None else hit.payload
            result.success = hit is not None and (not verify or hit.payload == store.payload(target))
        return result

    if target is None:
        basis = EchelonBasis(m, track=verify)
        payloads: list[int] = []
        for cache in [own] + [caches[v] for v in contributors]:
            for slot in cache.slots:
                basis.add(slot.vector.bits)
                payloads.append(slot.payload.bits)
        success = basis.full
        if success and verify:
            success = all(
                xor_masked(payloads, basis.represent(1 << (r - 1))) == store.payload(r).bits
                for r in range(1, m + 1)
            )
        result.success = success
        return result

    key = build_key(own, target, m, gain_rule)
    result.key = key
    basis = EchelonBasis(m, track=True)
    for v in contributors:
        for slot in caches[v].slots:
            basis.add(slot.vector.bits)
    mask = basis.represent(key.v_req.bits)
    if mask is None:
        return result
    gains: dict[int, BitVector] = {}
    offset = 0
    for v in contributors:
        width = caches[v].M
        gains[v] = BitVector(width, (mask >> offset) & ((1 << width) - 1))
        offset += width

    # running XOR at anchors, farthest square-lets first
    acc: dict[Cell, BitVector] = {}
    for v in contributors:
        cell = topology.cell_of(v)
        acc[cell] = acc.get(cell, BitVector.zeros(Q)) ^ combine_slots(caches[v], gains[v])
    def dist(c: Cell) -> int:
        return abs(c[0] - root[0]) + abs(c[1] - root[1])

    for d in range(max(map(dist, acc), default=0), 0, -1):
        for cell in [c for c in acc if dist(c) == d]:
            hop = next_hop(cell, root)
            acc[hop] = acc.get(hop, BitVector.zeros(Q)) ^ acc.pop(cell)
    received = acc.get(root, BitVector.zeros(Q))
    decoded = decode_last_hop(received, key)
    result.gains = gains
    result.decoded = decoded
    result.success = decoded == store.payload(target) if verify else True
    return result


def replay_retrieval(caches: Mapping[int, NodeCache], requester: int, result: RetrievalResult) -> BitVector:
    """Re-run a coded single-content retrieval with its recorded gains.

    Used after a cache update: the gains stay fixed while cache payloads change.
    """
    if result.key is None:
        raise ContractViolation("only coded single-content retrievals carry gains")
    own = caches[requester]
    Q = result.key.key_payload.length
    received = BitVector.zeros(Q)
    for node, gains in result.gains.items():
        received = received ^ combine_slots(caches[node], gains)
    return received ^ combine_slots(own, result.key.own_gains)
