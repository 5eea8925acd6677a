"""Decentralised cache placement for the coded and uncoded schemes.

Each node draws from its own stream seeded by ``(seed, node_id)``, so a cache
depends only on the configuration and the node id, never on placement order.
"""

from __future__ import annotations

import csv
import hashlib
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .coding import Content, ContentStore, EncodedFile, NodeCache, Scheme, draw_encoding_vector, encode
from .errors import ConfigurationError
from .gf2 import BitVector, EchelonBasis


@dataclass(frozen=True)
class PlacementConfig:
    scheme: Scheme
    m: int
    M: int
    independence_mode: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scheme not in ("coded", "uncoded"):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.m < 1 or self.M < 1:
            raise ConfigurationError("m and M must be positive")
        if self.scheme == "uncoded" and self.M > self.m:
            raise ConfigurationError(f"uncoded placement needs M <= m (M={self.M}, m={self.m})")
        if self.scheme == "coded" and self.independence_mode and self.M > self.m:
            raise ConfigurationError(f"cannot hold {self.M} independent vectors in dimension {self.m}")

    @property
    def secrecy_regime(self) -> bool:
        """Whether ``m < 2**M``: enough distinct own-slot keys for every content."""
        return self.m < 2**self.M


def node_rng(seed: int, node_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, node_id])


def draw_slot_vectors(config: PlacementConfig, node_id: int, rng: np.random.Generator | None = None) -> list[BitVector]:
    """The ``M`` encoding vectors of one node (no payloads)."""
    rng = node_rng(config.seed, node_id) if rng is None else rng
    if not config.independence_mode:
        return [draw_encoding_vector(config.m, rng) for _ in range(config.M)]
    basis = EchelonBasis(config.m)
    vectors: list[BitVector] = []
    while len(vectors) < config.M:
        vec = draw_encoding_vector(config.m, rng)
        if basis.add(vec.bits):
            vectors.append(vec)
    return vectors


def place_coded(
    config: PlacementConfig, store: ContentStore, node_id: int, rng: np.random.Generator | None = None
) -> NodeCache:
    if config.scheme != "coded":
        raise ConfigurationError("place_coded needs a coded configuration")
    if store.m != config.m:
        raise ConfigurationError(f"store has {store.m} contents, configuration says {config.m}")
    slots = tuple(encode(vec, store) for vec in draw_slot_vectors(config, node_id, rng))
    return NodeCache(node_id, "coded", slots)


def draw_uncoded_indices(config: PlacementConfig, node_id: int, rng: np.random.Generator | None = None) -> list[int]:
    """A uniformly random ``M``-subset of ``1..m``, sorted."""
    rng = node_rng(config.seed, node_id) if rng is None else rng
    picks = rng.choice(config.m, size=config.M, replace=False)
    return sorted(int(i) + 1 for i in picks)


def place_uncoded(
    config: PlacementConfig, store: ContentStore, node_id: int, rng: np.random.Generator | None = None
) -> NodeCache:
    if config.scheme != "uncoded":
        raise ConfigurationError("place_uncoded needs an uncoded configuration")
    if store.m != config.m:
        raise ConfigurationError(f"store has {store.m} contents, configuration says {config.m}")
    indices = draw_uncoded_indices(config, node_id, rng)
    return NodeCache(node_id, "uncoded", tuple(Content(i, store.payload(i)) for i in indices))


def place(config: PlacementConfig, store: ContentStore, node_id: int) -> NodeCache:
    if config.scheme == "coded":
        return place_coded(config, store, node_id)
    return place_uncoded(config, store, node_id)


class Placement(Mapping):
    """Caches of nodes ``0..n-1``, placed on first access and memoised."""

    def __init__(self, config: PlacementConfig, store: ContentStore, n: int) -> None:
        self.config = config
        self.store = store
        self.n = n
        self._caches: dict[int, NodeCache] = {}

    def __getitem__(self, node_id: int) -> NodeCache:
        cache = self._caches.get(node_id)
        if cache is None:
            if not 0 <= node_id < self.n:
                raise KeyError(node_id)
            cache = place(self.config, self.store, node_id)
            self._caches[node_id] = cache
        return cache

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.n))

    def __len__(self) -> int:
        return self.n

    @property
    def placed(self) -> int:
        return len(self._caches)

    def materialize(self) -> dict[int, NodeCache]:
        return {i: self[i] for i in range(self.n)}


# Snapshots -------------------------------------------------------------------

SNAPSHOT_COLUMNS = ["node_id", "scheme", "slot", "m", "vector_hex", "content_index", "payload_sha256"]


@dataclass(frozen=True)
class SnapshotRow:
    node_id: int
    scheme: Scheme
    slot: int
    m: int
    vector: BitVector | None
    content_index: int | None
    payload_sha256: str


def payload_digest(payload: BitVector) -> str:
    return hashlib.sha256(payload.to_bytes()).hexdigest()


def write_snapshot(path: str | Path, caches: Iterable[NodeCache], m: int) -> None:
    """One CSV row per cache slot; coded slots carry the vector as hex."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)
        for cache in caches:
            for j, slot in enumerate(cache.slots):
                if cache.scheme == "coded":
                    row = [cache.node_id, "coded", j, m, slot.vector.to_hex(), "", payload_digest(slot.payload)]
                else:
                    row = [cache.node_id, "uncoded", j, m, "", slot.index, payload_digest(slot.payload)]
                writer.writerow(row)


def read_snapshot(path: str | Path) -> list[SnapshotRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            m = int(rec["m"])
            coded = rec["scheme"] == "coded"
            rows.append(
                SnapshotRow(
                    node_id=int(rec["node_id"]),
                    scheme="coded" if coded else "uncoded",
                    slot=int(rec["slot"]),
                    m=m,
                    vector=BitVector.from_hex(rec["vector_hex"], m) if coded else None,
                    content_index=None if coded else int(rec["content_index"]),
                    payload_sha256=rec["payload_sha256"],
                )
            )
    return rows


def replay_snapshot(rows: Iterable[SnapshotRow], store: ContentStore) -> dict[int, NodeCache]:
    """Rebuild caches from a snapshot, checking every payload digest against ``store``."""
    grouped: dict[int, list[SnapshotRow]] = {}
    for row in rows:
        grouped.setdefault(row.node_id, []).append(row)
    caches = {}
    for node_id, node_rows in grouped.items():
        node_rows.sort(key=lambda r: r.slot)
        slots: list[EncodedFile | Content] = []
        for row in node_rows:
            if row.scheme == "coded":
                slot: EncodedFile | Content = encode(row.vector, store)  # type: ignore[arg-type]
            else:
                slot = Content(row.content_index, store.payload(row.content_index))  # type: ignore[arg-type]
            if payload_digest(slot.payload) != row.payload_sha256:
                raise ConfigurationError(f"node {node_id} slot {row.slot}: payload digest mismatch")
            slots.append(slot)
        caches[node_id] = NodeCache(node_id, node_rows[0].scheme, tuple(slots))
    return caches
