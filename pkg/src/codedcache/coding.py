"""Contents, random-linear-fountain encoding, last-hop keys and cache updates."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import ContractViolation
from .gf2 import BitVector, EchelonBasis, xor_combine

Scheme = Literal["coded", "uncoded"]

DEFAULT_Q = 1024
GAIN_RULES = ("indexed", "all-ones")
KEYSTREAM_GENERATOR = "shake256(seed as 8-byte little-endian two's complement)"


@dataclass(frozen=True)
class Content:
    index: int
    payload: BitVector


@dataclass
class ContentStore:
    """Contents ``F_1..F_m`` (1-based indices), each exactly ``Q`` bits."""

    Q: int
    contents: list[Content]

    def __post_init__(self) -> None:
        if self.Q <= 0:
            raise ContractViolation(f"Q must be positive, got {self.Q}")
        for pos, content in enumerate(self.contents, start=1):
            if content.index != pos:
                raise ContractViolation(f"content at position {pos} has index {content.index}")
            if content.payload.length != self.Q:
                raise ContractViolation(f"content {pos} has {content.payload.length} bits, expected {self.Q}")

    @classmethod
    def from_payloads(cls, payloads: Sequence[BitVector], Q: int | None = None) -> ContentStore:
        if Q is None:
            if not payloads:
                raise ContractViolation("Q required for an empty store")
            Q = payloads[0].length
        return cls(Q, [Content(i, p) for i, p in enumerate(payloads, start=1)])

    @property
    def m(self) -> int:
        return len(self.contents)

    def payload(self, index: int) -> BitVector:
        self.check_index(index)
        return self.contents[index - 1].payload

    def check_index(self, index: int) -> None:
        if not 1 <= index <= len(self.contents):
            raise ContractViolation(f"content index {index} outside [1, {len(self.contents)}]")

    def replaced(self, index: int, payload: BitVector) -> ContentStore:
        self.check_index(index)
        if payload.length != self.Q:
            raise ContractViolation("replacement payload has the wrong length")
        contents = list(self.contents)
        contents[index - 1] = Content(index, payload)
        return ContentStore(self.Q, contents)


@dataclass(frozen=True)
class EncodedFile:
    vector: BitVector
    payload: BitVector

    def consistent_with(self, store: ContentStore) -> bool:
        return encode(self.vector, store).payload == self.payload


@dataclass(frozen=True)
class NodeCache:
    node_id: int
    scheme: Scheme
    slots: tuple[EncodedFile | Content, ...]

    @property
    def M(self) -> int:
        return len(self.slots)

    def vectors(self) -> list[BitVector]:
        if self.scheme != "coded":
            raise ContractViolation("uncoded caches have no encoding vectors")
        return [slot.vector for slot in self.slots]  # type: ignore[union-attr]

    def payloads(self) -> list[BitVector]:
        return [slot.payload for slot in self.slots]

    def indices(self) -> list[int]:
        if self.scheme != "uncoded":
            raise ContractViolation("coded caches hold combinations, not indices")
        return [slot.index for slot in self.slots]  # type: ignore[union-attr]


@dataclass(frozen=True)
class KeyMaterial:
    target: int
    v_req: BitVector
    key_payload: BitVector
    own_gains: BitVector


# Content generation ----------------------------------------------------------


def random_payload(Q: int, rng: np.random.Generator) -> BitVector:
    return BitVector.from_bytes(rng.bytes((Q + 7) // 8), Q)


def skewed_payload(Q: int, p_one: float, rng: np.random.Generator) -> BitVector:
    """Payload whose bits are independent Bernoulli(``p_one``)."""
    bits = rng.random(Q) < p_one
    return BitVector.from_bytes(np.packbits(bits, bitorder="little").tobytes(), Q)


def random_store(m: int, Q: int, rng: np.random.Generator) -> ContentStore:
    return ContentStore.from_payloads([random_payload(Q, rng) for _ in range(m)], Q)


def skewed_store(p: Sequence[float], Q: int, rng: np.random.Generator) -> ContentStore:
    """One content per entry of ``p``; content ``l`` has bit-one probability ``p[l-1]``."""
    return ContentStore.from_payloads([skewed_payload(Q, pl, rng) for pl in p], Q)


# Encoding ----------------------------------------------------------------------


def draw_encoding_vector(m: int, rng: np.random.Generator) -> BitVector:
    """``m`` independent fair bits; the zero vector is allowed."""
    if m < 1:
        raise ContractViolation("m must be at least 1")
    raw = int.from_bytes(rng.bytes((m + 7) // 8), "little")
    return BitVector(m, raw & ((1 << m) - 1))


def encode(vector: BitVector, store: ContentStore) -> EncodedFile:
    if vector.length != store.m:
        raise ContractViolation(f"vector length {vector.length} != m={store.m}")
    acc = 0
    bits = vector.bits
    contents = store.contents
    while bits:
        low = bits & -bits
        acc ^= contents[low.bit_length() - 1].payload.bits
        bits ^= low
    return EncodedFile(vector, BitVector(store.Q, acc))


# Last-hop key ----------------------------------------------------------------


def indexed_gains(target: int, M: int) -> BitVector:
    """Distinct non-zero gain pattern per target while ``target < 2**M``.

    Target 1 gets all ones; later targets clear low bits in binary-counter
    order.  Past ``2**M - 1`` targets the patterns wrap, so uniqueness is only
    guaranteed in the ``m < 2**M`` regime.
    """
    if M < 1:
        raise ContractViolation("need at least one cache slot")
    full = (1 << M) - 1
    return BitVector(M, full ^ ((target - 1) % full))


def build_key(cache: NodeCache, target: int, m: int | None = None, gain_rule: str = "indexed") -> KeyMaterial:
    """Choose the requester's own gains, its key payload and the vector ``v_req``.

    If ``e_target`` is spanned by the requester's own vectors, the gains solve
    for it and ``v_req`` is zero.  Otherwise the gains follow ``gain_rule``:
    ``"indexed"`` (a distinct pattern per target, see :func:`indexed_gains`) or
    ``"all-ones"`` (every slot, the same key for every target).
    """
    if cache.scheme != "coded":
        raise ContractViolation("keys are only defined for coded caches")
    if gain_rule not in GAIN_RULES:
        raise ContractViolation(f"unknown gain rule {gain_rule!r}")
    vectors = cache.vectors()
    if m is None:
        if not vectors:
            raise ContractViolation("m required for an empty cache")
        m = vectors[0].length
    if not 1 <= target <= m:
        raise ContractViolation(f"target {target} outside [1, {m}]")
    unit = BitVector.unit(m, target - 1)
    M = len(vectors)

    basis = EchelonBasis(m, track=True)
    for vec in vectors:
        basis.add(vec.bits)
    mask = basis.represent(unit.bits)
    if mask is not None:
        gains = BitVector(M, mask)
    elif gain_rule == "indexed":
        gains = indexed_gains(target, M)
    else:
        gains = BitVector.ones(M)

    own = xor_combine(vectors, gains, length=m)
    key_payload = xor_combine(cache.payloads(), gains, length=_payload_length(cache))
    v_req = unit ^ own
    return KeyMaterial(target=target, v_req=v_req, key_payload=key_payload, own_gains=gains)


def _payload_length(cache: NodeCache) -> int:
    return cache.slots[0].payload.length if cache.slots else 0


def decode_last_hop(received: BitVector, key: KeyMaterial) -> BitVector:
    if received.length != key.key_payload.length:
        raise ContractViolation("received payload length differs from key length")
    return received ^ key.key_payload


def combine_slots(cache: NodeCache, gains: BitVector) -> BitVector:
    """The file ``sum_j b_j r_j`` a node adds to the relayed payload."""
    return xor_combine(cache.payloads(), gains, length=_payload_length(cache))


# Scrambling ------------------------------------------------------------------


def keystream(Q: int, seed: int) -> BitVector:
    digest = hashlib.shake_256(int(seed).to_bytes(8, "little", signed=True)).digest((Q + 7) // 8)
    return BitVector.from_bytes(digest, Q)


def scramble(payload: BitVector, seed: int) -> BitVector:
    return payload ^ keystream(payload.length, seed)


descramble = scramble


# Cache update ----------------------------------------------------------------


@dataclass
class UpdateResult:
    caches: dict[int, NodeCache]
    store: ContentStore
    scrambled: BitVector
    broadcast: BitVector
    broadcast_bits: int
    slots_modified: int
    slots_total: int
    modified: set[tuple[int, int]] = field(default_factory=set)


def cache_update(
    caches: Mapping[int, NodeCache] | Iterable[NodeCache],
    store: ContentStore,
    k: int,
    new_payload: BitVector,
    seed: int,
) -> UpdateResult:
    """Replace content ``k`` by a scrambled ``new_payload`` with one XOR broadcast.

    Inputs are left untouched; updated caches and store are returned.
    """
    store.check_index(k)
    if new_payload.length != store.Q:
        raise ContractViolation("new payload has the wrong length")
    node_caches = list(caches.values()) if isinstance(caches, Mapping) else list(caches)

    scrambled = scramble(new_payload, seed)
    broadcast = store.payload(k) ^ scrambled
    bit = 1 << (k - 1)

    updated: dict[int, NodeCache] = {}
    modified: set[tuple[int, int]] = set()
    total = 0
    for cache in node_caches:
        if cache.scheme != "coded":
            raise ContractViolation("cache update applies to coded caches")
        slots = []
        for j, slot in enumerate(cache.slots):
            total += 1
            if slot.vector.bits & bit:  # type: ignore[union-attr]
                slot = replace(slot, payload=slot.payload ^ broadcast)
                modified.add((cache.node_id, j))
            slots.append(slot)
        updated[cache.node_id] = NodeCache(cache.node_id, "coded", tuple(slots))

    return UpdateResult(
        caches=updated,
        store=store.replaced(k, scrambled),
        scrambled=scrambled,
        broadcast=broadcast,
        broadcast_bits=broadcast.length,
        slots_modified=len(modified),
        slots_total=total,
        modified=modified,
    )


# Files -------------------------------------------------------------------------


def read_payload(path: str | Path, Q: int) -> BitVector:
    data = Path(path).read_bytes()
    if Q % 8 or len(data) != Q // 8:
        raise ContractViolation(f"{path}: expected {Q // 8} bytes for Q={Q}, found {len(data)}")
    return BitVector.from_bytes(data, Q)


def write_payload(path: str | Path, payload: BitVector) -> None:
    if payload.length % 8:
        raise ContractViolation("payload files need Q to be a multiple of 8")
    Path(path).write_bytes(payload.to_bytes())


def load_manifest(path: str | Path) -> ContentStore:
    """Read a content-set manifest.

    Format (``#`` starts a comment)::

        m = 3
        Q = 1024
        1 file:contents/one.bin
        2 seed:17
        3 file:/abs/path/three.bin

    Relative file paths resolve against the manifest's directory; ``seed:``
    entries draw a uniform payload from ``numpy.random.default_rng(seed)``.
    """
    path = Path(path)
    header: dict[str, int] = {}
    entries: dict[int, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            header[key] = int(value)
            continue
        try:
            idx_text, source = line.split(None, 1)
            idx = int(idx_text)
        except ValueError:
            raise ContractViolation(f"{path}:{lineno}: cannot parse {raw!r}") from None
        if idx in entries:
            raise ContractViolation(f"{path}:{lineno}: duplicate content {idx}")
        entries[idx] = source.strip()
    if "m" not in header or "Q" not in header:
        raise ContractViolation(f"{path}: manifest needs m and Q")
    m, Q = header["m"], header["Q"]
    if Q <= 0 or Q % 8:
        raise ContractViolation(f"{path}: Q must be a positive multiple of 8")
    if sorted(entries) != list(range(1, m + 1)):
        raise ContractViolation(f"{path}: expected contents 1..{m}")
    payloads = []
    for idx in range(1, m + 1):
        kind, _, arg = entries[idx].partition(":")
        if kind == "file":
            file_path = Path(arg)
            if not file_path.is_absolute():
                file_path = path.parent / file_path
            payloads.append(read_payload(file_path, Q))
        elif kind == "seed":
            payloads.append(random_payload(Q, np.random.default_rng(int(arg))))
        else:
            raise ContractViolation(f"{path}: unknown source {entries[idx]!r}")
    return ContentStore.from_payloads(payloads, Q)


def write_manifest(path: str | Path, store: ContentStore, payload_dir: str = "contents") -> None:
    """Write ``store`` as a manifest plus one raw payload file per content."""
    path = Path(path)
    directory = path.parent / payload_dir
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"m = {store.m}", f"Q = {store.Q}"]
    for content in store.contents:
        name = f"content_{content.index:04d}.bin"
        write_payload(directory / name, content.payload)
        lines.append(f"{content.index} file:{payload_dir}/{name}")
    path.write_text("\n".join(lines) + "\n")
