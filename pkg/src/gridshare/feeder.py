"""Distribution-feeder topology with switches, and microgrid partitioning.

Blocks of a partition are the connected components of the graph made of all
lines plus the closed switches. Node identifiers are opaque strings; ordering
is numeric for all-digit ids and lexical otherwise, numeric ids first.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ValidationError
from .unionfind import UnionFind

MAX_ENUMERATED_SWITCHES = 24
BUILTIN_ASSETS = {"ieee123": Path(__file__).parent / "data" / "ieee123"}

OPEN, CLOSED = "open", "closed"


def node_key(node: str):
    return (0, int(node), "") if node.isdigit() else (1, 0, node)


def roman(n: int) -> str:
    out = []
    for value, digits in ((1000, "M"), (900, "CM"), (500, "D"), (400, "CD"), (100, "C"), (90, "XC"),
                          (50, "L"), (40, "XL"), (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")):
        count, n = divmod(n, value)
        out.append(digits * count)
    return "".join(out)


def block_label(index: int) -> str:
    return f"MG-{roman(index + 1)}"


@dataclass(frozen=True)
class Switch:
    label: str
    a: str
    b: str
    closed: bool = True


@dataclass(frozen=True)
class FeederTopology:
    nodes: tuple[str, ...]
    lines: tuple[tuple[str, str], ...]
    switches: tuple[Switch, ...] = ()

    def __post_init__(self):
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise ValidationError("duplicate node identifiers")
        seen = set()
        pairs = [(a, b, f"line {a}-{b}") for a, b in self.lines]
        pairs += [(s.a, s.b, f"switch {s.label}") for s in self.switches]
        for a, b, what in pairs:
            if a == b:
                raise ValidationError(f"{what} is a self-loop")
            for end in (a, b):
                if end not in known:
                    raise ValidationError(f"{what} references unknown node {end}")
            key = frozenset((a, b))
            if key in seen:
                raise ValidationError(f"{what} duplicates an existing edge")
            seen.add(key)
        labels = [s.label for s in self.switches]
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate switch labels")

    @property
    def normal_states(self) -> dict[str, bool]:
        return {s.label: s.closed for s in self.switches}


@dataclass(frozen=True)
class Partition:
    blocks: tuple[tuple[str, ...], ...]
    states: tuple[tuple[str, bool], ...]

    @property
    def labels(self) -> list[str]:
        return [block_label(i) for i in range(len(self.blocks))]

    def block_of(self) -> dict[str, int]:
        return {node: i for i, block in enumerate(self.blocks) for node in block}


def _as_closed(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in (CLOSED, "1", "true"):
        return True
    if text in (OPEN, "0", "false"):
        return False
    raise ValidationError(f"switch state must be open or closed, got {value!r}")


class _Partitioner:
    """Collapses line-connected nodes once, then unions switches per state vector."""

    def __init__(self, topology: FeederTopology):
        self.topology = topology
        self.order = sorted(topology.nodes, key=node_key)
        index = {n: i for i, n in enumerate(self.order)}
        uf = UnionFind(len(self.order))
        for a, b in topology.lines:
            uf.union(index[a], index[b])
        self.groups = uf.groups()
        comp = {}
        for c, members in enumerate(self.groups):
            for m in members:
                comp[m] = c
        self.switch_ends = [(comp[index[s.a]], comp[index[s.b]]) for s in topology.switches]

    def blocks(self, closed: Sequence[bool]) -> tuple[tuple[str, ...], ...]:
        uf = UnionFind(len(self.groups))
        for (ca, cb), on in zip(self.switch_ends, closed):
            if on:
                uf.union(ca, cb)
        out = []
        for comps in uf.groups():
            members = sorted(m for c in comps for m in self.groups[c])
            out.append(tuple(self.order[m] for m in members))
        out.sort(key=lambda blk: node_key(blk[0]))
        return tuple(out)


def partition(topology: FeederTopology, switch_states: Mapping[str, object]) -> Partition:
    """Connected components of lines plus closed switches, ordered by smallest node."""
    labels = [s.label for s in topology.switches]
    unknown = sorted(set(switch_states) - set(labels))
    if unknown:
        raise ValidationError(f"unknown switch labels: {unknown}")
    missing = [lab for lab in labels if lab not in switch_states]
    if missing:
        raise ValidationError(f"missing switch states for: {missing}")
    closed = [_as_closed(switch_states[lab]) for lab in labels]
    blocks = _Partitioner(topology).blocks(closed)
    return Partition(blocks, tuple(zip(labels, closed)))


def enumerate_partitions(topology: FeederTopology, max_results: int | None = None) -> list[Partition]:
    """Every distinct partition reachable by switching, in lexicographic state order.

    State vectors follow the topology's switch order with open < closed; the
    first vector producing a given block structure is kept as its provenance.
    """
    k = len(topology.switches)
    if k > MAX_ENUMERATED_SWITCHES:
        raise ValidationError(f"{k} switches exceed the enumeration bound of {MAX_ENUMERATED_SWITCHES}")
    labels = [s.label for s in topology.switches]
    engine = _Partitioner(topology)
    seen = set()
    out = []
    for closed in itertools.product((False, True), repeat=k):
        blocks = engine.blocks(closed)
        if blocks in seen:
            continue
        seen.add(blocks)
        out.append(Partition(blocks, tuple(zip(labels, closed))))
        if max_results is not None and len(out) >= max_results:
            break
    return out


def filter_self_sufficient(
    partitions: Sequence[Partition],
    house_nodes: Mapping[str, str],
    totals: Mapping[str, tuple[float, float]],
    fraction: float,
) -> list[Partition]:
    """Keep partitions whose every block generates at least ``fraction`` of its consumption.

    ``totals`` maps house id to (generation, consumption) over the study span.
    Blocks without houses pass trivially.
    """
    kept = []
    for part in partitions:
        where = part.block_of()
        gen = [0.0] * len(part.blocks)
        use = [0.0] * len(part.blocks)
        for house, node in house_nodes.items():
            if house in totals and node in where:
                g, c = totals[house]
                gen[where[node]] += g
                use[where[node]] += c
        if all(g >= fraction * c for g, c in zip(gen, use)):
            kept.append(part)
    return kept


# -- asset files -----------------------------------------------------------------------

def resolve_asset(path) -> Path:
    text = str(path)
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN_ASSETS:
            raise ValidationError(f"unknown builtin feeder asset {name!r}")
        return BUILTIN_ASSETS[name]
    p = Path(path)
    if not p.is_dir():
        raise ValidationError(f"feeder asset directory {p} does not exist")
    return p


def _rows(path: Path, header: list[str]):
    if not path.exists():
        raise ValidationError(f"missing feeder file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise ValidationError(f"{path}:1: expected header {','.join(header)}")
        for row in reader:
            if row and any(c.strip() for c in row):
                if len(row) != len(header):
                    raise ValidationError(f"{path}:{reader.line_num}: expected {len(header)} fields")
                yield reader.line_num, [c.strip() for c in row]


def load_switch_states(asset, name: str | None = None) -> dict[str, bool]:
    """Switch states of a named configuration (``switchstates_<name>.csv``), or the normal ones."""
    root = resolve_asset(asset)
    path = root / ("switchstates.csv" if name in (None, "", "normal") else f"switchstates_{name}.csv")
    states = {}
    for line, (label, state) in _rows(path, ["label", "state"]):
        if label in states:
            raise ValidationError(f"{path}:{line}: duplicate switch {label}")
        try:
            states[label] = _as_closed(state)
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
    return states


def load_topology(asset) -> FeederTopology:
    root = resolve_asset(asset)
    nodes = [row[0] for _, row in _rows(root / "nodes.csv", ["id"])]
    lines, switches = [], []
    for line, (a, b, kind, label) in _rows(root / "edges.csv", ["from", "to", "kind", "label"]):
        if kind == "line":
            lines.append((a, b))
        elif kind == "switch":
            if not label:
                raise ValidationError(f"edges.csv:{line}: switch without label")
            switches.append((label, a, b))
        else:
            raise ValidationError(f"edges.csv:{line}: kind must be line or switch, got {kind!r}")
    normal = load_switch_states(root)
    missing = [lab for lab, _, _ in switches if lab not in normal]
    if missing:
        raise ValidationError(f"switchstates.csv lacks states for {missing}")
    return FeederTopology(
        tuple(nodes), tuple(lines), tuple(Switch(lab, a, b, normal[lab]) for lab, a, b in switches)
    )


def load_house_nodes(asset) -> dict[str, str]:
    root = resolve_asset(asset)
    path = root / "houses.csv"
    out = {}
    for line, (house, node) in _rows(path, ["house_id", "node_id"]):
        if house in out:
            raise ValidationError(f"{path}:{line}: duplicate house {house}")
        out[house] = node
    return out


def write_partition_csv(path, part: Partition) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["block", "label", "node_id"])
        for i, block in enumerate(part.blocks):
            for node in block:
                writer.writerow([i, block_label(i), node])
