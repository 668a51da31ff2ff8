"""Network topology, branch admittances and the current-measurement incidence matrix.

Buses are labelled by the integer ids used in the grid document. Internally
every array is indexed by position ``0..n_b-1`` in document order; ``labels``
maps positions back to ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

BUS_KINDS = ("load", "zero_injection", "unmonitored")
# accepted spellings in grid documents
_KIND_ALIASES = {
    "load": "load",
    "zero_injection": "zero_injection",
    "zero-injection": "zero_injection",
    "zi": "zero_injection",
    "generator": "unmonitored",
    "unmonitored": "unmonitored",
}


class GridSpecError(ValueError):
    """Raised when a grid document fails validation.

    ``path`` names the offending field, e.g. ``branches[3].to``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    admittance: complex


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridTopology:
    """Validated network description.

    ``load`` and ``zero_injection`` are disjoint boolean masks; a bus with
    neither flag (a bare generator terminal, for instance) carries no
    observability requirement and its voltage is not part of the estimated
    state.
    """

    n_buses: int
    branches: tuple[Branch, ...]
    adjacency: np.ndarray
    zero_injection: np.ndarray
    load: np.ndarray
    labels: tuple[int, ...]
    name: str = ""
    _index: dict = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def state_buses(self) -> np.ndarray:
        """Positions of buses whose voltage is estimated (load or zero-injection)."""
        return np.flatnonzero(self.load | self.zero_injection)

    @property
    def closed_adjacency(self) -> np.ndarray:
        """Adjacency with unit diagonal: a PMU always sees its own bus."""
        return self.adjacency | np.eye(self.n_buses, dtype=bool)

    def index_of(self, label: int) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown bus id {label}") from None

    def mask(self, labels: Sequence[int]) -> np.ndarray:
        """Boolean vector with True at the given bus ids."""
        out = np.zeros(self.n_buses, dtype=bool)
        for lab in labels:
            out[self.index_of(lab)] = True
        return out

    def labels_of(self, mask: np.ndarray) -> list[int]:
        return [self.labels[i] for i in np.flatnonzero(mask)]

    def admittance_matrix(self) -> np.ndarray:
        """Diagonal matrix of branch series admittances, in branch order."""
        return np.diag([br.admittance for br in self.branches])

    def permuted(self, order: Sequence[int]) -> "GridTopology":
        """Same network with bus positions reordered; ``order[new] = old``."""
        order = list(order)
        inv = {old: new for new, old in enumerate(order)}
        branches = tuple(
            Branch(inv[b.from_bus], inv[b.to_bus], b.admittance) for b in self.branches
        )
        return GridTopology(
            n_buses=self.n_buses,
            branches=branches,
            adjacency=_frozen(self.adjacency[np.ix_(order, order)].copy()),
            zero_injection=_frozen(self.zero_injection[order].copy()),
            load=_frozen(self.load[order].copy()),
            labels=tuple(self.labels[o] for o in order),
            name=self.name,
        )


@dataclass(frozen=True)
class IncidenceMatrix:
    """Signed current-measurement incidence matrix.

    Row ``2*k`` measures branch ``k`` from its declared ``from`` end (+1 there,
    -1 at the far end); row ``2*k+1`` measures it from the other end.
    """

    rows: np.ndarray
    row_branch: tuple[tuple[int, int], ...]

    @property
    def measuring_bus(self) -> np.ndarray:
        """Bus position owning each row (where the +1 sits)."""
        return np.argmax(self.rows == 1, axis=1)

    def adjacency(self) -> np.ndarray:
        n = self.rows.shape[1]
        adj = np.zeros((n, n), dtype=bool)
        for r in self.rows:
            i = int(np.flatnonzero(r == 1)[0])
            k = int(np.flatnonzero(r == -1)[0])
            adj[i, k] = adj[k, i] = True
        return adj


def make_topology(
    n_buses: int,
    branches: Sequence[tuple[int, int, complex]],
    load: Sequence[bool] | np.ndarray | None = None,
    zero_injection: Sequence[bool] | np.ndarray | None = None,
    labels: Sequence[int] | None = None,
    name: str = "",
) -> GridTopology:
    """Build a topology from zero-based branch endpoints.

    Defaults mark every bus as a load bus.
    """
    load_v = np.ones(n_buses, dtype=bool) if load is None else np.asarray(load, dtype=bool).copy()
    zi_v = (
        np.zeros(n_buses, dtype=bool)
        if zero_injection is None
        else np.asarray(zero_injection, dtype=bool).copy()
    )
    if np.any(load_v & zi_v):
        raise GridSpecError("buses", "a bus cannot be both load and zero-injection")
    adj = np.zeros((n_buses, n_buses), dtype=bool)
    seen = set()
    brs = []
    for k, (i, j, y) in enumerate(branches):
        for end, b in (("from", i), ("to", j)):
            if not 0 <= b < n_buses:
                raise GridSpecError(f"branches[{k}].{end}", f"bus index {b} out of range")
        if i == j:
            raise GridSpecError(f"branches[{k}]", "self-loop")
        key = frozenset((i, j))
        if key in seen:
            raise GridSpecError(f"branches[{k}]", "duplicate branch")
        seen.add(key)
        adj[i, j] = adj[j, i] = True
        brs.append(Branch(int(i), int(j), complex(y)))
    return GridTopology(
        n_buses=n_buses,
        branches=tuple(brs),
        adjacency=_frozen(adj),
        zero_injection=_frozen(zi_v),
        load=_frozen(load_v),
        labels=tuple(range(1, n_buses + 1)) if labels is None else tuple(labels),
        name=name,
    )


def load_grid(spec: Mapping[str, Any] | str | Path) -> GridTopology:
    """Parse and validate a grid document.

    ``spec`` is either an already-decoded mapping or a path to a JSON file with
    ``buses`` (``{"id", "type"}``) and ``branches`` (``{"from", "to", "g", "b"}``)
    arrays. An optional ``adjacency`` matrix is checked against the branches.
    """
    if not isinstance(spec, Mapping):
        with open(spec, encoding="utf-8") as fh:
            try:
                spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise GridSpecError("<document>", f"invalid JSON: {exc}") from None

    buses = spec.get("buses")
    if not isinstance(buses, list) or not buses:
        raise GridSpecError("buses", "expected a non-empty list")
    labels: list[int] = []
    load, zi = [], []
    for n, bus in enumerate(buses):
        if not isinstance(bus, Mapping) or "id" not in bus:
            raise GridSpecError(f"buses[{n}]", "missing id")
        try:
            lab = int(bus["id"])
        except (TypeError, ValueError):
            raise GridSpecError(f"buses[{n}].id", f"not an integer: {bus['id']!r}") from None
        if lab in labels:
            raise GridSpecError(f"buses[{n}].id", f"duplicate bus id {lab}")
        kind = _KIND_ALIASES.get(str(bus.get("type", "load")).lower())
        if kind is None:
            raise GridSpecError(f"buses[{n}].type", f"unknown bus type {bus.get('type')!r}")
        labels.append(lab)
        load.append(kind == "load")
        zi.append(kind == "zero_injection")

    index = {lab: i for i, lab in enumerate(labels)}
    raw = spec.get("branches")
    if not isinstance(raw, list):
        raise GridSpecError("branches", "expected a list")
    branches = []
    for k, br in enumerate(raw):
        ends = []
        for end in ("from", "to"):
            if end not in br:
                raise GridSpecError(f"branches[{k}].{end}", "missing")
            lab = br[end]
            if lab not in index:
                raise GridSpecError(f"branches[{k}].{end}", f"dangling bus id {lab}")
            ends.append(index[lab])
        try:
            y = complex(float(br["g"]), float(br["b"]))
        except (KeyError, TypeError, ValueError):
            raise GridSpecError(f"branches[{k}]", "admittance needs numeric g and b") from None
        if y == 0:
            raise GridSpecError(f"branches[{k}]", "zero series admittance")
        branches.append((ends[0], ends[1], y))

    topo = make_topology(
        len(labels), branches, load=load, zero_injection=zi, labels=labels, name=str(spec.get("name", ""))
    )

    declared = spec.get("adjacency")
    if declared is not None:
        adj = np.asarray(declared, dtype=bool)
        if adj.shape != (topo.n_buses, topo.n_buses):
            raise GridSpecError("adjacency", f"shape {adj.shape} does not match {topo.n_buses} buses")
        if not np.array_equal(adj, adj.T):
            raise GridSpecError("adjacency", "declared adjacency is not symmetric")
        if not np.array_equal(adj, topo.adjacency):
            raise GridSpecError("adjacency", "declared adjacency disagrees with branch list")
    return topo


def build_incidence(topology: GridTopology) -> IncidenceMatrix:
    rows = np.zeros((2 * topology.n_branches, topology.n_buses), dtype=int)
    row_branch = []
    for k, br in enumerate(topology.branches):
        rows[2 * k, br.from_bus] = 1
        rows[2 * k, br.to_bus] = -1
        rows[2 * k + 1, br.from_bus] = -1
        rows[2 * k + 1, br.to_bus] = 1
        row_branch += [(k, +1), (k, -1)]
    return IncidenceMatrix(rows=_frozen(rows), row_branch=tuple(row_branch))


def fixture_path(name: str) -> Path:
    """Path of a data file shipped with the package (``ieee9.grid``, ``table1.csv``)."""
    return Path(str(resources.files("pmugame") / "data" / name))


def ieee9() -> GridTopology:
    return load_grid(fixture_path("ieee9.grid"))
