"""Geometry and discretisation bookkeeping: meshes, boundary conditions,
degree-of-freedom numbering and global field storage.

Meshes are immutable after construction. The native plain-text format is:

    nodes <N>
    <id> <x> <y>              (N lines, ids 1-based)
    elements <M> <quad4|tri3>
    <id> <n1> <n2> <n3> [<n4>]
    nodeset <name> <k>
    <id>                      (k ids, any whitespace layout)
    elemset <name> <k>
    <id>

``elements``, ``nodeset`` and ``elemset`` blocks may repeat.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import elements as el

DUPLICATE_TOL = 1e-9


class MeshFormatError(Exception):
    """Raised on malformed mesh files; message carries the line number."""


@dataclass
class Mesh:
    nodes: np.ndarray                        # (n_nodes, 2) coordinates [mm]
    kinds: list                              # element type string per element
    conn: list                               # int array of node ids per element
    node_sets: dict = field(default_factory=dict)
    element_sets: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.conn)

    def element_coords(self, e: int) -> np.ndarray:
        return self.nodes[self.conn[e]]

    def char_length(self, e: int) -> float:
        """Longest edge of element e (used for mesh-density warnings)."""
        xy = self.element_coords(e)
        d = xy - np.roll(xy, 1, axis=0)
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    def validate(self):
        """Check connectivity ranges, Jacobians and node duplication."""
        n = self.n_nodes
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("non-finite node coordinate")
        for e, (kind, ids) in enumerate(zip(self.kinds, self.conn)):
            if kind not in el.N_NODES:
                raise ValueError(f"element {e}: unknown type {kind!r}")
            if len(ids) != el.N_NODES[kind]:
                raise ValueError(f"element {e}: wrong node count for {kind}")
            if np.any(ids < 0) or np.any(ids >= n):
                raise ValueError(f"element {e}: node index out of range")
            try:
                el.element_kinematics(kind, self.nodes[ids])
            except ValueError as exc:
                raise ValueError(f"element {e}: {exc}") from None
        for name, ids in self.node_sets.items():
            if np.any(ids < 0) or np.any(ids >= n):
                raise ValueError(f"node set {name!r}: index out of range")
        for name, ids in self.element_sets.items():
            if np.any(ids < 0) or np.any(ids >= self.n_elements):
                raise ValueError(f"element set {name!r}: index out of range")
        if n > 1:
            tree = cKDTree(self.nodes)
            pairs = tree.query_pairs(DUPLICATE_TOL)
            if pairs:
                i, j = sorted(pairs)[0]
                raise ValueError(f"duplicate nodes {i} and {j} within {DUPLICATE_TOL} mm")
        return self


def structured_rect_mesh(width: float, height: float, nx: int, ny: int) -> Mesh:
    """Uniform quad4 grid on [0, width] x [0, height].

    Creates boundary node sets left/right/top/bottom and single-node corner
    sets bottom_left/bottom_right/top_left/top_right.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    xg, yg = np.meshgrid(xs, ys)            # row-major by y
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def nid(ix, iy):
        return iy * (nx + 1) + ix

    conn = []
    for iy in range(ny):
        for ix in range(nx):
            conn.append(np.array([nid(ix, iy), nid(ix + 1, iy),
                                  nid(ix + 1, iy + 1), nid(ix, iy + 1)]))
    node_sets = {
        "left": np.array([nid(0, iy) for iy in range(ny + 1)]),
        "right": np.array([nid(nx, iy) for iy in range(ny + 1)]),
        "bottom": np.array([nid(ix, 0) for ix in range(nx + 1)]),
        "top": np.array([nid(ix, ny) for ix in range(nx + 1)]),
        "bottom_left": np.array([nid(0, 0)]),
        "bottom_right": np.array([nid(nx, 0)]),
        "top_left": np.array([nid(0, ny)]),
        "top_right": np.array([nid(nx, ny)]),
    }
    return Mesh(nodes, ["quad4"] * len(conn), conn, node_sets).validate()


def load_mesh(path) -> Mesh:
    """Parse the native mesh format; errors carry 1-based line numbers."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().split("\n")
    tokens = []                              # (line_no, token) stream
    for lineno, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0]
        for tok in body.split():
            tokens.append((lineno, tok))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1][0] if tokens else 1
            raise MeshFormatError(f"line {last}: unexpected end of file, expected {what}")
        lineno, tok = tokens[pos]
        pos += 1
        return lineno, tok

    def take_int(what):
        lineno, tok = take(what)
        try:
            return lineno, int(tok)
        except ValueError:
            raise MeshFormatError(f"line {lineno}: expected integer {what}, got {tok!r}") from None

    def take_float(what):
        lineno, tok = take(what)
        try:
            return lineno, float(tok)
        except ValueError:
            raise MeshFormatError(f"line {lineno}: expected number {what}, got {tok!r}") from None

    lineno, kw = take("'nodes'")
    if kw != "nodes":
        raise MeshFormatError(f"line {lineno}: expected 'nodes', got {kw!r}")
    _, n_nodes = take_int("node count")
    nodes = np.empty((n_nodes, 2))
    seen = np.zeros(n_nodes, dtype=bool)
    for _ in range(n_nodes):
        lineno, nid = take_int("node id")
        if not 1 <= nid <= n_nodes:
            raise MeshFormatError(f"line {lineno}: node id {nid} out of range 1..{n_nodes}")
        if seen[nid - 1]:
            raise MeshFormatError(f"line {lineno}: node id {nid} repeated")
        seen[nid - 1] = True
        _, x = take_float("x coordinate")
        _, y = take_float("y coordinate")
        nodes[nid - 1] = (x, y)

    kinds, conn = [], []
    node_sets, element_sets = {}, {}
    while pos < len(tokens):
        lineno, kw = take("block keyword")
        if kw == "elements":
            _, m = take_int("element count")
            lineno, etype = take("element type")
            if etype not in el.N_NODES:
                raise MeshFormatError(f"line {lineno}: unknown element type {etype!r}")
            k = el.N_NODES[etype]
            base = len(conn)
            conn.extend([None] * m)
            for _ in range(m):
                lineno, eid = take_int("element id")
                if not 1 <= eid <= m:
                    raise MeshFormatError(f"line {lineno}: element id {eid} out of range 1..{m}")
                ids = np.empty(k, dtype=int)
                for j in range(k):
                    lineno, nid = take_int("node id")
                    if not 1 <= nid <= n_nodes:
                        raise MeshFormatError(
                            f"line {lineno}: element {eid} node index {nid} out of range 1..{n_nodes}")
                    ids[j] = nid - 1
                if conn[base + eid - 1] is not None:
                    raise MeshFormatError(f"line {lineno}: element id {eid} repeated")
                conn[base + eid - 1] = ids
                kinds.append(etype)
        elif kw in ("nodeset", "elemset"):
            _, name = take("set name")
            _, count = take_int("set size")
            ids = np.empty(count, dtype=int)
            limit = n_nodes if kw == "nodeset" else len(conn)
            for j in range(count):
                lineno, sid = take_int("set entry")
                if not 1 <= sid <= limit:
                    raise MeshFormatError(f"line {lineno}: set entry {sid} out of range 1..{limit}")
                ids[j] = sid - 1
            (node_sets if kw == "nodeset" else element_sets)[name] = ids
        else:
            raise MeshFormatError(f"line {lineno}: unexpected keyword {kw!r}")

    mesh = Mesh(nodes, kinds, conn, node_sets, element_sets)
    try:
        return mesh.validate()
    except ValueError as exc:
        raise MeshFormatError(str(exc)) from None


def save_mesh(mesh: Mesh, path):
    """Write the canonical form of the native format (load/save idempotent)."""
    lines = [f"nodes {mesh.n_nodes}"]
    for i, (x, y) in enumerate(mesh.nodes, start=1):
        lines.append(f"{i} {float(x)!r} {float(y)!r}")
    # group consecutive elements of equal type into blocks
    i = 0
    while i < mesh.n_elements:
        j = i
        while j < mesh.n_elements and mesh.kinds[j] == mesh.kinds[i]:
            j += 1
        lines.append(f"elements {j - i} {mesh.kinds[i]}")
        for e in range(i, j):
            ids = " ".join(str(n + 1) for n in mesh.conn[e])
            lines.append(f"{e - i + 1} {ids}")
        i = j
    for name in sorted(mesh.node_sets):
        ids = mesh.node_sets[name]
        lines.append(f"nodeset {name} {len(ids)}")
        lines.extend(str(i + 1) for i in ids)
    for name in sorted(mesh.element_sets):
        ids = mesh.element_sets[name]
        lines.append(f"elemset {name} {len(ids)}")
        lines.extend(str(i + 1) for i in ids)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def remove_elements(mesh: Mesh, element_ids) -> Mesh:
    """New mesh without the given elements; unreferenced nodes are dropped.

    Node and element sets are remapped (entries that vanish are removed).
    Useful for cutting notches out of structured grids.
    """
    drop = set(int(e) for e in element_ids)
    keep_elems = [e for e in range(mesh.n_elements) if e not in drop]
    used = np.zeros(mesh.n_nodes, dtype=bool)
    for e in keep_elems:
        used[mesh.conn[e]] = True
    new_id = np.full(mesh.n_nodes, -1, dtype=int)
    new_id[used] = np.arange(int(used.sum()))
    nodes = mesh.nodes[used]
    conn = [new_id[mesh.conn[e]] for e in keep_elems]
    kinds = [mesh.kinds[e] for e in keep_elems]
    node_sets = {}
    for name, ids in mesh.node_sets.items():
        kept = new_id[ids]
        kept = kept[kept >= 0]
        if len(kept):
            node_sets[name] = kept
    elem_new = {e: i for i, e in enumerate(keep_elems)}
    element_sets = {}
    for name, ids in mesh.element_sets.items():
        kept = np.array([elem_new[e] for e in ids if e in elem_new], dtype=int)
        if len(kept):
            element_sets[name] = kept
    return Mesh(nodes, kinds, conn, node_sets, element_sets).validate()


def insert_seam(mesh: Mesh, start: float, end: float, y: float,
                gap: float | None = None, tol: float = 1e-9) -> Mesh:
    """Split the mesh along the horizontal segment x in [start, end) at height y.

    Nodes on the segment (excluding the end point, which becomes the shared
    crack tip) are duplicated; elements whose centroid lies above y reconnect
    to the twins. Twins inherit node-set memberships. The twins are raised by
    ``gap`` (default: 1e-6 of the seam node spacing) so the slit has a tiny
    positive opening and the mesh keeps satisfying the duplicate-node rule.
    """
    on_seam = np.where(
        (np.abs(mesh.nodes[:, 1] - y) <= tol)
        & (mesh.nodes[:, 0] >= start - tol)
        & (mesh.nodes[:, 0] < end - tol)
    )[0]
    if len(on_seam) == 0:
        raise ValueError("no mesh nodes on the requested seam segment")
    if gap is None:
        xs = np.sort(mesh.nodes[on_seam, 0])
        spacing = np.min(np.diff(xs)) if len(xs) > 1 else (end - start)
        gap = 1e-6 * spacing
    twin = {}
    next_id = mesh.n_nodes
    for n in on_seam:
        twin[int(n)] = next_id
        next_id += 1
    twins = mesh.nodes[on_seam].copy()
    twins[:, 1] += gap
    new_nodes = np.vstack([mesh.nodes, twins])
    conn = []
    for e in range(mesh.n_elements):
        ids = mesh.conn[e].copy()
        centroid_y = mesh.nodes[ids, 1].mean()
        if centroid_y > y:
            for j, n in enumerate(ids):
                if int(n) in twin:
                    ids[j] = twin[int(n)]
        conn.append(ids)
    node_sets = {}
    for name, ids in mesh.node_sets.items():
        extra = [twin[int(n)] for n in ids if int(n) in twin]
        node_sets[name] = np.concatenate([ids, np.array(extra, dtype=int)]) if extra else ids
    out = Mesh(new_nodes, list(mesh.kinds), conn, node_sets, dict(mesh.element_sets))
    return out.validate()


@dataclass(frozen=True)
class DirichletBC:
    """A constrained (node set, dof) pair.

    ``value_scale`` multiplies the load-program signal; ``fixed`` pins the
    dof to zero (scale forced to 0).
    """
    node_set: str
    dof: str                     # "x" | "y"
    value_scale: float = 1.0
    fixed: bool = False

    def __post_init__(self):
        if self.dof not in ("x", "y"):
            raise ValueError(f"dof must be 'x' or 'y', got {self.dof!r}")
        if self.fixed and self.value_scale != 0.0:
            object.__setattr__(self, "value_scale", 0.0)


@dataclass
class FieldState:
    """Global nodal unknowns: u flat as [ux0, uy0, ux1, ...], phi per node."""
    u: np.ndarray
    phi: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, n_nodes: int):
        return cls(np.zeros(2 * n_nodes), np.zeros(n_nodes), 0.0)

    def copy(self):
        return FieldState(self.u.copy(), self.phi.copy(), self.t)


class DofMap:
    """Numbering of (u_x, u_y, phi) unknowns.

    Free u-dofs come first (node-major, x before y), then all phi dofs, so
    the global matrix splits into a u-block followed by a phi-block.
    Constrained u-dofs map to -1 and carry a signal scale.
    """

    def __init__(self, mesh: Mesh, bcs=()):
        n = mesh.n_nodes
        self.mesh = mesh
        self.u_dof = np.full(2 * n, -1, dtype=int)
        self.constrained_scale = {}          # flat u index -> signal scale
        seen = {}
        for bc in bcs:
            if bc.node_set not in mesh.node_sets:
                raise ValueError(f"unknown node set {bc.node_set!r}")
            d = 0 if bc.dof == "x" else 1
            for node in mesh.node_sets[bc.node_set]:
                key = (int(node), d)
                if key in seen and seen[key] != (bc.value_scale, bc.fixed):
                    raise ValueError(f"node {node} dof {bc.dof} constrained twice")
                seen[key] = (bc.value_scale, bc.fixed)
        free = []
        for node in range(n):
            for d in (0, 1):
                flat = 2 * node + d
                if (node, d) in seen:
                    self.constrained_scale[flat] = seen[(node, d)][0]
                else:
                    self.u_dof[flat] = len(free)
                    free.append(flat)
        self.free_u = np.array(free, dtype=int)
        self.n_u_free = len(free)
        self.n_phi = n
        self.n_total = self.n_u_free + self.n_phi
        self.constrained_flat = np.array(sorted(self.constrained_scale), dtype=int)
        self.constrained_scales = np.array(
            [self.constrained_scale[i] for i in self.constrained_flat])

    def phi_dof(self, node: int) -> int:
        return self.n_u_free + node

    def apply_signal(self, fields: FieldState, value: float):
        """Write prescribed displacements for signal value into the fields."""
        fields.u[self.constrained_flat] = self.constrained_scales * value
