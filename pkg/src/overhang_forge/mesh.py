"""Triangle meshes, 2D contours and their file formats (STL, OBJ, SVG)."""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12
WELD_TOLERANCE = 1e-6


class MeshParseError(ValueError):
    """Malformed mesh file; the message names the offending line or byte offset."""


class Region(str, enum.Enum):
    MODEL = "model"
    SUPPORT = "support"


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    region: Optional[Region] = None
    dropped_degenerate: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")

    def __len__(self):
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape ``(n, 3, 3)``."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def volume(self) -> float:
        """Enclosed volume by the divergence theorem (positive for outward winding)."""
        c = self.corners()
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        used = self.vertices[np.unique(self.triangles)] if len(self.triangles) else self.vertices
        return used.min(axis=0), used.max(axis=0)


@dataclass
class Contour2D:
    """Closed polylines; every loop repeats its first point at the end."""

    polylines: list[np.ndarray] = field(default_factory=list)
    region: Optional[Region] = None

    def __post_init__(self):
        loops = []
        for loop in self.polylines:
            loop = np.asarray(loop, dtype=float).reshape(-1, 2)
            if len(loop) and not np.array_equal(loop[0], loop[-1]):
                loop = np.vstack([loop, loop[:1]])
            if len(np.unique(loop, axis=0)) < 3:
                raise ValueError("contour loop needs at least 3 distinct points")
            loops.append(loop)
        self.polylines = loops

    @property
    def is_empty(self) -> bool:
        return not self.polylines

    def perimeter(self) -> float:
        return float(sum(np.linalg.norm(np.diff(p, axis=0), axis=1).sum() for p in self.polylines))

    def area(self) -> float:
        """Sum of signed shoelace areas."""
        total = 0.0
        for p in self.polylines:
            total += 0.5 * float(np.sum(p[:-1, 0] * p[1:, 1] - p[1:, 0] * p[:-1, 1]))
        return total


# ------------------------------------------------------------------- cleanup


def _finalize(vertices: np.ndarray, triangles: np.ndarray) -> TriangleMesh:
    if len(triangles) == 0:
        raise MeshParseError("mesh contains no triangles")
    vertices = np.asarray(vertices, dtype=np.float64)
    diag = float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))
    tol = WELD_TOLERANCE * max(diag, 1e-300)
    keys = np.round(vertices / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    welded = vertices[first]
    tris = inverse.reshape(-1)[np.asarray(triangles)]
    mesh = TriangleMesh(welded, tris)
    collapsed = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    bad = collapsed | (mesh.areas() <= DEGENERATE_AREA)
    if bad.any():
        log.warning("dropped %d degenerate triangle(s)", int(bad.sum()))
    mesh = TriangleMesh(welded, tris[~bad], dropped_degenerate=int(bad.sum()))
    if mesh.is_empty:
        raise MeshParseError("mesh contains only degenerate triangles")
    return mesh


# ------------------------------------------------------------------- readers


def _read_stl_binary(data: bytes) -> TriangleMesh:
    if len(data) < 84:
        raise MeshParseError(f"binary STL truncated at byte offset {len(data)}: header needs 84 bytes")
    (n,) = struct.unpack_from("<I", data, 80)
    need = 84 + 50 * n
    if len(data) < need:
        raise MeshParseError(
            f"binary STL truncated at byte offset {len(data)}: {n} triangles need {need} bytes"
        )
    if n == 0:
        raise MeshParseError("binary STL declares zero triangles")
    rec = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    arr = np.frombuffer(data, dtype=rec, count=n, offset=84)
    verts = arr["v"].astype(np.float64).reshape(-1, 3)
    return _finalize(verts, np.arange(3 * n).reshape(-1, 3))


def _read_stl_ascii(data: bytes) -> TriangleMesh:
    text = data.decode("ascii", errors="replace")
    verts: list[list[float]] = []
    pending = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        tok = line.split()
        if not tok:
            continue
        key = tok[0].lower()
        if key == "vertex":
            try:
                verts.append([float(t) for t in tok[1:4]])
            except ValueError:
                raise MeshParseError(f"line {lineno}: bad vertex coordinates {line.strip()!r}") from None
            if len(tok) != 4:
                raise MeshParseError(f"line {lineno}: vertex needs 3 coordinates")
            pending += 1
        elif key == "endloop":
            if pending != 3:
                raise MeshParseError(f"line {lineno}: facet has {pending} vertices, expected 3")
            pending = 0
        elif key not in ("solid", "facet", "outer", "endfacet", "endsolid"):
            raise MeshParseError(f"line {lineno}: unexpected token {tok[0]!r}")
    if pending:
        raise MeshParseError("ASCII STL ends inside a facet")
    if not verts:
        raise MeshParseError("ASCII STL contains no facets")
    v = np.asarray(verts)
    return _finalize(v, np.arange(len(v)).reshape(-1, 3))


def _read_obj(data: bytes) -> TriangleMesh:
    text = data.decode("utf-8", errors="replace")
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v":
            try:
                verts.append([float(t) for t in tok[1:4]])
            except ValueError:
                raise MeshParseError(f"line {lineno}: bad vertex {line.strip()!r}") from None
            if len(verts[-1]) != 3:
                raise MeshParseError(f"line {lineno}: vertex needs 3 coordinates")
        elif tok[0] == "f":
            try:
                idx = [int(t.split("/")[0]) for t in tok[1:]]
            except ValueError:
                raise MeshParseError(f"line {lineno}: bad face {line.strip()!r}") from None
            if len(idx) < 3:
                raise MeshParseError(f"line {lineno}: face needs at least 3 vertices")
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            if min(idx) < 0 or max(idx) >= len(verts):
                raise MeshParseError(f"line {lineno}: face index out of range")
            for k in range(1, len(idx) - 1):
                tris.append([idx[0], idx[k], idx[k + 1]])
    if not tris:
        raise MeshParseError("OBJ contains no faces")
    return _finalize(np.asarray(verts), np.asarray(tris))


FORMATS = ("stl-binary", "stl-ascii", "obj")


def sniff_format(data: bytes, suffix: str = "") -> str:
    suffix = suffix.lower()
    if suffix == ".obj":
        return "obj"
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if 84 + 50 * n == len(data):
            return "stl-binary"
    if data.lstrip()[:5].lower() == b"solid":
        return "stl-ascii"
    return "stl-binary"


def load_mesh(data: bytes, format: str) -> TriangleMesh:
    """Parse mesh bytes; ``format`` is one of ``stl-binary``, ``stl-ascii``, ``obj``."""
    fmt = format.lower().replace("_", "-")
    if fmt == "stl-binary":
        return _read_stl_binary(data)
    if fmt == "stl-ascii":
        return _read_stl_ascii(data)
    if fmt == "obj":
        return _read_obj(data)
    raise ValueError(f"unknown mesh format {format!r}; expected one of {FORMATS}")


def read_mesh(path: str | Path) -> TriangleMesh:
    path = Path(path)
    data = path.read_bytes()
    return load_mesh(data, sniff_format(data, path.suffix))


# ------------------------------------------------------------------- writers


def stl_binary_bytes(mesh: TriangleMesh, header: str = "overhang_forge") -> bytes:
    c = mesh.corners()
    normals = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    lens = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lens, out=np.zeros_like(normals), where=lens > 0)
    rec = np.zeros(len(c), dtype=[("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    rec["normal"] = normals
    rec["v"] = c
    head = header.encode("ascii")[:80].ljust(80, b"\0")
    return head + struct.pack("<I", len(c)) + rec.tobytes()


def stl_ascii_bytes(mesh: TriangleMesh, name: str = "overhang_forge") -> bytes:
    lines = [f"solid {name}"]
    for tri in mesh.corners():
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        ln = np.linalg.norm(n)
        n = n / ln if ln > 0 else n
        lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        lines.append("    outer loop")
        for v in tri:
            lines.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return ("\n".join(lines) + "\n").encode("ascii")


def write_stl(mesh: TriangleMesh, path: str | Path) -> None:
    Path(path).write_bytes(stl_binary_bytes(mesh))


def write_obj(path: str | Path, groups: dict[str, TriangleMesh | Contour2D]) -> None:
    """Write named groups into one OBJ; contours become polyline (``l``) records."""
    out = ["# overhang_forge"]
    offset = 1
    for name, item in groups.items():
        out.append(f"g {name}")
        if isinstance(item, Contour2D):
            for loop in item.polylines:
                for x, y in loop[:-1]:
                    out.append(f"v {x:.9g} {y:.9g} 0")
                n = len(loop) - 1
                out.append("l " + " ".join(str(offset + i) for i in range(n)) + f" {offset}")
                offset += n
        else:
            for x, y, z in item.vertices:
                out.append(f"v {x:.9g} {y:.9g} {z:.9g}")
            for a, b, c in item.triangles + offset:
                out.append(f"f {a} {b} {c}")
            offset += len(item.vertices)
    Path(path).write_text("\n".join(out) + "\n")


def write_svg(path: str | Path, layers: dict[str, tuple[Contour2D, str]], bounds, scale: float = 60.0) -> None:
    """Write contours as SVG paths; ``layers`` maps name to ``(contour, colour)``."""
    (x0, y0), (x1, y1) = bounds
    width, height = (x1 - x0) * scale, (y1 - y0) * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" '
        f'viewBox="0 0 {width:.3f} {height:.3f}">'
    ]
    for name, (contour, colour) in layers.items():
        parts.append(f'<g id="{name}" fill="none" stroke="{colour}" stroke-width="1.5">')
        for loop in contour.polylines:
            pts = " ".join(f"{(x - x0) * scale:.2f},{(y1 - y) * scale:.2f}" for x, y in loop)
            parts.append(f'<polyline points="{pts}"/>')
        parts.append("</g>")
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ------------------------------------------------------------------ builders


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron; 20 * 4**subdivisions outward-wound triangles."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = [np.asarray(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = v[a] + v[b]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.asarray(v) * radius + np.asarray(center), np.asarray(faces))


def box_mesh(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> TriangleMesh:
    """Axis-aligned box as 12 outward-wound triangles."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = np.array([
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ], dtype=float)
    f = np.array([
        (0, 2, 1), (0, 3, 2),  # bottom
        (4, 5, 6), (4, 6, 7),  # top
        (0, 1, 5), (0, 5, 4),  # front (y0)
        (2, 3, 7), (2, 7, 6),  # back (y1)
        (1, 2, 6), (1, 6, 5),  # right (x1)
        (3, 0, 4), (3, 4, 7),  # left (x0)
    ])
    return TriangleMesh(v, f)
