"""Attribute graphs over object detections and their fixed-size layout vector.

Nodes are the (at most four) highest-scoring detections plus one global node
standing for the whole frame, centred on the image centre. Angles use the
math convention (y axis up, anti-clockwise from the horizontal).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from alamp.errors import InvalidInput, NotFound, ParseError
from alamp.imaging import Rect

MAX_OBJECTS = 4
LOCAL_PAIRS = tuple(combinations(range(MAX_OBJECTS), 2))
LAYOUT_DIM = 3 * len(LOCAL_PAIRS) + 3 * MAX_OBJECTS + MAX_OBJECTS  # 34

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Detection:
    box: Rect
    score: float

    def sort_key(self):
        return (-self.score, self.box.x, self.box.y, self.box.w, self.box.h)


@dataclass(frozen=True)
class LocalNode:
    centroid: tuple[float, float]
    area: float
    detection: Detection


@dataclass(frozen=True)
class LocalEdge:
    i: int
    j: int
    dist: float
    theta: float
    overlap: float


@dataclass(frozen=True)
class GlobalEdge:
    i: int
    dist: float
    theta: float
    area: float


@dataclass(frozen=True)
class AttributeGraph:
    width: int
    height: int
    local_nodes: tuple[LocalNode, ...]
    local_edges: tuple[LocalEdge, ...] = field(default=())
    global_edges: tuple[GlobalEdge, ...] = field(default=())

    @property
    def global_centroid(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "local_nodes": [
                {"centroid": list(n.centroid), "area": n.area, "score": n.detection.score,
                 "box": n.detection.box.as_dict()}
                for n in self.local_nodes
            ],
            "global_node": {"centroid": list(self.global_centroid)},
            "local_edges": [
                {"i": e.i, "j": e.j, "dist": e.dist, "theta": e.theta, "overlap": e.overlap}
                for e in self.local_edges
            ],
            "global_edges": [
                {"i": e.i, "dist": e.dist, "theta": e.theta, "area": e.area}
                for e in self.global_edges
            ],
        }


def rect_overlap_ratio(a: Rect, b: Rect) -> float:
    """Intersection area over the smaller box's area (1 under containment)."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return min(1.0, (iw * ih) / min(a.area, b.area))


def _fold(theta: float, period: float) -> float:
    theta = math.fmod(theta, period)
    if theta < 0.0:
        theta += period
    # fmod of a tiny negative can round up to the period itself
    return 0.0 if theta >= period else theta


def edge_attrs(c1, c2, kind: str, dims) -> tuple[float, float]:
    """Normalized distance and anti-clockwise angle of the edge ``c1 -> c2``.

    ``c1``/``c2`` are in image coordinates (y down). Local edges are
    undirected and folded to ``[0, pi)``; global edges keep their direction
    in ``[0, 2*pi)``.
    """
    width, height = dims
    dx = c2[0] - c1[0]
    dy = -(c2[1] - c1[1])
    dist = math.hypot(dx, dy) / math.hypot(width, height)
    if dx == 0 and dy == 0:
        return 0.0, 0.0
    theta = math.atan2(dy, dx)
    if kind == "local":
        return min(dist, 1.0), _fold(theta, math.pi)
    if kind == "global":
        return min(dist, 1.0), _fold(theta, _TWO_PI)
    raise ValueError(f"unknown edge kind {kind!r}")


def _check_detection(d: Detection, width: int, height: int) -> None:
    if not d.box.inside(width, height):
        raise InvalidInput(f"detection box {d.box} is not inside a {width}x{height} image")
    if not 0.0 <= d.score <= 1.0:
        raise InvalidInput(f"detection score {d.score} outside [0, 1]")


def build_attribute_graph(dets, dims) -> AttributeGraph:
    width, height = dims
    for d in dets:
        _check_detection(d, width, height)
    kept = sorted(dets, key=Detection.sort_key)[:MAX_OBJECTS]
    frame_area = float(width * height)
    nodes = tuple(LocalNode(d.box.center, d.box.area / frame_area, d) for d in kept)

    local_edges = []
    for i, j in combinations(range(len(nodes)), 2):
        dist, theta = edge_attrs(nodes[i].centroid, nodes[j].centroid, "local", dims)
        ov = rect_overlap_ratio(nodes[i].detection.box, nodes[j].detection.box)
        local_edges.append(LocalEdge(i, j, dist, theta, ov))

    center = (width / 2.0, height / 2.0)
    global_edges = []
    for i, n in enumerate(nodes):
        dist, theta = edge_attrs(n.centroid, center, "global", dims)
        global_edges.append(GlobalEdge(i, dist, theta, n.area))

    return AttributeGraph(width, height, nodes, tuple(local_edges), tuple(global_edges))


def vectorize_graph(g: AttributeGraph) -> np.ndarray:
    """Flatten ``g`` to the 34-entry layout vector.

    Layout: local-edge ``(dist, theta, overlap)`` triples for pairs
    (0,1), (0,2), (0,3), (1,2), (1,3), (2,3); then global-edge
    ``(dist, theta, area)`` triples per node; then four presence flags.
    Absent entries are zero.
    """
    v = np.zeros(LAYOUT_DIM, dtype=np.float64)
    pair_slot = {pair: k for k, pair in enumerate(LOCAL_PAIRS)}
    for e in g.local_edges:
        k = 3 * pair_slot[(e.i, e.j)]
        v[k:k + 3] = (e.dist, e.theta, e.overlap)
    base = 3 * len(LOCAL_PAIRS)
    for e in g.global_edges:
        k = base + 3 * e.i
        v[k:k + 3] = (e.dist, e.theta, e.area)
    flags = base + 3 * MAX_OBJECTS
    v[flags:flags + len(g.local_nodes)] = 1.0
    return v


def layout_vector(dets, dims) -> np.ndarray:
    return vectorize_graph(build_attribute_graph(dets, dims))


def sidecar_path(image_path: str | os.PathLike) -> str:
    return os.fspath(image_path) + ".dets.json"


def parse_detections(raw) -> list[Detection]:
    if not isinstance(raw, list):
        raise ParseError("detections file must hold a JSON array")
    dets = []
    for k, item in enumerate(raw):
        try:
            box = Rect(*(float(item[key]) for key in ("x", "y", "w", "h")))
            dets.append(Detection(box, float(item["score"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"detection #{k} is malformed: {item!r}") from exc
    return dets


def load_detections(path: str | os.PathLike) -> list[Detection]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise NotFound(f"no such detections file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return parse_detections(raw)


def dump_detections(path: str | os.PathLike, dets) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([{**d.box.as_dict(), "score": d.score} for d in dets], fh)
