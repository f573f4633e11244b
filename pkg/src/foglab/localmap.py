"""Bipartite local map between frames and landmarks.

Each edge records one sighting of a landmark from a frame: the distance in
meters and the observed 8-bit intensities (1 value for gray maps, 3 for
color). From a graph we derive per-landmark distance-radiance observation
sets: landmarks seen from at least ``xi_f`` frames qualify, and an estimate
is attempted only when at least ``xi_k`` landmarks qualify.

The serialized form is line oriented (see docs/file_formats.md):

    localmap <n_frames> <n_landmarks> <n_edges> <n_channels>
    frame <id> [x y z]
    landmark <id> [x y z]
    edge <frame> <landmark> <distance> <i ...>
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import MapFormatError
from .photometry import ChannelGammaMaps, GammaMap, expand
from .scattering import LUMA_WEIGHTS


class Edge(NamedTuple):
    distance: float
    intensities: tuple[float, ...]


class Observation(NamedTuple):
    frame: int
    distance: float
    radiance: float


@dataclass(frozen=True)
class SelectionThresholds:
    """Minimum frames per landmark (xi_f) and landmarks per estimate (xi_k)."""

    xi_f: int = 4
    xi_k: int = 15

    def __post_init__(self):
        if self.xi_f < 2:
            raise ValueError("xi_f must be at least 2")
        if self.xi_k < 1:
            raise ValueError("xi_k must be at least 1")


@dataclass
class LocalMapGraph:
    n_channels: int = 1
    frames: dict[int, tuple[float, float, float] | None] = field(default_factory=dict)
    landmarks: dict[int, tuple[float, float, float] | None] = field(default_factory=dict)
    edges: dict[tuple[int, int], Edge] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_channels not in (1, 3):
            raise ValueError("n_channels must be 1 or 3")

    def add_frame(self, frame: int, position=None) -> None:
        self.frames.setdefault(frame, tuple(position) if position is not None else None)

    def add_landmark(self, landmark: int, position=None) -> None:
        self.landmarks.setdefault(landmark, tuple(position) if position is not None else None)

    def add_edge(self, frame: int, landmark: int, distance: float, intensities) -> None:
        key = (frame, landmark)
        if key in self.edges:
            raise ValueError(f"duplicate edge for frame {frame}, landmark {landmark}")
        if not (math.isfinite(distance) and distance > 0):
            raise ValueError("edge distance must be positive and finite")
        vals = tuple(float(v) for v in intensities)
        if len(vals) != self.n_channels:
            raise ValueError(f"expected {self.n_channels} intensities, got {len(vals)}")
        if any(not (0.0 <= v <= 255.0) for v in vals):
            raise ValueError("intensities must lie in [0, 255]")
        self.add_frame(frame)
        self.add_landmark(landmark)
        self.edges[key] = Edge(float(distance), vals)

    def landmark_degree(self, landmark: int) -> int:
        return sum(1 for (_, n) in self.edges if n == landmark)

    def frame_subset(self, frame_ids) -> "LocalMapGraph":
        """Restriction to the given frames, e.g. the prefix of a stream.

        Landmark entries are kept as-is; per-landmark observation minimums
        are enforced later by generate_dr_pairs.
        """
        keep = set(frame_ids)
        return LocalMapGraph(
            n_channels=self.n_channels,
            frames={m: p for m, p in self.frames.items() if m in keep},
            landmarks=dict(self.landmarks),
            edges={k: e for k, e in self.edges.items() if k[0] in keep})


@dataclass(frozen=True)
class ObservationSet:
    """Distance-radiance observations grouped by landmark."""

    groups: dict[int, tuple[Observation, ...]]

    @property
    def landmark_ids(self) -> list[int]:
        return sorted(self.groups)

    @property
    def n_observations(self) -> int:
        return sum(len(g) for g in self.groups.values())


def _edge_intensity(edge: Edge, channel: str, n_channels: int) -> float:
    if n_channels == 1:
        return edge.intensities[0]
    if channel == "gray":
        w = LUMA_WEIGHTS
        return sum(wi * v for wi, v in zip(w, edge.intensities))
    return edge.intensities[{"r": 0, "g": 1, "b": 2}[channel]]


def generate_dr_pairs(graph: LocalMapGraph, gmap: GammaMap | ChannelGammaMaps,
                      channel: str = "gray",
                      thresholds: SelectionThresholds = SelectionThresholds()) -> ObservationSet:
    """Expand one channel of the graph into per-landmark (d, L) observations.

    Landmarks seen from fewer than ``thresholds.xi_f`` frames are dropped.
    Intensities are converted to radiances through the channel's gamma map;
    for color graphs the gray channel is the luma combination of r, g, b
    taken before expansion.
    """
    if isinstance(gmap, ChannelGammaMaps):
        gmap = gmap.for_channel(channel)
    by_landmark: dict[int, list[Observation]] = {}
    for (m, n), edge in graph.edges.items():
        i = _edge_intensity(edge, channel, graph.n_channels)
        by_landmark.setdefault(n, []).append(
            Observation(m, edge.distance, expand(gmap, i)))
    groups = {
        n: tuple(sorted(obs, key=lambda o: (o.distance, o.frame)))
        for n, obs in by_landmark.items() if len(obs) >= thresholds.xi_f
    }
    return ObservationSet(groups)


def check_sufficiency(obs: ObservationSet,
                      thresholds: SelectionThresholds = SelectionThresholds()) -> bool:
    """True when enough landmarks qualify for a joint estimate."""
    return len(obs.groups) >= thresholds.xi_k


def save_map(graph: LocalMapGraph, path) -> None:
    ids = sorted(set(graph.frames) | {m for (m, _) in graph.edges})
    lids = sorted(set(graph.landmarks) | {n for (_, n) in graph.edges})
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"localmap {len(ids)} {len(lids)} {len(graph.edges)} {graph.n_channels}\n")
        for m in ids:
            pos = graph.frames.get(m)
            tail = "" if pos is None else " " + " ".join(repr(float(x)) for x in pos)
            fh.write(f"frame {m}{tail}\n")
        for n in lids:
            pos = graph.landmarks.get(n)
            tail = "" if pos is None else " " + " ".join(repr(float(x)) for x in pos)
            fh.write(f"landmark {n}{tail}\n")
        for (m, n) in sorted(graph.edges):
            e = graph.edges[(m, n)]
            vals = " ".join(repr(v) for v in e.intensities)
            fh.write(f"edge {m} {n} {e.distance!r} {vals}\n")


def _parse_position(parts: list[str], lineno: int):
    if not parts:
        return None
    if len(parts) != 3:
        raise MapFormatError("positions take exactly 3 coordinates", lineno)
    try:
        return tuple(float(x) for x in parts)
    except ValueError as exc:
        raise MapFormatError(f"bad coordinate: {exc}", lineno) from exc


def load_map(path) -> LocalMapGraph:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()

    header = None
    graph = None
    counts = (0, 0, 0)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if parts[0] != "localmap" or len(parts) != 5:
                raise MapFormatError("expected header: localmap F K E C", lineno)
            try:
                nf, nk, ne, nc = (int(x) for x in parts[1:])
            except ValueError as exc:
                raise MapFormatError(f"bad header count: {exc}", lineno) from exc
            if nc not in (1, 3):
                raise MapFormatError("channel count must be 1 or 3", lineno)
            header = (nf, nk, ne)
            graph = LocalMapGraph(n_channels=nc)
            continue
        kind = parts[0]
        try:
            if kind == "frame":
                graph.frames[int(parts[1])] = _parse_position(parts[2:], lineno)
            elif kind == "landmark":
                graph.landmarks[int(parts[1])] = _parse_position(parts[2:], lineno)
            elif kind == "edge":
                if len(parts) != 4 + graph.n_channels:
                    raise MapFormatError(
                        f"edge takes frame, landmark, distance and {graph.n_channels} "
                        "intensities", lineno)
                graph.add_edge(int(parts[1]), int(parts[2]), float(parts[3]),
                               [float(v) for v in parts[4:]])
            else:
                raise MapFormatError(f"unknown record {kind!r}", lineno)
        except MapFormatError:
            raise
        except ValueError as exc:
            raise MapFormatError(str(exc), lineno) from exc
    if graph is None:
        raise MapFormatError("empty file: missing localmap header")
    counts = (len(graph.frames), len(graph.landmarks), len(graph.edges))
    if counts != header:
        raise MapFormatError(
            f"header promises frames/landmarks/edges {header}, file holds {counts}")
    return graph
