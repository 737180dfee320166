"""Waypoint graph, shortest paths, and flight-duration planning."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .scenario import ScenarioConfig


class UnreachableError(ValueError):
    """Destination cannot be reached over the waypoint graph."""


@dataclass
class WaypointGraph:
    nodes: list
    edges: list  # (u, v, length_m), undirected

    def __post_init__(self):
        for u, v, length in self.edges:
            if length <= 0:
                raise ValueError(f"edge ({u},{v}) must have positive length")
        self._adj = {n: [] for n in self.nodes}
        for u, v, length in self.edges:
            self._adj[u].append((v, length))
            self._adj[v].append((u, length))

    def neighbors(self, node):
        return self._adj[node]

    @classmethod
    def complete_euclidean(cls, config: ScenarioConfig) -> "WaypointGraph":
        """Complete graph over waypoints, horizontal distance at FBS altitude."""
        wps = sorted(config.waypoints, key=lambda w: w.id)
        nodes = [w.id for w in wps]
        edges = []
        for i, a in enumerate(wps):
            for b in wps[i + 1:]:
                d = a.position.horizontal_distance_to(b.position)
                if d > 0:
                    edges.append((a.id, b.id, d))
        return cls(nodes=nodes, edges=edges)


@dataclass
class Route:
    nodes: list
    total_length: float        # m
    flight_duration: float     # s


def dijkstra(graph: WaypointGraph, src, dst, cruise_speed: float = 1.0) -> Route:
    """Minimum-length path; ties break to the lexicographically smallest
    node sequence. Priority entries order by (distance, path), which is
    monotone under extension because edge lengths are positive."""
    if src not in graph._adj or dst not in graph._adj:
        raise UnreachableError(f"node {src if src not in graph._adj else dst} not in graph")
    best = {}
    heap = [(0.0, (src,))]
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in best:
            continue
        best[node] = (dist, path)
        if node == dst:
            return Route(nodes=list(path), total_length=dist,
                         flight_duration=dist / cruise_speed)
        for nxt, length in graph.neighbors(node):
            if nxt not in best:
                heapq.heappush(heap, (dist + length, path + (nxt,)))
    raise UnreachableError(f"no path from {src} to {dst}")


def plan_mission(graph: WaypointGraph, visit_order, cruise_speed: float) -> Route:
    """Concatenate shortest-path legs between consecutive mandatory waypoints."""
    visit_order = list(visit_order)
    if not visit_order:
        raise ValueError("visit_order must be nonempty")
    if cruise_speed <= 0:
        raise ValueError("cruise_speed must be > 0")
    nodes = [visit_order[0]]
    total = 0.0
    for a, b in zip(visit_order, visit_order[1:]):
        leg = dijkstra(graph, a, b)
        total += leg.total_length
        nodes.extend(leg.nodes[1:])
    return Route(nodes=nodes, total_length=total,
                 flight_duration=total / cruise_speed)


def plan_default_mission(config: ScenarioConfig) -> Route:
    """Default sweep: visit waypoints in id order over the Euclidean graph."""
    graph = WaypointGraph.complete_euclidean(config)
    order = sorted(w.id for w in config.waypoints)
    if len(order) == 1:
        return Route(nodes=order, total_length=0.0, flight_duration=0.0)
    return plan_mission(graph, order, config.uav_cruise_speed)


def route_table(route: Route, config: ScenarioConfig):
    """Cumulative distance/time rows along the route, one per visited node."""
    pos = {w.id: w.position for w in config.waypoints}
    rows = []
    cum = 0.0
    prev = None
    for node in route.nodes:
        if prev is not None:
            cum += pos[prev].horizontal_distance_to(pos[node])
        rows.append({
            "waypoint": node,
            "x": pos[node].x,
            "y": pos[node].y,
            "cumulative_distance": cum,
            "cumulative_time": cum / config.uav_cruise_speed,
        })
        prev = node
    return rows
