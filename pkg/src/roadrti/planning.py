"""Deployment arithmetic: scan time, velocity limits, voxel length, node capacity."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class ScanParams:
    frame_bits: float          # bits per RTI data frame
    rate: float                # baseband rate, bits/s
    guard: float = 0.0         # guard time per slot, s
    processing: float = 0.0    # per-packet processing time, s
    k: int = 2                 # node count

    def __post_init__(self):
        if self.frame_bits <= 0 or self.rate <= 0:
            raise ValidationError("frame size and rate must be positive")
        if self.guard < 0 or self.processing < 0:
            raise ValidationError("guard and processing times must be >= 0")
        if self.k < 1:
            raise ValidationError("node count must be >= 1")


@dataclass(frozen=True)
class PacketBudget:
    normal: int = 84
    fragmentation: int = 255
    overhead: int = 3
    bytes_per_rss: int = 1
    seq_id_bytes: int = 2
    node_id_bytes: int = 2
    # per-fragment counter byte assumed by the multi-packet scheme
    fragment_bytes: int = 1

    def payload(self, mode: str) -> int:
        if mode not in ("normal", "fragmentation"):
            raise ValidationError(f"unknown packet mode {mode!r}")
        p = getattr(self, mode)
        if p <= self.overhead:
            raise ValidationError("payload must exceed overhead")
        return p


def scan_time(p: ScanParams) -> float:
    """Seconds for every node to transmit once: (L/r + T_g + T_p) K."""
    return (p.frame_bits / p.rate + p.guard + p.processing) * p.k


def max_velocities(r_dist: float, road_length: float, t_scan: float) -> tuple[float, float]:
    """(unambiguous, detectable) velocity limits in m/s."""
    if min(r_dist, road_length, t_scan) <= 0:
        raise ValidationError("inputs must be positive")
    return r_dist / t_scan, road_length / t_scan


def road_length(nodes_per_side: int, spacing: float) -> float:
    return (nodes_per_side - 1) * spacing


def voxel_length(d_node: float, k: int, heights: int = 1) -> float:
    """Along-road voxel length for K nodes spaced d_node apart on H heights."""
    if heights < 1 or k < 2:
        raise ValidationError("need K >= 2 and at least one height")
    if heights == 1:
        return 2.0 * d_node / k
    return d_node * heights ** 2 / (2.0 * k)


def node_capacity(budget: PacketBudget, mode: str = "normal") -> dict:
    """Single-packet node limits.

    ``max_nodes`` is payload minus overhead at one byte per RSS value;
    ``strict_max_nodes`` accounts for a node reporting K - 1 values.
    """
    payload = budget.payload(mode)
    rss_slots = (payload - budget.overhead) // budget.bytes_per_rss
    return {"mode": mode, "max_nodes": rss_slots, "strict_max_nodes": rss_slots + 1}


def packets_per_scan(k: int, budget: PacketBudget, mode: str = "normal") -> dict:
    """Packets each node needs per scan when its RSS report is split up.

    Every packet carries the overhead, a sequence id and a fragment counter.
    ``packets`` divides K by the per-packet RSS capacity; ``strict_packets``
    rounds K - 1 values up to whole packets.
    """
    payload = budget.payload(mode)
    per_packet = (payload - budget.overhead - budget.seq_id_bytes - budget.fragment_bytes)
    per_packet //= budget.bytes_per_rss
    if per_packet < 1:
        raise ValidationError("no room for RSS values in a packet")
    return {
        "mode": mode,
        "rss_per_packet": per_packet,
        "packets": k // per_packet if k >= per_packet else 1,
        "strict_packets": max(1, math.ceil((k - 1) / per_packet)),
        "max_nodes_by_id": 2 ** (8 * budget.node_id_bytes) - 1,
    }


def planning_report(k: int, d_node: float, heights: int, rate: float, frame_bytes: int,
                    guard: float = 0.0, processing: float = 0.0,
                    road: float | None = None, budget: PacketBudget | None = None) -> dict:
    budget = budget or PacketBudget()
    params = ScanParams(frame_bytes * 8, rate, guard, processing, k)
    t = scan_time(params)
    dx = voxel_length(d_node, k, heights)
    if road is None:
        road = road_length(k // 2, d_node)
    v_unamb, v_det = max_velocities(dx, road, t)
    return {
        "scan": asdict(params),
        "scan_time_s": t,
        "voxel_length_m": dx,
        "voxel_length_single_height_m": voxel_length(d_node, k, 1),
        "road_length_m": road,
        "v_unambiguous_mps": v_unamb,
        "v_detectable_mps": v_det,
        "capacity": [node_capacity(budget, m) for m in ("normal", "fragmentation")],
        "multi_packet": packets_per_scan(k, budget),
    }
