"""Simulated federated execution.

A server orchestrates n clients, each holding a local objective f_i; the
global objective is their average. Because finite differences are linear in
the objective, the server can broadcast the probe points, collect each
client's raw scalar values, and average them value-wise: the aggregated
probe is exactly the centralized probe of the mean objective. Nothing but
scalar function values ever leaves a client.

Aggregation folds client values in ascending client-id order (no pairwise or
tree reduction), so federated runs are bit-stable and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracle import Oracle, ProbeResult
from .problems import Dataset
from .sampling import DirectionSet, RngStream
from .solver import RunTrace, SolverConfig, run as solver_run

__all__ = [
    "ClientNode",
    "FederatedObjective",
    "FederationConfig",
    "federated_probe",
    "federated_run",
    "partition_dataset",
]


@dataclass
class ClientNode:
    """One simulated client: an id and a local black-box oracle."""

    client_id: int
    oracle: Oracle


@dataclass
class FederationConfig:
    """How to split a dataset across clients.

    ``partition`` is "iid-shuffle" (seeded permutation, then an even split
    with the remainder going to the lowest ids) or "contiguous" (file
    order). Aggregation order is always ascending client id.
    """

    n_clients: int
    partition: str = "iid-shuffle"

    def __post_init__(self):
        if self.n_clients < 1:
            raise ValueError(f"n_clients must be positive, got {self.n_clients}")
        if self.partition not in ("iid-shuffle", "contiguous"):
            raise ValueError(f"unknown partition policy {self.partition!r}")


def _split_sizes(n_samples: int, n_clients: int) -> list:
    base, remainder = divmod(n_samples, n_clients)
    return [base + 1 if i < remainder else base for i in range(n_clients)]


def partition_dataset(dataset: Dataset, config: FederationConfig,
                      rng: RngStream, ridge: float) -> list:
    """Split a dataset into disjoint client shards with local logistic
    objectives.

    Each client i holds f_i(x) = (n_clients / N) * sum over its shard of the
    logistic losses, plus the ridge term, so the client average
    (1/n) sum_i f_i equals the full-dataset objective of
    :func:`zonewton.problems.make_logistic` regardless of shard sizes.
    """
    n = dataset.n_samples
    if config.n_clients > n:
        raise ValueError(
            f"cannot split {n} samples across {config.n_clients} clients")
    if config.partition == "iid-shuffle":
        rng.next_draw()
        order = rng.generator.permutation(n)
    else:
        order = np.arange(n)
    sizes = _split_sizes(n, config.n_clients)
    clients = []
    offset = 0
    weight = config.n_clients / n
    for cid, size in enumerate(sizes):
        shard = dataset.subset(order[offset:offset + size])
        offset += size
        clients.append(ClientNode(cid, Oracle(
            _local_logistic(shard, ridge, weight), dataset.dimension)))
    return clients


def _local_logistic(shard: Dataset, ridge: float, weight: float):
    x_mat = shard.features
    y = shard.labels

    def fn(w):
        z = y * (x_mat @ w)
        return (weight * float(np.sum(np.logaddexp(0.0, -z)))
                + 0.5 * ridge * float(w @ w))

    return fn


def _check_clients(clients) -> list:
    if not clients:
        raise ValueError("need at least one client")
    ordered = sorted(clients, key=lambda c: c.client_id)
    ids = [c.client_id for c in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate client ids: {ids}")
    dims = {c.oracle.dimension for c in ordered}
    if len(dims) != 1:
        raise ValueError(f"clients disagree on the dimension: {sorted(dims)}")
    return ordered


def _aggregate(values_per_client) -> np.ndarray:
    """Sequential mean in client order; summation order is part of the
    protocol, so no pairwise reduction."""
    acc = np.zeros_like(np.asarray(values_per_client[0], dtype=float))
    for value in values_per_client:
        acc = acc + value
    return acc / len(values_per_client)


def _probe_all_clients(ordered, x, directions, mu, centers=None):
    probes = [
        client.oracle.probe_batch(
            x, directions, mu,
            center=None if centers is None else centers[i])
        for i, client in enumerate(ordered)
    ]
    center = float(_aggregate([p.center_value for p in probes]))
    plus = _aggregate([p.plus_values for p in probes])
    minus = _aggregate([p.minus_values for p in probes])
    fresh = (2 * directions.r + 1) if centers is None else 2 * directions.r
    aggregated = ProbeResult(center_value=center, plus_values=plus,
                             minus_values=minus, mu=float(mu),
                             directions=directions, fresh_evals=fresh)
    return aggregated, [p.center_value for p in probes]


def federated_probe(clients, x, directions: DirectionSet,
                    mu: float) -> ProbeResult:
    """One probe round: broadcast (x, directions, mu), collect each client's
    2r+1 scalars, average value-wise in ascending client-id order.

    The result is exactly the centralized probe of the mean objective
    (1/n) sum_i f_i. Any client failure aborts the round; there is no
    partial aggregation.
    """
    ordered = _check_clients(clients)
    aggregated, _ = _probe_all_clients(ordered, np.asarray(x, dtype=float),
                                       directions, mu)
    return aggregated


class FederatedObjective:
    """Oracle-shaped adapter over a set of clients.

    ``eval_count`` counts logical evaluations of the mean objective (one per
    aggregated scalar), which makes federated traces line up with their
    centralized twins; each client's own counter tracks its local cost.
    Center-value reuse works per client: the adapter caches the last probe
    point's per-client centers, so a follow-up batch at the same point skips
    every client's center query.
    """

    def __init__(self, clients):
        self._clients = _check_clients(clients)
        self.dimension = self._clients[0].oracle.dimension
        self.budget = None
        self.eval_count = 0
        self._cached_point = None
        self._cached_centers = None

    @property
    def clients(self):
        return list(self._clients)

    @property
    def n_clients(self) -> int:
        return len(self._clients)

    def client_eval_counts(self) -> list:
        return [c.oracle.eval_count for c in self._clients]

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        values = [c.oracle.evaluate(x) for c in self._clients]
        self.eval_count += 1
        return float(_aggregate(values))

    def probe_batch(self, x, directions: DirectionSet, mu: float,
                    center: Optional[float] = None) -> ProbeResult:
        x = np.asarray(x, dtype=float)
        centers = None
        if center is not None:
            if (self._cached_point is None
                    or not np.array_equal(self._cached_point, x)):
                raise ValueError(
                    "center reuse is only valid at the most recently probed "
                    "point; probe without a center first")
            centers = self._cached_centers
        aggregated, per_client_centers = _probe_all_clients(
            self._clients, x, directions, mu, centers=centers)
        if center is None:
            self._cached_point = x.copy()
            self._cached_centers = per_client_centers
        self.eval_count += aggregated.fresh_evals
        return aggregated


def federated_run(x0, clients, config: SolverConfig, rng: RngStream,
                  x_star=None, f_star: Optional[float] = None,
                  hessian_fn=None) -> RunTrace:
    """Run the solver against the aggregated client objective.

    Identical to the centralized run on the mean objective (same seed gives
    the same direction draws), with per-round communication accounting added
    to the trace: each iteration uploads n * (2 r_k + 1) scalars (one per
    client per probe value) and downloads (2 r_k + 1) * d scalars (the probe
    points, broadcast once).
    """
    objective = FederatedObjective(clients)
    trace = solver_run(x0, objective, config, rng, x_star=x_star,
                       f_star=f_star, hessian_fn=hessian_fn)
    n = objective.n_clients
    d = objective.dimension
    for record in trace.records:
        scalars = 2 * record.r_used + 1
        record.up_scalars = n * scalars
        record.down_scalars = scalars * d
    trace.extra["n_clients"] = n
    trace.extra["client_eval_counts"] = objective.client_eval_counts()
    return trace
