"""Executable per-slot decision rules.

Two layers live here: small single-slot functions matching the scheduling
procedures (propose / truncate / greedy), and fleet policy objects with a
batched ``decide`` used by the simulation engine. Both implement the same
semantics; the batched path is just vectorized over episodes and sensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exact_solver import JointPolicy
from .model import NetworkConfig, PerSensorState, sensor_model
from .relaxed_solver import MixedPolicy

__all__ = [
    "DecisionContext",
    "relaxed_propose",
    "truncate",
    "greedy_decide",
    "GreedyFleetPolicy",
    "RelaxedFleetPolicy",
    "ExactFleetPolicy",
    "build_relaxed_fleet_policy",
    "build_exact_fleet_policy",
]


@dataclass(frozen=True)
class DecisionContext:
    """Inputs of one slot's decision: slot index, fleet state, RNG stream."""

    slot: int
    states: tuple[PerSensorState, ...]
    rng: np.random.Generator

    def __post_init__(self):
        if self.slot < 0:
            raise ValueError("slot index must be nonnegative")


def relaxed_propose(
    policies: Sequence[MixedPolicy],
    states: Sequence[PerSensorState],
    delta_max: int,
    sensors: Sequence,
    rng: np.random.Generator,
) -> set[int]:
    """Sensors proposed for a command under the mixed per-sensor tables.

    Each sensor independently draws the lower table with probability eta and
    the upper table otherwise, then reads its action bit. Returned indices are
    0-based sensor positions.
    """
    proposed = set()
    for k, (policy, state, sensor) in enumerate(zip(policies, states, sensors)):
        idx = sensor_model(sensor, delta_max).index_of(state)
        table = policy.lower if rng.random() < policy.eta else policy.upper
        if table.actions[idx]:
            proposed.add(k)
    return proposed


def truncate(proposals: set[int], budget: int, rng: np.random.Generator) -> set[int]:
    """Down-select proposals to the per-slot budget, uniformly at random.

    Identity whenever the proposal set already fits the budget.
    """
    if len(proposals) <= budget:
        return set(proposals)
    chosen = rng.choice(sorted(proposals), size=budget, replace=False)
    return set(int(i) for i in chosen)


def greedy_decide(states: Sequence[PerSensorState], budget: int) -> set[int]:
    """Request-aware myopic rule: command the requested sensors with the largest age.

    Only sensors with at least one request are eligible; ties break toward the
    lowest sensor position. Returns 0-based positions, at most ``budget`` many.
    """
    eligible = [(s.age, -k, k) for k, s in enumerate(states) if s.requests >= 1]
    eligible.sort(reverse=True)
    return {k for _, _, k in eligible[:budget]}


class GreedyFleetPolicy:
    """Batched greedy rule for the simulation engine."""

    mixture_eta = None

    def __init__(self, budget: int, num_sensors: int):
        self.name = "greedy"
        self.budget = int(budget)
        self.num_sensors = int(num_sensors)
        # Combined sort key: age dominates, lower index wins ties.
        self._tiebreak = self.num_sensors - 1 - np.arange(self.num_sensors)

    def decide(self, requests, battery, age, mix_lower, episode_rngs):
        episodes, n = requests.shape
        eligible = requests >= 1
        if self.budget >= n:
            actions = eligible.astype(np.int8)
            return actions, actions.sum(axis=1, dtype=np.int64)
        key = np.where(eligible, age * n + self._tiebreak, -1)
        actions = np.zeros((episodes, n), dtype=np.int8)
        cut = n - self.budget
        for e in range(episodes):
            top = np.argpartition(key[e], cut)[cut:]
            actions[e, top[key[e, top] >= 0]] = 1
        return actions, actions.sum(axis=1, dtype=np.int64)


class RelaxedFleetPolicy:
    """Batched mixed-table policy, optionally truncated to the per-slot budget.

    ``budget=None`` runs the pure relaxed policy (the lower-bound mode, which
    may exceed the per-slot budget); otherwise overflowing proposal sets are
    down-selected uniformly using the episode's truncation stream.
    """

    def __init__(
        self,
        lower_flat: np.ndarray,
        upper_flat: np.ndarray,
        offsets: np.ndarray,
        request_strides: np.ndarray,
        delta_max: int,
        eta: float,
        budget: int | None,
        name: str,
    ):
        self.name = name
        self.budget = budget
        self._lower = lower_flat
        self._upper = upper_flat
        self._offsets = offsets
        self._request_strides = request_strides
        self._delta_max = delta_max
        degenerate = np.array_equal(lower_flat, upper_flat)
        self.mixture_eta = None if degenerate else float(eta)

    def _flat_indices(self, requests, battery, age):
        return (
            self._offsets
            + requests * self._request_strides
            + battery * self._delta_max
            + (age - 1)
        )

    def decide(self, requests, battery, age, mix_lower, episode_rngs):
        flat = self._flat_indices(requests, battery, age)
        if self.mixture_eta is None:
            actions = self._lower[flat].copy()
        else:
            actions = np.where(mix_lower, self._lower[flat], self._upper[flat])
        proposals = actions.sum(axis=1, dtype=np.int64)
        if self.budget is not None:
            for e in np.flatnonzero(proposals > self.budget):
                members = np.flatnonzero(actions[e])
                keep = episode_rngs[e].choice(members, size=self.budget, replace=False)
                actions[e] = 0
                actions[e, keep] = 1
        return actions, proposals


class ExactFleetPolicy:
    """Batched lookup into a solved joint policy table."""

    mixture_eta = None

    def __init__(self, table: np.ndarray, strides: np.ndarray,
                 request_strides: np.ndarray, delta_max: int, budget: int):
        self.name = "exact"
        self.budget = int(budget)
        self._table = table
        self._strides = strides
        self._request_strides = request_strides
        self._delta_max = delta_max

    def decide(self, requests, battery, age, mix_lower, episode_rngs):
        per_sensor = (
            requests * self._request_strides + battery * self._delta_max + (age - 1)
        )
        joint = per_sensor.astype(np.int64) @ self._strides
        actions = self._table[joint]
        return actions, actions.sum(axis=1, dtype=np.int64)


def _per_sensor_layout(network: NetworkConfig):
    sizes = np.array(
        [sensor_model(s, network.delta_max).num_states for s in network.sensors],
        dtype=np.int64,
    )
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    request_strides = np.array(
        [(s.battery_capacity + 1) * network.delta_max for s in network.sensors],
        dtype=np.int64,
    )
    return sizes, offsets, request_strides


def build_relaxed_fleet_policy(
    network: NetworkConfig,
    policies: Sequence[MixedPolicy],
    truncate_to_budget: bool,
) -> RelaxedFleetPolicy:
    """Flatten per-sensor mixed tables into one runtime policy object."""
    if len(policies) != network.num_sensors:
        raise ValueError("need one mixed policy per sensor")
    sizes, offsets, request_strides = _per_sensor_layout(network)
    for p, n in zip(policies, sizes):
        if p.num_states != n:
            raise ValueError("mixed policy table size does not match the sensor")
    lower = np.concatenate([p.lower.actions for p in policies]).astype(np.int8)
    upper = np.concatenate([p.upper.actions for p in policies]).astype(np.int8)
    etas = {p.eta for p in policies}
    if len(etas) != 1:
        raise ValueError("fleet mixing factor must be shared across sensors")
    return RelaxedFleetPolicy(
        lower_flat=lower,
        upper_flat=upper,
        offsets=offsets,
        request_strides=request_strides,
        delta_max=network.delta_max,
        eta=etas.pop(),
        budget=network.budget if truncate_to_budget else None,
        name="rtt" if truncate_to_budget else "relaxed",
    )


def build_exact_fleet_policy(network: NetworkConfig, policy: JointPolicy) -> ExactFleetPolicy:
    sizes, _, request_strides = _per_sensor_layout(network)
    if tuple(policy.state_sizes) != tuple(int(n) for n in sizes):
        raise ValueError("joint policy table does not match the network state space")
    strides = np.ones(network.num_sensors, dtype=np.int64)
    for k in range(network.num_sensors - 2, -1, -1):
        strides[k] = strides[k + 1] * sizes[k + 1]
    return ExactFleetPolicy(
        table=policy.actions,
        strides=strides,
        request_strides=request_strides,
        delta_max=network.delta_max,
        budget=network.budget,
    )
