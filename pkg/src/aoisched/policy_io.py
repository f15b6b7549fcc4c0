"""Versioned CSV serialization for solved policies.

Both formats start with comment lines: a version tag, a network fingerprint
(so a policy cannot silently be replayed on a different instance), and solve
metadata. Floats round-trip through repr.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .errors import PolicyFileError
from .exact_solver import JointPolicy
from .model import NetworkConfig, sensor_model
from .relaxed_solver import MixedPolicy, PolicyTable, RelaxedSolution

__all__ = [
    "network_fingerprint",
    "save_mixed_policies",
    "load_mixed_policies",
    "save_joint_policy",
    "load_joint_policy",
]

MIXED_TAG = "# aoisched-mixed-policy v1"
JOINT_TAG = "# aoisched-joint-policy v1"


def network_fingerprint(config: NetworkConfig) -> str:
    """Short stable hash of a problem instance."""
    parts = [
        f"K={config.num_sensors}",
        f"N={config.num_users}",
        f"M={config.budget}",
        f"delta_max={config.delta_max}",
    ]
    for s in config.sensors:
        probs = ",".join(repr(p) for p in s.request_probs)
        parts.append(f"({s.harvest_rate!r},{s.battery_capacity},[{probs}])")
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def save_mixed_policies(
    path: str | Path, config: NetworkConfig, solution: RelaxedSolution
) -> None:
    """Write per-sensor mixed tables: one row per (sensor, state)."""
    lines = [
        MIXED_TAG,
        f"# network={network_fingerprint(config)}",
        f"# eta={solution.eta!r} mu_star={solution.mu_star!r} "
        f"mu_minus={solution.lagrange.mu_minus!r} mu_plus={solution.lagrange.mu_plus!r} "
        f"active={int(solution.constraint_active)} avg_cost={solution.avg_cost!r} "
        f"command_rate={solution.command_rate!r}",
        "sensor,state_index,action_lower,action_upper",
    ]
    for k, policy in enumerate(solution.policies):
        lower = policy.lower.actions
        upper = policy.upper.actions
        lines.extend(
            f"{k},{i},{lower[i]},{upper[i]}" for i in range(policy.num_states)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _read_header(lines: list[str], tag: str, path: Path) -> dict[str, str]:
    if not lines or lines[0].strip() != tag:
        raise PolicyFileError(f"{path}: expected header '{tag}'")
    meta: dict[str, str] = {}
    for line in lines[1:]:
        if not line.startswith("#"):
            break
        for token in line[1:].split():
            if "=" in token:
                key, value = token.split("=", 1)
                meta[key] = value
    return meta


def load_mixed_policies(
    path: str | Path, config: NetworkConfig
) -> tuple[tuple[MixedPolicy, ...], dict[str, str]]:
    """Read mixed tables back and validate them against the network."""
    path = Path(path)
    if not path.exists():
        raise PolicyFileError(f"policy file not found: {path}")
    lines = path.read_text().splitlines()
    meta = _read_header(lines, MIXED_TAG, path)
    if meta.get("network") != network_fingerprint(config):
        raise PolicyFileError(f"{path}: policy was solved for a different network")
    eta = float(meta["eta"])
    mu_minus = float(meta["mu_minus"])
    mu_plus = float(meta["mu_plus"])

    sizes = [sensor_model(s, config.delta_max).num_states for s in config.sensors]
    lower = [np.zeros(n, dtype=np.int8) for n in sizes]
    upper = [np.zeros(n, dtype=np.int8) for n in sizes]
    seen = [0] * len(sizes)
    body = iter(lines)
    for line in body:
        if line.startswith("sensor,"):
            break
    for line in body:
        if not line.strip():
            continue
        k_str, i_str, lo_str, up_str = line.split(",")
        k, i = int(k_str), int(i_str)
        if not 0 <= k < len(sizes) or not 0 <= i < sizes[k]:
            raise PolicyFileError(f"{path}: row ({k},{i}) outside the state space")
        lower[k][i] = int(lo_str)
        upper[k][i] = int(up_str)
        seen[k] += 1
    if seen != sizes:
        raise PolicyFileError(f"{path}: incomplete policy table")
    policies = tuple(
        MixedPolicy(
            lower=PolicyTable(actions=lo, mu=mu_minus),
            upper=PolicyTable(actions=up, mu=mu_plus),
            eta=eta,
        )
        for lo, up in zip(lower, upper)
    )
    return policies, meta


def save_joint_policy(
    path: str | Path, config: NetworkConfig, policy: JointPolicy, avg_cost: float
) -> None:
    """Write a joint policy: one row per joint state, action bits as a string."""
    lines = [
        JOINT_TAG,
        f"# network={network_fingerprint(config)}",
        f"# avg_cost={avg_cost!r} budget={policy.budget}",
        "state_index,action_bits",
    ]
    bits = np.char.mod("%d", policy.actions)
    joined = [
        f"{i}," + "".join(bits[i]) for i in range(policy.num_states)
    ]
    Path(path).write_text("\n".join(lines + joined) + "\n")


def load_joint_policy(
    path: str | Path, config: NetworkConfig
) -> tuple[JointPolicy, dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise PolicyFileError(f"policy file not found: {path}")
    lines = path.read_text().splitlines()
    meta = _read_header(lines, JOINT_TAG, path)
    if meta.get("network") != network_fingerprint(config):
        raise PolicyFileError(f"{path}: policy was solved for a different network")
    sizes = tuple(
        sensor_model(s, config.delta_max).num_states for s in config.sensors
    )
    total = int(np.prod(sizes))
    actions = np.zeros((total, config.num_sensors), dtype=np.int8)
    seen = 0
    body = iter(lines)
    for line in body:
        if line.startswith("state_index,"):
            break
    for line in body:
        if not line.strip():
            continue
        i_str, bits = line.split(",")
        i = int(i_str)
        if not 0 <= i < total or len(bits) != config.num_sensors:
            raise PolicyFileError(f"{path}: malformed row for state {i_str}")
        actions[i] = [int(b) for b in bits]
        seen += 1
    if seen != total:
        raise PolicyFileError(f"{path}: incomplete policy table")
    return (
        JointPolicy(actions=actions, budget=config.budget, state_sizes=sizes),
        meta,
    )
