"""Brute-force cross-check for the expectation systems.

Expands every protocol chain into an explicit absorbing Markov chain in
which each probabilistic branch leads to its own dwell state (entered
with the branch probability, carrying the branch cost, left with
probability one).  The expected absorption cost is then the fundamental
matrix product N c with N = (I - Q)^-1, evaluated by direct inversion.

This module deliberately re-derives the transition rules from the meta
model case distinctions instead of reusing the equation assembly in
``markov``; the two are compared against each other by the verification
suite.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DegenerateProbability
from .markov import CostConstants, ctpwur_legs
from .params import Protocol


class _ChainBuilder:
    """Explicit chain: states are hashable labels, DONE is absorbing."""

    def __init__(self):
        self.labels = []
        self.index = {}
        self.edges = []            # (src_idx, dst_idx or None, probability)
        self.cost = []             # dwell cost per state

    def state(self, label, cost=0.0) -> int:
        if label not in self.index:
            self.index[label] = len(self.labels)
            self.labels.append(label)
            self.cost.append(cost)
        return self.index[label]

    def edge(self, src: int, dst, probability: float):
        self.edges.append((src, dst, probability))

    def branch(self, src_label, probability: float, cost: float, dst_label):
        """src --p--> dwell(cost) --1--> dst."""
        src = self.state(src_label)
        dwell = self.state(("dwell", src_label, dst_label, cost, len(self.edges)), cost)
        self.edge(src, dwell, probability)
        dst = None if dst_label == "DONE" else self.state(dst_label)
        self.edge(dwell, dst, 1.0)

    def expected_cost(self, start_label) -> float:
        n = len(self.labels)
        q = np.zeros((n, n))
        for src, dst, prob in self.edges:
            if dst is not None:
                q[src, dst] += prob
        fundamental = np.linalg.inv(np.eye(n) - q)
        totals = fundamental @ np.asarray(self.cost)
        return float(totals[self.index[start_label]])


def _wake_probs(p: float, q: float, exponent: int):
    ok = p * q**exponent
    return ok, p - ok, 1.0 - p


def trome_expected_cost(m: int, p: float, q: float, costs: CostConstants,
                        ttl: int = 3, transfer_factor: float = 1.0) -> float:
    """Expected delivery cost of tree routing on the expanded chain."""
    if m < 2 or ttl < 1:
        raise ConfigError("m >= 2 and ttl >= 1 required")
    if p * q == 0.0:
        raise DegenerateProbability("p*q == 0")
    chain = _ChainBuilder()
    wake_ok, wake_part, wake_fail = _wake_probs(p, q, 5)
    tx_ok, tx_part, tx_fail = q * q, q * (1.0 - q), 1.0 - q

    pending = [("w", 1, 1)]
    seen = set()
    while pending:
        label = pending.pop()
        if label in seen:
            continue
        seen.add(label)
        kind = label[0]
        if kind == "w":
            _, holder, waker = label
            target = waker + 1
            if target == m or target - holder == ttl:
                success = ("t", holder, target)
            else:
                success = ("w", holder, target)
            fallback = ("w", holder, holder) if waker == holder else ("t", holder, waker)
            chain.branch(label, wake_ok, costs.t_w1, success)
            chain.branch(label, wake_part, costs.t_w2, fallback)
            chain.branch(label, wake_fail, costs.t_w3, fallback)
            pending.extend([success, fallback])
        else:
            _, holder, target = label
            success = "DONE" if target == m else ("w", target, target)
            retry = ("w", holder, holder)
            chain.branch(label, tx_ok, costs.t_tx1 * transfer_factor, success)
            chain.branch(label, tx_part, costs.t_tx2 * transfer_factor, retry)
            chain.branch(label, tx_fail, costs.t_tx3 * transfer_factor, retry)
            if success != "DONE":
                pending.append(success)
            pending.append(retry)
    return chain.expected_cost(("w", 1, 1))


def naive_expected_cost(m: int, p: float, q: float, costs: CostConstants) -> float:
    """Expected delivery cost of the hop-by-hop algorithm."""
    if m < 2:
        raise ConfigError("m >= 2 required")
    if p * q == 0.0:
        raise DegenerateProbability("p*q == 0")
    chain = _ChainBuilder()
    for hop in range(1, m):
        wake = ("w", hop)
        xfer = ("t", hop)
        done = "DONE" if hop + 1 == m else ("w", hop + 1)
        chain.branch(wake, p, costs.t_w1, xfer)
        chain.branch(wake, 1.0 - p, costs.t_w3, wake)
        chain.branch(xfer, q * q, costs.t_tx1, done)
        chain.branch(xfer, q * (1.0 - q), costs.t_tx2, wake)
        chain.branch(xfer, 1.0 - q, costs.t_tx3, wake)
    return chain.expected_cost(("w", 1))


def ctpwur_expected_cost(m: int, p: float, q: float, costs: CostConstants,
                         relay_wake_exponent: int = 2) -> float:
    """Expected delivery cost of the one-relay algorithm."""
    if m < 2:
        raise ConfigError("m >= 2 required")
    if p * q == 0.0:
        raise DegenerateProbability("p*q == 0")
    chain = _ChainBuilder()
    legs = ctpwur_legs(m)
    for idx, (start_pos, end_pos, relayed) in enumerate(legs):
        wake = ("w", start_pos, relayed)
        xfer = ("t", start_pos)
        done = "DONE" if idx + 1 == len(legs) else ("w", legs[idx + 1][0], legs[idx + 1][2])
        w_scale = 2.0 if relayed else 1.0
        if relayed:
            ok, part, fail = _wake_probs(p, q, relay_wake_exponent)
            chain.branch(wake, ok, w_scale * costs.t_w1, xfer)
            chain.branch(wake, part, w_scale * costs.t_w2, wake)
            chain.branch(wake, fail, w_scale * costs.t_w3, wake)
        else:
            chain.branch(wake, p, costs.t_w1, xfer)
            chain.branch(wake, 1.0 - p, costs.t_w3, wake)
        chain.branch(xfer, q * q, costs.t_tx1, done)
        chain.branch(xfer, q * (1.0 - q), costs.t_tx2, wake)
        chain.branch(xfer, 1.0 - q, costs.t_tx3, wake)
    first = legs[0]
    return chain.expected_cost(("w", first[0], first[2]))


def expected_cost(protocol: Protocol, m: int, p: float, q: float,
                  costs: CostConstants, ttl: int = 3) -> float:
    if protocol is Protocol.TROME:
        return trome_expected_cost(m, p, q, costs, ttl=ttl)
    if protocol is Protocol.NAIVE:
        return naive_expected_cost(m, p, q, costs)
    if protocol is Protocol.CTPWUR:
        return ctpwur_expected_cost(m, p, q, costs)
    raise ConfigError(f"unknown protocol {protocol}")
