"""Slotted online optimization driven by Poisson request arrivals.

Each slot draws Poisson(rate * T) instances per request, serves them from
the current rounded caches using the fractional delivery weights, builds
stochastic gradient estimates from the observed requests, applies the
same projected primal step and perturbed dual step as the offline solver
(slot index as the iteration counter), and re-rounds for the next slot.

The gradient estimates replace each request's unknown arrival rate with
its observed arrival count divided by the slot length; since the count's
expectation is rate * T, the estimates are unbiased for the analytic
gradients at the current state.

Every request owns an independent RNG stream spawned from the run seed,
so adding or removing requests never perturbs the others' draws.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .cost import PathGeometry, PrimalState
from .gradients import mu_bracket, q_bracket, x_position_contributions
from .hibsa import (SolverConfig, initial_state,
                    projected_primal_update, round_caching, round_delivery)
from .model import Scenario
from .projection import clamp_dual


@dataclass
class OnlineConfig:
    slot_length: float = 1.0
    eta_x: float = 1e-3
    eta_q: float = 1e-4
    eta_mu: float = 1.0
    num_slots: int = 1000
    seed: int = 0
    delay_window: int = 10
    availability_excludes_terminal: bool = False

    def __post_init__(self):
        if self.slot_length <= 0:
            raise ValueError("slot_length must be positive")
        if min(self.eta_x, self.eta_q, self.eta_mu) <= 0:
            raise ValueError("step sizes must be positive")
        if self.num_slots < 1 or self.delay_window < 1:
            raise ValueError("num_slots and delay_window must be >= 1")


@dataclass
class SlotOutcome:
    slot: int
    triples: list  # (request index, delivered content, delay, dissimilarity)
    windowed_delay: float
    windowed_dissimilarity: float
    lagrangian: float
    cache_churn: int
    X_rounded: np.ndarray
    Q_rounded: np.ndarray


class RequestStreams:
    """Per-request RNG streams split from one seed by request index."""

    def __init__(self, seed: int, num_requests: int):
        root = np.random.SeedSequence(seed)
        self.generators = [np.random.default_rng(ss)
                           for ss in root.spawn(num_requests)]

    def draw_counts(self, rates: np.ndarray, T: float) -> np.ndarray:
        return np.array([g.poisson(lam * T)
                         for g, lam in zip(self.generators, rates)], dtype=int)


def draw_slot_requests(s: Scenario, T: float, streams: RequestStreams) -> list:
    """Multiset of request indices observed in one slot, in index order."""
    counts = streams.draw_counts(s.rates(), T)
    out: list[int] = []
    for i, c in enumerate(counts):
        out.extend([i] * int(c))
    return out


def serve_request(s_or_geom, X_rounded: np.ndarray, Q: np.ndarray, r: int) -> int:
    """Content delivered for request r: argmax of the fractional delivery
    row over contents available on the path under the rounded caches
    (ties to smaller content id; the requested content is the fallback)."""
    geom = s_or_geom if isinstance(s_or_geom, PathGeometry) else PathGeometry(s_or_geom)
    avail = geom.availability_products(X_rounded)[r] <= 0.0
    if not avail.any():
        return int(geom.req_content[r])
    return int(np.argmax(np.where(avail, Q[r], -np.inf)))


def stochastic_gradients(
    s_or_geom,
    S: PrimalState,
    mu: np.ndarray,
    observed,
    T: float,
) -> tuple:
    """Unbiased per-slot gradient estimates from observed request arrivals.

    ``observed`` is the multiset of request indices seen this slot.  Each
    arrival of request r contributes that request's full rate-free bracket
    rows (over all contents) of the analytic derivatives, and the sums are
    divided by the slot length.  Requests with no arrivals contribute
    nothing, so the estimate has expectation equal to the analytic
    gradients with each rate replaced by count / T.
    """
    geom = s_or_geom if isinstance(s_or_geom, PathGeometry) else PathGeometry(s_or_geom)
    s = geom.scenario
    V, F, R = s.num_nodes, s.num_contents, s.num_requests
    gx = np.zeros((V, F))
    gq = np.zeros((R, F))
    gmu = np.zeros((R, F))
    if len(observed) == 0:
        return gx, gq, gmu

    counts = np.zeros(R)
    for r in observed:
        counts[r] += 1.0

    gq = counts[:, None] * q_bracket(geom, S.X, mu) / T
    gmu = counts[:, None] * mu_bracket(geom, S.X, S.Q) / T

    contrib = x_position_contributions(geom, S.X, S.Q, mu)  # (R, P, F)
    # weight each request's per-position bracket rows by its arrival count
    # and scatter into node rows
    weights = counts[:, None, None] * contrib / T
    np.add.at(gx, geom.nodes.ravel(), weights.reshape(-1, F))
    return gx, gq, gmu


@dataclass
class OnlineResult:
    outcomes: list
    final_state: PrimalState
    final_dual: np.ndarray
    final_rounded: tuple  # (X_int, Q_int)


def run_online(s: Scenario, cfg: OnlineConfig) -> OnlineResult:
    """Run the slotted online scheme; deterministic given the seed."""
    geom = PathGeometry(s, exclude_terminal=cfg.availability_excludes_terminal)
    base = SolverConfig(availability_excludes_terminal=cfg.availability_excludes_terminal)
    S = initial_state(s, base)
    mu = np.zeros((s.num_requests, s.num_contents))
    streams = RequestStreams(cfg.seed, s.num_requests)
    X_int = round_caching(s, S.X)
    Q_int = round_delivery(s, X_int, S.Q,
                           exclude_terminal=cfg.availability_excludes_terminal)

    delay_hist: deque = deque(maxlen=cfg.delay_window)
    dissim_hist: deque = deque(maxlen=cfg.delay_window)
    outcomes: list[SlotOutcome] = []

    for t in range(1, cfg.num_slots + 1):
        counts = streams.draw_counts(geom.rates, cfg.slot_length)
        rounded_delays = geom.delays(X_int)
        avail = geom.availability_products(X_int) <= 0.0
        triples = []
        slot_delay = 0.0
        slot_dissim = 0.0
        for r in range(s.num_requests):
            c = int(counts[r])
            if c == 0:
                continue
            row = avail[r]
            if row.any():
                f_prime = int(np.argmax(np.where(row, S.Q[r], -np.inf)))
            else:
                f_prime = int(geom.req_content[r])
            delay = float(rounded_delays[r, f_prime])
            dis = float(s.dissimilarity[geom.req_content[r], f_prime])
            for _ in range(c):
                triples.append((r, f_prime, delay, dis))
            slot_delay += c * delay
            slot_dissim += c * dis

        gx, gq, gmu = stochastic_gradients(
            geom, S, mu, [r for r, _, _, _ in triples], cfg.slot_length)
        S = projected_primal_update(geom, S, gx, gq, cfg.eta_x, cfg.eta_q)
        gamma = 1.0 / (cfg.eta_mu * t ** 0.25)
        mu = clamp_dual((1.0 - gamma * cfg.eta_mu) * mu + cfg.eta_mu * gmu)

        X_new = round_caching(s, S.X)
        churn = int(np.sum(X_new != X_int))
        X_int = X_new
        Q_int = round_delivery(s, X_int, S.Q,
                               exclude_terminal=cfg.availability_excludes_terminal)

        delay_hist.append(slot_delay)
        dissim_hist.append(slot_dissim)
        win = len(delay_hist) * cfg.slot_length
        outcomes.append(SlotOutcome(
            slot=t,
            triples=triples,
            windowed_delay=sum(delay_hist) / win,
            windowed_dissimilarity=sum(dissim_hist) / win,
            lagrangian=geom.lagrangian(S, mu),
            cache_churn=churn,
            X_rounded=X_int,
            Q_rounded=Q_int,
        ))

    return OnlineResult(outcomes=outcomes, final_state=S, final_dual=mu,
                        final_rounded=(X_int, Q_int))
