"""Shared fixtures: small hand-checkable configurations and the bundled presets."""

import itertools

import numpy as np
import pytest
from scipy import linalg

from src.config.loader import load_preset
from src.models.stochastic import (
    MarkedMAP,
    Mode,
    ModelConfig,
    PhaseType,
    RetrialPH,
    TruncationPolicy,
)
from src.tools import kron_tools


def scalar_config(lambda_h=0.4, lambda_n=0.6, mu_h=1.0, mu_n=1.0, leave=0.5, retry=1.5,
                  S=2, M=None, mode=Mode.LUMPED):
    """Poisson arrivals, exponential services and an exponential retrial clock."""
    mmap = MarkedMAP([[-(lambda_h + lambda_n)]], [[lambda_n]], [[lambda_h]])
    retrial = RetrialPH([1.0], [[-(leave + retry)]], [leave], [retry])
    policy = TruncationPolicy.fixed(M) if M is not None else TruncationPolicy.adaptive(eps=1e-6, m_cap=80)
    return ModelConfig(
        mmap=mmap,
        service_h=PhaseType([1.0], [[-mu_h]]),
        service_n=PhaseType([1.0], [[-mu_n]]),
        retrial=retrial,
        S=S,
        truncation=policy,
        mode=mode,
        name="scalar",
    )


def two_phase_config(L=2, M_H=2, M_N=2, N=2, S=2, M=3, mode=Mode.LUMPED):
    """Small configuration with every phase alphabet chosen independently (1 or 2)."""
    if L == 1:
        mmap = MarkedMAP([[-1.0]], [[0.5]], [[0.5]])
    else:
        mmap = MarkedMAP([[-1.6, 0.2], [0.3, -2.5]], [[0.4, 0.1], [0.2, 0.8]], [[0.5, 0.4], [0.6, 0.6]])
    erlang = PhaseType([1.0, 0.0], [[-2.0, 2.0], [0.0, -2.0]])
    hyper = PhaseType([0.3, 0.7], [[-0.5, 0.0], [0.0, -3.0]])
    exponential = PhaseType([1.0], [[-1.0]])
    if N == 1:
        retrial = RetrialPH([1.0], [[-2.0]], [0.5], [1.5])
    else:
        retrial = RetrialPH([0.5, 0.5], [[-2.0, 2.0], [0.0, -2.0]], [0.0, 0.5], [0.0, 1.5])
    return ModelConfig(
        mmap=mmap,
        service_h=erlang if M_H == 2 else exponential,
        service_n=hyper if M_N == 2 else exponential,
        retrial=retrial,
        S=S,
        truncation=TruncationPolicy.fixed(M),
        mode=mode,
        name=f"L{L}-MH{M_H}-MN{M_N}-N{N}-S{S}",
    )


def erlang_b(S, rho):
    blocking = 1.0
    for k in range(1, S + 1):
        blocking = rho * blocking / (k + rho * blocking)
    return blocking


@pytest.fixture
def baseline():
    return load_preset("baseline")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _fresh_operator_caches():
    yield
    kron_tools.clear_caches()


def hand_chain(lambda_h, lambda_n, mu_h, mu_n, leave, retry, M):
    """S = 1 with every alphabet of size one; per level: idle, new call busy, handoff busy."""
    idle, new, handoff = 0, 1, 2
    size = 3 * (M + 1)
    Q = np.zeros((size, size))

    def at(level, state):
        return 3 * level + state

    for l in range(M + 1):
        Q[at(l, idle), at(l, new)] += lambda_n
        Q[at(l, idle), at(l, handoff)] += lambda_h
        Q[at(l, new), at(l, idle)] += mu_n
        Q[at(l, handoff), at(l, idle)] += mu_h
        if l < M:
            Q[at(l, new), at(l + 1, new)] += lambda_n
            Q[at(l, handoff), at(l + 1, handoff)] += lambda_n
            Q[at(l, new), at(l + 1, handoff)] += lambda_h
        else:
            Q[at(l, new), at(l, handoff)] += lambda_h
        if l > 0:
            for state in (idle, new, handoff):
                Q[at(l, state), at(l - 1, state)] += l * leave
            Q[at(l, idle), at(l - 1, new)] += l * retry
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def handoff_loss_dropping(cfg):
    """Dropping probability of the MMAP/PH/S/S loss system that handoffs see on their own.

    States are (MMAP phase, occupancy of each handoff service phase); new calls only move the phase.
    """
    mmap, service, S = cfg.mmap, cfg.service_h, cfg.S
    K = service.M
    occupancies = [occ for occ in itertools.product(range(S + 1), repeat=K) if sum(occ) <= S]
    states = [(v, occ) for v in range(mmap.L) for occ in occupancies]
    index = {state: i for i, state in enumerate(states)}
    Q = np.zeros((len(states), len(states)))

    def shifted(occ, k, step):
        return occ[:k] + (occ[k] + step,) + occ[k + 1:]

    phase_only = mmap.C0 + mmap.C_N
    for (v, occ), i in index.items():
        for w in range(mmap.L):
            Q[i, index[(w, occ)]] += phase_only[v, w]
            if sum(occ) == S:
                Q[i, index[(w, occ)]] += mmap.C_H[v, w]
                continue
            for k in range(K):
                Q[i, index[(w, shifted(occ, k, 1))]] += mmap.C_H[v, w] * service.beta[k]
        for k in range(K):
            if occ[k] == 0:
                continue
            down = shifted(occ, k, -1)
            Q[i, index[(v, down)]] += occ[k] * service.A0[k]
            for k2 in range(K):
                if k2 != k:
                    Q[i, index[(v, shifted(down, k2, 1))]] += occ[k] * service.A[k, k2]
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    basis = linalg.null_space(Q.T)
    pi = basis[:, 0] / basis[:, 0].sum()
    handoff_rate = mmap.C_H.sum(axis=1)
    offered = sum(pi[i] * handoff_rate[v] for (v, _), i in index.items())
    dropped = sum(pi[i] * handoff_rate[v] for (v, occ), i in index.items() if sum(occ) == S)
    return dropped / offered
