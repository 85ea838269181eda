"""Shared fixtures and independent oracles for the test suite.

Oracles deliberately re-derive results through a different mechanism
than the implementation: plain nested loops for constraint checking,
station-by-station per-flow bookkeeping for loads, exhaustive step-path
enumeration for routing, and vertex enumeration for linear programs.
"""

from __future__ import annotations

import itertools
import os
import random
from fractions import Fraction

import numpy as np
import pytest

from xltops import (
    Bar,
    BarChart,
    LineInstance,
    ProtocolSpec,
    StationTypeCatalog,
    TrainTypeSpec,
    build_protocol,
)


def seed_from_env(default: int = 12345) -> int:
    return int(os.environ.get("XLT_SEED", default))


# ---------------------------------------------------------------------------
# Random protocol specs (structurally valid, behaviourally arbitrary)
# ---------------------------------------------------------------------------


def random_spec(rng: random.Random) -> ProtocolSpec:
    C = rng.randint(1, 3)
    types = tuple("FRT"[:C])
    catalog = StationTypeCatalog(types=types, d={t: rng.randint(1, 5) for t in types})
    K = rng.randint(1, 2)
    trains, u, a, v, p = [], [], [], [], []
    for k in range(K):
        M = rng.randint(2, 6)
        N = rng.randint(1, M)
        trains.append(TrainTypeSpec.uniform(f"k{k}", M=M, N=N))
        cuts = sorted(rng.sample(range(1, M), N - 1)) if N > 1 else []
        bounds = [0, *cuts, M]
        uk = np.zeros((M, N), dtype=int)
        for n in range(N):
            uk[bounds[n] : bounds[n + 1], n] = 1
        u.append(uk)
        a.append(np.array([[rng.randint(0, 1) for _ in range(C)] for _ in range(N)]))
        v.append(np.array([[rng.randint(0, 1) for _ in range(C)] for _ in range(N)]))
        p.append(
            np.array(
                [[[rng.randint(0, 1) for _ in range(C)] for _ in range(C)] for _ in range(N)]
            )
        )
    s = np.array([[rng.randint(0, 1) for _ in range(C)] for _ in range(K)])
    return build_protocol(catalog, trains, u=u, s=s, a=a, v=v, p=p)


# ---------------------------------------------------------------------------
# Nested-loop constraint oracle
# ---------------------------------------------------------------------------


def oracle_violations(spec: ProtocolSpec) -> set[tuple]:
    """Re-evaluate all six behavioural constraints with literal loops."""
    found: set[tuple] = set()
    types = spec.stations.types
    for k, train in enumerate(spec.trains):
        M, N, C = train.M, train.N, spec.C
        uk, ak, vk, pk, sk = spec.u[k], spec.a[k], spec.v[k], spec.p[k], spec.s[k]
        for n in range(N):
            for b in range(M):
                for bp in range(b + 1, M):
                    if uk[b, n] and uk[bp, n]:
                        if any(not uk[m, n] for m in range(b, bp + 1)):
                            found.add(("E1", k, n + 1, b + 1, bp + 1))
        for n in range(N):
            for i in range(C):
                if ak[n, i] and not sk[i]:
                    found.add(("E2", k, n + 1, types[i]))
        for i in range(C):
            for na in range(N):
                for nb in range(na + 1, N):
                    if ak[na, i] and ak[nb, i]:
                        if any(not ak[n, i] for n in range(na, nb + 1)):
                            found.add(("E3", k, types[i], na + 1, nb + 1))
        for i in range(C):
            total = 0.0
            for n in range(N):
                if ak[n, i]:
                    for m in range(M):
                        if uk[m, n]:
                            total += train.lengths[m]
            if total > spec.stations.d[types[i]] + 1e-12:
                found.add(("E4", k, types[i]))
        for n in range(N):
            for i in range(C):
                if vk[n, i] and not ak[n, i]:
                    found.add(("E5", k, n + 1, types[i]))
        for n in range(N):
            for i in range(C):
                for j in range(C):
                    if pk[n, i, j] and not (vk[n, i] and vk[n, j]):
                        found.add(("E6", k, n + 1, types[i], types[j]))
    return found


# ---------------------------------------------------------------------------
# Station-by-station per-flow load oracle
# ---------------------------------------------------------------------------


def oracle_loads(assignment, entry_rates, line: LineInstance):
    """Walk the line, boarding and alighting each O-D flow explicitly."""
    S = line.S
    N = assignment.N
    onboard = [{} for _ in range(N)]  # per section: {(z, sp): passengers}
    loads = [[Fraction(0)] * (S - 1) for _ in range(N)]
    for s in range(S):
        for n in range(N):
            for (z, sp) in [key for key in onboard[n] if key[1] == s]:
                del onboard[n][(z, sp)]
        A_s = line.demand_rate(s)
        if A_s > 0 and entry_rates[s] > 0:
            for sp in range(s + 1, S):
                flow = line.H * Fraction(entry_rates[s]) * line.A[s][sp] / A_s
                if flow == 0:
                    continue
                for n in range(N):
                    share = assignment.share(n, s, sp)
                    if share:
                        onboard[n][(s, sp)] = onboard[n].get((s, sp), Fraction(0)) + flow * share
        if s < S - 1:
            for n in range(N):
                loads[n][s] = sum(onboard[n].values(), Fraction(0))
    return loads


# ---------------------------------------------------------------------------
# Exhaustive step-path routing oracle
# ---------------------------------------------------------------------------


def oracle_min_transfers(charts, origin: str, destination: str):
    """Enumerate all simple leg sequences; None when unreachable.

    ``charts`` is a list of (train label, BarChart).
    """
    if origin == destination:
        return 0
    types = charts[0][1].labels()
    best = None
    max_legs = len(types)

    def extend(at: str, visited: frozenset, legs: int):
        nonlocal best
        if legs > max_legs or (best is not None and legs >= best + 1):
            return
        for _, chart in charts:
            for other in types:
                if other in visited:
                    continue
                if chart.pair_overlap(at, other) >= 1:
                    if other == destination:
                        cand = legs + 1 - 1
                        if best is None or cand < best:
                            best = cand
                    else:
                        extend(other, visited | {other}, legs + 1)

    extend(origin, frozenset({origin}), 0)
    return best


# ---------------------------------------------------------------------------
# Exact vertex-enumeration LP oracle
# ---------------------------------------------------------------------------


def _solve_square(rows, rhs):
    """Gaussian elimination over Fraction; None if singular."""
    n = len(rhs)
    aug = [list(rows[i]) + [rhs[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = aug[col][col]
        aug[col] = [x / inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def oracle_lp_max(c, A_ub, b_ub, A_eq=(), b_eq=()):
    """Maximize c.x over {A_ub x <= b_ub, A_eq x = b_eq} by vertex enumeration."""
    n = len(c)
    rows = [list(r) for r in A_ub] + [list(r) for r in A_eq]
    rhs = list(b_ub) + list(b_eq)
    eq_idx = list(range(len(b_ub), len(rhs)))
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        if any(i not in combo for i in eq_idx):
            continue
        x = _solve_square([rows[i] for i in combo], [rhs[i] for i in combo])
        if x is None:
            continue
        feasible = all(
            sum(rows[i][j] * x[j] for j in range(n)) <= rhs[i] for i in range(len(b_ub))
        ) and all(
            sum(rows[i][j] * x[j] for j in range(n)) == rhs[i] for i in eq_idx
        )
        if not feasible:
            continue
        val = sum(c[j] * x[j] for j in range(n))
        if best is None or val > best[0]:
            best = (val, x)
    return best


# ---------------------------------------------------------------------------
# Canonical fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def fig4_routing_chart() -> BarChart:
    """Four staggered bars whose riding edges are A-B, B-C, B-D, C-D."""
    return BarChart(
        M=19,
        bars=(
            Bar("A", b=8, d=8),
            Bar("B", b=10, d=8),
            Bar("D", b=19, d=10),
            Bar("C", b=21, d=13),
        ),
    )


@pytest.fixture
def fig4_uniform_chart() -> BarChart:
    """Same displacements with uniform 8-unit platforms (parts fixture)."""
    return BarChart(
        M=19,
        bars=(
            Bar("A", b=8, d=8),
            Bar("B", b=10, d=8),
            Bar("D", b=19, d=8),
            Bar("C", b=21, d=8),
        ),
    )


def make_line(station_types, A, H=1, platform=9, M_min=(), platform_lengths=None):
    S = len(station_types)
    return LineInstance(
        stations=tuple(f"S{i + 1}" for i in range(S)),
        platform_lengths=platform_lengths or (platform,) * S,
        H=H,
        A=A,
        M_min=M_min,
        station_types=tuple(station_types),
    )


@pytest.fixture
def fr_line_full():
    """Four-station F/R line loading all four fr_i sections to capacity 3."""
    Z = Fraction(0)
    A = [
        [Z, Z, Fraction(3), Fraction(3)],
        [Z, Z, Fraction(3), Fraction(3)],
        [Z, Z, Z, Z],
        [Z, Z, Z, Z],
    ]
    return make_line(("F", "R", "F", "R"), A)


def exactly_one_ftr():
    """F/T/R protocol with a 1:1 pair-to-section correspondence.

    Sections of two units; platforms span two sections.  Section 1
    carries F-F trips, 2 the F/T mixtures, 3 the T/R mixtures, 4 R-R.
    """
    stations = StationTypeCatalog(types=("F", "T", "R"), d={"F": 4, "T": 4, "R": 4})
    train = TrainTypeSpec.uniform("xlt", M=8, N=4)
    u = np.zeros((8, 4), dtype=int)
    for n in range(4):
        u[2 * n : 2 * n + 2, n] = 1
    a = np.array([[1, 0, 0], [1, 1, 0], [0, 1, 1], [0, 0, 1]])
    v = a.copy()
    p = np.zeros((4, 3, 3), dtype=int)
    F, T, R = 0, 1, 2
    p[0, F, F] = 1
    p[1, F, T] = p[1, T, F] = p[1, T, T] = 1
    p[2, T, R] = p[2, R, T] = 1
    p[3, R, R] = 1
    s = np.array([[1, 1, 1]])
    return build_protocol(stations, [train], u=[u], s=s, a=[a], v=[v], p=[p])


@pytest.fixture
def ftr_line_full():
    """Six-station F/T/R line loading all four sections at one link."""
    Z = Fraction(0)
    A = [[Z] * 6 for _ in range(6)]
    A[0][3] = Fraction(2)  # F -> F
    A[1][4] = Fraction(2)  # T -> T
    A[2][4] = Fraction(2)  # R -> T
    A[2][5] = Fraction(2)  # R -> R
    return make_line(("F", "T", "R", "F", "T", "R"), A, platform=4)
