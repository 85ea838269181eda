"""Domain types for extra-long-train (XLT) operating protocols.

A protocol is a set of seven binary decision tables over station types,
train types, units and sections:

  delta   - station classification (station x type), one type per station
  epsilon - train classification (train x train type), one type per train
  u       - section definition (unit x section), consecutive units
  s       - stop/skip (train type x station type)
  a       - alignment (section x station type)
  v       - disembarkation / door opening (section x station type)
  p       - presentation (section x origin type x destination type)

All tables are stored as read-only numpy 0/1 integer arrays.  Structural
invariants (shapes, row sums, section consecutiveness) are enforced by
``build_protocol``; the behavioural constraints live in ``feasibility``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadSectionCount,
    DimensionMismatch,
    NeverAlignedViolation,
    NonConsecutiveSection,
    RowSumViolation,
    SchemaError,
)

SCHEMA_VERSION = 1


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.int8)
    out.setflags(write=False)
    return out


def _is_binary(arr: np.ndarray) -> bool:
    return bool(np.isin(arr, (0, 1)).all())


@dataclass(frozen=True)
class StationTypeCatalog:
    """The station-type universe and the shortest platform length per type."""

    types: tuple[str, ...]
    d: Mapping[str, int]

    def __post_init__(self) -> None:
        if len(set(self.types)) != len(self.types):
            raise DimensionMismatch("station-type labels must be unique")
        if set(self.d) != set(self.types):
            raise DimensionMismatch("platform lengths must cover exactly the declared types")
        for i, length in self.d.items():
            if length < 1:
                raise DimensionMismatch(f"platform length for type {i!r} must be >= 1")

    @property
    def C(self) -> int:
        return len(self.types)

    def index(self, label: str) -> int:
        return self.types.index(label)

    def lengths(self) -> tuple[int, ...]:
        return tuple(self.d[i] for i in self.types)


@dataclass(frozen=True)
class TrainTypeSpec:
    """One train type: unit count, per-unit geometry and section count.

    ``never_aligned`` holds 1-based unit indices that are permanently
    excluded from alignment (doorless end units appended for extra
    holding capacity).
    """

    label: str
    M: int
    lengths: tuple[float, ...]
    capacities: tuple[float, ...]
    N: int
    never_aligned: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.M < 1:
            raise DimensionMismatch("a train needs at least one unit")
        if not (1 <= self.N <= self.M):
            raise DimensionMismatch("section count must satisfy 1 <= N <= M")
        if len(self.lengths) != self.M or len(self.capacities) != self.M:
            raise DimensionMismatch("per-unit lengths/capacities must have M entries")
        if any(l <= 0 for l in self.lengths):
            raise DimensionMismatch("unit lengths must be positive")
        if any(c < 0 for c in self.capacities):
            raise DimensionMismatch("unit capacities must be nonnegative")
        if any(not (1 <= m <= self.M) for m in self.never_aligned):
            raise DimensionMismatch("never_aligned indices must be unit indices 1..M")

    @classmethod
    def uniform(
        cls,
        label: str,
        M: int,
        N: int,
        unit_length: float = 1.0,
        unit_capacity: float = 1.0,
        never_aligned: Iterable[int] = (),
    ) -> "TrainTypeSpec":
        return cls(
            label=label,
            M=M,
            lengths=(unit_length,) * M,
            capacities=(unit_capacity,) * M,
            N=N,
            never_aligned=frozenset(never_aligned),
        )


@dataclass(frozen=True)
class TrainPart:
    """A maximal run of sections sharing one destination-label set."""

    index: int
    sections: tuple[int, int]  # inclusive 1-based span (first, last)
    labels: frozenset[str]


@dataclass(frozen=True)
class EolRule:
    """End-of-line admissibility: allowed types for the first/last station."""

    name: str
    first_types: frozenset[str]
    last_types: frozenset[str]


@dataclass(frozen=True)
class ProtocolSpec:
    """A complete protocol: catalogs plus the seven decision tables.

    ``u``, ``a``, ``v`` and ``p`` are tuples with one array per train
    type because train types may differ in unit and section counts.
    ``delta``/``epsilon`` are optional: constructors emit line-independent
    protocols and the station/train classifications are attached later.
    """

    stations: StationTypeCatalog
    trains: tuple[TrainTypeSpec, ...]
    u: tuple[np.ndarray, ...]  # per k: (M_k, N_k)
    s: np.ndarray  # (K, C)
    a: tuple[np.ndarray, ...]  # per k: (N_k, C)
    v: tuple[np.ndarray, ...]  # per k: (N_k, C)
    p: tuple[np.ndarray, ...]  # per k: (N_k, C, C)
    delta: np.ndarray | None = None  # (S, C)
    epsilon: np.ndarray | None = None  # (T, K)
    eol_rule: EolRule | None = None

    @property
    def K(self) -> int:
        return len(self.trains)

    @property
    def C(self) -> int:
        return self.stations.C

    def train_index(self, label: str) -> int:
        for k, t in enumerate(self.trains):
            if t.label == label:
                return k
        raise KeyError(label)

    def section_sizes(self, k: int = 0) -> tuple[int, ...]:
        """Unit counts per section of train type k."""
        return tuple(int(n) for n in self.u[k].sum(axis=0))

    def section_units(self, k: int, n: int) -> tuple[int, ...]:
        """1-based unit indices of section n (1-based) of train type k."""
        return tuple(int(m) + 1 for m in np.flatnonzero(self.u[k][:, n - 1]))


def build_protocol(
    stations: StationTypeCatalog,
    trains: Sequence[TrainTypeSpec],
    *,
    u: Sequence[np.ndarray],
    s: np.ndarray,
    a: Sequence[np.ndarray],
    v: Sequence[np.ndarray],
    p: Sequence[np.ndarray],
    delta: np.ndarray | None = None,
    epsilon: np.ndarray | None = None,
    eol_rule: EolRule | None = None,
) -> ProtocolSpec:
    """Validate the tables and assemble an immutable ProtocolSpec.

    Raises DimensionMismatch, RowSumViolation, NonConsecutiveSection or
    NeverAlignedViolation when a structural invariant fails.
    """
    trains = tuple(trains)
    K, C = len(trains), stations.C
    if K == 0:
        raise DimensionMismatch("at least one train type is required")

    s = np.asarray(s)
    if s.shape != (K, C):
        raise DimensionMismatch(f"stop table must be {K}x{C}, got {s.shape}")

    u_t, a_t, v_t, p_t = [], [], [], []
    if not (len(u) == len(a) == len(v) == len(p) == K):
        raise DimensionMismatch("u, a, v, p need one table per train type")
    for k, train in enumerate(trains):
        uk, ak, vk, pk = (np.asarray(x) for x in (u[k], a[k], v[k], p[k]))
        if uk.shape != (train.M, train.N):
            raise DimensionMismatch(f"u[{k}] must be {train.M}x{train.N}, got {uk.shape}")
        if ak.shape != (train.N, C) or vk.shape != (train.N, C):
            raise DimensionMismatch(f"a[{k}]/v[{k}] must be {train.N}x{C}")
        if pk.shape != (train.N, C, C):
            raise DimensionMismatch(f"p[{k}] must be {train.N}x{C}x{C}")
        for name, arr in (("u", uk), ("a", ak), ("v", vk), ("p", pk)):
            if not _is_binary(arr):
                raise DimensionMismatch(f"{name}[{k}] must contain only 0/1 entries")
        if not (uk.sum(axis=1) == 1).all():
            raise NonConsecutiveSection(f"u[{k}]: every unit must belong to exactly one section")
        for n in range(train.N):
            members = np.flatnonzero(uk[:, n])
            if len(members) == 0:
                raise NonConsecutiveSection(f"u[{k}]: section {n + 1} is empty")
            if members[-1] - members[0] + 1 != len(members):
                raise NonConsecutiveSection(
                    f"u[{k}]: section {n + 1} units are not consecutive"
                )
        # Doorless units force their whole section out of alignment.
        for m in sorted(train.never_aligned):
            n = int(np.flatnonzero(uk[m - 1])[0])
            if ak[n].any():
                raise NeverAlignedViolation(
                    f"u[{k}]: section {n + 1} contains doorless unit {m} but is aligned"
                )
        u_t.append(_frozen(uk))
        a_t.append(_frozen(ak))
        v_t.append(_frozen(vk))
        p_t.append(_frozen(pk))

    if delta is not None:
        delta = np.asarray(delta)
        if delta.ndim != 2 or delta.shape[1] != C:
            raise DimensionMismatch(f"delta must be S x {C}")
        if not _is_binary(delta):
            raise DimensionMismatch("delta must contain only 0/1 entries")
        if not (delta.sum(axis=1) == 1).all():
            raise RowSumViolation("each station must be of exactly one type")
        delta = _frozen(delta)
    if epsilon is not None:
        epsilon = np.asarray(epsilon)
        if epsilon.ndim != 2 or epsilon.shape[1] != K:
            raise DimensionMismatch(f"epsilon must be T x {K}")
        if not _is_binary(epsilon):
            raise DimensionMismatch("epsilon must contain only 0/1 entries")
        if not (epsilon.sum(axis=1) == 1).all():
            raise RowSumViolation("each train must be of exactly one type")
        epsilon = _frozen(epsilon)

    if not _is_binary(s):
        raise DimensionMismatch("stop table must contain only 0/1 entries")

    return ProtocolSpec(
        stations=stations,
        trains=trains,
        u=tuple(u_t),
        s=_frozen(s),
        a=tuple(a_t),
        v=tuple(v_t),
        p=tuple(p_t),
        delta=delta,
        epsilon=epsilon,
        eol_rule=eol_rule,
    )


def derive_parts(spec: ProtocolSpec, train: int | str = 0) -> list[TrainPart]:
    """Partition a train type's sections into maximal runs of equal labels.

    A section's destination-label set is derived from its alignment row.
    Runs with an empty label set (sections never aligned) count as parts
    too, so the parts always cover every section.
    """
    k = spec.train_index(train) if isinstance(train, str) else train
    ak = spec.a[k]
    label_sets = [
        frozenset(spec.stations.types[i] for i in np.flatnonzero(ak[n]))
        for n in range(spec.trains[k].N)
    ]
    parts: list[TrainPart] = []
    start = 0
    for n in range(1, len(label_sets) + 1):
        if n == len(label_sets) or label_sets[n] != label_sets[start]:
            parts.append(
                TrainPart(index=len(parts) + 1, sections=(start + 1, n), labels=label_sets[start])
            )
            start = n
    return parts


# ---------------------------------------------------------------------------
# Built-in protocol constructors
# ---------------------------------------------------------------------------


def _full_presentation(a: np.ndarray) -> np.ndarray:
    """p_nij = a_ni * a_nj: present every destination a section visits."""
    return np.einsum("ni,nj->nij", a, a)


def fr_h(section_size: int = 3, platform_length: int | None = None) -> ProtocolSpec:
    """Static-homogeneous F/R protocol: four equal sections, two types.

    The front three sections align at F-stations, the rear three at
    R-stations; every aligned section opens and presents fully.
    """
    if section_size < 1:
        raise BadSectionCount("section size must be positive")
    d = 3 * section_size if platform_length is None else platform_length
    stations = StationTypeCatalog(types=("F", "R"), d={"F": d, "R": d})
    M = 4 * section_size
    train = TrainTypeSpec.uniform("xlt", M=M, N=4)
    u = np.zeros((M, 4), dtype=int)
    for n in range(4):
        u[n * section_size : (n + 1) * section_size, n] = 1
    a = np.array([[1, 0], [1, 1], [1, 1], [0, 1]])
    v = a.copy()
    p = _full_presentation(a)
    s = np.array([[1, 1]])
    rule = EolRule(name="fr", first_types=frozenset({"R"}), last_types=frozenset({"F"}))
    return build_protocol(stations, [train], u=[u], s=s, a=[a], v=[v], p=[p], eol_rule=rule)


def fr_i(
    section_sizes: Sequence[int] = (3, 3, 3, 3),
    platform_lengths: Mapping[str, int] | None = None,
) -> ProtocolSpec:
    """Dynamic-inhomogeneous F/R protocol with partial presentation.

    Section 1 carries F-to-F, section 2 F-to-R (presented only at
    F-stations), section 3 R-to-F (presented only at R-stations) and
    section 4 R-to-R, giving a 1:1 pair-to-section correspondence.
    """
    sizes = tuple(int(x) for x in section_sizes)
    if len(sizes) != 4 or any(x < 1 for x in sizes):
        raise BadSectionCount("fr_i needs exactly 4 positive section sizes")
    if platform_lengths is None:
        platform_lengths = {"F": sum(sizes[:3]), "R": sum(sizes[1:])}
    stations = StationTypeCatalog(types=("F", "R"), d=dict(platform_lengths))
    M = sum(sizes)
    train = TrainTypeSpec.uniform("xlt", M=M, N=4)
    u = np.zeros((M, 4), dtype=int)
    pos = 0
    for n, size in enumerate(sizes):
        u[pos : pos + size, n] = 1
        pos += size
    a = np.array([[1, 0], [1, 1], [1, 1], [0, 1]])
    v = a.copy()
    p = np.zeros((4, 2, 2), dtype=int)
    F, R = 0, 1
    p[0, F, F] = 1  # front section: F-to-F passengers
    p[1, F, R] = 1  # second section presents only R, only at F-stations
    p[2, R, F] = 1  # third section presents only F, only at R-stations
    p[3, R, R] = 1  # rear section: R-to-R passengers
    s = np.array([[1, 1]])
    rule = EolRule(name="fr", first_types=frozenset({"R"}), last_types=frozenset({"F"}))
    return build_protocol(stations, [train], u=[u], s=s, a=[a], v=[v], p=[p], eol_rule=rule)


def ftr(section_size: int = 2, platform_length: int | None = None) -> ProtocolSpec:
    """Static F/T/R protocol: platforms span two of the four sections."""
    if section_size < 1:
        raise BadSectionCount("section size must be positive")
    d = 2 * section_size if platform_length is None else platform_length
    stations = StationTypeCatalog(types=("F", "T", "R"), d={"F": d, "T": d, "R": d})
    M = 4 * section_size
    train = TrainTypeSpec.uniform("xlt", M=M, N=4)
    u = np.zeros((M, 4), dtype=int)
    for n in range(4):
        u[n * section_size : (n + 1) * section_size, n] = 1
    a = np.array(
        [
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 1],
            [0, 0, 1],
        ]
    )
    v = a.copy()
    p = _full_presentation(a)
    s = np.array([[1, 1, 1]])
    rule = EolRule(name="fr", first_types=frozenset({"R"}), last_types=frozenset({"F"}))
    return build_protocol(stations, [train], u=[u], s=s, a=[a], v=[v], p=[p], eol_rule=rule)


# ---------------------------------------------------------------------------
# Line instances
# ---------------------------------------------------------------------------


def _as_fraction(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


@dataclass(frozen=True)
class LineInstance:
    """An ordered line: stations, platform lengths, headway and demand.

    ``A[s][s']`` is the steady-state demand rate in passengers/hour, zero
    on and below the diagonal.  ``M_min`` holds the equity floor on the
    metered entry rate of each station.
    """

    stations: tuple[str, ...]
    platform_lengths: tuple[int, ...]
    H: Fraction
    A: tuple[tuple[Fraction, ...], ...]
    M_min: tuple[Fraction, ...] = ()
    station_types: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        S = len(self.stations)
        object.__setattr__(self, "H", _as_fraction(self.H))
        A = tuple(tuple(_as_fraction(x) for x in row) for row in self.A)
        object.__setattr__(self, "A", A)
        if not self.M_min:
            object.__setattr__(self, "M_min", (Fraction(0),) * S)
        else:
            object.__setattr__(self, "M_min", tuple(_as_fraction(x) for x in self.M_min))
        if len(self.platform_lengths) != S or len(A) != S or any(len(r) != S for r in A):
            raise DimensionMismatch("line tables must all be S-sized")
        if self.station_types is not None and len(self.station_types) != S:
            raise DimensionMismatch("station_types must have one label per station")
        if self.H <= 0:
            raise DimensionMismatch("headway must be positive")
        for z in range(S):
            for sp in range(S):
                if A[z][sp] < 0:
                    raise DimensionMismatch("demand must be nonnegative")
                if sp <= z and A[z][sp] != 0:
                    raise DimensionMismatch("demand must vanish for s' <= s")
        for z, m in enumerate(self.M_min):
            if m > self.demand_rate(z):
                raise DimensionMismatch(
                    f"minimum entry rate at station {z + 1} exceeds its demand"
                )

    @property
    def S(self) -> int:
        return len(self.stations)

    def demand_rate(self, z: int) -> Fraction:
        """Total demand rate A_s originating at 0-based station z."""
        return sum(self.A[z], Fraction(0))

    def classification(self, catalog: StationTypeCatalog) -> np.ndarray:
        """Build the delta matrix from per-station type labels."""
        if self.station_types is None:
            raise DimensionMismatch("line carries no station classification")
        delta = np.zeros((self.S, catalog.C), dtype=int)
        for si, label in enumerate(self.station_types):
            delta[si, catalog.index(label)] = 1
        return delta


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def spec_to_json(spec: ProtocolSpec) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "spec",
        "stations": {"types": list(spec.stations.types), "d": dict(spec.stations.d)},
        "trains": [
            {
                "label": t.label,
                "M": t.M,
                "lengths": list(t.lengths),
                "capacities": list(t.capacities),
                "N": t.N,
                "never_aligned": sorted(t.never_aligned),
            }
            for t in spec.trains
        ],
        "tables": {
            "u": [uk.tolist() for uk in spec.u],
            "s": spec.s.tolist(),
            "a": [ak.tolist() for ak in spec.a],
            "v": [vk.tolist() for vk in spec.v],
            "p": [pk.tolist() for pk in spec.p],
        },
    }
    if spec.delta is not None:
        doc["tables"]["delta"] = spec.delta.tolist()
    if spec.epsilon is not None:
        doc["tables"]["epsilon"] = spec.epsilon.tolist()
    if spec.eol_rule is not None:
        doc["eol_rule"] = {
            "name": spec.eol_rule.name,
            "first_types": sorted(spec.eol_rule.first_types),
            "last_types": sorted(spec.eol_rule.last_types),
        }
    return doc


def _check_schema(doc: dict, kind: str) -> None:
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        raise SchemaError(f"expected a {kind!r} document")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {doc.get('schema_version')!r}")


def spec_from_json(doc: dict) -> ProtocolSpec:
    _check_schema(doc, "spec")
    try:
        stations = StationTypeCatalog(
            types=tuple(doc["stations"]["types"]),
            d={i: int(x) for i, x in doc["stations"]["d"].items()},
        )
        trains = tuple(
            TrainTypeSpec(
                label=t["label"],
                M=int(t["M"]),
                lengths=tuple(t["lengths"]),
                capacities=tuple(t["capacities"]),
                N=int(t["N"]),
                never_aligned=frozenset(t.get("never_aligned", ())),
            )
            for t in doc["trains"]
        )
        tables = doc["tables"]
        rule = None
        if "eol_rule" in doc:
            rule = EolRule(
                name=doc["eol_rule"]["name"],
                first_types=frozenset(doc["eol_rule"]["first_types"]),
                last_types=frozenset(doc["eol_rule"]["last_types"]),
            )
        return build_protocol(
            stations,
            trains,
            u=[np.asarray(x) for x in tables["u"]],
            s=np.asarray(tables["s"]),
            a=[np.asarray(x) for x in tables["a"]],
            v=[np.asarray(x) for x in tables["v"]],
            p=[np.asarray(x) for x in tables["p"]],
            delta=np.asarray(tables["delta"]) if "delta" in tables else None,
            epsilon=np.asarray(tables["epsilon"]) if "epsilon" in tables else None,
            eol_rule=rule,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed spec document: {exc}") from exc


def _num_to_json(x: Fraction):
    return int(x) if x.denominator == 1 else str(x)


def line_to_json(line: LineInstance) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "line",
        "stations": list(line.stations),
        "platform_lengths": list(line.platform_lengths),
        "H": _num_to_json(line.H),
        "A": [[_num_to_json(x) for x in row] for row in line.A],
        "M_min": [_num_to_json(x) for x in line.M_min],
    }
    if line.station_types is not None:
        doc["station_types"] = list(line.station_types)
    return doc


def line_from_json(doc: dict) -> LineInstance:
    _check_schema(doc, "line")
    try:
        return LineInstance(
            stations=tuple(doc["stations"]),
            platform_lengths=tuple(int(x) for x in doc["platform_lengths"]),
            H=_as_fraction(doc["H"]),
            A=tuple(tuple(_as_fraction(x) for x in row) for row in doc["A"]),
            M_min=tuple(_as_fraction(x) for x in doc.get("M_min", ())),
            station_types=tuple(doc["station_types"]) if "station_types" in doc else None,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed line document: {exc}") from exc
