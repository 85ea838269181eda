"""Constraint checking for protocol specs.

Six behavioural constraints are verified exhaustively (violations are
data, not errors, so the optimizer can count them):

  E1  sections are composed of consecutive units
  E2  sections are aligned only if the train stops
  E3  aligned sections are consecutive
  E4  aligned sections fit along the platform
  E5  section doors opened only if the section is aligned
  E6  destination presented only if the section opens its doors at both
      the current and the destination station type

Presentation-standard checks (PS_MIN / PS_EXACT) and end-of-line checks
(EOL) are separate entry points because they need extra inputs (the
served pair set, the line classification).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core_model import LineInstance, ProtocolSpec

ExtraConstraint = Callable[[ProtocolSpec], Iterable["Violation"]]


@dataclass(frozen=True)
class Violation:
    """One violated (constraint, index) pair.

    ``indices`` uses 1-based unit/section positions and station-type
    labels, in the natural order of the constraint's subscripts.
    """

    constraint: str
    indices: tuple
    detail: str = ""


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...]

    @property
    def feasible(self) -> bool:
        return not self.violations

    def by_constraint(self, constraint: str) -> list[Violation]:
        return [v for v in self.violations if v.constraint == constraint]

    def __len__(self) -> int:
        return len(self.violations)


def check(spec: ProtocolSpec, extra_constraints: Sequence[ExtraConstraint] = ()) -> FeasibilityReport:
    """Evaluate E1-E6 over all index tuples and report every violation."""
    out: list[Violation] = []
    types = spec.stations.types
    d = np.array(spec.stations.lengths())
    for k, train in enumerate(spec.trains):
        uk = spec.u[k].astype(bool)
        ak = spec.a[k]
        vk = spec.v[k]
        pk = spec.p[k]
        sk = spec.s[k]
        lengths = np.asarray(train.lengths)

        # E1: within each section column, flagged units form one run.
        for n in range(train.N):
            members = np.flatnonzero(uk[:, n])
            for ib, b in enumerate(members):
                for bp in members[ib + 1 :]:
                    if not uk[b : bp + 1, n].all():
                        out.append(
                            Violation(
                                "E1",
                                (k, n + 1, int(b) + 1, int(bp) + 1),
                                f"units {b + 1} and {bp + 1} of section {n + 1} "
                                "are separated by units of another section",
                            )
                        )

        # E2: a_kni = 1 requires s_ki = 1.
        for n, i in zip(*np.nonzero(ak.astype(bool) & ~sk[np.newaxis, :].astype(bool))):
            out.append(
                Violation(
                    "E2",
                    (k, int(n) + 1, types[i]),
                    f"section {n + 1} aligned at skipped type {types[i]}",
                )
            )

        # E3: per station type, aligned section indices form one run.
        for i in range(spec.C):
            aligned = np.flatnonzero(ak[:, i])
            for ia, na in enumerate(aligned):
                for nb in aligned[ia + 1 :]:
                    if not ak[na : nb + 1, i].all():
                        out.append(
                            Violation(
                                "E3",
                                (k, types[i], int(na) + 1, int(nb) + 1),
                                f"aligned sections {na + 1} and {nb + 1} at "
                                f"type {types[i]} are not consecutive",
                            )
                        )

        # E4: total aligned length fits the shortest platform of the type.
        section_len = lengths @ uk  # length of each section
        aligned_len = ak.T.astype(float) @ section_len  # per station type
        for i in np.flatnonzero(aligned_len > d + 1e-12):
            out.append(
                Violation(
                    "E4",
                    (k, types[i]),
                    f"aligned length {aligned_len[i]:g} exceeds platform "
                    f"{d[i]} at type {types[i]}",
                )
            )

        # E5: v_kni = 1 requires a_kni = 1.
        for n, i in zip(*np.nonzero(vk.astype(bool) & ~ak.astype(bool))):
            out.append(
                Violation(
                    "E5",
                    (k, int(n) + 1, types[i]),
                    f"section {n + 1} opens doors at type {types[i]} without alignment",
                )
            )

        # E6: p_knij = 1 requires doors open at both i and j.
        ok = np.einsum("ni,nj->nij", vk, vk)
        for n, i, j in zip(*np.nonzero(pk.astype(bool) & ~ok.astype(bool))):
            out.append(
                Violation(
                    "E6",
                    (k, int(n) + 1, types[i], types[j]),
                    f"section {n + 1} presents {types[j]} at {types[i]} "
                    "without opening doors at both",
                )
            )

    for constraint in extra_constraints:
        out.extend(constraint(spec))
    return FeasibilityReport(tuple(out))


def check_presentation_standard(
    spec: ProtocolSpec,
    mode: str,
    required_pairs: Sequence[tuple[str, str]],
) -> FeasibilityReport:
    """Verify the presentation standard over the demanded (i, j) pairs.

    mode "at_least_one": each pair served by >= 1 section (PS_MIN);
    mode "exactly_one": each pair served by exactly one section (PS_EXACT).
    """
    if mode not in ("at_least_one", "exactly_one"):
        raise ValueError(f"unknown presentation mode {mode!r}")
    out: list[Violation] = []
    for k in range(spec.K):
        pk = spec.p[k]
        for i, j in required_pairs:
            ii, jj = spec.stations.index(i), spec.stations.index(j)
            count = int(pk[:, ii, jj].sum())
            if mode == "at_least_one" and count < 1:
                out.append(
                    Violation("PS_MIN", (k, i, j), f"pair {i}->{j} presented by no section")
                )
            elif mode == "exactly_one" and count != 1:
                out.append(
                    Violation(
                        "PS_EXACT", (k, i, j), f"pair {i}->{j} presented by {count} sections"
                    )
                )
    return FeasibilityReport(tuple(out))


def check_eol(spec: ProtocolSpec, line: LineInstance) -> FeasibilityReport:
    """Apply the spec's end-of-line rule to the line's first/last stations."""
    if spec.eol_rule is None:
        return FeasibilityReport(())
    if line.station_types is None:
        raise ValueError("line carries no station classification")
    out: list[Violation] = []
    first, last = line.station_types[0], line.station_types[-1]
    if first not in spec.eol_rule.first_types:
        out.append(
            Violation(
                "EOL",
                (1, first),
                f"first station type {first} not in {sorted(spec.eol_rule.first_types)}",
            )
        )
    if last not in spec.eol_rule.last_types:
        out.append(
            Violation(
                "EOL",
                (line.S, last),
                f"last station type {last} not in {sorted(spec.eol_rule.last_types)}",
            )
        )
    return FeasibilityReport(tuple(out))
