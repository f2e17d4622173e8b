"""Long-format CSV input and output of balanced trial data.

One row per observation with header ``cluster3,arm,cluster2,subgroup,unit,y``.
Outcomes are written with ``repr`` so reading them back is bit-exact.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .design import LEVEL_ONE, Design, SubgroupLevel
from .errors import ParseError, UnbalancedData
from .simulate import TrialData

HEADER = ("cluster3", "arm", "cluster2", "subgroup", "unit", "y")


def iter_records(data: TrialData) -> Iterable[tuple[int, int, int, int, int, float]]:
    """Rows in storage order.

    ``cluster2`` ids are 1-based within each level-three unit; for level-two
    subgrouping they run over both subgroups (``g * n + j + 1``).
    """
    design = data.design
    y = data.cells
    n2x, d1, d2, d3 = design.shape
    level_one = design.subgroup_level is LEVEL_ONE
    for i in range(n2x):
        arm = design.arm(i)
        for a in range(d1):
            for b in range(d2):
                if level_one:
                    cluster2, subgroup = a + 1, b + 1
                else:
                    cluster2, subgroup = a * d2 + b + 1, a + 1
                for k in range(d3):
                    yield (i + 1, arm, cluster2, subgroup, k + 1, float(y[i, a, b, k]))


def write_csv(data: TrialData, target: str | Path | TextIO) -> int:
    """Write ``data``; returns the number of data rows."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            return write_csv(data, fh)
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(HEADER)
    count = 0
    for rec in iter_records(data):
        writer.writerow((*rec[:5], repr(rec[5])))
        count += 1
    return count


def _int(text: str, name: str, line: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"{name} is not an integer: {text!r}", line) from None


def _parse_rows(fh: TextIO) -> list[tuple[int, int, int, int, int, float, int]]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise ParseError(f"header must be {','.join(HEADER)}", 1)
    rows = []
    for line, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} fields, got {len(rec)}", line)
        c3, arm, c2, sub, unit = (_int(v, n, line) for v, n in zip(rec[:5], HEADER[:5]))
        if arm not in (0, 1):
            raise ParseError(f"arm must be 0 or 1, got {arm}", line)
        if sub not in (1, 2):
            raise ParseError(f"subgroup must be 1 or 2, got {sub}", line)
        try:
            y = float(rec[5])
        except ValueError:
            raise ParseError(f"y is not a number: {rec[5]!r}", line) from None
        if not math.isfinite(y):
            raise ParseError(f"y must be finite, got {rec[5]!r}", line)
        rows.append((c3, arm, c2, sub, unit, y, line))
    if not rows:
        raise ParseError("no data rows", 2)
    return rows


def _expect_uniform(counts: dict, what: str, describe) -> int:
    """Common count of ``counts``; names the first key that deviates."""
    if not counts:
        raise UnbalancedData(f"no {what} found")
    typical = Counter(counts.values()).most_common(1)[0][0]
    for key in sorted(counts):
        if counts[key] != typical:
            cell = describe(key)
            raise UnbalancedData(
                f"{what}: expected {typical}, found {counts[key]} in {cell}", cell
            )
    return typical


def read_csv(source: str | Path | TextIO, level: SubgroupLevel | int | str) -> TrialData:
    """Parse and validate a CSV, then lay it out for ``level`` subgrouping.

    Treated level-three units come first; within each level ids are sorted.
    """
    level = SubgroupLevel.parse(level)
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            rows = _parse_rows(fh)
    else:
        rows = _parse_rows(source)

    arm_of: dict[int, int] = {}
    seen: dict[tuple, int] = {}
    for c3, arm, c2, sub, unit, _, line in rows:
        if arm_of.setdefault(c3, arm) != arm:
            raise UnbalancedData(f"line {line}: arm changes within cluster3 {c3}", {"cluster3": c3})
        key = (c3, c2, sub, unit)
        if key in seen:
            raise UnbalancedData(
                f"line {line}: duplicate observation (first seen on line {seen[key]})",
                dict(zip(("cluster3", "cluster2", "subgroup", "unit"), key)),
            )
        seen[key] = line

    arms = Counter(arm_of.values())
    if arms[1] != arms[0]:
        raise UnbalancedData(
            f"arms differ in size: {arms[1]} treated vs {arms[0]} control cluster3 units",
            {"treated": arms[1], "control": arms[0]},
        )
    n3 = arms[1]
    if n3 == 0:
        raise UnbalancedData("both arms need at least one cluster3 unit")

    cells: dict[tuple, dict[int, float]] = defaultdict(dict)
    for c3, _, c2, sub, unit, y, _ in rows:
        cells[(c3, c2, sub)][unit] = y
    cell_desc = lambda k: {"cluster3": k[0], "cluster2": k[1], "subgroup": k[2]}
    low_count = _expect_uniform({k: len(v) for k, v in cells.items()}, "observations per cell", cell_desc)

    clusters = sorted(arm_of, key=lambda c: (-arm_of[c], c))
    if level is LEVEL_ONE:
        subs_of: dict[tuple, set] = defaultdict(set)
        for c3, c2, sub in cells:
            subs_of[(c3, c2)].add(sub)
        for key in sorted(subs_of):
            if len(subs_of[key]) != 2:
                missing = ({1, 2} - subs_of[key]).pop()
                cell = {"cluster3": key[0], "cluster2": key[1], "subgroup": missing}
                raise UnbalancedData(f"no observations in {cell}", cell)
        per3 = defaultdict(set)
        for c3, c2 in subs_of:
            per3[c3].add(c2)
        n2 = _expect_uniform({c: len(v) for c, v in per3.items()}, "cluster2 units per cluster3", lambda c: {"cluster3": c})
        design = Design(n3, n2, 2 * low_count, LEVEL_ONE)
        y = np.empty(design.shape)
        for i, c3 in enumerate(clusters):
            for j, c2 in enumerate(sorted(per3[c3])):
                for g in (1, 2):
                    units = cells[(c3, c2, g)]
                    y[i, j, g - 1, :] = [units[u] for u in sorted(units)]
    else:
        sub_of: dict[tuple, int] = {}
        for c3, c2, sub in sorted(cells):
            if sub_of.setdefault((c3, c2), sub) != sub:
                cell = {"cluster3": c3, "cluster2": c2}
                raise UnbalancedData(f"cluster2 {c2} of cluster3 {c3} spans both subgroups", cell)
        per_sub = defaultdict(list)
        for (c3, c2), sub in sub_of.items():
            per_sub[(c3, sub)].append(c2)
        for c3 in arm_of:
            for g in (1, 2):
                per_sub.setdefault((c3, g), [])
        n = _expect_uniform(
            {k: len(v) for k, v in per_sub.items()},
            "cluster2 units per subgroup",
            lambda k: {"cluster3": k[0], "subgroup": k[1]},
        )
        design = Design(n3, 2 * n, low_count, level)
        y = np.empty(design.shape)
        for i, c3 in enumerate(clusters):
            for g in (1, 2):
                for j, c2 in enumerate(sorted(per_sub[(c3, g)])):
                    units = cells[(c3, c2, g)]
                    y[i, g - 1, j, :] = [units[u] for u in sorted(units)]
    return TrialData(design, y)
