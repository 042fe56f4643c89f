"""Tabular experiment output (CSV rows + JSON metadata)."""

import csv
import hashlib
import json
from dataclasses import dataclass, field

COLUMNS = ["sequence", "n", "gfksd", "q_strategy", "sigma", "beta"]


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, sequence, n, gfksd, q_strategy, sigma, beta, **extra):
        if not gfksd >= 0:
            raise ValueError(f"discrepancy must be nonnegative, got {gfksd}")
        row = {"sequence": sequence, "n": int(n), "gfksd": float(gfksd),
               "q_strategy": q_strategy, "sigma": float(sigma), "beta": float(beta)}
        row.update(extra)
        self.rows.append(row)

    @property
    def columns(self):
        extra = []
        for r in self.rows:
            extra.extend(k for k in r if k not in COLUMNS and k not in extra)
        return COLUMNS + extra

    def series(self, sequence, q_strategy=None):
        """``(n, gfksd)`` lists for one sequence, in insertion order."""
        rows = [r for r in self.rows if r["sequence"] == sequence
                and (q_strategy is None or r["q_strategy"] == q_strategy)]
        return [r["n"] for r in rows], [r["gfksd"] for r in rows]

    def sequences(self):
        seen = []
        for r in self.rows:
            if r["sequence"] not in seen:
                seen.append(r["sequence"])
        return seen

    def to_csv(self, path):
        cols = self.columns
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for r in self.rows:
                writer.writerow([_fmt(r.get(c, "")) for c in cols])

    def to_json(self, path=None):
        text = json.dumps(self.metadata, sort_keys=True, indent=2, default=str)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text
