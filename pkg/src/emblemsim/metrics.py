"""Run metrics and their independent recomputation from decision logs.

Log lines are ``<sim_time> <engagement_id> <phase> <event_code> <detail>``.
``fold_log_lines`` derives every report field from the lines alone, so a
report can always be audited against the raw logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class MetricsReport:
    engagements_total: int = 0
    false_engagements: int = 0
    missed_legitimate: int = 0
    escalations: int = 0
    misuse_events: int = 0
    per_seed: dict[int, dict[str, int]] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        return {
            "engagements_total": self.engagements_total,
            "false_engagements": self.false_engagements,
            "missed_legitimate": self.missed_legitimate,
            "escalations": self.escalations,
            "misuse_events": self.misuse_events,
        }

    def to_dict(self) -> dict:
        return {
            **self.counts(),
            "per_seed": {str(seed): dict(v) for seed, v in sorted(self.per_seed.items())},
        }

    @classmethod
    def merge(cls, runs: dict[int, "MetricsReport"]) -> "MetricsReport":
        total = cls()
        for seed, report in sorted(runs.items()):
            total.engagements_total += report.engagements_total
            total.false_engagements += report.false_engagements
            total.missed_legitimate += report.missed_legitimate
            total.escalations += report.escalations
            total.misuse_events += report.misuse_events
            total.per_seed[seed] = report.counts()
        return total


def parse_log_line(line: str) -> tuple[float, str, str, str, str]:
    """Split a log line into (sim_time, engagement_id, phase, code, detail)."""
    parts = line.split(" ", 4)
    if len(parts) < 4:
        raise ValueError(f"malformed log line: {line!r}")
    sim_time, engagement_id, phase, code = parts[:4]
    detail = parts[4] if len(parts) == 5 else ""
    return float(sim_time), engagement_id, phase, code, detail


def fold_log_lines(lines: list[str], seed: int | None = None) -> MetricsReport:
    """Recompute a MetricsReport purely from decision-log lines."""
    created: set[str] = set()
    oracle_protected: dict[str, bool] = {}
    final_phase: dict[str, str] = {}
    operator_abort: set[str] = set()
    escalations = 0
    misuse = 0
    for line in lines:
        _, eid, _, code, detail = parse_log_line(line)
        fields = dict(p.split("=", 1) for p in detail.split() if "=" in p)
        if code == "CREATED":
            created.add(eid)
        elif code == "ORACLE":
            oracle_protected[eid] = fields.get("protected") == "true"
        elif code == "PHASE":
            final_phase[eid] = fields["to"]
            if fields["to"] == "AwaitingOperator":
                escalations += 1
        elif code == "MISUSE":
            misuse += 1
        elif code == "OPERATOR" and fields.get("decision") == "abort":
            operator_abort.add(eid)
    report = MetricsReport(engagements_total=len(created), escalations=escalations,
                           misuse_events=misuse)
    for eid in created:
        phase = final_phase.get(eid, "Find")
        protected = oracle_protected.get(eid, False)
        engaged = phase in ("Engage", "Assess")
        if engaged and protected:
            report.false_engagements += 1
        if phase in ("Aborted", "Disintegrated") and not protected and eid not in operator_abort:
            report.missed_legitimate += 1
    if seed is not None:
        report.per_seed[seed] = report.counts()
    return report


def render_table(report: MetricsReport) -> str:
    rows = list(report.counts().items())
    width = max(len(k) for k, _ in rows)
    lines = ["metric".ljust(width) + "  value", "-" * (width + 7)]
    for key, value in rows:
        lines.append(key.ljust(width) + f"  {value}")
    for seed, counts in sorted(report.per_seed.items()):
        lines.append(f"seed {seed}: " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return "\n".join(lines) + "\n"


def render_structured(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
